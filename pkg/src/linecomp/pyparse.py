"""Recursive-descent parser from logical lines to ASDL trees.

Works one logical line at a time. A block header such as ``if x :`` parses to
its full constructor with an empty ``body``. Expressions use the usual Python
precedence ladder, from loosest to tightest::

    tuple  ,            (only where a bare tuple is allowed)
    test   x if c else y
    or / and / not
    comparison          == != < <= > >= in, not in, is, is not  (left-nested)
    |  ^  &  << >>  + -  * / // % @
    unary  - + ~
    power  **           (right-associative)
    atom + trailers     call, subscript, attribute

Explicit parentheses are kept as ``Paren`` nodes so rendering reproduces the
source tokens exactly. Constructs that could not round-trip (trailing commas
after several items, empty ``class A():`` parentheses, inline block bodies,
``a[1:2:]``) are rejected rather than normalised.
"""

from __future__ import annotations

from typing import Sequence

from .asdl import (
    BINOP_TEXT,
    REDUCE,
    AsdlGrammar,
    AstNode,
    ast_to_actions,
    default_grammar,
)
from .errors import FileParseError, ParseError
from .pycorpus import EOL, LineCategory, LogicalLine, Token, classify_line, is_identifier_text, is_number_text

AUG_OPS = {text + "=": name for name, text in BINOP_TEXT.items()}
_BIN_LEVELS = [
    {"|": "BitOr"},
    {"^": "BitXor"},
    {"&": "BitAnd"},
    {"<<": "LShift", ">>": "RShift"},
    {"+": "Add", "-": "Sub"},
    {"*": "Mult", "/": "Div", "//": "FloorDiv", "%": "Mod", "@": "MatMult"},
]
_UNARY = {"-": "USub", "+": "UAdd", "~": "Invert"}
_SIMPLE_CMP = {"==": "Eq", "!=": "NotEq", "<": "Lt", "<=": "LtE", ">": "Gt", ">=": "GtE", "in": "In"}
_EXPR_START = {"(", "[", "{", "-", "+", "~", "not"}


def _starts_expr(t) -> bool:
    return t is not None and (
        t in _EXPR_START or t == "<str>" or is_identifier_text(t) or is_number_text(t)
    )


class _Parser:
    def __init__(self, texts: Sequence[str], grammar: AsdlGrammar):
        self.toks = list(texts)
        self.i = 0
        self.grammar = grammar

    # -- helpers
    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def accept(self, t) -> bool:
        if self.peek() == t:
            self.i += 1
            return True
        return False

    def expect(self, t):
        if not self.accept(t):
            self.fail({t})

    def fail(self, expected, message=""):
        raise ParseError(self.i, expected, message)

    def node(self, constructor, **values) -> AstNode:
        con = self.grammar.constructors.get(constructor)
        if con is None:
            self.fail({constructor}, "constructor missing from grammar")
        return AstNode(constructor, [(f.name, values[f.name]) for f in con.fields])

    def name(self) -> str:
        t = self.peek()
        if t is None or not is_identifier_text(t):
            self.fail({"<identifier>"})
        self.i += 1
        return t

    def end(self):
        if self.peek() is not None:
            self.fail({"<end of line>"})

    # -- statements
    def statement(self) -> AstNode:
        t = self.peek()
        handler = getattr(self, f"stmt_{t}", None) if t and t.isalpha() else None
        stmt = handler() if handler else self.expr_statement()
        self.end()
        return stmt

    def header_end(self):
        self.expect(":")
        if self.peek() is not None:
            self.fail({"<end of line>"}, "inline block bodies are not supported")

    def stmt_def(self):
        self.i += 1
        name = self.name()
        self.expect("(")
        params = []
        while self.peek() != ")":
            if params:
                self.expect(",")
                if self.peek() == ")":
                    self.fail({"<identifier>"}, "trailing comma")
            pname = self.name()
            default = self.test() if self.accept("=") else None
            params.append(self.node("param", name=pname, default=default))
        self.expect(")")
        self.header_end()
        return self.node("FunctionDef", name=name, params=params, body=[])

    def stmt_class(self):
        self.i += 1
        name = self.name()
        bases = []
        if self.accept("("):
            bases = self.comma_list(self.test, ")")
            if not bases:
                self.fail({"<expression>"}, "empty base list")
        self.header_end()
        return self.node("ClassDef", name=name, bases=bases, body=[])

    def _test_header(self, constructor):
        self.i += 1
        test = self.test()
        self.header_end()
        return self.node(constructor, test=test, body=[])

    def stmt_if(self):
        return self._test_header("If")

    def stmt_elif(self):
        return self._test_header("Elif")

    def stmt_while(self):
        return self._test_header("While")

    def _bare_header(self, constructor):
        self.i += 1
        self.header_end()
        return self.node(constructor, body=[])

    def stmt_else(self):
        return self._bare_header("Else")

    def stmt_try(self):
        return self._bare_header("Try")

    def stmt_finally(self):
        return self._bare_header("Finally")

    def stmt_for(self):
        self.i += 1
        target = self.target_list()
        self.expect("in")
        it = self.testlist()
        self.header_end()
        return self.node("For", target=target, iter=it, body=[])

    def stmt_with(self):
        self.i += 1
        ctx = self.test()
        var = self.target_list() if self.accept("as") else None
        self.header_end()
        return self.node("With", context_expr=ctx, optional_vars=var, body=[])

    def stmt_except(self):
        self.i += 1
        if self.peek() == ":":
            self.header_end()
            return self.node("ExceptAll", body=[])
        typ = self.test()
        name = self.name() if self.accept("as") else None
        self.header_end()
        return self.node("ExceptHandler", type=typ, name=name, body=[])

    def stmt_return(self):
        self.i += 1
        value = None if self.peek() is None else self.testlist()
        return self.node("Return", value=value)

    def stmt_del(self):
        self.i += 1
        targets = [self.test()]
        while self.accept(","):
            targets.append(self.test())
        return self.node("Delete", targets=targets)

    def stmt_raise(self):
        self.i += 1
        exc = None if self.peek() is None else self.test()
        return self.node("Raise", exc=exc)

    def stmt_assert(self):
        self.i += 1
        test = self.test()
        msg = self.test() if self.accept(",") else None
        return self.node("Assert", test=test, msg=msg)

    def dotted(self):
        parts = [self.name()]
        while self.accept("."):
            parts.append(self.name())
        return parts

    def alias(self):
        name = self.dotted()
        asname = self.name() if self.accept("as") else None
        return self.node("alias", name=name, asname=asname)

    def aliases(self):
        out = [self.alias()]
        while self.accept(","):
            out.append(self.alias())
        return out

    def stmt_import(self):
        self.i += 1
        return self.node("Import", names=self.aliases())

    def stmt_from(self):
        self.i += 1
        module = self.dotted()
        self.expect("import")
        return self.node("ImportFrom", module=module, names=self.aliases())

    def stmt_global(self):
        self.i += 1
        names = [self.name()]
        while self.accept(","):
            names.append(self.name())
        return self.node("Global", names=names)

    def stmt_pass(self):
        self.i += 1
        return self.node("Pass")

    def stmt_break(self):
        self.i += 1
        return self.node("Break")

    def stmt_continue(self):
        self.i += 1
        return self.node("Continue")

    def expr_statement(self):
        first = self.testlist()
        op = self.peek()
        if op in AUG_OPS:
            self.i += 1
            value = self.testlist()
            return self.node("AugAssign", target=first, op=self.node(AUG_OPS[op]), value=value)
        if op == "=":
            exprs = [first]
            while self.accept("="):
                exprs.append(self.testlist())
            return self.node("Assign", targets=exprs[:-1], value=exprs[-1])
        return self.node("Expr", value=first)

    # -- expression lists
    def comma_list(self, elem, close):
        """Items up to ``close`` (consumed); a trailing comma is rejected."""
        items = []
        while self.peek() != close:
            if items:
                self.expect(",")
                if self.peek() == close:
                    self.fail({"<expression>"}, "trailing comma")
            items.append(elem())
        self.expect(close)
        return items

    def testlist(self, elem=None):
        elem = elem or self.test
        first = elem()
        if self.peek() != ",":
            return first
        elts = [first]
        while self.accept(","):
            if not _starts_expr(self.peek()):
                if len(elts) > 1:
                    self.fail({"<expression>"}, "trailing comma")
                break
            elts.append(elem())
        return self.node("Tuple", elts=elts)

    def target_list(self):
        return self.testlist(self.bitor)

    # -- expressions, loosest first
    def test(self):
        body = self.or_test()
        if self.accept("if"):
            cond = self.or_test()
            self.expect("else")
            return self.node("IfExp", body=body, test=cond, orelse=self.test())
        return body

    def or_test(self):
        left = self.and_test()
        while self.accept("or"):
            left = self.node("BoolOp", left=left, op=self.node("Or"), right=self.and_test())
        return left

    def and_test(self):
        left = self.not_test()
        while self.accept("and"):
            left = self.node("BoolOp", left=left, op=self.node("And"), right=self.not_test())
        return left

    def not_test(self):
        if self.accept("not"):
            return self.node("UnaryOp", op=self.node("Not"), operand=self.not_test())
        return self.comparison()

    def cmp_op(self):
        t = self.peek()
        if t in _SIMPLE_CMP:
            self.i += 1
            return _SIMPLE_CMP[t]
        if t == "not" and self.peek(1) == "in":
            self.i += 2
            return "NotIn"
        if t == "is":
            self.i += 1
            return "IsNot" if self.accept("not") else "Is"
        return None

    def comparison(self):
        left = self.bitor()
        while True:
            op = self.cmp_op()
            if op is None:
                return left
            left = self.node("Compare", left=left, op=self.node(op), right=self.bitor())

    def bitor(self, level=0):
        if level == len(_BIN_LEVELS):
            return self.factor()
        ops = _BIN_LEVELS[level]
        left = self.bitor(level + 1)
        while self.peek() in ops:
            op = ops[self.peek()]
            self.i += 1
            left = self.node("BinOp", left=left, op=self.node(op), right=self.bitor(level + 1))
        return left

    def factor(self):
        t = self.peek()
        if t in _UNARY:
            self.i += 1
            return self.node("UnaryOp", op=self.node(_UNARY[t]), operand=self.factor())
        return self.power()

    def power(self):
        base = self.atom_expr()
        if self.accept("**"):
            return self.node("BinOp", left=base, op=self.node("Pow"), right=self.factor())
        return base

    def atom_expr(self):
        e = self.atom()
        while True:
            if self.accept("("):
                e = self.call(e)
            elif self.accept("["):
                e = self.node("Subscript", value=e, slice=self.subscript())
            elif self.accept("."):
                e = self.node("Attribute", value=e, attr=self.name())
            else:
                return e

    def call(self, func):
        args, keywords = [], []
        starargs = kwargs = None
        stage = 0  # 0 positional, 1 keyword, 2 after *, 3 after **
        first = True
        while self.peek() != ")":
            if not first:
                self.expect(",")
                if self.peek() == ")":
                    self.fail({"<argument>"}, "trailing comma")
            first = False
            if self.peek() == "**" and stage < 3:
                self.i += 1
                kwargs = self.test()
                stage = 3
            elif self.peek() == "*" and stage < 2:
                self.i += 1
                starargs = self.test()
                stage = 2
            elif is_identifier_text(self.peek() or "") and self.peek(1) == "=" and stage < 2:
                arg = self.name()
                self.i += 1
                keywords.append(self.node("keyword", arg=arg, value=self.test()))
                stage = 1
            elif stage == 0:
                args.append(self.test())
            else:
                self.fail({"<keyword argument>"}, "argument order is args, keywords, *, **")
        self.expect(")")
        return self.node("Call", func=func, args=args, keywords=keywords,
                         starargs=starargs, kwargs=kwargs)

    def subscript(self):
        lower = None
        if self.peek() != ":":
            lower = self.test()
            if self.peek() != ":":
                value = lower
                if self.peek() == ",":
                    elts = [lower]
                    while self.accept(","):
                        if self.peek() == "]":
                            if len(elts) > 1:
                                self.fail({"<expression>"}, "trailing comma")
                            break
                        elts.append(self.test())
                    value = self.node("Tuple", elts=elts)
                self.expect("]")
                return self.node("Index", value=value)
        self.expect(":")
        upper = self.test() if _starts_expr(self.peek()) else None
        step = None
        if self.accept(":"):
            if not _starts_expr(self.peek()):
                self.fail({"<expression>"}, "empty slice step")
            step = self.test()
        self.expect("]")
        return self.node("Slice", lower=lower, upper=upper, step=step)

    def atom(self):
        t = self.peek()
        if t is None:
            self.fail({"<expression>"})
        if t == "(":
            self.i += 1
            if self.accept(")"):
                return self.node("Tuple", elts=[])
            inner = self.testlist()
            self.expect(")")
            return self.node("Paren", value=inner)
        if t == "[":
            self.i += 1
            if self.accept("]"):
                return self.node("List", elts=[])
            first = self.test()
            if self.accept("for"):
                target = self.target_list()
                self.expect("in")
                it = self.or_test()
                cond = self.or_test() if self.accept("if") else None
                self.expect("]")
                return self.node("ListComp", elt=first, target=target, iter=it, cond=cond)
            elts = [first]
            while self.peek() != "]":
                self.expect(",")
                if self.peek() == "]":
                    self.fail({"<expression>"}, "trailing comma")
                elts.append(self.test())
            self.expect("]")
            return self.node("List", elts=elts)
        if t == "{":
            self.i += 1
            return self.node("Dict", items=self.comma_list(self.dict_item, "}"))
        if t == "<str>":
            self.i += 1
            return self.node("Str", s=t)
        if is_number_text(t):
            self.i += 1
            return self.node("Num", n=t)
        if is_identifier_text(t):
            self.i += 1
            return self.node("Name", id=t)
        self.fail({"<expression>"})

    def dict_item(self):
        key = self.test()
        self.expect(":")
        return self.node("dictitem", key=key, value=self.test())


def _texts(line) -> list[str]:
    toks = line.tokens if isinstance(line, LogicalLine) else line
    texts = [t.text if isinstance(t, Token) else t for t in toks]
    if texts and texts[-1] == EOL:
        texts = texts[:-1]
    return texts


def parse_statement(line, grammar: AsdlGrammar | None = None) -> AstNode:
    """Parse one logical line (LogicalLine, Tokens or strings) to a statement tree."""
    grammar = grammar or default_grammar()
    texts = _texts(line)
    if not texts:
        raise ParseError(0, {"<statement>"}, "empty line")
    return _Parser(texts, grammar).statement()


def parse_file(lines: Sequence, grammar: AsdlGrammar | None = None) -> list[AstNode]:
    """One tree per logical line; all per-line failures are reported together."""
    grammar = grammar or default_grammar()
    trees, errors = [], []
    for n, ln in enumerate(lines):
        try:
            trees.append(parse_statement(ln, grammar))
        except ParseError as exc:
            pos = ln.source_span[0] if isinstance(ln, LogicalLine) and ln.source_span[0] else n + 1
            errors.append((pos, exc))
    if errors:
        raise FileParseError(errors)
    return trees


def line_to_actions(line, grammar: AsdlGrammar | None = None) -> list:
    """Action stream of one line, as fed to the language model.

    For a block header the closing Reduce of the empty body is dropped: the
    line ends at the point where generation stops.
    """
    grammar = grammar or default_grammar()
    actions = ast_to_actions(parse_statement(line, grammar), grammar)
    if classify_line(_texts(line)) is LineCategory.CompoundHeader:
        assert actions[-1] == REDUCE
        actions.pop()
    return actions
