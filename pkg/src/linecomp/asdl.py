"""ASDL grammars and the APPLYRULE / GENTOKEN / REDUCE transition system.

A tree is emitted depth-first, left to right. ``ApplyRule`` expands the open
frontier field with a constructor, ``GenToken`` fills a primitive field with
one terminal, and ``Reduce`` closes a sequential field, or marks an optional
field as absent. Single fields, and optional fields that received a value,
close on their own.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence, Union

from .errors import (
    CompleteState,
    ConformanceError,
    GrammarError,
    IncompletePrefix,
    InvalidAction,
    RenderError,
)
from .pycorpus import MARKERS, STR, Token, is_identifier_text, is_number_text, make_token

PRIMITIVE_TYPES = frozenset({"identifier", "number", "int", "string", "object"})

SINGLE, OPTIONAL, SEQUENTIAL = "single", "optional", "sequential"
_QUALIFIERS = {"": (SINGLE, 0), "?": (OPTIONAL, 0), "*": (SEQUENTIAL, 0), "+": (SEQUENTIAL, 1)}


@dataclass(frozen=True)
class Field:
    name: str
    type: str
    qualifier: str = SINGLE
    min_count: int = 0

    @property
    def mark(self) -> str:
        if self.qualifier == SEQUENTIAL:
            return "+" if self.min_count else "*"
        return "?" if self.qualifier == OPTIONAL else ""

    def __str__(self):
        return f"{self.type}{self.mark} {self.name}"


@dataclass(frozen=True)
class Constructor:
    name: str
    type: str
    fields: tuple[Field, ...] = ()

    def __str__(self):
        if not self.fields:
            return self.name
        return f"{self.name}({', '.join(map(str, self.fields))})"


@dataclass(frozen=True)
class Production:
    index: int
    type: str
    constructor: Constructor

    def __str__(self):
        return f"{self.type} -> {self.constructor}"


class AsdlGrammar:
    """Types, constructors and the indexed production list of an ASDL grammar."""

    def __init__(self, composite_types: Sequence[str], constructors: Sequence[Constructor],
                 primitive_types=PRIMITIVE_TYPES, root_type: str | None = None):
        self.primitive_types = frozenset(primitive_types)
        self.composite_types = tuple(composite_types)
        self.types = self.primitive_types | set(self.composite_types)
        self.constructors = {c.name: c for c in constructors}
        self.productions = [Production(i, c.type, c) for i, c in enumerate(constructors)]
        by_type: dict[str, list[int]] = {t: [] for t in self.composite_types}
        for p in self.productions:
            by_type[p.type].append(p.index)
        self.by_type = {t: tuple(v) for t, v in by_type.items()}
        self._prod_of = {p.constructor.name: p for p in self.productions}
        self.root_type = root_type or self.composite_types[0]

    def __len__(self):
        return len(self.productions)

    def is_primitive(self, type_name: str) -> bool:
        return type_name in self.primitive_types

    def production_of(self, constructor: str) -> Production:
        try:
            return self._prod_of[constructor]
        except KeyError:
            raise ConformanceError(f"unknown constructor {constructor!r}") from None

    def __repr__(self):
        return f"AsdlGrammar({len(self.composite_types)} types, {len(self.productions)} productions)"


_GRAMMAR_TOKEN = re.compile(r"\s+|--[^\n]*|(?P<tok>[A-Za-z_][A-Za-z0-9_]*|[=|(),?*+{}])|(?P<bad>.)")


def load_grammar(text: str) -> AsdlGrammar:
    """Parse ASDL text (``type = Con(fieldtype qual name, ...) | ...``)."""
    toks: list[tuple[str, int]] = []
    line = 1
    for m in _GRAMMAR_TOKEN.finditer(text):
        if m.group("bad"):
            raise GrammarError(line, f"unexpected character {m.group('bad')!r}")
        if m.group("tok"):
            toks.append((m.group("tok"), line))
        line += m.group(0).count("\n")
    toks.append(("", line))
    pos = 0

    def peek(k=0):
        return toks[min(pos + k, len(toks) - 1)]

    def take(expected=None):
        nonlocal pos
        tok, ln = toks[pos]
        if expected is not None and tok != expected:
            raise GrammarError(ln, f"expected {expected!r}, found {tok or 'end of input'!r}")
        pos += 1
        return tok, ln

    def ident():
        tok, ln = take()
        if not tok or not (tok[0].isalpha() or tok[0] == "_"):
            raise GrammarError(ln, f"expected a name, found {tok or 'end of input'!r}")
        return tok, ln

    def fields():
        take("(")
        out = []
        while True:
            ftype, ln = ident()
            qual = ""
            while peek()[0] in ("?", "*", "+"):
                qual += take()[0]
            if qual not in _QUALIFIERS:
                raise GrammarError(ln, f"malformed qualifier {qual!r} on field of type {ftype}")
            fname, _ = ident()
            q, lo = _QUALIFIERS[qual]
            out.append((Field(fname, ftype, q, lo), ln))
            if peek()[0] == ",":
                take()
                continue
            take(")")
            return out

    if peek()[0] == "module":
        take()
        ident()
        take("{")
    composite: list[str] = []
    cons: list[tuple[Constructor, int]] = []
    field_refs: list[tuple[Field, int]] = []
    seen: set[str] = set()
    while peek()[0] not in ("", "}"):
        tname, ln = ident()
        take("=")
        if tname in composite or tname in PRIMITIVE_TYPES:
            raise GrammarError(ln, f"type {tname!r} declared twice")
        composite.append(tname)
        if peek()[0] == "(":
            fs = fields()
            field_refs.extend(fs)
            con = Constructor(tname, tname, tuple(f for f, _ in fs))
            cons.append((con, ln))
            continue
        while True:
            cname, cln = ident()
            fs = fields() if peek()[0] == "(" else []
            field_refs.extend(fs)
            cons.append((Constructor(cname, tname, tuple(f for f, _ in fs)), cln))
            if peek()[0] != "|":
                break
            take()
    if peek()[0] == "}":
        take()
    if peek()[0]:
        raise GrammarError(peek()[1], f"trailing input {peek()[0]!r}")
    for con, ln in cons:
        if con.name in seen:
            raise GrammarError(ln, f"duplicate constructor {con.name!r}")
        seen.add(con.name)
        names = [f.name for f in con.fields]
        if len(set(names)) != len(names):
            raise GrammarError(ln, f"duplicate field name in {con.name}")
    known = set(composite) | PRIMITIVE_TYPES
    for f, ln in field_refs:
        if f.type not in known:
            raise GrammarError(ln, f"undeclared type {f.type!r}")
    if not composite:
        raise GrammarError(1, "grammar declares no types")
    return AsdlGrammar(composite, [c for c, _ in cons])


@functools.lru_cache(maxsize=None)
def default_grammar() -> AsdlGrammar:
    """The bundled Python-subset grammar (``grammar/pysubset.asdl``)."""
    text = resources.files("linecomp").joinpath("grammar/pysubset.asdl").read_text("utf-8")
    return load_grammar(text)


# ------------------------------------------------------------------- trees


class AstNode:
    """A constructor instance; ``fields`` keeps declaration order."""

    __slots__ = ("constructor", "fields")

    def __init__(self, constructor: str, fields=None, **kw):
        self.constructor = constructor
        self.fields = dict(fields or ())
        self.fields.update(kw)

    def __getitem__(self, name):
        return self.fields[name]

    def __eq__(self, other):
        return (
            isinstance(other, AstNode)
            and self.constructor == other.constructor
            and self.fields == other.fields
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self):
        return to_sexpr(self)


def to_sexpr(value) -> str:
    """``(Constructor field=value ...)`` with ``~`` for absent and ``[...]`` for sequences."""
    if value is None:
        return "~"
    if isinstance(value, list):
        return "[" + " ".join(to_sexpr(v) for v in value) + "]"
    if isinstance(value, str):
        return json.dumps(value)
    parts = [value.constructor] + [f"{k}={to_sexpr(v)}" for k, v in value.fields.items()]
    return "(" + " ".join(parts) + ")"


_SEXPR_TOKEN = re.compile(r'\s*(?:("(?:[^"\\]|\\.)*")|([()\[\]~=])|([^\s()\[\]~="]+))')


def parse_sexpr(text: str) -> AstNode:
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _SEXPR_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad S-expression near {text[pos:pos + 20]!r}")
        toks.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    i = 0

    def value():
        nonlocal i
        t = toks[i]
        if t == "~":
            i += 1
            return None
        if t.startswith('"'):
            i += 1
            return json.loads(t)
        if t == "[":
            i += 1
            out = []
            while toks[i] != "]":
                out.append(value())
            i += 1
            return out
        if t == "(":
            i += 1
            node = AstNode(toks[i])
            i += 1
            while toks[i] != ")":
                name = toks[i]
                if toks[i + 1] != "=":
                    raise ValueError(f"expected '=' after field {name!r}")
                i += 2
                node.fields[name] = value()
            i += 1
            return node
        raise ValueError(f"unexpected token {t!r}")

    node = value()
    if i != len(toks):
        raise ValueError("trailing input after S-expression")
    return node


# ----------------------------------------------------------------- actions


@dataclass(frozen=True, slots=True)
class ApplyRule:
    production: int

    def __str__(self):
        return f"R{self.production}"


@dataclass(frozen=True, slots=True)
class GenToken:
    value: str

    def __str__(self):
        return f"G{self.value}"


@dataclass(frozen=True, slots=True)
class Reduce:
    def __str__(self):
        return "D"


REDUCE = Reduce()
Action = Union[ApplyRule, GenToken, Reduce]


def format_actions(actions: Iterable[Action]) -> str:
    return " ".join(str(a) for a in actions)


def parse_actions(text: str) -> list[Action]:
    out: list[Action] = []
    for item in text.split():
        if item == "D":
            out.append(REDUCE)
        elif item[0] == "R" and item[1:].isdigit():
            out.append(ApplyRule(int(item[1:])))
        elif item[0] == "G" and len(item) > 1:
            out.append(GenToken(item[1:]))
        else:
            raise ValueError(f"bad action {item!r}")
    return out


def describe_action(action: Action, grammar: AsdlGrammar) -> str:
    if isinstance(action, ApplyRule):
        return f"ApplyRule[{grammar.productions[action.production]}]"
    if isinstance(action, GenToken):
        return f"GenToken[{action.value}]"
    return "Reduce"


def token_accepts(type_name: str, value: str) -> bool:
    """Lexical class check for a terminal of the given primitive type."""
    if not value or value in MARKERS and value != STR:
        return False
    if type_name == "identifier":
        return is_identifier_text(value)
    if type_name in ("number", "int"):
        return is_number_text(value)
    if type_name == "string":
        return value == STR
    return True


def ast_to_actions(tree: AstNode, grammar: AsdlGrammar, root_type: str | None = None) -> list[Action]:
    """Pre-order action sequence of a grammar-conforming tree."""
    out: list[Action] = []

    def emit(node, expected_type):
        if not isinstance(node, AstNode):
            raise ConformanceError(f"expected a {expected_type} node, got {node!r}")
        prod = grammar.production_of(node.constructor)
        if prod.type != expected_type:
            raise ConformanceError(f"{node.constructor} builds {prod.type}, not {expected_type}")
        declared = [f.name for f in prod.constructor.fields]
        if list(node.fields) != declared:
            raise ConformanceError(f"{node.constructor} fields {list(node.fields)} != {declared}")
        out.append(ApplyRule(prod.index))
        for f in prod.constructor.fields:
            v = node.fields[f.name]
            if f.qualifier == SINGLE:
                if v is None or isinstance(v, list):
                    raise ConformanceError(f"{node.constructor}.{f.name} needs exactly one value")
                value(f, v)
            elif f.qualifier == OPTIONAL:
                if isinstance(v, list):
                    raise ConformanceError(f"{node.constructor}.{f.name} holds at most one value")
                if v is None:
                    out.append(REDUCE)
                else:
                    value(f, v)
            else:
                if not isinstance(v, list) or len(v) < f.min_count:
                    raise ConformanceError(f"{node.constructor}.{f.name} needs a sequence "
                                           f"of at least {f.min_count}")
                for item in v:
                    value(f, item)
                out.append(REDUCE)

    def value(f, v):
        if grammar.is_primitive(f.type):
            if not isinstance(v, str) or not token_accepts(f.type, v):
                raise ConformanceError(f"{v!r} is not a valid {f.type}")
            out.append(GenToken(v))
        else:
            emit(v, f.type)

    emit(tree, root_type or grammar.root_type)
    return out


# ------------------------------------------------------------ parser state


@dataclass(frozen=True, slots=True)
class Frame:
    owner: str | None
    field: Field
    count: int = 0


@dataclass(frozen=True)
class ParserState:
    root_type: str
    frontier: tuple[Frame, ...]
    started: bool = False

    @property
    def complete(self) -> bool:
        return self.started and not self.frontier

    @property
    def top(self) -> Frame:
        return self.frontier[-1]

    def __str__(self):
        if self.complete:
            return "<complete>"
        f = self.top
        return f"<{f.owner or 'root'}.{f.field.name}:{f.field.type}{f.field.mark} n={f.count}, depth {len(self.frontier)}>"


def initial_state(grammar: AsdlGrammar, root_type: str | None = None) -> ParserState:
    root = root_type or grammar.root_type
    return ParserState(root, (Frame(None, Field("root", root)),))


@dataclass(frozen=True)
class ValidActions:
    """Allowed next actions: production indices, a GenToken type, and/or Reduce."""

    rules: tuple[int, ...] = ()
    token_type: str | None = None
    reduce: bool = False

    def __contains__(self, action) -> bool:
        if isinstance(action, ApplyRule):
            return action.production in self.rules
        if isinstance(action, GenToken):
            return self.token_type is not None and token_accepts(self.token_type, action.value)
        if isinstance(action, Reduce):
            return self.reduce
        return False


def _may_reduce(frame: Frame) -> bool:
    f = frame.field
    if f.qualifier == OPTIONAL:
        return frame.count == 0
    if f.qualifier == SEQUENTIAL:
        return frame.count >= f.min_count
    return False


def valid_actions(state: ParserState, grammar: AsdlGrammar) -> ValidActions:
    if state.complete:
        raise CompleteState("no actions are valid once the tree is complete")
    top = state.top
    reduce = _may_reduce(top)
    if grammar.is_primitive(top.field.type):
        return ValidActions((), top.field.type, reduce)
    return ValidActions(grammar.by_type[top.field.type], None, reduce)


def _filled(frame: Frame) -> tuple[Frame, ...]:
    if frame.field.qualifier == SEQUENTIAL:
        return (Frame(frame.owner, frame.field, frame.count + 1),)
    return ()


def step(state: ParserState, action: Action, grammar: AsdlGrammar) -> ParserState:
    """Apply one action and return the successor state."""
    if state.complete:
        raise InvalidAction(state, action)
    top = state.top
    rest = state.frontier[:-1]
    if isinstance(action, ApplyRule):
        if not 0 <= action.production < len(grammar.productions):
            raise InvalidAction(state, action)
        prod = grammar.productions[action.production]
        if prod.type != top.field.type:
            raise InvalidAction(state, action)
        children = tuple(Frame(prod.constructor.name, f) for f in reversed(prod.constructor.fields))
        return ParserState(state.root_type, rest + _filled(top) + children, True)
    if isinstance(action, GenToken):
        if not grammar.is_primitive(top.field.type) or not token_accepts(top.field.type, action.value):
            raise InvalidAction(state, action)
        return ParserState(state.root_type, rest + _filled(top), True)
    if isinstance(action, Reduce):
        if not _may_reduce(top):
            raise InvalidAction(state, action)
        return ParserState(state.root_type, rest, True)
    raise InvalidAction(state, action)


def is_header_complete(state: ParserState) -> bool:
    """The statement's own ``body`` is the only open field and is still empty."""
    if len(state.frontier) != 1 or not state.started:
        return False
    f = state.frontier[0]
    return (
        f.owner is not None
        and f.field.name == "body"
        and f.field.qualifier == SEQUENTIAL
        and f.field.type == state.root_type
        and f.count == 0
    )


def replay(actions: Iterable[Action], grammar: AsdlGrammar, root_type: str | None = None):
    """Step through ``actions``; return ``(state, tree)`` where tree may be partial."""
    state = initial_state(grammar, root_type)
    holder = AstNode("<root>", {"root": None})
    slots: list[tuple[AstNode, str]] = [(holder, "root")]
    for a in actions:
        new_state = step(state, a, grammar)
        parent, name = slots.pop()
        frame = state.top
        if isinstance(a, Reduce):
            state = new_state
            continue
        if isinstance(a, ApplyRule):
            con = grammar.productions[a.production].constructor
            child = AstNode(con.name, {
                f.name: [] if f.qualifier == SEQUENTIAL else None for f in con.fields
            })
        else:
            child = a.value
        if frame.field.qualifier == SEQUENTIAL:
            parent.fields[name].append(child)
            slots.append((parent, name))
        else:
            parent.fields[name] = child
        if isinstance(child, AstNode):
            con = grammar.production_of(child.constructor).constructor
            slots.extend((child, f.name) for f in reversed(con.fields))
        state = new_state
    return state, holder.fields["root"]


def actions_to_ast(actions: Iterable[Action], grammar: AsdlGrammar, root_type: str | None = None) -> AstNode:
    state, tree = replay(actions, grammar, root_type)
    if not state.complete:
        raise IncompletePrefix(f"action sequence stops in state {state}")
    return tree


# ---------------------------------------------------------------- rollouts

ROLLOUT_TOKENS = {"identifier": ("x", "y", "self"), "number": ("0", "1"), "int": ("0", "1"),
                  "string": (STR,), "object": ("x",)}


def completion_costs(grammar: AsdlGrammar) -> dict[str, int]:
    """Fewest actions needed to finish a value of each type (fixed point)."""
    inf = float("inf")
    cost = {t: 1 for t in grammar.primitive_types}
    cost.update({t: inf for t in grammar.composite_types})

    def field_cost(f):
        if f.qualifier == OPTIONAL:
            return 1
        if f.qualifier == SEQUENTIAL:
            return f.min_count * cost[f.type] + 1
        return cost[f.type]

    changed = True
    while changed:
        changed = False
        for p in grammar.productions:
            c = 1 + sum(field_cost(f) for f in p.constructor.fields)
            if c < cost[p.type]:
                cost[p.type], changed = c, True
    return cost


def _production_cost(prod: Production, cost) -> float:
    total = 1
    for f in prod.constructor.fields:
        if f.qualifier == OPTIONAL:
            total += 1
        elif f.qualifier == SEQUENTIAL:
            total += f.min_count * cost[f.type] + 1
        else:
            total += cost[f.type]
    return total


def remaining_cost(state: ParserState, cost: dict[str, int]) -> int:
    """Fewest actions that complete ``state``."""
    total = 0
    for fr in state.frontier:
        f = fr.field
        if f.qualifier == SEQUENTIAL:
            total += max(0, f.min_count - fr.count) * cost[f.type] + 1
        elif f.qualifier == OPTIONAL:
            total += 1
        else:
            total += cost[f.type]
    return total


def random_rollout(grammar: AsdlGrammar, rng, cap: int = 200, continue_prob: float = 0.5,
                   root_type: str | None = None) -> list[Action]:
    """Random walk through the transition system until the statement is complete.

    Choices are uniform among valid actions, except that a non-empty
    sequential field continues with probability at most ``continue_prob``.
    A random choice that would make the cheapest possible completion exceed
    ``cap`` actions is replaced by the cheapest action, so every walk ends
    within the cap.
    """
    cost = completion_costs(grammar)
    state = initial_state(grammar, root_type)
    if remaining_cost(state, cost) > cap:
        raise IncompletePrefix(f"no statement fits in {cap} actions")
    actions: list[Action] = []
    while not state.complete:
        va = valid_actions(state, grammar)
        frame = state.top
        if va.reduce and frame.count > 0 and rng.random() >= continue_prob:
            action: Action = REDUCE
        elif va.reduce and frame.field.qualifier == OPTIONAL and rng.random() < 0.5:
            action = REDUCE
        elif va.token_type is not None:
            action = GenToken(rng.choice(ROLLOUT_TOKENS.get(va.token_type, ("x",))))
        else:
            action = ApplyRule(rng.choice(va.rules))
        new = step(state, action, grammar)
        if len(actions) + 1 + remaining_cost(new, cost) > cap:
            action = _cheapest(state, va, grammar, cost)
            new = step(state, action, grammar)
        state = new
        actions.append(action)
    return actions


def _cheapest(state, va, grammar, cost) -> Action:
    if va.reduce:
        return REDUCE
    if va.token_type is not None:
        return GenToken(ROLLOUT_TOKENS.get(va.token_type, ("x",))[0])
    return ApplyRule(min(va.rules, key=lambda i: (_production_cost(grammar.productions[i], cost), i)))


# --------------------------------------------------------------- rendering

TUPLE, TEST, OR, AND, NOT, CMP, BITOR, BITXOR, BITAND, SHIFT, ARITH, TERM, UNARY, POWER, ATOM = range(15)

BINOP_TEXT = {
    "Add": "+", "Sub": "-", "Mult": "*", "Div": "/", "FloorDiv": "//", "Mod": "%",
    "Pow": "**", "LShift": "<<", "RShift": ">>", "BitOr": "|", "BitXor": "^",
    "BitAnd": "&", "MatMult": "@",
}
BINOP_PREC = {
    "Add": ARITH, "Sub": ARITH, "Mult": TERM, "Div": TERM, "FloorDiv": TERM, "Mod": TERM,
    "MatMult": TERM, "Pow": POWER, "LShift": SHIFT, "RShift": SHIFT, "BitOr": BITOR,
    "BitXor": BITXOR, "BitAnd": BITAND,
}
UNARY_TEXT = {"Not": ["not"], "USub": ["-"], "UAdd": ["+"], "Invert": ["~"]}
CMP_TEXT = {
    "Eq": ["=="], "NotEq": ["!="], "Lt": ["<"], "LtE": ["<="], "Gt": [">"], "GtE": [">="],
    "In": ["in"], "NotIn": ["not", "in"], "Is": ["is"], "IsNot": ["is", "not"],
}
BOOL_TEXT = {"And": "and", "Or": "or"}
COMPOUND = {"FunctionDef", "ClassDef", "If", "Elif", "Else", "For", "While", "With",
            "Try", "ExceptHandler", "ExceptAll", "Finally"}


def precedence(node: AstNode) -> int:
    c = node.constructor
    if c == "BoolOp":
        return AND if node["op"].constructor == "And" else OR
    if c == "BinOp":
        return BINOP_PREC[node["op"].constructor]
    if c == "UnaryOp":
        return NOT if node["op"].constructor == "Not" else UNARY
    if c == "IfExp":
        return TEST
    if c == "Compare":
        return CMP
    if c == "Tuple" and node["elts"]:
        return TUPLE
    return ATOM


def _expr(node, need: int) -> list[str]:
    toks = _expr_raw(node)
    if precedence(node) < need:
        return ["(", *toks, ")"]
    return toks


def _commas(items, fn) -> list[str]:
    out: list[str] = []
    for i, item in enumerate(items):
        if i:
            out.append(",")
        out.extend(fn(item))
    return out


def _tuple_body(elts, need) -> list[str]:
    toks = _commas(elts, lambda e: _expr(e, need))
    return toks + [","] if len(elts) == 1 else toks


def _target(node) -> list[str]:
    """Loop/``as`` targets stop above comparisons so ``in`` stays unambiguous."""
    if node.constructor == "Tuple" and node["elts"]:
        return _tuple_body(node["elts"], BITOR)
    return _expr(node, BITOR)


def _expr_raw(node) -> list[str]:
    c = node.constructor
    f = node.fields
    if c == "Name":
        return [f["id"]]
    if c == "Num":
        return [f["n"]]
    if c == "Str":
        return [f["s"]]
    if c == "BoolOp":
        lvl = precedence(node)
        return [*_expr(f["left"], lvl), BOOL_TEXT[f["op"].constructor], *_expr(f["right"], lvl + 1)]
    if c == "BinOp":
        op = f["op"].constructor
        if op == "Pow":
            return [*_expr(f["left"], ATOM), "**", *_expr(f["right"], UNARY)]
        lvl = BINOP_PREC[op]
        return [*_expr(f["left"], lvl), BINOP_TEXT[op], *_expr(f["right"], lvl + 1)]
    if c == "UnaryOp":
        op = f["op"].constructor
        return [*UNARY_TEXT[op], *_expr(f["operand"], NOT if op == "Not" else UNARY)]
    if c == "IfExp":
        return [*_expr(f["body"], OR), "if", *_expr(f["test"], OR), "else", *_expr(f["orelse"], TEST)]
    if c == "Compare":
        return [*_expr(f["left"], CMP), *CMP_TEXT[f["op"].constructor], *_expr(f["right"], BITOR)]
    if c == "Call":
        parts = [_expr(a, TEST) for a in f["args"]]
        parts += [[kw["arg"], "=", *_expr(kw["value"], TEST)] for kw in f["keywords"]]
        if f["starargs"] is not None:
            parts.append(["*", *_expr(f["starargs"], TEST)])
        if f["kwargs"] is not None:
            parts.append(["**", *_expr(f["kwargs"], TEST)])
        return [*_expr(f["func"], ATOM), "(", *_commas(parts, lambda p: p), ")"]
    if c == "Attribute":
        return [*_expr(f["value"], ATOM), ".", f["attr"]]
    if c == "Subscript":
        return [*_expr(f["value"], ATOM), "[", *_slice(f["slice"]), "]"]
    if c == "List":
        return ["[", *_commas(f["elts"], lambda e: _expr(e, TEST)), "]"]
    if c == "Tuple":
        if not f["elts"]:
            return ["(", ")"]
        return _tuple_body(f["elts"], TEST)
    if c == "Dict":
        return ["{", *_commas(f["items"], lambda it: [*_expr(it["key"], TEST), ":",
                                                       *_expr(it["value"], TEST)]), "}"]
    if c == "ListComp":
        out = ["[", *_expr(f["elt"], TEST), "for", *_target(f["target"]), "in", *_expr(f["iter"], OR)]
        if f["cond"] is not None:
            out += ["if", *_expr(f["cond"], OR)]
        return out + ["]"]
    if c == "Paren":
        return ["(", *_expr(f["value"], TUPLE), ")"]
    raise RenderError(f"no surface template for expression constructor {c!r}")


def _slice(node) -> list[str]:
    if node.constructor == "Index":
        return _expr(node["value"], TUPLE)
    if node.constructor == "Slice":
        out: list[str] = []
        if node["lower"] is not None:
            out += _expr(node["lower"], TEST)
        out.append(":")
        if node["upper"] is not None:
            out += _expr(node["upper"], TEST)
        if node["step"] is not None:
            out += [":", *_expr(node["step"], TEST)]
        return out
    raise RenderError(f"no surface template for slice constructor {node.constructor!r}")


def _alias(node) -> list[str]:
    out: list[str] = []
    for i, part in enumerate(node["name"]):
        if i:
            out.append(".")
        out.append(part)
    if node["asname"] is not None:
        out += ["as", node["asname"]]
    return out


def _header(node) -> list[str]:
    c = node.constructor
    f = node.fields
    if c == "FunctionDef":
        params = [[p["name"]] + (["=", *_expr(p["default"], TEST)] if p["default"] is not None else [])
                  for p in f["params"]]
        return ["def", f["name"], "(", *_commas(params, lambda p: p), ")", ":"]
    if c == "ClassDef":
        bases = ["(", *_commas(f["bases"], lambda b: _expr(b, TEST)), ")"] if f["bases"] else []
        return ["class", f["name"], *bases, ":"]
    if c in ("If", "Elif", "While"):
        kw = {"If": "if", "Elif": "elif", "While": "while"}[c]
        return [kw, *_expr(f["test"], TEST), ":"]
    if c == "For":
        return ["for", *_target(f["target"]), "in", *_expr(f["iter"], TUPLE), ":"]
    if c == "With":
        out = ["with", *_expr(f["context_expr"], TEST)]
        if f["optional_vars"] is not None:
            out += ["as", *_target(f["optional_vars"])]
        return out + [":"]
    if c == "ExceptHandler":
        out = ["except", *_expr(f["type"], TEST)]
        if f["name"] is not None:
            out += ["as", f["name"]]
        return out + [":"]
    return [{"Else": "else", "Try": "try", "ExceptAll": "except", "Finally": "finally"}[c], ":"]


def _stmt(node) -> list[str]:
    c = node.constructor
    f = node.fields
    if c in COMPOUND:
        body = f["body"]
        return _header(node) + _commas_sep(body, ";")
    if c == "Return":
        return ["return"] + ([] if f["value"] is None else _expr(f["value"], TUPLE))
    if c == "Delete":
        return ["del", *_commas(f["targets"], lambda t: _expr(t, TEST))]
    if c == "Assign":
        out: list[str] = []
        for t in f["targets"]:
            out += [*_expr(t, TUPLE), "="]
        return out + _expr(f["value"], TUPLE)
    if c == "AugAssign":
        return [*_expr(f["target"], TUPLE), BINOP_TEXT[f["op"].constructor] + "=", *_expr(f["value"], TUPLE)]
    if c == "Raise":
        return ["raise"] + ([] if f["exc"] is None else _expr(f["exc"], TEST))
    if c == "Assert":
        out = ["assert", *_expr(f["test"], TEST)]
        return out + ([",", *_expr(f["msg"], TEST)] if f["msg"] is not None else [])
    if c == "Import":
        return ["import", *_commas(f["names"], _alias)]
    if c == "ImportFrom":
        mod: list[str] = []
        for i, part in enumerate(f["module"]):
            mod += (["."] if i else []) + [part]
        return ["from", *mod, "import", *_commas(f["names"], _alias)]
    if c == "Global":
        return ["global", *_commas(f["names"], lambda n: [n])]
    if c == "Expr":
        return _expr(f["value"], TUPLE)
    if c in ("Pass", "Break", "Continue"):
        return [c.lower()]
    raise RenderError(f"no surface template for statement constructor {c!r}")


def _commas_sep(stmts, sep) -> list[str]:
    out: list[str] = []
    for i, s in enumerate(stmts):
        if i:
            out.append(sep)
        out.extend(_stmt(s))
    return out


def render(tree: AstNode, grammar: AsdlGrammar | None = None) -> list[Token]:
    """Surface tokens of a statement tree (no ``<eol>``).

    Compound statements with an empty body render as their header line.
    Parentheses are inserted wherever operator precedence demands them.
    """
    if not isinstance(tree, AstNode):
        raise RenderError(f"cannot render {tree!r}")
    try:
        texts = _stmt(tree)
    except (KeyError, AttributeError, TypeError) as exc:
        raise RenderError(f"malformed {tree.constructor} node: {exc}") from None
    return [make_token(t) for t in texts]


def finalize_actions(actions: Sequence[Action], grammar: AsdlGrammar) -> list[Token]:
    """Render a generated statement, completing a bare block header with ``pass``."""
    state, tree = replay(actions, grammar)
    if state.complete:
        return render(tree, grammar)
    if is_header_complete(state):
        patched = list(actions) + [ApplyRule(grammar.production_of("Pass").index), REDUCE]
        toks = render(actions_to_ast(patched, grammar), grammar)
        if not toks or toks[-1].text != "pass":
            raise RenderError("pass-append recovery did not end with 'pass'")
        return toks[:-1]
    raise IncompletePrefix(f"cannot finalize actions stopped in state {state}")
