import pytest

from linecomp.asdl import AstNode, ast_to_actions, render
from linecomp.errors import FileParseError, ParseError
from linecomp.pycorpus import tokenize_file
from linecomp.pyparse import line_to_actions, parse_file, parse_statement


def P(src, grammar):
    (line,) = tokenize_file(src)
    return parse_statement(line, grammar)


def test_sort_call_tree(grammar):
    tree = P("my_list.sort(reverse=False)\n", grammar)
    expected = AstNode("Expr", value=AstNode(
        "Call",
        func=AstNode("Attribute", value=AstNode("Name", id="my_list"), attr="sort"),
        args=[],
        keywords=[AstNode("keyword", arg="reverse", value=AstNode("Name", id="False"))],
        starargs=None,
        kwargs=None,
    ))
    assert tree == expected


def test_leaf_and_return(grammar):
    assert P("pass\n", grammar) == AstNode("Pass")
    assert P("return x\n", grammar) == AstNode("Return", value=AstNode("Name", id="x"))


def test_parse_file(grammar):
    assert parse_file(tokenize_file("pass\n"), grammar) == [AstNode("Pass")]
    trees = parse_file(tokenize_file("def f():\n    return x\n"), grammar)
    assert trees[0].constructor == "FunctionDef" and trees[0]["body"] == []
    assert trees[1] == AstNode("Return", value=AstNode("Name", id="x"))
    assert parse_file([], grammar) == []


def test_parse_file_aggregates_errors(grammar):
    lines = tokenize_file("x = 1\nx = = 2\ny = 1 2\n")
    with pytest.raises(FileParseError) as exc:
        parse_file(lines, grammar)
    assert [pos for pos, _ in exc.value.errors] == [2, 3]


def test_parse_error_reports_index_and_expected(grammar):
    with pytest.raises(ParseError) as exc:
        parse_statement("x = = 2".split(), grammar)
    assert exc.value.index == 2
    assert exc.value.expected


@pytest.mark.parametrize("src", [
    "x = a if b else c\n",
    "y = not a and b or c\n",
    "z = a < b\n",
    "v = -a ** 2\n",
    "w = (a + b) * c\n",
    "d = {k: v, 1: 2}\n",
    "l = [x for x in y if x]\n",
    "s = a[1:2], a[::2], a[i]\n",
    "t = ()\n",
    "u = (a,)\n",
    "f(*args, **kwargs)\n",
    "f(a, b=1, *c, **d)\n",
    "from os.path import join as j, split\n",
    "import os.path as p\n",
    "x, y = y, x\n",
    "a = b = c\n",
    "x += 1\n",
    "global a, b\n",
    "del a[0], b\n",
    "raise ValueError('m')\n",
    "assert x, 'm'\n",
    "with open(p) as fh:\n    pass\n",
    "except ValueError as e:\n",
    "class A(B, C):\n    pass\n",
    "lambda_ = x is not None\n",
    "q = a not in b\n",
    "r = a @ b | c ^ d & e << 2 >> 1 // 3 % 4\n",
    "while True:\n    break\n",
    "for i, j in pairs:\n    continue\n",
])
def test_round_trip_statements(src, grammar):
    for line in tokenize_file(src):
        tree = parse_statement(line, grammar)
        assert [t.text for t in render(tree, grammar)] == [t.text for t in line.body]


@pytest.mark.parametrize("src", [
    "x = lambda: 1\n",        # lambdas are outside the subset
    "def f(*a):\n    pass\n",  # star-args in definitions
    "from . import x\n",      # relative imports
    "if x: y = 1\n",          # inline bodies
    "x = yield\n",
])
def test_outside_subset_rejected(src, grammar):
    with pytest.raises(ParseError):
        for line in tokenize_file(src):
            parse_statement(line, grammar)


def test_header_stream_drops_body_reduce(grammar):
    (line,) = tokenize_file("else:\n")
    acts = line_to_actions(line, grammar)
    assert len(acts) == 1
    full = ast_to_actions(parse_statement(line, grammar), grammar)
    assert len(full) == 2
