import random

import pytest

from linecomp.asdl import (
    OPTIONAL,
    REDUCE,
    SEQUENTIAL,
    SINGLE,
    ApplyRule,
    AstNode,
    GenToken,
    actions_to_ast,
    ast_to_actions,
    completion_costs,
    finalize_actions,
    format_actions,
    initial_state,
    is_header_complete,
    load_grammar,
    parse_actions,
    parse_sexpr,
    random_rollout,
    render,
    replay,
    step,
    to_sexpr,
    valid_actions,
)
from linecomp.errors import (
    CompleteState,
    ConformanceError,
    GrammarError,
    IncompletePrefix,
    InvalidAction,
)
from linecomp.pyparse import line_to_actions, parse_statement

SORT_CALL = "my_list . sort ( reverse = False )".split()

TOY = """
module toy {
    stmt = Expr(expr value) | Pass
    expr = Name(identifier id)
}
"""


def texts(tokens):
    return [t.text for t in tokens]


def test_call_constructor_qualifiers(grammar):
    call = grammar.constructors["Call"]
    assert [f.name for f in call.fields] == ["func", "args", "keywords", "starargs", "kwargs"]
    assert [f.qualifier for f in call.fields] == [SINGLE, SEQUENTIAL, SEQUENTIAL, OPTIONAL, OPTIONAL]


def test_nullary_constructor():
    g = load_grammar("module m { stmt = Pass }")
    assert g.constructors["Pass"].fields == ()
    assert len(g.productions) == 1


@pytest.mark.parametrize("text,reason", [
    ("module m { stmt = Expr(foo value) }", "undeclared"),
    ("module m { stmt = A | A }", "duplicate"),
    ("module m { stmt = A(identifier?? x) }", ""),
])
def test_grammar_errors(text, reason):
    with pytest.raises(GrammarError) as exc:
        load_grammar(text)
    assert reason in str(exc.value).lower()


def test_productions_dense_and_textual(grammar):
    assert [p.index for p in grammar.productions] == list(range(len(grammar.productions)))
    assert grammar.productions[0].constructor.name == "FunctionDef"
    assert grammar.root_type == "stmt"


def test_sort_call_action_sequence(grammar):
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    P = grammar.production_of
    expected = [
        ApplyRule(P("Expr").index), ApplyRule(P("Call").index), ApplyRule(P("Attribute").index),
        ApplyRule(P("Name").index), GenToken("my_list"), GenToken("sort"), REDUCE,
        ApplyRule(P("keyword").index), GenToken("reverse"), ApplyRule(P("Name").index),
        GenToken("False"), REDUCE, REDUCE, REDUCE,
    ]
    assert acts == expected


def test_sort_call_step_replay_completes_only_at_end(grammar):
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    state = initial_state(grammar)
    for i, a in enumerate(acts):
        assert not state.complete
        assert a in valid_actions(state, grammar)
        state = step(state, a, grammar)
        assert state.complete == (i == len(acts) - 1)


def test_pass_is_single_action(grammar):
    acts = ast_to_actions(AstNode("Pass"), grammar)
    assert acts == [ApplyRule(grammar.production_of("Pass").index)]
    assert step(initial_state(grammar), acts[0], grammar).complete


def _derivations(grammar, type_name, depth, values=("x",)):
    """Brute-force enumeration of (tree, actions) pairs straight from the grammar text."""
    if grammar.is_primitive(type_name):
        for v in values:
            yield v, [GenToken(v)]
        return
    if depth == 0:
        return
    for p in grammar.productions:
        if p.type != type_name:
            continue
        partial = [({}, [ApplyRule(p.index)])]
        for f in p.constructor.fields:
            nxt = []
            for fields, acts in partial:
                for sub, sub_acts in _derivations(grammar, f.type, depth - 1, values):
                    nxt.append(({**fields, f.name: sub}, acts + sub_acts))
            partial = nxt
        for fields, acts in partial:
            yield AstNode(p.constructor.name, fields), acts


def test_toy_grammar_brute_force_derivation():
    g = load_grammar(TOY)
    tree = AstNode("Expr", value=AstNode("Name", id="x"))
    matches = [acts for t, acts in _derivations(g, "stmt", 3) if t == tree]
    assert len(matches) == 1
    assert ast_to_actions(tree, g) == matches[0]


def test_toy_valid_actions_two_statement_rules():
    g = load_grammar(TOY)
    va = valid_actions(initial_state(g), g)
    assert set(va.rules) == {0, 1} and not va.reduce and va.token_type is None


def test_valid_actions_on_call_args_after_one_child(grammar):
    acts = ast_to_actions(parse_statement("f ( x )".split(), grammar), grammar)
    # Expr, Call, Name f, G f, Name x, G x -> now inside Call.args with one child
    state, _ = replay(acts[:6], grammar)
    va = valid_actions(state, grammar)
    assert state.top.field.name == "args" and state.top.count == 1
    assert set(va.rules) == set(grammar.by_type["expr"]) and va.reduce


def test_valid_actions_primitive_single(grammar):
    state, _ = replay([ApplyRule(grammar.production_of("Expr").index),
                       ApplyRule(grammar.production_of("Name").index)], grammar)
    va = valid_actions(state, grammar)
    assert va.rules == () and va.token_type == "identifier" and not va.reduce
    assert GenToken("foo") in va and GenToken("1") not in va and GenToken("def") not in va


def test_reduce_on_single_field_is_invalid(grammar):
    state, _ = replay([ApplyRule(grammar.production_of("Expr").index)], grammar)
    with pytest.raises(InvalidAction):
        step(state, REDUCE, grammar)


def test_complete_state_has_no_actions(grammar):
    state = step(initial_state(grammar), ApplyRule(grammar.production_of("Pass").index), grammar)
    with pytest.raises(CompleteState):
        valid_actions(state, grammar)
    with pytest.raises(InvalidAction):
        step(state, REDUCE, grammar)


def test_wrong_type_rule_is_invalid(grammar):
    with pytest.raises(InvalidAction):
        step(initial_state(grammar), ApplyRule(grammar.production_of("Name").index), grammar)


def test_conformance_errors(grammar):
    with pytest.raises(ConformanceError):
        ast_to_actions(AstNode("Name", id="x"), grammar)  # expr where stmt expected
    with pytest.raises(ConformanceError):
        ast_to_actions(AstNode("Expr", value=None), grammar)
    with pytest.raises(ConformanceError):
        ast_to_actions(AstNode("Expr", value=AstNode("Name", id="1")), grammar)


def test_render_sort_call_and_pass(grammar):
    assert texts(render(parse_statement(SORT_CALL, grammar), grammar)) == SORT_CALL
    assert texts(render(AstNode("Pass"), grammar)) == ["pass"]


def test_render_header_mode(grammar):
    tree = AstNode("FunctionDef", name="f", params=[], body=[])
    assert texts(render(tree, grammar)) == ["def", "f", "(", ")", ":"]


def test_render_inserts_needed_parentheses(grammar):
    # (a + b) * c built without an explicit Paren node
    tree = AstNode("Expr", value=AstNode(
        "BinOp", left=AstNode("BinOp", left=AstNode("Name", id="a"), op=AstNode("Add"),
                               right=AstNode("Name", id="b")),
        op=AstNode("Mult"), right=AstNode("Name", id="c")))
    assert texts(render(tree, grammar)) == "( a + b ) * c".split()


def test_finalize_sort_call(grammar):
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    assert texts(finalize_actions(acts, grammar)) == SORT_CALL


def test_finalize_header_pass_append(grammar):
    acts = line_to_actions("if x :".split(), grammar)
    assert is_header_complete(replay(acts, grammar)[0])
    assert texts(finalize_actions(acts, grammar)) == ["if", "x", ":"]


def test_finalize_incomplete_prefix(grammar):
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    with pytest.raises(IncompletePrefix):
        finalize_actions(acts[:3], grammar)


def test_action_text_format_round_trip(grammar):
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    text = format_actions(acts)
    assert text.split()[:2] == [f"R{grammar.production_of('Expr').index}", f"R{grammar.production_of('Call').index}"]
    assert "D" in text.split()
    assert parse_actions(text) == acts


def test_sexpr_round_trip(grammar):
    tree = parse_statement(SORT_CALL, grammar)
    s = to_sexpr(tree)
    assert s.startswith("(Expr value=(Call")
    assert "starargs=~" in s and "args=[]" in s
    assert parse_sexpr(s) == tree


def test_corpus_round_trip_and_mask_completeness(grammar, corpus):
    n = 0
    for _, lines in corpus:
        for ln in lines:
            tree = parse_statement(ln, grammar)
            acts = ast_to_actions(tree, grammar)
            state = initial_state(grammar)
            for a in acts:
                assert a in valid_actions(state, grammar)
                state = step(state, a, grammar)
            assert state.complete
            assert actions_to_ast(acts, grammar) == tree
            assert texts(render(tree, grammar)) == [t.text for t in ln.body]
            n += 1
    assert n >= 200


def test_random_rollouts_render(grammar):
    rng = random.Random(7)
    for _ in range(300):
        acts = random_rollout(grammar, rng)
        assert len(acts) <= 200
        assert finalize_actions(acts, grammar)


def test_completion_costs(grammar):
    cost = completion_costs(grammar)
    assert cost["stmt"] == 1          # Pass
    assert cost["expr"] == 2          # Name + identifier
    assert cost["identifier"] == 1


def test_header_complete_only_for_root_body(grammar):
    acts = line_to_actions("def f ( x ) :".split(), grammar)
    state, tree = replay(acts, grammar)
    assert is_header_complete(state) and not state.complete
    assert tree.fields["body"] == []
    # One step earlier the parameter list is still open.
    assert not is_header_complete(replay(acts[:-1], grammar)[0])
