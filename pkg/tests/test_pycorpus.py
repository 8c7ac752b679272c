import pytest

from linecomp.errors import EmptyCorpus, LexError
from linecomp.pycorpus import (
    RESERVED,
    LineCategory,
    LogicalLine,
    Token,
    TokenKind,
    Vocab,
    build_vocab,
    classify_line,
    corpus_stats,
    detokenize,
    extract_samples,
    flatten,
    make_token,
    parse_line,
    format_line,
    read_manifest,
    read_tokenized,
    render_source,
    tokenize_file,
    write_tokenized,
)


def texts(line):
    return [t.text for t in line.tokens]


def test_string_masking_and_eol():
    (line,) = tokenize_file('x = foo("hi")\n')
    assert texts(line) == ["x", "=", "foo", "(", "<str>", ")", "<eol>"]
    assert line.tokens[4].kind is TokenKind.StringLiteral


def test_empty_file():
    assert tokenize_file("") == []


def test_bracket_continuation_spans_two_physical_lines():
    (line,) = tokenize_file("y = (1 +\n 2)\n")
    assert texts(line) == ["y", "=", "(", "1", "+", "2", ")", "<eol>"]
    assert line.source_span == (1, 2)


def test_backslash_continuation():
    (line,) = tokenize_file("z = 1 + \\\n    2\n")
    assert texts(line) == ["z", "=", "1", "+", "2", "<eol>"]


def test_blank_and_comment_lines_dropped():
    lines = tokenize_file("# comment\n\nx = 1  # trailing\n\n")
    assert [texts(l) for l in lines] == [["x", "=", "1", "<eol>"]]


@pytest.mark.parametrize("src", ["'''doc\nstring'''\n", 'r"raw"\n', "b'x'\n", 'f"{a}"\n'])
def test_all_string_flavours_masked(src):
    (line,) = tokenize_file(src)
    assert texts(line) == ["<str>", "<eol>"]


def test_indentation_markers_live_on_lines():
    lines = tokenize_file("if x:\n    y = 1\nz = 2\n")
    assert [t.text for t in lines[1].indent] == ["<indent>"]
    assert [t.text for t in lines[2].indent] == ["<dedent>"]
    for ln in lines:
        assert all(t.kind not in (TokenKind.Indent, TokenKind.Dedent) for t in ln.tokens)


@pytest.mark.parametrize("src,reason", [
    ('x = "abc\n', "unterminated"),
    ("x = 1 $ 2\n", "character"),
    ("if x:\n    y = 1\n  z = 2\n", "indent"),
])
def test_lex_errors(src, reason):
    with pytest.raises(LexError) as exc:
        tokenize_file(src)
    assert reason in str(exc.value).lower()


def test_classify_line():
    def line(*toks):
        return LogicalLine(tuple(make_token(t) for t in (*toks, "<eol>")))

    assert classify_line(line("def", "f", "(", ")", ":")) is LineCategory.CompoundHeader
    assert classify_line(line("return", "x")) is LineCategory.Simple
    assert classify_line(line("x", "=", "1")) is LineCategory.Simple


def test_logical_line_needs_single_final_eol():
    with pytest.raises(ValueError):
        LogicalLine((make_token("x"),))
    with pytest.raises(ValueError):
        LogicalLine((make_token("<eol>"), make_token("x"), make_token("<eol>")))


def test_build_vocab_frequency_order_and_cap():
    corpus = [["a", "b", "a", "c", "b", "a"]]
    v = build_vocab(corpus, cap=len(RESERVED) + 2)
    assert v.entries == list(RESERVED) + ["a", "b"]
    assert v.index("c") == v.unk_id


def test_build_vocab_tie_keeps_first_occurrence():
    v = build_vocab([["b", "a"]], cap=len(RESERVED) + 1)
    assert v.entries[-1] == "b"


def test_build_vocab_no_unk_when_uncapped(corpus):
    seqs = [ln.texts for _, f in corpus for ln in f]
    v = build_vocab(seqs)
    assert all(v.unk_id not in v.encode(s) for s in seqs)
    assert build_vocab(seqs).entries == v.entries  # deterministic


def test_build_vocab_empty():
    with pytest.raises(EmptyCorpus):
        build_vocab([[]])


def test_reserved_order():
    v = build_vocab([["x"]])
    assert v.entries[:5] == ["<pad>", "<unk>", "<bos>", "<eol>", "<str>"]
    assert (v.pad_id, v.unk_id, v.bos_id, v.eol_id, v.str_id) == (0, 1, 2, 3, 4)


def test_vocab_round_trip(tmp_path):
    v = build_vocab([["x", "y", "x"]])
    v.save(tmp_path / "v.txt")
    assert Vocab.load(tmp_path / "v.txt") == v


def test_extract_samples_counts():
    lines = tokenize_file("a = 1\nb = 2\nc = 3\n")
    s = extract_samples(lines)
    assert [x.k for x in s] == [1, 2]
    assert [t.text for t in s[0].context] == ["a", "=", "1", "<eol>"]


def test_import_exclusion_applies_to_targets_only():
    s = extract_samples(tokenize_file("import os\nx = 1\n"))
    assert len(s) == 1 and s[0].target_texts == ["x", "=", "1"]
    assert extract_samples(tokenize_file("x = 1\nimport os\n")) == []


def test_single_line_file_has_no_samples():
    assert extract_samples(tokenize_file("x = 1\n")) == []


def test_long_targets_and_long_contexts_dropped():
    long_target = "x = [" + ", ".join(["1"] * 60) + "]\n"  # 123 tokens
    assert extract_samples(tokenize_file("a = 1\n" + long_target)) == []
    lines = tokenize_file("a = 1\nb = 2\n")
    # context [a = 1 <eol>] plus target [b = 2 <eol>] is exactly 8 tokens
    assert extract_samples(lines, max_len=7) == []
    assert len(extract_samples(lines, max_len=8)) == 1


def test_samples_context_carries_target_indent(corpus):
    for name, f in corpus:
        for s in extract_samples(f, file_id=name):
            assert all(t.kind not in (TokenKind.Indent, TokenKind.Dedent) for t in s.target.tokens)
            assert tuple(s.context[len(s.context) - len(s.target.indent):]) == s.target.indent


def test_corpus_stats_arithmetic():
    f = tokenize_file("x = foo\ny = a + b\n")  # 3 and 5 body tokens
    st = corpus_stats([f])
    assert st.avg_lines_per_file == 2.0
    assert st.avg_tokens_per_statement == 4.0


def test_corpus_stats_sort_call_actions():
    st = corpus_stats([tokenize_file("my_list.sort(reverse=False)\n")])
    assert st.avg_actions_per_statement == 14.0


def test_detokenize_rules():
    # Canonical rule: spaces everywhere except after ( [ { . and before ) ] } , : .
    # and around = inside call parentheses; an opening bracket keeps its left space.
    toks = "x = foo ( a , b = 1 ) . bar [ 0 ] + y".split()
    assert detokenize(toks) == "x = foo (a, b=1).bar [0] + y"
    assert detokenize(["d", "=", "{", "k", ":", "v", "}"]) == "d = {k: v}"
    assert detokenize(["if", "x", ":"]) == "if x:"


def test_source_round_trip_over_corpus(corpus):
    for name, lines in corpus:
        again = tokenize_file(render_source(lines))
        assert [ln.texts for ln in again] == [ln.texts for ln in lines], name
        assert [[t.text for t in ln.indent] for ln in again] == [[t.text for t in ln.indent] for ln in lines]


def test_every_line_has_one_final_eol(corpus):
    for _, lines in corpus:
        for ln in lines:
            assert [t.kind for t in ln.tokens].count(TokenKind.Eol) == 1
            assert ln.tokens[-1].text == "<eol>"


def test_tokenized_file_round_trip(tmp_path, corpus):
    _, lines = corpus[0]
    write_tokenized(lines, tmp_path / "f.tok")
    back = read_tokenized(tmp_path / "f.tok")
    assert [format_line(l) for l in back] == [format_line(l) for l in lines]
    assert parse_line(format_line(lines[3])).texts == lines[3].texts


def test_manifest(tmp_path):
    (tmp_path / "m.tsv").write_text("# comment\ntrain\ta.py\n\nvalid\tb.py\n")
    assert read_manifest(tmp_path / "m.tsv") == [("train", "a.py"), ("valid", "b.py")]
    (tmp_path / "bad.tsv").write_text("oops a.py\n")
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "bad.tsv")


def test_flatten_includes_indent_markers():
    lines = tokenize_file("if x:\n    y = 1\n")
    assert [t.text for t in flatten(lines)] == ["if", "x", ":", "<eol>", "<indent>", "y", "=", "1", "<eol>"]


def test_token_text_non_empty():
    with pytest.raises(ValueError):
        Token("", TokenKind.Identifier)
