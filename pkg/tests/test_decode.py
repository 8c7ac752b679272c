import math

import pytest
import torch
from oracles import enumerate_lines

from linecomp.codecs import TokenCodec, build_codec
from linecomp.decode import bench_inference, complete_line, masked_distribution, masked_log_probs
from linecomp.errors import ContextTooLong
from linecomp.neural import ModelConfig, build_model, sequence_log_prob
from linecomp.pycorpus import BOS, DEDENT, EOL, INDENT, PAD, RESERVED, UNK, Vocab, extract_samples
from linecomp.pyparse import parse_statement


def small_model(V, arch="transformer", seed=0, max_len=64, pad_id=0):
    cfg = ModelConfig(arch=arch, vocab_size=V, d_model=16, d_embed=16, d_ff=32, n_heads=2, n_layers=1,
                      max_len=max_len, gru_hidden=16, pad_id=pad_id)
    return build_model(cfg, seed=seed).eval()


@pytest.mark.parametrize("arch", ["transformer", "gru"])
def test_exhaustive_beam_equals_brute_force(arch):
    codec = TokenCodec(Vocab(list(RESERVED) + ["a", "b", "c"]))
    model = small_model(codec.size, arch, seed=7)
    ctx = [codec.bos_id, 5, 6]
    found = complete_line(model, codec, ctx, beam_width=64, max_target_len=4)
    truth = enumerate_lines(model, codec, ctx, 4)
    assert found[0].symbols == truth[0][1]
    assert found[0].score == pytest.approx(truth[0][0], abs=1e-4)
    for cand, (score, seq) in zip(found[:5], truth[:5]):
        assert cand.symbols == seq
        assert cand.score == pytest.approx(score, abs=1e-4)


def test_beam_one_is_greedy():
    codec = TokenCodec(Vocab(list(RESERVED) + ["a", "b", "c"]))
    model = small_model(codec.size, seed=3)
    ctx = [codec.bos_id]
    seq = []
    allowed = codec.allowed(None)
    for _ in range(6):
        with torch.no_grad():
            lp = torch.log_softmax(model(torch.tensor([ctx + seq]))[0, -1], -1)
        s = int(torch.argmax(masked_log_probs(lp, allowed)))
        seq.append(s)
        if s == codec.vocab.eol_id:
            break
    got = complete_line(model, codec, ctx, beam_width=1, max_target_len=6)[0]
    assert list(got.symbols) == seq


def test_masked_log_probs_renormalize():
    lp = torch.log_softmax(torch.tensor([0.3, -1.0, 2.0, 0.5]), -1)
    allowed = torch.tensor([True, False, True, False])
    out = masked_log_probs(lp, allowed)
    assert out[1] == -math.inf and out[3] == -math.inf
    assert float(out.exp().sum()) == pytest.approx(1.0)
    expected = math.exp(0.3) / (math.exp(0.3) + math.exp(2.0))
    assert float(out[0].exp()) == pytest.approx(expected)


@pytest.fixture(scope="module")
def syntax_codec(toy_files):
    return build_codec("syntax", toy_files)


def test_masked_distribution_single_and_uniform(syntax_codec, toy_files):
    codec = syntax_codec
    state = codec.initial_state()
    mask = codec.valid_mask(state)
    uniform = torch.full((codec.size,), -math.log(codec.size))
    dist = masked_distribution(uniform, state, codec)
    n = int(mask.sum())
    assert torch.allclose(dist[mask].exp(), torch.full((n,), 1.0 / n, dtype=dist.dtype))
    assert torch.all(dist[~mask] == -math.inf)
    # Walk a real line until a state with exactly one valid action shows up.
    seen = 0
    for line in toy_files[0]:
        state = codec.initial_state()
        for act in codec.actions(line):
            if int(codec.valid_mask(state).sum()) == 1:
                only = masked_distribution(torch.randn(codec.size), state, codec)
                assert float(only.max()) == 0.0
                assert int(torch.isfinite(only).sum()) == 1
                seen += 1
            state, _ = codec.advance(state, codec.action_id(act))
    assert seen > 0


def test_masked_distribution_brute_force(syntax_codec, toy_files):
    """Mask equals the set of symbols whose step does not fail, checked on many states."""
    from linecomp.asdl import step
    from linecomp.errors import LinecompError

    codec = syntax_codec
    g = torch.Generator().manual_seed(0)
    for line in toy_files[0][:6]:
        state = codec.initial_state()
        for act in codec.actions(line):
            mask = codec.valid_mask(state)
            for s in torch.randperm(codec.size, generator=g)[:200].tolist():
                try:
                    step(state, codec.action_of(s), codec.grammar)
                    ok = True
                except LinecompError:
                    ok = False
                assert ok == bool(mask[s]), codec.symbol_name(s)
            state, _ = codec.advance(state, codec.action_id(act))


@pytest.mark.parametrize("mode", ["token", "bpe", "syntax"])
def test_candidates_are_well_formed(mode, toy_files, grammar):
    codec = build_codec(mode, toy_files, bpe_merges=200)
    model = small_model(codec.size, seed=1, max_len=400, pad_id=codec.pad_id)
    samples = extract_samples(toy_files[0])[:4]
    for s in samples:
        ctx = codec.encode_context(s.context)
        for cand in complete_line(model, codec, ctx, beam_width=3, max_target_len=30):
            if not cand.finished:
                continue
            assert not {PAD, BOS, UNK, INDENT, DEDENT} & set(cand.tokens)
            assert EOL not in cand.tokens
            if mode == "syntax":
                parse_statement(cand.tokens, grammar)  # raises on failure


def test_decoding_is_deterministic(toy_files):
    codec = build_codec("syntax", toy_files)
    model = small_model(codec.size, seed=2, max_len=400, pad_id=codec.pad_id)
    ctx = codec.encode_context(extract_samples(toy_files[1])[2].context)
    a = complete_line(model, codec, ctx, 4, 25)
    b = complete_line(model, codec, ctx, 4, 25)
    assert [(c.symbols, c.score) for c in a] == [(c.symbols, c.score) for c in b]


def test_scores_are_sorted_and_bounded():
    codec = TokenCodec(Vocab(list(RESERVED) + ["a", "b"]))
    model = small_model(codec.size, seed=5)
    found = complete_line(model, codec, [codec.bos_id], beam_width=5, max_target_len=5)
    scores = [c.score for c in found]
    assert scores == sorted(scores, reverse=True)
    assert all(s <= 0 for s in scores) and len(found) <= 5
    assert all(len(c.symbols) <= 5 for c in found)


def test_context_too_long():
    codec = TokenCodec(Vocab(list(RESERVED) + ["a"]))
    model = small_model(codec.size, max_len=8)
    complete_line(model, codec, [2] * 4, 2, 4)  # exactly fits
    with pytest.raises(ContextTooLong):
        complete_line(model, codec, [2] * 5, 2, 4)


def test_gru_scorer_matches_transformer_style_recompute():
    codec = TokenCodec(Vocab(list(RESERVED) + ["a", "b", "c"]))
    model = small_model(codec.size, "gru", seed=9)
    ctx = [codec.bos_id, 6]
    for cand in complete_line(model, codec, ctx, 4, 5):
        ref = sequence_log_prob(model, ctx, cand.symbols, lambda j, p: codec.allowed(None))
        assert cand.score == pytest.approx(ref, abs=1e-4)


def test_bench_reports_all_models(toy_files):
    models, ctxs = {}, {}
    for mode in ("token", "syntax"):
        codec = build_codec(mode, toy_files)
        models[mode] = (small_model(codec.size, seed=0, max_len=400, pad_id=codec.pad_id), codec)
        ctxs[mode] = [codec.encode_context(s.context) for s in extract_samples(toy_files[0])[:3]]
    res = bench_inference(models, ctxs, beam_width=2, max_target_len=20)
    assert [r.name for r in res] == ["token", "syntax"]
    assert res[0].mask_share is None and 0 <= res[1].mask_share <= 1
    assert all(r.mean_seconds > 0 and r.n_lines == 3 for r in res)
