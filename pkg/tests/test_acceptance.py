"""End-to-end acceptance criteria, one test per criterion.

Each test asserts its pinned tolerance and its runtime budget.
"""

import json
import math
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest
import torch
from oracles import enumerate_lines, finite_difference_check, levenshtein

from linecomp.asdl import (
    ApplyRule,
    GenToken,
    Reduce,
    actions_to_ast,
    ast_to_actions,
    initial_state,
    random_rollout,
    render,
    replay,
    step,
    valid_actions,
)
from linecomp.codecs import TokenCodec, build_codec
from linecomp.decode import bench_inference, complete_line, format_bench_table
from linecomp.metrics import EvalReport, SampleRecord, bleu4, edit_similarity, evaluate, mrr
from linecomp.neural import ModelConfig, TrainConfig, build_model, make_batch, train
from linecomp.pycorpus import RESERVED, Vocab, extract_samples, tokenize_file
from linecomp.pyparse import parse_statement
from linecomp.synth import generate_corpus

SORT_CALL = "my_list . sort ( reverse = False )".split()


def chain_holds(rep: EvalReport) -> bool:
    return rep.acc1 <= rep.mrr <= rep.acc5  # mrr is already scaled by 100


# ------------------------------------------------------------- criterion 1


def test_c1_round_trip_suite(grammar, corpus):
    t0 = time.perf_counter()
    n = 0
    for _, lines in corpus:
        for ln in lines:
            tree = parse_statement(ln, grammar)
            acts = ast_to_actions(tree, grammar)
            state = initial_state(grammar)
            for a in acts:
                state = step(state, a, grammar)
            assert state.complete
            assert [t.text for t in render(actions_to_ast(acts, grammar), grammar)] == \
                [t.text for t in ln.body]
            n += 1
    assert n >= 200
    acts = ast_to_actions(parse_statement(SORT_CALL, grammar), grammar)
    kinds = [type(a) for a in acts]
    assert kinds == [ApplyRule] * 4 + [GenToken] * 2 + [Reduce, ApplyRule, GenToken, ApplyRule, GenToken] \
        + [Reduce] * 3
    assert time.perf_counter() - t0 < 10


# ------------------------------------------------------------- criterion 2


def test_c2_mask_soundness_and_completeness(grammar, corpus):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    for _ in range(10_000):
        acts = random_rollout(grammar, rng, cap=200)
        assert len(acts) <= 200
        state, tree = replay(acts, grammar)
        assert state.complete
        assert render(tree, grammar)
    for _, lines in corpus:
        for ln in lines:
            state = initial_state(grammar)
            for a in ast_to_actions(parse_statement(ln, grammar), grammar):
                assert a in valid_actions(state, grammar)
                state = step(state, a, grammar)
    assert time.perf_counter() - t0 < 60


# ------------------------------------------------------------- criterion 3


def test_c3_gradient_check():
    t0 = time.perf_counter()
    rng = random.Random(3)
    worst = {}
    for arch in ("transformer", "gru"):
        worst[arch] = 0.0
        for i in range(20):
            V = rng.randint(4, 16)
            d = rng.choice([2, 4, 6, 8])
            heads = rng.choice([h for h in (1, 2) if d % h == 0])
            cfg = ModelConfig(arch=arch, vocab_size=V, d_model=d, d_embed=rng.choice([d, max(2, d - 2)]),
                              d_ff=rng.randint(2, 8), n_heads=heads, n_layers=rng.randint(1, 2), max_len=8,
                              gru_hidden=rng.randint(2, 8), dropout_keep=1.0,
                              tie_output_to_embedding=rng.random() < 0.5)
            model = build_model(cfg, seed=i, dtype=torch.float64).eval()
            g = torch.Generator().manual_seed(i)
            seqs = [[2] + torch.randint(1, V, (rng.randint(1, 6),), generator=g).tolist()
                    for _ in range(rng.randint(1, 3))]
            worst[arch] = max(worst[arch], finite_difference_check(model, make_batch(seqs, 0, torch.float64)))
    assert worst["transformer"] <= 1e-4 and worst["gru"] <= 1e-4, worst
    assert time.perf_counter() - t0 < 300


# ------------------------------------------------------- criteria 4 and 7


@pytest.fixture(scope="module")
def memorized(toy_files):
    """Default-size Transformers trained on the 10-file toy corpus (token and syntax mode)."""
    out = {}
    for mode, stop in (("token", 0.1), ("syntax", 0.5)):
        codec = build_codec(mode, toy_files)
        seqs = [codec.encode_file(f) for f in toy_files]
        cfg = ModelConfig(vocab_size=codec.size, pad_id=codec.pad_id)
        t0 = time.perf_counter()
        model, log = train(seqs, cfg, TrainConfig(epochs=2000, seed=0, stop_below=stop))
        out[mode] = (model, codec, log, time.perf_counter() - t0)
    return out


def test_c4_overfit_reproduction(memorized, toy_files):
    model, codec, log, seconds = memorized["token"]
    assert model.cfg.d_model == 128 and model.cfg.n_layers == 4 and model.cfg.n_heads == 4
    assert model.cfg.d_ff == 512
    assert log.epochs[-1]["train_loss"] < 0.1
    t0 = time.perf_counter()
    samples = [s for i, f in enumerate(toy_files) for s in extract_samples(f, file_id=str(i))]
    rep = evaluate(samples, model, codec, beam_width=1)
    assert rep.acc1 >= 95.00, rep.headline()
    assert chain_holds(rep)
    assert seconds + time.perf_counter() - t0 < 30 * 60


def test_c7_syntax_slower_than_token(memorized, toy_files):
    samples = [s for f in toy_files for s in extract_samples(f)][::8][:20]
    models, contexts = {}, {}
    for mode in ("token", "syntax"):
        model, codec, _, _ = memorized[mode]
        models[mode] = (model, codec)
        contexts[mode] = [codec.encode_context(s.context) for s in samples]
    res = bench_inference(models, contexts, beam_width=5, max_target_len=100)
    table = format_bench_table(res)
    assert table.splitlines()[0].startswith("| Model | Mode | Beam |")
    by_mode = {r.mode: r.mean_seconds for r in res}
    assert by_mode["syntax"] > by_mode["token"], table


# ------------------------------------------------------------- criterion 5


def test_c5_beam_search_oracle():
    t0 = time.perf_counter()
    codec = TokenCodec(Vocab(list(RESERVED) + ["a", "b", "c"]))
    assert codec.size <= 8
    rng = random.Random(5)
    for i in range(100):
        arch = "transformer" if i % 2 == 0 else "gru"
        cfg = ModelConfig(arch=arch, vocab_size=codec.size, d_model=8, d_embed=8, d_ff=16, n_heads=2,
                          n_layers=1, max_len=16, gru_hidden=8)
        model = build_model(cfg, seed=i, dtype=torch.float64).eval()
        scale = rng.uniform(1.0, 6.0)
        with torch.no_grad():
            for p in model.parameters():
                p.mul_(scale)
        ctx = [codec.bos_id] + [rng.randint(5, 7) for _ in range(rng.randint(0, 4))]
        found = complete_line(model, codec, ctx, beam_width=64, max_target_len=4)
        truth = enumerate_lines(model, codec, ctx, 4)
        assert [c.symbols for c in found[:5]] == [seq for _, seq in truth[:5]], i
        for c, (score, _) in zip(found[:5], truth[:5]):
            assert math.isclose(c.score, score, abs_tol=1e-9)
    assert time.perf_counter() - t0 < 60


# ------------------------------------------------------------- criterion 6


def test_c6_metric_oracles():
    rng = random.Random(6)
    alphabet = "ab=(x1 "
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        want = 1.0 if not a and not b else 1 - levenshtein(a, b) / (len(a) + len(b))
        assert edit_similarity(a, b) == want
    assert abs(edit_similarity("kitten", "sitting") - 0.7692) <= 1e-4
    s = "self . x = foo ( a , b )".split()
    assert bleu4(s, s) == 1.0
    assert abs(mrr([3]) - 0.3333) <= 1e-4
    for seed in range(50):
        r = random.Random(seed)
        recs = [SampleRecord(str(j), r.choice([None, 1, 2, 3, 4, 5]), None, 0.0, 0.0, "", "")
                for j in range(r.randint(1, 40))]
        assert chain_holds(EvalReport.from_records(recs))


# ------------------------------------------------------------- criterion 8


def test_c8_transformer_beats_gru():
    files = [tokenize_file(t) for t in generate_corpus(200, seed=100)]
    train_files, valid_files = files[:180], files[180:]
    codec = build_codec("token", train_files)
    tr = [codec.encode_file(f) for f in train_files]
    va = [codec.encode_file(f) for f in valid_files]
    wins, table = 0, []
    for seed in range(5):
        losses = {}
        for arch in ("transformer", "gru"):
            cfg = ModelConfig(arch=arch, vocab_size=codec.size, pad_id=codec.pad_id, max_len=512)
            _, log = train(tr, cfg, TrainConfig(epochs=5, patience=0, seed=seed), va)
            losses[arch] = log.best_valid
        table.append(losses)
        wins += losses["transformer"] <= losses["gru"]
    assert wins >= 4, table


# ------------------------------------------------------------- criterion 9


def _pipeline(workdir: Path):
    env = dict(os.environ, LINECOMP_THREADS="1")

    def run(*args):
        out = subprocess.run([sys.executable, "-m", "linecomp.cli", *args], cwd=workdir, env=env,
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
    run("synth", "--out", "src", "--files", "12", "--seed", "9")
    run("prep", "src/manifest.tsv", "--out", "data", "--mode", "syntax")
    run("train", "--data", "data", "--checkpoint", "model.lcmp", "--epochs", "2", "--d-model", "16",
        "--d-embed", "16", "--d-ff", "32", "--n-heads", "2", "--n-layers", "1", "--max-len", "512")
    run("eval", "--checkpoint", "model.lcmp", "--limit", "8", "--max-target-len", "30", "--report",
        "report.json")
    return {p: (workdir / p).read_bytes()
            for p in ("model.lcmp", "report.json", "data/prep.json", "data/corpus.jsonl")}


def test_c9_determinism(tmp_path):
    a = _pipeline((tmp_path / "a").resolve() if (tmp_path / "a").mkdir() is None else None)
    b = _pipeline((tmp_path / "b").resolve() if (tmp_path / "b").mkdir() is None else None)
    for name in a:
        assert a[name] == b[name], name
    rep = EvalReport.from_dict(json.loads(a["report.json"]))
    assert chain_holds(rep)
