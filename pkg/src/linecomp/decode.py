"""Beam-search line generation in token, BPE and grammar-masked syntax modes."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from typing import Sequence

import torch

from .asdl import AsdlGrammar, ParserState
from .codecs import Codec, SyntaxCodec
from .errors import ContextTooLong, LinecompError
from .neural import LanguageModel, Scorer

NEG_INF = float("-inf")


class NoFinishedHypothesis(LinecompError):
    """No hypothesis reached a stop state within the length cap."""


@dataclass
class Candidate:
    tokens: list[str]
    score: float
    symbols: tuple[int, ...]
    mode: str
    finished: bool = True

    def as_dict(self):
        return {"tokens": self.tokens, "score": self.score, "mode": self.mode,
                "finished": self.finished}


@dataclass
class Hypothesis:
    symbols: tuple[int, ...]
    score: float
    finished: bool
    state: object = None        # codec state (ParserState in syntax mode)
    lm_state: object = None     # scorer state
    order: int = 0              # emission index, breaks score ties


def masked_log_probs(log_probs: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
    """Set disallowed symbols to -inf and renormalize over the rest."""
    return torch.log_softmax(log_probs.masked_fill(~allowed, NEG_INF), dim=-1)


def masked_distribution(log_probs: torch.Tensor, state: ParserState, grammar: AsdlGrammar | SyntaxCodec,
                        codec: SyntaxCodec | None = None) -> torch.Tensor:
    """Renormalized log-probabilities over the actions valid in ``state``.

    ``grammar`` may be the syntax codec itself (which owns the grammar and
    the symbol layout). Raises CompleteState for a finished parser state.
    """
    codec = grammar if isinstance(grammar, SyntaxCodec) else codec
    if codec is None:
        raise TypeError("masked_distribution needs a SyntaxCodec for the symbol layout")
    return masked_log_probs(log_probs, codec.valid_mask(state))


def complete_line(model: LanguageModel, codec: Codec, context: Sequence[int], beam_width: int = 5,
                  max_target_len: int = 100, length_norm: bool = False) -> list[Candidate]:
    """Ranked candidate lines for the line following ``context``.

    ``max_target_len`` counts every generated symbol including the stop
    symbol. When nothing finishes within the cap, the best unfinished
    hypothesis is returned with ``finished=False``.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be at least 1")
    if len(context) + max_target_len > model.cfg.max_len:
        raise ContextTooLong(
            f"context of {len(context)} symbols leaves no room for {max_target_len} more")
    scorer = Scorer(model, context)
    live = [Hypothesis((), 0.0, False, codec.initial_state(), scorer.initial())]
    pool: list[Hypothesis] = []
    order = 0

    def key(h):
        s = h.score / max(len(h.symbols), 1) if length_norm else h.score
        return (-s, h.order)

    for _ in range(max_target_len):
        lp = scorer.log_probs([h.lm_state for h in live])
        expansions = []
        for b, h in enumerate(live):
            dist = masked_log_probs(lp[b], codec.allowed(h.state))
            k = min(beam_width, int(torch.isfinite(dist).sum()))
            if k == 0:
                continue
            vals, idx = torch.topk(dist, k)
            for v, s in zip(vals.tolist(), idx.tolist()):
                expansions.append((h.score + v, b, s))
        # Stable: equal scores keep parent order then symbol order.
        expansions.sort(key=lambda e: (-e[0], e[1], e[2]))
        next_live: list[Hypothesis] = []
        grow: list[tuple[int, int]] = []
        for score, b, s in expansions:
            parent = live[b]
            state, finished = codec.advance(parent.state, s)
            if finished:
                order += 1
                pool.append(Hypothesis(parent.symbols + (s,), score, True, state, None, order))
            elif len(next_live) < beam_width:
                order += 1
                next_live.append(Hypothesis(parent.symbols + (s,), score, False, state, None, order))
                grow.append((b, s))
        pool.sort(key=key)
        del pool[beam_width:]
        if not next_live:
            live = []
            break
        states = scorer.extend([live[b].lm_state for b, _ in grow], [s for _, s in grow])
        for h, st in zip(next_live, states):
            h.lm_state = st
        live = next_live
        if not length_norm and len(pool) >= beam_width and live[0].score <= pool[-1].score:
            break
    if pool:
        return [Candidate(codec.render(h.symbols), h.score, h.symbols, codec.mode) for h in pool]
    if not live:
        raise NoFinishedHypothesis("every hypothesis was pruned before finishing")
    best = min(live, key=key)
    return [Candidate(_render_partial(codec, best.symbols), best.score, best.symbols,
                      codec.mode, finished=False)]


def _render_partial(codec: Codec, symbols) -> list[str]:
    try:
        return codec.render(symbols)
    except LinecompError:
        return [codec.symbol_name(s) for s in symbols]


# ---------------------------------------------------------------- benchmark


@dataclass
class BenchResult:
    name: str
    mode: str
    mean_seconds: float
    n_lines: int
    beam_width: int
    mask_share: float | None = None
    runs: list = field(default_factory=list)

    def as_dict(self):
        return {"name": self.name, "mode": self.mode, "mean_seconds": self.mean_seconds,
                "n_lines": self.n_lines, "beam_width": self.beam_width,
                "mask_share": self.mask_share}


def _timed_masks(codec: Codec):
    """Wrap ``codec.allowed`` so time spent computing masks is accumulated."""
    spent = [0.0]
    original = codec.allowed

    def allowed(state):
        t = time.perf_counter()
        try:
            return original(state)
        finally:
            spent[0] += time.perf_counter() - t

    codec.allowed = allowed
    return spent, original


def bench_inference(models: dict[str, tuple[LanguageModel, Codec]], contexts: dict[str, list[list[int]]],
                    beam_width: int = 5, max_target_len: int = 100, warmup: int = 1) -> list[BenchResult]:
    """Mean wall-clock seconds of ``complete_line`` per sample for each model.

    ``contexts[name]`` holds the encoded contexts for that model's codec.
    For syntax mode the share of time spent building action masks is also
    reported.
    """
    results = []
    for name, (model, codec) in models.items():
        ctxs = contexts[name]
        for c in ctxs[:warmup]:
            complete_line(model, codec, c, beam_width, max_target_len)
        spent, original = _timed_masks(codec)
        if isinstance(codec, SyntaxCodec):
            codec._mask_cache.clear()  # include cold mask construction
        try:
            times = []
            for c in ctxs:
                t = time.perf_counter()
                complete_line(model, codec, c, beam_width, max_target_len)
                times.append(time.perf_counter() - t)
        finally:
            codec.allowed = original
        total = sum(times)
        results.append(BenchResult(
            name, codec.mode, statistics.fmean(times) if times else 0.0, len(times), beam_width,
            spent[0] / total if (total and isinstance(codec, SyntaxCodec)) else None, times))
    return results


def format_bench_table(results: Sequence[BenchResult]) -> str:
    lines = ["| Model | Mode | Beam | Lines | Time (s/line) | Mask share |",
             "|---|---|---|---|---|---|"]
    for r in results:
        share = f"{100 * r.mask_share:.1f}%" if r.mask_share is not None else "-"
        lines.append(f"| {r.name} | {r.mode} | {r.beam_width} | {r.n_lines} | "
                     f"{r.mean_seconds:.4f} | {share} |")
    return "\n".join(lines)
