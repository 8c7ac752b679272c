"""Completion metrics: exact match (with/without identifiers), MRR, BLEU-4,
character-level edit similarity, and the aggregated evaluation report."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ContextTooLong, EmptyTarget, LinecompError
from .kernels import levenshtein
from .pycorpus import TokenKind, classify_text, detokenize

TOP_K = 5
PLACEHOLDER = "<id>"


def _texts(tokens) -> list[str]:
    return [getattr(t, "text", t) for t in tokens]


def anonymize(tokens) -> list[str]:
    """Replace every identifier (names and attributes alike) by one placeholder."""
    return [PLACEHOLDER if classify_text(t) is TokenKind.Identifier else t for t in _texts(tokens)]


def exact_match(candidates: Sequence[Sequence], target: Sequence, anonymize_ids: bool = False,
                k: int = TOP_K) -> int | None:
    """1-based rank of the first candidate equal to ``target`` within the top ``k``."""
    norm = anonymize if anonymize_ids else _texts
    want = norm(target)
    for rank, cand in enumerate(candidates[:k], 1):
        if norm(cand) == want:
            return rank
    return None


def mrr(ranks: Iterable[int | None]) -> float:
    ranks = list(ranks)
    if not ranks:
        return 0.0
    return sum(1.0 / r for r in ranks if r) / len(ranks)


def _ngrams(seq, n):
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def _brevity(c: int, r: int) -> float:
    if c == 0:
        return 0.0
    return 1.0 if c > r else math.exp(1.0 - r / c)


def bleu4(candidate: Sequence, target: Sequence) -> float:
    """Sentence BLEU-4 with add-one smoothing of orders that have no match.

    Order n contributes m_n / c_n (clipped matches over candidate n-grams);
    when m_n = 0 it contributes 1 / (c_n + 1) instead. An empty candidate
    scores 0.
    """
    cand, ref = _texts(candidate), _texts(target)
    if not ref:
        raise EmptyTarget("BLEU needs a non-empty target")
    if not cand:
        return 0.0
    log_p = 0.0
    for n in range(1, 5):
        c_ng, r_ng = _ngrams(cand, n), _ngrams(ref, n)
        total = sum(c_ng.values())
        matched = sum(min(c, r_ng[g]) for g, c in c_ng.items())
        p = matched / total if matched else 1.0 / (total + 1)
        log_p += 0.25 * math.log(p)
    return _brevity(len(cand), len(ref)) * math.exp(log_p)


def corpus_bleu4(pairs: Iterable[tuple[Sequence, Sequence]]) -> float:
    """Unsmoothed corpus-level BLEU-4 (zero if any order has no match)."""
    matched = [0] * 4
    total = [0] * 4
    c_len = r_len = 0
    for candidate, target in pairs:
        cand, ref = _texts(candidate), _texts(target)
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, 5):
            c_ng, r_ng = _ngrams(cand, n), _ngrams(ref, n)
            total[n - 1] += sum(c_ng.values())
            matched[n - 1] += sum(min(c, r_ng[g]) for g, c in c_ng.items())
    if not all(matched):
        return 0.0
    log_p = sum(0.25 * math.log(m / t) for m, t in zip(matched, total))
    return _brevity(c_len, r_len) * math.exp(log_p)


def edit_similarity(candidate: str, target: str) -> float:
    """1 - lev / (|candidate| + |target|); two empty strings are identical (1.0)."""
    denom = len(candidate) + len(target)
    if denom == 0:
        return 1.0
    return 1.0 - levenshtein(candidate, target) / denom


# ------------------------------------------------------------------ report


@dataclass
class SampleRecord:
    sample_id: str
    rank: int | None
    rank_no_id: int | None
    bleu: float
    edit_sim: float
    target: str
    prediction: str
    error: str | None = None

    def as_dict(self):
        return dict(self.__dict__)


METRIC_KEYS = ("acc1", "acc1_no_id", "acc5", "acc5_no_id", "mrr", "bleu4", "edit_sim")


@dataclass
class EvalReport:
    acc1: float
    acc1_no_id: float
    acc5: float
    acc5_no_id: float
    mrr: float
    bleu4: float
    edit_sim: float
    n_samples: int
    n_failures: int = 0
    bleu4_corpus: float = 0.0
    records: list[SampleRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord], bleu4_corpus: float = 0.0,
                     config: dict | None = None) -> "EvalReport":
        n = len(records)

        def pct(x):
            return 100.0 * x / n if n else 0.0

        return cls(
            acc1=pct(sum(r.rank == 1 for r in records)),
            acc1_no_id=pct(sum(r.rank_no_id == 1 for r in records)),
            acc5=pct(sum(r.rank is not None for r in records)),
            acc5_no_id=pct(sum(r.rank_no_id is not None for r in records)),
            mrr=pct(sum(1.0 / r.rank for r in records if r.rank)),
            bleu4=pct(sum(r.bleu for r in records)),
            edit_sim=pct(sum(r.edit_sim for r in records)),
            n_samples=n,
            n_failures=sum(r.error is not None for r in records),
            bleu4_corpus=100.0 * bleu4_corpus,
            records=list(records),
            config=dict(config or {}),
        )

    def headline(self) -> dict:
        return {k: round(getattr(self, k), 2) for k in METRIC_KEYS}

    def to_dict(self) -> dict:
        return {
            "metrics": self.headline(),
            "metrics_exact": {k: getattr(self, k) for k in METRIC_KEYS},
            "bleu4_corpus_unsmoothed": round(self.bleu4_corpus, 2),
            "n_samples": self.n_samples,
            "n_failures": self.n_failures,
            "config": self.config,
            "samples": [r.as_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        recs = [SampleRecord(**r) for r in d["samples"]]
        rep = cls.from_records(recs, d.get("bleu4_corpus_unsmoothed", 0.0) / 100.0, d.get("config"))
        return rep


def format_table(reports: dict[str, EvalReport]) -> str:
    """Markdown comparison table of the headline metrics (percentages)."""
    head = ["Model", "acc@1", "acc@1 w/o id", "acc@5", "acc@5 w/o id", "MRR", "BLEU-4", "EditSim"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for name, r in reports.items():
        vals = [f"{getattr(r, k):.2f}" for k in METRIC_KEYS]
        lines.append("| " + " | ".join([name] + vals) + " |")
    return "\n".join(lines)


def score_sample(sample_id: str, candidates: Sequence[Sequence[str]], target: Sequence[str],
                 error: str | None = None) -> SampleRecord:
    target = _texts(target)
    top = list(candidates[0]) if candidates else []
    tgt_text, pred_text = detokenize(target), detokenize(top)
    return SampleRecord(
        sample_id=sample_id,
        rank=exact_match(candidates, target),
        rank_no_id=exact_match(candidates, target, anonymize_ids=True),
        bleu=bleu4(top, target) if target else 0.0,
        edit_sim=edit_similarity(pred_text, tgt_text),
        target=tgt_text,
        prediction=pred_text,
        error=error,
    )


def evaluate(samples, model, codec, beam_width: int = 5, max_target_len: int = 100,
             config: dict | None = None) -> EvalReport:
    """Decode every sample and aggregate the metric suite.

    Decoding failures are recorded on the sample and scored as zero credit.
    """
    from .decode import complete_line

    records, pairs = [], []
    for s in samples:
        target = s.target_texts
        cands, error = [], None
        try:
            ctx = codec.encode_context(s.context)
            room = model.cfg.max_len - len(ctx)
            if room <= 0:
                raise ContextTooLong(f"context of {len(ctx)} symbols fills max_len")
            found = complete_line(model, codec, ctx, beam_width, min(max_target_len, room))
            cands = [c.tokens for c in found if c.finished]
            if not cands:
                error = "no finished hypothesis"
        except LinecompError as exc:
            error = f"{type(exc).__name__}: {exc}"
        rec = score_sample(s.sample_id, cands, target, error)
        if error:
            rec.bleu, rec.edit_sim, rec.rank, rec.rank_no_id = 0.0, 0.0, None, None
        records.append(rec)
        pairs.append((cands[0] if cands else [], target))
    return EvalReport.from_records(records, corpus_bleu4(pairs), config)
