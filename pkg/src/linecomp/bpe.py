"""Byte-pair encoding over code tokens.

Classic word-internal formulation: each token is split into characters plus
an end-of-token sentinel, and merges never cross token boundaries. Reserved
markers (``<eol>``, ``<str>``, ...) are atomic and never split.
"""

from __future__ import annotations

import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import MalformedStream
from .kernels import bpe_apply, merge_pair
from .pycorpus import MARKERS

SENTINEL = "</w>"
HEADER = "#version: linecomp-bpe-1"


def _tie_key(pair):
    # Lexicographic, with the sentinel ordered after every character.
    return tuple(s.replace(SENTINEL, "\U0010ffff") for s in pair)


@dataclass
class MergeTable:
    merges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.rank = {}
        for i, pair in enumerate(self.merges):
            if pair in self.rank:
                raise ValueError(f"duplicate merge {pair}")
            self.rank[pair] = i

    def __len__(self):
        return len(self.merges)

    def save(self, path):
        lines = [HEADER] + [f"{a} {b}" for a, b in self.merges]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        merges = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            if not raw or raw.startswith("#"):
                continue
            a, b = raw.split(" ")
            merges.append((a, b))
        return cls(merges)


def learn_bpe(frequencies: Mapping[str, int], budget: int = 30_000) -> MergeTable:
    """Greedy merges of the most frequent adjacent pair.

    Stops after ``budget`` merges or once no pair occurs at least twice.
    """
    words = []
    counts = []
    for tok, n in frequencies.items():
        if tok in MARKERS or n <= 0 or not tok:
            continue
        words.append(tuple(tok) + (SENTINEL,))
        counts.append(n)
    pair_counts: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, w in enumerate(words):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += counts[wi]
            where[pair].add(wi)
    heap = [(-c, _tie_key(p), p) for p, c in pair_counts.items()]
    heapq.heapify(heap)
    merges: list[tuple[str, str]] = []
    while len(merges) < budget and heap:
        negc, _, pair = heapq.heappop(heap)
        current = pair_counts.get(pair, 0)
        if current != -negc:
            if current > 0:
                heapq.heappush(heap, (-current, _tie_key(pair), pair))
            continue
        if current < 2:
            break
        merges.append(pair)
        touched = set()
        for wi in sorted(where.pop(pair, ())):
            old = words[wi]
            new = merge_pair(old, pair[0], pair[1])
            if new == old:
                continue
            n = counts[wi]
            for p in zip(old, old[1:]):
                pair_counts[p] -= n
                touched.add(p)
            for p in zip(new, new[1:]):
                pair_counts[p] += n
                where[p].add(wi)
                touched.add(p)
            words[wi] = new
        pair_counts.pop(pair, None)
        for p in touched:
            c = pair_counts.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, _tie_key(p), p))
            else:
                pair_counts.pop(p, None)
    return MergeTable(merges)


def encode(token: str, table: MergeTable) -> list[str]:
    """Subtokens of one token; the last one carries the sentinel."""
    if token in MARKERS:
        return [token]
    return bpe_apply(list(token) + [SENTINEL], table.rank)


def encode_stream(tokens: Iterable[str], table: MergeTable) -> list[str]:
    out: list[str] = []
    for t in tokens:
        out.extend(encode(t, table))
    return out


def is_token_final(subtoken: str) -> bool:
    return subtoken in MARKERS or subtoken.endswith(SENTINEL)


def decode(subtokens: Iterable[str]) -> str:
    """Join the subtokens of a single token and strip the sentinel."""
    parts = list(subtokens)
    if len(parts) == 1 and parts[0] in MARKERS:
        return parts[0]
    if not parts or not parts[-1].endswith(SENTINEL):
        raise MalformedStream("subtoken stream does not end at a token boundary")
    text = "".join(parts)
    return text[: -len(SENTINEL)]


def decode_stream(subtokens: Iterable[str]) -> list[str]:
    """Split a multi-token subtoken stream back into tokens."""
    out: list[str] = []
    pending: list[str] = []
    for s in subtokens:
        if s in MARKERS:
            if pending:
                raise MalformedStream(f"marker {s} inside an unfinished token")
            out.append(s)
            continue
        pending.append(s)
        if s.endswith(SENTINEL):
            out.append(decode(pending))
            pending = []
    if pending:
        raise MalformedStream("subtoken stream ends inside a token")
    return out


def token_frequencies(corpus: Iterable[Iterable]) -> Counter:
    freq: Counter = Counter()
    for seq in corpus:
        for t in seq:
            freq[getattr(t, "text", t)] += 1
    return freq
