"""Symbol codecs: how logical lines become model symbols, per completion mode.

A codec owns the symbol vocabulary of one mode and knows

* how to encode a file (``<bos>`` followed by each line's indentation markers
  and statement symbols) and a completion context,
* which symbols may come next during generation (``allowed``) and when a
  generated line is finished (``advance``),
* how to turn a finished symbol sequence back into surface tokens.

Modes: ``token`` (one symbol per token, stop at ``<eol>``), ``bpe`` (subtokens,
stop at ``<eol>``) and ``syntax`` (ASDL actions, stop when the statement or
block header is complete).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import torch

from . import bpe as bpe_mod
from .asdl import (
    REDUCE,
    ApplyRule,
    AsdlGrammar,
    GenToken,
    Reduce,
    default_grammar,
    finalize_actions,
    initial_state,
    is_header_complete,
    load_grammar,
    step,
    token_accepts,
    valid_actions,
)
from .pycorpus import (
    BOS,
    DEDENT,
    EOL,
    INDENT,
    PAD,
    RESERVED,
    STR,
    UNK,
    LogicalLine,
    Token,
    TokenKind,
    Vocab,
    build_vocab,
)
from .pyparse import line_to_actions

MODES = ("token", "bpe", "syntax")
# Never generated: useless or structurally meaningless inside a line.
BANNED = (PAD, UNK, BOS, INDENT, DEDENT)


def split_context(tokens: Iterable) -> list[LogicalLine]:
    """Recover logical lines from a flat context stream.

    Returns the complete lines plus, as a final pseudo-line with no tokens,
    the indentation markers of the line being completed (possibly empty).
    """
    lines, indent, body = [], [], []
    for t in tokens:
        if not isinstance(t, Token):
            raise TypeError("context must hold Token objects")
        if t.kind in (TokenKind.Indent, TokenKind.Dedent) and not body:
            indent.append(t)
            continue
        body.append(t)
        if t.kind is TokenKind.Eol:
            lines.append(LogicalLine(tuple(body), indent=tuple(indent)))
            indent, body = [], []
    if body:
        raise ValueError("context ends inside a line")
    return lines, tuple(indent)


class Codec:
    mode: str = ""
    vocab: Vocab

    @property
    def size(self) -> int:
        return len(self.vocab)

    @property
    def pad_id(self) -> int:
        return self.offset + self.vocab.pad_id

    @property
    def bos_id(self) -> int:
        return self.offset + self.vocab.bos_id

    offset = 0

    # -- encoding
    def marker_ids(self, indent: Sequence[Token]) -> list[int]:
        return [self.offset + self.vocab.index(t.text) for t in indent]

    def line_ids(self, line: LogicalLine) -> list[int]:
        raise NotImplementedError

    def encode_file(self, lines: Sequence[LogicalLine]) -> list[int]:
        out = [self.bos_id]
        for ln in lines:
            out.extend(self.marker_ids(ln.indent))
            out.extend(self.line_ids(ln))
        return out

    def encode_context(self, context: Iterable[Token]) -> list[int]:
        lines, indent = split_context(context)
        return self.encode_file(lines) + self.marker_ids(indent)

    # -- generation
    def initial_state(self):
        return None

    def allowed(self, state) -> torch.Tensor:
        raise NotImplementedError

    def advance(self, state, symbol: int):
        """Return ``(new_state, finished)``."""
        raise NotImplementedError

    def render(self, symbols: Sequence[int]) -> list[str]:
        raise NotImplementedError

    def symbol_name(self, symbol: int) -> str:
        return self.vocab.entries[symbol - self.offset]

    # -- persistence
    def describe(self) -> dict:
        return {"mode": self.mode, "symbols": self.size}

    def _ban_mask(self) -> torch.Tensor:
        mask = torch.ones(self.size, dtype=torch.bool)
        for name in BANNED:
            if name in self.vocab:
                mask[self.offset + self.vocab.index(name)] = False
        return mask


class TokenCodec(Codec):
    mode = "token"

    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self._mask = self._ban_mask()

    @classmethod
    def build(cls, files: Sequence[Sequence[LogicalLine]], cap: int = 80_000):
        return cls(build_vocab(_texts_with_markers(files), cap))

    def line_ids(self, line):
        return self.vocab.encode(line.tokens)

    def allowed(self, state):
        return self._mask

    def advance(self, state, symbol):
        return None, symbol == self.vocab.eol_id

    def render(self, symbols):
        out = [self.vocab.entries[s] for s in symbols]
        if out and out[-1] == EOL:
            out.pop()
        return out

    def save(self, directory):
        self.vocab.save(Path(directory) / "vocab.txt")

    @classmethod
    def load(cls, directory):
        return cls(Vocab.load(Path(directory) / "vocab.txt"))


class BpeCodec(Codec):
    mode = "bpe"

    def __init__(self, table: bpe_mod.MergeTable, vocab: Vocab):
        self.table = table
        self.vocab = vocab
        base = self._ban_mask()
        final = torch.tensor(
            [bpe_mod.is_token_final(e) for e in vocab.entries], dtype=torch.bool
        )
        markers = torch.tensor([e in RESERVED for e in vocab.entries], dtype=torch.bool)
        bare = torch.tensor([e == bpe_mod.SENTINEL for e in vocab.entries], dtype=torch.bool)
        # At a token boundary anything but a bare sentinel may start; inside a
        # token only further subtokens may follow (no markers, no <eol>).
        self._at_boundary = base & ~bare
        self._inside = base & ~markers
        self._final = final

    @classmethod
    def build(cls, files, merges: int = 30_000):
        freq = bpe_mod.token_frequencies(ln.texts for f in files for ln in f)
        table = bpe_mod.learn_bpe(freq, merges)
        codec = cls(table, Vocab(list(RESERVED)))
        streams = ([t.text for t in ln.indent] + codec._subtokens(ln) for f in files for ln in f)
        return cls(table, build_vocab(streams, cap=10**9))

    def _subtokens(self, line):
        return bpe_mod.encode_stream((t.text for t in line.tokens), self.table)

    def line_ids(self, line):
        return self.vocab.encode(self._subtokens(line))

    def initial_state(self):
        return True  # at a token boundary

    def allowed(self, state):
        return self._at_boundary if state else self._inside

    def advance(self, state, symbol):
        return bool(self._final[symbol]), symbol == self.vocab.eol_id

    def render(self, symbols):
        subs = [self.vocab.entries[s] for s in symbols]
        if subs and subs[-1] == EOL:
            subs.pop()
        return bpe_mod.decode_stream(subs)

    def save(self, directory):
        self.table.save(Path(directory) / "merges.txt")
        self.vocab.save(Path(directory) / "vocab.txt")

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        return cls(bpe_mod.MergeTable.load(d / "merges.txt"), Vocab.load(d / "vocab.txt"))


class SyntaxCodec(Codec):
    """Symbols: productions ``0..P-1``, Reduce at ``P``, GenToken values from ``P+1``.

    The terminal vocabulary also carries the reserved and indentation markers,
    so the context stream of a file stays a single symbol sequence.
    """

    mode = "syntax"

    def __init__(self, grammar: AsdlGrammar, vocab: Vocab, grammar_text: str | None = None):
        self.grammar = grammar
        self.grammar_text = grammar_text
        self.vocab = vocab
        self.n_rules = len(grammar.productions)
        self.offset = self.n_rules + 1
        self._mask_cache: dict = {}
        self._type_masks: dict = {}
        self._line_cache: dict = {}
        self.mask_seconds = 0.0

    @property
    def size(self):
        return self.offset + len(self.vocab)

    @classmethod
    def build(cls, files, grammar: AsdlGrammar | None = None, cap: int = 80_000,
              grammar_text: str | None = None):
        grammar = grammar or default_grammar()
        codec = cls(grammar, Vocab(list(RESERVED)), grammar_text)
        streams = []
        for f in files:
            for ln in f:
                values = [a.value for a in codec.actions(ln) if isinstance(a, GenToken)]
                streams.append([t.text for t in ln.indent] + values)
        return cls(grammar, build_vocab(streams, cap), grammar_text)

    def actions(self, line: LogicalLine):
        key = tuple(t.text for t in line.tokens)
        acts = self._line_cache.get(key)
        if acts is None:
            acts = line_to_actions(line, self.grammar)
            self._line_cache[key] = acts
        return acts

    def action_id(self, action) -> int:
        if isinstance(action, ApplyRule):
            return action.production
        if isinstance(action, Reduce):
            return self.n_rules
        return self.offset + self.vocab.index(action.value)

    def action_of(self, symbol: int):
        if symbol < self.n_rules:
            return ApplyRule(symbol)
        if symbol == self.n_rules:
            return REDUCE
        return GenToken(self.vocab.entries[symbol - self.offset])

    def symbol_name(self, symbol):
        return str(self.action_of(symbol))

    def line_ids(self, line):
        return [self.action_id(a) for a in self.actions(line)]

    def initial_state(self):
        return initial_state(self.grammar)

    def _type_mask(self, type_name):
        m = self._type_masks.get(type_name)
        if m is None:
            m = torch.zeros(self.size, dtype=torch.bool)
            for j, v in enumerate(self.vocab.entries):
                if token_accepts(type_name, v):
                    m[self.offset + j] = True
            self._type_masks[type_name] = m
        return m

    def valid_mask(self, state) -> torch.Tensor:
        """Boolean mask over the symbol space for a non-complete parser state."""
        va = valid_actions(state, self.grammar)
        key = (va.rules, va.token_type, va.reduce)
        m = self._mask_cache.get(key)
        if m is None:
            m = torch.zeros(self.size, dtype=torch.bool)
            if va.rules:
                m[list(va.rules)] = True
            if va.reduce:
                m[self.n_rules] = True
            if va.token_type is not None:
                m |= self._type_mask(va.token_type)
            self._mask_cache[key] = m
        return m

    def allowed(self, state):
        return self.valid_mask(state)

    def advance(self, state, symbol):
        new = step(state, self.action_of(symbol), self.grammar)
        return new, new.complete or is_header_complete(new)

    def render(self, symbols):
        toks = finalize_actions([self.action_of(s) for s in symbols], self.grammar)
        return [t.text for t in toks]

    def save(self, directory):
        d = Path(directory)
        self.vocab.save(d / "actions_vocab.txt")
        if self.grammar_text is not None:
            (d / "grammar.asdl").write_text(self.grammar_text, encoding="utf-8")

    @classmethod
    def load(cls, directory, grammar_path=None):
        d = Path(directory)
        gpath = Path(grammar_path) if grammar_path else d / "grammar.asdl"
        if gpath.exists():
            text = gpath.read_text(encoding="utf-8")
            grammar = load_grammar(text)
        else:
            text, grammar = None, default_grammar()
        return cls(grammar, Vocab.load(d / "actions_vocab.txt"), text)


def _texts_with_markers(files):
    for f in files:
        for ln in f:
            yield [t.text for t in ln.indent] + ln.texts


def build_codec(mode: str, files, *, vocab_cap=80_000, bpe_merges=30_000,
                grammar: AsdlGrammar | None = None, grammar_text: str | None = None) -> Codec:
    if mode == "token":
        return TokenCodec.build(files, vocab_cap)
    if mode == "bpe":
        return BpeCodec.build(files, bpe_merges)
    if mode == "syntax":
        return SyntaxCodec.build(files, grammar, vocab_cap, grammar_text)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def save_codec(codec: Codec, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    codec.save(d)
    (d / "codec.json").write_text(json.dumps({"mode": codec.mode}) + "\n", encoding="utf-8")


def load_codec(directory, grammar_path=None) -> Codec:
    d = Path(directory)
    mode = json.loads((d / "codec.json").read_text(encoding="utf-8"))["mode"]
    if mode == "token":
        return TokenCodec.load(d)
    if mode == "bpe":
        return BpeCodec.load(d)
    if mode == "syntax":
        return SyntaxCodec.load(d, grammar_path)
    raise ValueError(f"unknown mode {mode!r}")


__all__ = [
    "MODES", "BANNED", "Codec", "TokenCodec", "BpeCodec", "SyntaxCodec",
    "build_codec", "save_codec", "load_codec", "split_context", "STR",
]
