"""Corpus ingestion: lexing into logical lines, vocabularies and sample extraction.

The lexer covers a Python subset: names, keywords, int/float/imaginary
literals, every single/double/triple-quoted string flavour (with r/b/u/f
prefixes), operators and delimiters, ``#`` comments, indentation, and both
backslash and bracket continuations. String literals are masked to ``<str>``
and every logical line is terminated by ``<eol>``.
"""

from __future__ import annotations

import enum
import keyword
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpus, LexError, LinecompError

PAD, UNK, BOS, EOL, STR = "<pad>", "<unk>", "<bos>", "<eol>", "<str>"
INDENT, DEDENT = "<indent>", "<dedent>"

# Fixed order; index = position in this tuple.
RESERVED = (PAD, UNK, BOS, EOL, STR)
MARKERS = frozenset(RESERVED) | {INDENT, DEDENT}

KEYWORDS = frozenset(keyword.kwlist)
# Parsed as Name terminals, so they count as identifier-like values.
NAME_CONSTANTS = frozenset({"True", "False", "None"})

COMPOUND_KEYWORDS = frozenset(
    {"def", "if", "elif", "else", "for", "while", "class", "try", "except", "finally", "with"}
)

OPERATORS = frozenset(
    "+ - * ** / // % @ << >> & | ^ ~ := < > <= >= == !=".split()
)
DELIMITERS = frozenset(
    "( ) [ ] { } , : . ; = -> ... += -= *= /= //= %= @= &= |= ^= >>= <<= **=".split()
)
_PUNCT = sorted(OPERATORS | DELIMITERS, key=len, reverse=True)
_PUNCT_RE = re.compile("|".join(re.escape(p) for p in _PUNCT))

_NUMBER_RE = re.compile(
    r"""
    0[xX][0-9a-fA-F_]+[lL]?
  | 0[oO][0-7_]+
  | 0[bB][01_]+
  | (?:\d[\d_]*\.(?!\.)[\d_]*|\.\d[\d_]*|\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[jJlL]?
    """,
    re.VERBOSE,
)
_NAME_RE = re.compile(r"[^\W\d]\w*")
_STRING_PREFIX_RE = re.compile(r"(?:[rRbBuUfF]{1,2})?(?='|\")")
_VALID_PREFIXES = frozenset(
    {"", "r", "u", "b", "f", "br", "rb", "fr", "rf"}
)
_NUMBER_FULL_RE = re.compile(_NUMBER_RE.pattern, re.VERBOSE)

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}


class TokenKind(enum.Enum):
    Identifier = "identifier"
    Keyword = "keyword"
    NumberLiteral = "number"
    StringLiteral = "string"
    Operator = "operator"
    Delimiter = "delimiter"
    Indent = "indent"
    Dedent = "dedent"
    Eol = "eol"
    Special = "special"


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    kind: TokenKind

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")

    def __str__(self):
        return self.text


class LineCategory(enum.Enum):
    Simple = "simple"
    CompoundHeader = "compound_header"


@dataclass(frozen=True)
class LogicalLine:
    """One statement, possibly spanning several physical lines.

    ``indent`` holds the Indent/Dedent tokens that precede the statement; they
    belong to the context stream, never to the statement itself.
    """

    tokens: tuple[Token, ...]
    source_span: tuple[int, int] = (0, 0)
    indent: tuple[Token, ...] = ()
    category: LineCategory = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        eols = [i for i, t in enumerate(self.tokens) if t.kind is TokenKind.Eol]
        if eols != [len(self.tokens) - 1]:
            raise ValueError("a logical line needs exactly one <eol>, in final position")
        if self.category is None:
            object.__setattr__(self, "category", classify_line(self))

    @property
    def body(self) -> tuple[Token, ...]:
        """Statement tokens without the trailing ``<eol>``."""
        return self.tokens[:-1]

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def __len__(self):
        return len(self.tokens)


def classify_text(text: str) -> TokenKind:
    """Token kind of a bare token string (used for rendered or stored tokens)."""
    if text == EOL:
        return TokenKind.Eol
    if text == INDENT:
        return TokenKind.Indent
    if text == DEDENT:
        return TokenKind.Dedent
    if text == STR:
        return TokenKind.StringLiteral
    if text in MARKERS:
        return TokenKind.Special
    if text in KEYWORDS:
        return TokenKind.Keyword
    if text in OPERATORS:
        return TokenKind.Operator
    if text in DELIMITERS:
        return TokenKind.Delimiter
    if _NUMBER_FULL_RE.fullmatch(text):
        return TokenKind.NumberLiteral
    if text.isidentifier():
        return TokenKind.Identifier
    return TokenKind.Special


def make_token(text: str) -> Token:
    return Token(text, classify_text(text))


def is_identifier_text(text: str) -> bool:
    return text.isidentifier() and (text not in KEYWORDS or text in NAME_CONSTANTS)


def is_number_text(text: str) -> bool:
    return bool(_NUMBER_FULL_RE.fullmatch(text))


EOL_TOKEN = Token(EOL, TokenKind.Eol)
INDENT_TOKEN = Token(INDENT, TokenKind.Indent)
DEDENT_TOKEN = Token(DEDENT, TokenKind.Dedent)
STR_TOKEN = Token(STR, TokenKind.StringLiteral)


def _scan_string(text, pos, line, quote_start):
    """Return (end position, newlines consumed) for a string starting at quote_start."""
    q = text[quote_start]
    triple = text.startswith(q * 3, quote_start)
    delim = q * 3 if triple else q
    p = quote_start + len(delim)
    newlines = 0
    n = len(text)
    while p < n:
        c = text[p]
        if c == "\\":
            if p + 1 < n and text[p + 1] == "\n":
                newlines += 1
            p += 2
            continue
        if c == "\n":
            if not triple:
                break
            newlines += 1
        elif text.startswith(delim, p):
            return p + len(delim), newlines
        p += 1
    raise LexError((line, pos), "unterminated string literal")


def tokenize_file(source_text: str) -> list[LogicalLine]:
    """Split source text into logical lines of masked tokens."""
    text = source_text.replace("\r\n", "\n").replace("\r", "\n")
    n = len(text)
    pos = 0
    line = 1
    line_start = 0
    brackets: list[str] = []
    indents = [0]
    out: list[LogicalLine] = []
    current: list[Token] = []
    pending: list[Token] = []
    start_line = last_line = 1
    at_bol = True

    def col(p):
        return p - line_start

    def finish():
        nonlocal current, pending
        current.append(EOL_TOKEN)
        out.append(LogicalLine(tuple(current), (start_line, last_line), tuple(pending)))
        current, pending = [], []

    while pos < n:
        if at_bol:
            width = 0
            p = pos
            while p < n and text[p] in " \t\f":
                ch = text[p]
                if ch == " ":
                    width += 1
                elif ch == "\t":
                    width = (width // 8 + 1) * 8
                else:
                    width = 0
                p += 1
            if p >= n:
                break
            if text[p] == "\n":
                pos = p + 1
                line += 1
                line_start = pos
                continue
            if text[p] == "#":
                end = text.find("\n", p)
                pos = n if end < 0 else end
                continue
            if width > indents[-1]:
                indents.append(width)
                pending.append(INDENT_TOKEN)
            else:
                while width < indents[-1]:
                    indents.pop()
                    pending.append(DEDENT_TOKEN)
                if width != indents[-1]:
                    raise LexError((line, width), "inconsistent indentation")
            at_bol = False
            start_line = line
            pos = p
            continue

        c = text[pos]
        if c in " \t\f":
            pos += 1
            continue
        if c == "#":
            end = text.find("\n", pos)
            pos = n if end < 0 else end
            continue
        if c == "\\":
            if pos + 1 < n and text[pos + 1] == "\n":
                pos += 2
                line += 1
                line_start = pos
                continue
            raise LexError((line, col(pos)), "stray backslash")
        if c == "\n":
            pos += 1
            line += 1
            line_start = pos
            if brackets:
                continue
            if current:
                finish()
            at_bol = True
            continue

        m = _STRING_PREFIX_RE.match(text, pos)
        if m and m.group(0).lower() in _VALID_PREFIXES:
            end, newlines = _scan_string(text, col(pos), line, m.end())
            pos = end
            if newlines:
                line += newlines
                line_start = text.rfind("\n", 0, pos) + 1
            current.append(STR_TOKEN)
            last_line = line
            continue
        m = _NUMBER_RE.match(text, pos)
        if m and (c.isdigit() or (c == "." and pos + 1 < n and text[pos + 1].isdigit())):
            current.append(Token(m.group(0), TokenKind.NumberLiteral))
            pos = m.end()
            last_line = line
            continue
        m = _NAME_RE.match(text, pos)
        if m:
            word = m.group(0)
            kind = TokenKind.Keyword if word in KEYWORDS else TokenKind.Identifier
            current.append(Token(word, kind))
            pos = m.end()
            last_line = line
            continue
        m = _PUNCT_RE.match(text, pos)
        if m:
            p = m.group(0)
            if p in _OPEN:
                brackets.append(p)
            elif p in _CLOSE:
                if not brackets or brackets[-1] != _CLOSE[p]:
                    raise LexError((line, col(pos)), f"unbalanced {p!r}")
                brackets.pop()
            kind = TokenKind.Operator if p in OPERATORS else TokenKind.Delimiter
            current.append(Token(p, kind))
            pos = m.end()
            last_line = line
            continue
        raise LexError((line, col(pos)), f"illegal character {c!r}")

    if brackets:
        raise LexError((line, col(pos)), f"unclosed {brackets[-1]!r} at end of file")
    if current:
        finish()
    return out


def classify_line(line) -> LineCategory:
    """CompoundHeader iff the line opens with a block keyword and ends with ``:``."""
    toks = [t.text if isinstance(t, Token) else t for t in getattr(line, "tokens", line)]
    if toks and toks[-1] == EOL:
        toks = toks[:-1]
    if len(toks) >= 2 and toks[0] in COMPOUND_KEYWORDS and toks[-1] == ":":
        return LineCategory.CompoundHeader
    return LineCategory.Simple


_NO_SPACE_AFTER = frozenset({"(", "[", "{", "."})
_NO_SPACE_BEFORE = frozenset({")", "]", "}", ",", ":", "."})


def detokenize(tokens: Iterable, source: bool = False) -> str:
    """Canonical one-line rendering of a token sequence.

    Single spaces, except none after an opening bracket or ``.``, none before a
    closing bracket, ``,``, ``:`` or ``.``, and none around ``=`` directly
    inside call/definition parentheses. With ``source=True`` masked strings
    are written as a quoted literal so the text lexes back to ``<str>``.
    """
    texts = [t.text if isinstance(t, Token) else t for t in tokens]
    texts = [t for t in texts if t not in (EOL, INDENT, DEDENT)]
    out: list[str] = []
    stack: list[str] = []
    prev = None
    for tok in texts:
        if prev is not None:
            space = not (prev in _NO_SPACE_AFTER or tok in _NO_SPACE_BEFORE)
            if tok == "." and is_number_text(prev):
                space = True
            if stack and stack[-1] == "call" and (tok == "=" or prev == "="):
                space = False
            if space:
                out.append(" ")
        out.append('"<str>"' if source and tok == STR else tok)
        if tok == "(":
            callish = prev is not None and (prev in (")", "]") or is_identifier_text(prev))
            stack.append("call" if callish and prev not in KEYWORDS else "(")
        elif tok in ("[", "{"):
            stack.append(tok)
        elif tok in (")", "]", "}") and stack:
            stack.pop()
        prev = tok
    return "".join(out)


def render_source(lines: Sequence[LogicalLine]) -> str:
    """Rebuild source text (4-space indentation) from logical lines."""
    level = 0
    out = []
    for ln in lines:
        for t in ln.indent:
            level += 1 if t.kind is TokenKind.Indent else -1
        out.append("    " * level + detokenize(ln.tokens, source=True))
    return "\n".join(out) + ("\n" if out else "")


def flatten(lines: Iterable[LogicalLine]) -> list[Token]:
    """Context stream: each line's indentation markers followed by its tokens."""
    out: list[Token] = []
    for ln in lines:
        out.extend(ln.indent)
        out.extend(ln.tokens)
    return out


# ---------------------------------------------------------------- vocabulary


class Vocab:
    """Token <-> index mapping with the reserved markers at the lowest indices."""

    def __init__(self, entries: Sequence[str]):
        entries = list(entries)
        if tuple(entries[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"vocab must start with {RESERVED}")
        self.entries = entries
        self.lookup = {}
        for i, e in enumerate(entries):
            if e in self.lookup:
                raise ValueError(f"duplicate vocab entry {e!r}")
            self.lookup[e] = i

    pad_id = RESERVED.index(PAD)
    unk_id = RESERVED.index(UNK)
    bos_id = RESERVED.index(BOS)
    eol_id = RESERVED.index(EOL)
    str_id = RESERVED.index(STR)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.lookup

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.entries == other.entries

    def index(self, token: str) -> int:
        return self.lookup.get(token, self.unk_id)

    def encode(self, tokens: Iterable) -> list[int]:
        return [self.index(t.text if isinstance(t, Token) else t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.entries[i] for i in ids]

    def save(self, path):
        Path(path).write_text("\n".join(self.entries) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.split("\n")[:-1])


def build_vocab(corpus: Iterable[Iterable], cap: int = 80_000) -> Vocab:
    """Reserved markers plus the ``cap - 5`` most frequent tokens.

    Ties are broken by first occurrence in the corpus.
    """
    if cap <= len(RESERVED):
        raise ValueError(f"cap must exceed the {len(RESERVED)} reserved entries")
    counts: Counter = Counter()
    first: dict[str, int] = {}
    for seq in corpus:
        for t in seq:
            text = t.text if isinstance(t, Token) else t
            counts[text] += 1
            if text not in first:
                first[text] = len(first)
    if not counts:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    ranked = sorted(
        (t for t in counts if t not in RESERVED), key=lambda t: (-counts[t], first[t])
    )
    return Vocab(list(RESERVED) + ranked[: cap - len(RESERVED)])


# ------------------------------------------------------------------- samples


@dataclass(frozen=True)
class CompletionSample:
    context: tuple[Token, ...]
    target: LogicalLine
    file_id: str
    k: int

    @property
    def target_texts(self) -> list[str]:
        return [t.text for t in self.target.body]

    @property
    def sample_id(self) -> str:
        return f"{self.file_id}:{self.k}"


MAX_TARGET_TOKENS = 100


def is_import(line: LogicalLine) -> bool:
    return bool(line.tokens) and line.tokens[0].text in ("import", "from")


def extract_samples(
    file: Sequence[LogicalLine], max_len: int = 1500, file_id: str = ""
) -> list[CompletionSample]:
    """Samples (first k lines -> line k+1) for k = 1..N-1, minus exclusions.

    The context also carries the indentation markers that precede the target,
    since the editor already knows where the next line starts.
    """
    samples = []
    stream: list[Token] = []
    for k in range(1, len(file)):
        prev = file[k - 1]
        stream.extend(prev.indent)
        stream.extend(prev.tokens)
        target = file[k]
        if is_import(target) or len(target.body) > MAX_TARGET_TOKENS:
            continue
        context = tuple(stream) + target.indent
        if len(context) + len(target.tokens) > max_len:
            continue
        samples.append(CompletionSample(context, target, file_id, k))
    return samples


@dataclass
class CorpusStats:
    n_files: int
    avg_lines_per_file: float
    avg_tokens_per_statement: float
    avg_actions_per_statement: float
    skipped_files: int = 0

    def as_dict(self):
        return {
            "n_files": self.n_files,
            "avg_lines_per_file": round(self.avg_lines_per_file, 4),
            "avg_tokens_per_statement": round(self.avg_tokens_per_statement, 4),
            "avg_actions_per_statement": round(self.avg_actions_per_statement, 4),
            "skipped_files": self.skipped_files,
        }


def corpus_stats(corpus: Sequence[Sequence[LogicalLine]], grammar=None) -> CorpusStats:
    """Per-file and per-statement averages; files that fail to parse are skipped with a warning."""
    from .asdl import default_grammar
    from .pyparse import line_to_actions

    grammar = grammar or default_grammar()
    n_lines = n_tokens = n_actions = n_stmts = n_files = skipped = 0
    for lines in corpus:
        try:
            actions = [len(line_to_actions(ln, grammar)) for ln in lines]
        except LinecompError:
            skipped += 1
            continue
        n_files += 1
        n_lines += len(lines)
        n_stmts += len(lines)
        n_tokens += sum(len(ln.body) for ln in lines)
        n_actions += sum(actions)
    if skipped:
        warnings.warn(f"corpus_stats skipped {skipped} unparseable file(s)", stacklevel=2)
    return CorpusStats(
        n_files=n_files,
        avg_lines_per_file=n_lines / n_files if n_files else 0.0,
        avg_tokens_per_statement=n_tokens / n_stmts if n_stmts else 0.0,
        avg_actions_per_statement=n_actions / n_stmts if n_stmts else 0.0,
        skipped_files=skipped,
    )


# -------------------------------------------------------------------- on-disk


def read_manifest(path) -> list[tuple[str, str]]:
    """Records ``<split>\\t<path>``; blank lines and ``#`` comments ignored."""
    records = []
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or parts[0] not in ("train", "valid", "test"):
            raise ValueError(f"{path}:{i}: expected '<split>\\t<path>'")
        records.append((parts[0], parts[1]))
    return records


def format_line(line: LogicalLine) -> str:
    """One logical line as space-separated tokens, indentation markers first."""
    return " ".join(t.text for t in (*line.indent, *line.tokens))


def parse_line(text: str) -> LogicalLine:
    toks = [make_token(t) for t in text.split(" ")]
    k = 0
    while k < len(toks) and toks[k].kind in (TokenKind.Indent, TokenKind.Dedent):
        k += 1
    return LogicalLine(tuple(toks[k:]), indent=tuple(toks[:k]))


def write_tokenized(lines: Sequence[LogicalLine], path):
    Path(path).write_text("".join(format_line(ln) + "\n" for ln in lines), encoding="utf-8")


def read_tokenized(path) -> list[LogicalLine]:
    return [parse_line(raw) for raw in Path(path).read_text(encoding="utf-8").splitlines()]
