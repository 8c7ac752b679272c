"""Seeded generator of small Python-subset source files.

Used to build toy corpora of controlled size: the memorization corpus and a
medium corpus for architecture comparisons. Every generated file tokenizes
and parses under the bundled grammar.
"""

from __future__ import annotations

import random
from importlib.resources import files as _resource_files
from pathlib import Path

from .asdl import default_grammar
from .errors import LinecompError
from .pycorpus import LogicalLine, tokenize_file
from .pyparse import parse_file

NOUNS = ["item", "value", "count", "total", "name", "data", "result", "index", "size", "key",
         "node", "path", "text", "score", "price", "user", "order", "record", "limit", "step"]
VERBS = ["get", "load", "compute", "update", "parse", "build", "check", "find", "add",
         "remove", "process", "save", "merge", "scale"]
MODULES = ["os", "sys", "math", "json", "re", "time", "random", "collections", "string", "itertools"]
CLASSES = ["Parser", "Loader", "Cache", "Counter", "Store", "Queue", "Model", "Reader",
           "Buffer", "Table", "Graph", "Stack"]
BINOPS = ["+", "-", "*", "//", "%"]
CMPOPS = ["<", ">", "==", "!=", "<=", ">="]


class _FileGen:
    def __init__(self, rng: random.Random):
        self.r = rng
        self.out: list[str] = []

    def emit(self, depth, text):
        self.out.append("    " * depth + text)

    def atom(self, names):
        r = self.r
        roll = r.random()
        if roll < 0.6 and names:
            return r.choice(names)
        if roll < 0.85:
            return str(r.randint(0, 10))
        return f"len({r.choice(names)})" if names else "0"

    def expr(self, names):
        r = self.r
        roll = r.random()
        if roll < 0.35:
            return self.atom(names)
        if roll < 0.75:
            return f"{self.atom(names)} {r.choice(BINOPS)} {self.atom(names)}"
        if roll < 0.9 and names:
            return f"{r.choice(VERBS)}_{r.choice(NOUNS)}({self.atom(names)})"
        return f"[{self.atom(names)}, {self.atom(names)}]"

    def cond(self, names):
        return f"{self.atom(names)} {self.r.choice(CMPOPS)} {self.atom(names)}"

    def block(self, depth, names, n, allow_nested=True):
        r = self.r
        names = list(names)
        for _ in range(n):
            roll = r.random()
            if roll < 0.4 or not names:
                target = r.choice(NOUNS)
                self.emit(depth, f"{target} = {self.expr(names)}")
                if target not in names:
                    names.append(target)
            elif roll < 0.5:
                self.emit(depth, f"{r.choice(names)} += {self.atom(names)}")
            elif roll < 0.62 and allow_nested:
                self.emit(depth, f"if {self.cond(names)}:")
                self.block(depth + 1, names, r.randint(1, 2), False)
                if r.random() < 0.3:
                    self.emit(depth, "else:")
                    self.block(depth + 1, names, 1, False)
            elif roll < 0.72 and allow_nested:
                var = r.choice(["i", "j", "k"])
                self.emit(depth, f"for {var} in range({self.atom(names)}):")
                self.block(depth + 1, names + [var], r.randint(1, 2), False)
            elif roll < 0.82:
                self.emit(depth, f"print('{r.choice(NOUNS)}', {r.choice(names)})")
            else:
                self.emit(depth, f"{r.choice(names)} = {r.choice(VERBS)}_{r.choice(NOUNS)}"
                                 f"({', '.join(r.sample(names, min(len(names), 2)))})")
        return names

    def function(self, depth, method=False):
        r = self.r
        params = r.sample(NOUNS, r.randint(1, 3))
        name = f"{r.choice(VERBS)}_{r.choice(NOUNS)}"
        head = (["self"] if method else []) + params
        self.emit(depth, f"def {name}({', '.join(head)}):")
        names = self.block(depth + 1, params, r.randint(2, 4))
        self.emit(depth + 1, f"return {self.expr(names)}")

    def klass(self):
        r = self.r
        attrs = r.sample(NOUNS, r.randint(1, 3))
        self.emit(0, f"class {r.choice(CLASSES)}:")
        self.emit(1, f"def __init__(self, {', '.join(attrs)}):")
        for a in attrs:
            self.emit(2, f"self.{a} = {a}")
        for _ in range(r.randint(1, 2)):
            self.function(1, method=True)

    def file(self, first_line: str | None, units: int):
        r = self.r
        self.out = []
        if first_line:
            self.out.append(first_line)
        for m in r.sample(MODULES, r.randint(1, 2)):
            self.emit(0, f"import {m}")
        for _ in range(units):
            if r.random() < 0.35:
                self.klass()
            else:
                self.function(0)
        return "\n".join(self.out) + "\n"


def generate_corpus(n_files: int, seed: int = 0, units: tuple[int, int] = (1, 3),
                    distinct_first_lines: bool = True) -> list[str]:
    """Source texts of ``n_files`` synthetic modules.

    With ``distinct_first_lines`` each file opens with its own constant
    assignment, so no two files share a completion context.
    """
    rng = random.Random(seed)
    gen = _FileGen(rng)
    grammar = default_grammar()
    texts = []
    while len(texts) < n_files:
        first = f"MODULE_ID = {len(texts)}" if distinct_first_lines else None
        text = gen.file(first, rng.randint(*units))
        try:
            parse_file(tokenize_file(text), grammar)
        except LinecompError:
            continue
        texts.append(text)
    return texts


def write_corpus(directory, texts: list[str], valid_fraction: float = 0.0,
                 prefix: str = "mod") -> Path:
    """Write ``texts`` as files plus a ``manifest.tsv``; return the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n_valid = round(valid_fraction * len(texts))
    rows = []
    for i, text in enumerate(texts):
        p = d / f"{prefix}{i:04d}.py"
        p.write_text(text, encoding="utf-8")
        split = "valid" if i >= len(texts) - n_valid else "train"
        rows.append(f"{split}\t{p.name}")
    manifest = d / "manifest.tsv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest


def bundled_corpus() -> list[tuple[str, list[LogicalLine]]]:
    """The hand-written example corpus shipped with the package, tokenized."""
    out = []
    for p in sorted(_resource_files("linecomp.data.corpus").iterdir(), key=lambda p: p.name):
        if p.name.endswith(".py"):
            out.append((p.name, tokenize_file(p.read_text(encoding="utf-8"))))
    return out
