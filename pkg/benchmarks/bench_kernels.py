"""Compare the compiled and pure-Python hot-loop kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit

from linecomp import _pykernels
from linecomp.bpe import SENTINEL, learn_bpe, token_frequencies
from linecomp.synth import generate_corpus
from linecomp.pycorpus import tokenize_file

try:
    from linecomp import _ckernels
except ImportError:
    _ckernels = None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = random.Random(0)
    pairs = [("".join(rng.choice("abcdef(),= ") for _ in range(rng.randint(10, 80))),
              "".join(rng.choice("abcdef(),= ") for _ in range(rng.randint(10, 80)))) for _ in range(2000)]
    files = [tokenize_file(t) for t in generate_corpus(50, seed=0)]
    table = learn_bpe(token_frequencies(ln.texts for f in files for ln in f), budget=500)
    words = [list(t.text) + [SENTINEL] for f in files for ln in f for t in ln.tokens]

    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<12} {'backend':<8} {'seconds':>9}")
    for name, mod in backends:
        lev = min(timeit.repeat(lambda: [mod.levenshtein(a, b) for a, b in pairs], number=1, repeat=args.repeat))
        bpe = min(timeit.repeat(lambda: [mod.bpe_apply(list(w), table.rank) for w in words], number=1,
                                repeat=args.repeat))
        print(f"{'levenshtein':<12} {name:<8} {lev:9.4f}")
        print(f"{'bpe_apply':<12} {name:<8} {bpe:9.4f}")
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
