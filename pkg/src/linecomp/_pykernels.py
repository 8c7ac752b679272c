"""Pure-Python reference kernels (used when the compiled extension is unavailable)."""


def levenshtein(a, b):
    """Unit-cost insert/delete/substitute edit distance."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def merge_pair(word, left, right):
    """Merge every non-overlapping ``(left, right)`` occurrence, scanning left to right."""
    out = []
    i = 0
    n = len(word)
    joined = left + right
    while i < n:
        if i + 1 < n and word[i] == left and word[i + 1] == right:
            out.append(joined)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return tuple(out)


def bpe_apply(symbols, ranks):
    """Greedily merge the lowest-ranked adjacent pair until none is in ``ranks``."""
    word = tuple(symbols)
    while len(word) > 1:
        best = None
        best_rank = None
        for pair in zip(word, word[1:]):
            r = ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best, best_rank = pair, r
        if best is None:
            break
        word = merge_pair(word, best[0], best[1])
    return list(word)
