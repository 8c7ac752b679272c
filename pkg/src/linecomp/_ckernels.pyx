# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twins of the kernels in ``_pykernels``; results are identical."""

from cpython.mem cimport PyMem_Malloc, PyMem_Free


def levenshtein(str a, str b):
    cdef Py_ssize_t n, m, i, j
    cdef Py_ssize_t *prev
    cdef Py_ssize_t *cur
    cdef Py_ssize_t *tmp
    cdef Py_ssize_t best, cand
    cdef Py_UCS4 ca
    if len(a) < len(b):
        a, b = b, a
    n = len(a)
    m = len(b)
    if m == 0:
        return n
    prev = <Py_ssize_t *> PyMem_Malloc((m + 1) * sizeof(Py_ssize_t))
    cur = <Py_ssize_t *> PyMem_Malloc((m + 1) * sizeof(Py_ssize_t))
    if prev == NULL or cur == NULL:
        PyMem_Free(prev)
        PyMem_Free(cur)
        raise MemoryError()
    try:
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            ca = a[i - 1]
            cur[0] = i
            for j in range(1, m + 1):
                best = prev[j - 1] + (0 if ca == b[j - 1] else 1)
                cand = prev[j] + 1
                if cand < best:
                    best = cand
                cand = cur[j - 1] + 1
                if cand < best:
                    best = cand
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        PyMem_Free(prev)
        PyMem_Free(cur)


def merge_pair(tuple word, str left, str right):
    cdef list out = []
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n = len(word)
    cdef str joined = left + right
    while i < n:
        if i + 1 < n and word[i] == left and word[i + 1] == right:
            out.append(joined)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return tuple(out)


def bpe_apply(symbols, dict ranks):
    cdef tuple word = tuple(symbols)
    cdef Py_ssize_t k, best_rank, r
    cdef object best, got
    while len(word) > 1:
        best = None
        best_rank = -1
        for k in range(len(word) - 1):
            got = ranks.get((word[k], word[k + 1]))
            if got is not None:
                r = got
                if best_rank < 0 or r < best_rank:
                    best = (word[k], word[k + 1])
                    best_rank = r
        if best is None:
            break
        word = merge_pair(word, best[0], best[1])
    return list(word)
