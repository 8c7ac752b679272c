from __future__ import division


def zeros(rows, cols):
    return [[0.0] * cols for _ in range(rows)]


def identity(n):
    m = zeros(n, n)
    for i in range(n):
        m[i][i] = 1.0
    return m


def shape(m):
    return len(m), len(m[0]) if m else 0


def transpose(m):
    rows, cols = shape(m)
    out = zeros(cols, rows)
    for i in range(rows):
        for j in range(cols):
            out[j][i] = m[i][j]
    return out


def matmul(a, b):
    n, k = shape(a)
    k2, p = shape(b)
    assert k == k2, "inner dimensions must agree"
    out = zeros(n, p)
    for i in range(n):
        row = a[i]
        for j in range(p):
            acc = 0.0
            for t in range(k):
                acc += row[t] * b[t][j]
            out[i][j] = acc
    return out


def scale(m, factor):
    return [[x * factor for x in row] for row in m]


def add(a, b):
    rows, cols = shape(a)
    return [[a[i][j] + b[i][j] for j in range(cols)] for i in range(rows)]


def determinant(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    det = 0.0
    for col in range(n):
        minor = [row[:col] + row[col + 1:] for row in m[1:]]
        sign = -1 if col % 2 else 1
        det += sign * m[0][col] * determinant(minor)
    return det


def solve(a, b):
    n = len(a)
    aug = [a[i][:] + [b[i]] for i in range(n)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda_abs(aug, col))
        if abs(aug[pivot][col]) < 1e-12:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        for r in range(col + 1, n):
            f = aug[r][col] / aug[col][col]
            for c in range(col, n + 1):
                aug[r][c] -= f * aug[col][c]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        s = aug[i][n]
        for j in range(i + 1, n):
            s -= aug[i][j] * x[j]
        x[i] = s / aug[i][i]
    return x


def lambda_abs(rows, col):
    def key(r):
        return abs(rows[r][col])
    return key


def trace(m):
    return sum([m[i][i] for i in range(len(m))])


def power(m, k):
    result = identity(len(m))
    while k > 0:
        if k & 1:
            result = matmul(result, m)
        m = matmul(m, m)
        k >>= 1
    return result
