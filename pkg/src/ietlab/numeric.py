"""Multiprecision scalars and small dense linear algebra.

Matrices here are at most d x d with d around 4-8, so plain lists of gmpy2
``mpfr`` rows are both simpler and faster than any general library.
"""

from __future__ import annotations

import contextlib
import math

import gmpy2
from gmpy2 import mpfr

ZERO = mpfr(0)


def precision():
    return gmpy2.get_context().precision


def set_precision(bits):
    gmpy2.get_context().precision = int(bits)


@contextlib.contextmanager
def working_precision(bits):
    with gmpy2.context(gmpy2.get_context(), precision=int(bits)):
        yield


def bits_for_depth(rate, depth, margin=120):
    """Bits needed to resolve quantities shrinking like exp(-rate*depth)."""
    return int(rate * depth / math.log(2)) + margin


def mp(x):
    return x if isinstance(x, type(ZERO)) else mpfr(x)


def eps():
    return mpfr(2) ** (1 - precision())


def vec(xs):
    return [mp(x) for x in xs]


def zeros(n, m=None):
    if m is None:
        return [ZERO] * n
    return [[ZERO] * m for _ in range(n)]


def eye(n):
    return [[mpfr(int(i == j)) for j in range(n)] for i in range(n)]


def dot(u, v):
    return gmpy2.fsum(x * y for x, y in zip(u, v))


def vnorm(u):
    return gmpy2.sqrt(dot(u, u))


def vmax(u):
    return max(abs(x) for x in u) if u else ZERO


def axpy(a, x, y):
    return [a * xi + yi for xi, yi in zip(x, y)]


def vsub(u, v):
    return [a - b for a, b in zip(u, v)]


def vadd(u, v):
    return [a + b for a, b in zip(u, v)]


def vscale(a, u):
    return [a * x for x in u]


def matvec(a, x):
    return [dot(row, x) for row in a]


def tmatvec(a, x):
    """a^t x."""
    n = len(a[0])
    return [gmpy2.fsum(a[i][j] * x[i] for i in range(len(a))) for j in range(n)]


def matmul(a, b):
    bt = list(zip(*b))
    return [[dot(row, col) for col in bt] for row in a]


def transpose(a):
    return [list(r) for r in zip(*a)]


def columns(a):
    return [list(c) for c in zip(*a)]


def from_columns(cols):
    return [list(r) for r in zip(*cols)]


def int_matrix(a):
    return [[mpfr(x) for x in row] for row in a]


def qr(a, ncols=None):
    """Thin QR by modified Gram-Schmidt with one reorthogonalisation pass.

    Returns (q_cols, r) with q given as a list of orthonormal columns.
    """
    cols = columns(a)
    if ncols is not None:
        cols = cols[:ncols]
    n = len(cols)
    q = []
    r = zeros(n, n)
    for j, v in enumerate(cols):
        v = list(v)
        for _ in range(2):
            for i, qi in enumerate(q):
                c = dot(qi, v)
                r[i][j] += c
                v = axpy(-c, qi, v)
        nv = vnorm(v)
        if nv == 0:
            raise ZeroDivisionError("rank deficient frame")
        r[j][j] = nv
        q.append(vscale(1 / nv, v))
    return q, r


def solve(a, b):
    """Gaussian elimination with partial pivoting; b is a vector or matrix."""
    n = len(a)
    vector = not isinstance(b[0], list)
    rhs = [[x] for x in b] if vector else [list(r) for r in b]
    m = [list(a[i]) + rhs[i] for i in range(n)]
    for k in range(n):
        p = max(range(k, n), key=lambda i: abs(m[i][k]))
        if m[p][k] == 0:
            raise ZeroDivisionError("singular matrix")
        m[k], m[p] = m[p], m[k]
        piv = m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] / piv
            if f:
                m[i] = [x - f * y for x, y in zip(m[i], m[k])]
    w = len(m[0]) - n
    x = [[ZERO] * w for _ in range(n)]
    for i in range(n - 1, -1, -1):
        for c in range(w):
            s = m[i][n + c] - gmpy2.fsum(m[i][j] * x[j][c] for j in range(i + 1, n))
            x[i][c] = s / m[i][i]
    return [r[0] for r in x] if vector else x


def inv(a):
    return solve(a, eye(len(a)))


def tri_inv(r):
    """Inverse of an upper triangular matrix."""
    n = len(r)
    out = zeros(n, n)
    for j in range(n):
        out[j][j] = 1 / r[j][j]
        for i in range(j - 1, -1, -1):
            s = gmpy2.fsum(r[i][k] * out[k][j] for k in range(i + 1, j + 1))
            out[i][j] = -s / r[i][i]
    return out


def lstsq(a, b):
    """Least squares via QR of the column frame of a (full column rank)."""
    q, r = qr(a)
    rhs = [dot(qc, b) for qc in q]
    return solve(r, rhs)


def cond(a):
    """Condition number estimate ||a||_inf ||a^-1||_inf."""
    ai = inv(a)
    n1 = max(gmpy2.fsum(abs(x) for x in row) for row in a)
    n2 = max(gmpy2.fsum(abs(x) for x in row) for row in ai)
    return float(n1 * n2)


def to_floats(xs):
    return [float(x) for x in xs]


def log_abs(x):
    """Natural log of |x| that survives values below the double range."""
    x = abs(mp(x))
    if x == 0:
        return -math.inf
    return float(gmpy2.log(x))
