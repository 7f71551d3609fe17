"""Independent mpmath evaluations of the saddle formulas, used as test oracles."""

import mpmath
import numpy as np

from ietlab.saddle import SaddleJet

mpmath.mp.dps = 30


def gamma_conv(x):
    x = mpmath.mpf(x)
    if x <= 0 and x == int(x):
        n = int(-x)
        return mpmath.mpf(1) / ((-1) ** n * mpmath.factorial(n))
    return mpmath.gamma(x)


def B_oracle(x, y):
    x, y = mpmath.mpf(x), mpmath.mpf(y)
    pre = mpmath.pi * mpmath.expjpi((y - x) / 2) / mpmath.power(2, x + y - 2)
    return pre * gamma_conv(x + y - 1) / (mpmath.gamma(x) * mpmath.gamma(y))


def d_oracle(jet, m, k, j):
    tot = mpmath.mpc(0)
    n = 0
    while j + n * m <= k:
        num = mpmath.binomial(k, j + n * m) * mpmath.binomial(mpmath.mpf((m - 1) - j) / m - 1, n)
        den = mpmath.binomial(mpmath.mpf((k - j) - (m - 1)) / m, n)
        tot += num / den * jet[k][j + n * m]
        n += 1
    return complex(tot)


def C_oracle(jet, m, k, l):
    th = mpmath.expjpi(mpmath.mpf(1) / m)
    tot = mpmath.mpc(0)
    for i in range(k + 1):
        if i % m == (m - 1) % m or i % m == (k - (m - 1)) % m:
            continue
        B = B_oracle(mpmath.mpf((m - 1) - i) / m, mpmath.mpf((m - 1) - k + i) / m)
        tot += th ** (l * (2 * i - k)) * mpmath.binomial(k, i) * B * jet[k][i]
    return complex(tot)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def random_jet(rng, m, K, real=True):
    jet = {}
    for k in range(K + 1):
        v = rng.normal(size=k + 1) + 1j * rng.normal(size=k + 1)
        if real:
            v = [v[i] if i >= k - i else 0 for i in range(k + 1)]
            for i in range(k + 1):
                if i < k - i:
                    v[i] = np.conj(v[k - i])
                elif i == k - i:
                    v[i] = v[i].real
        jet[k] = list(v)
    return SaddleJet("s", m, jet)


