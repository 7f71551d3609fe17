"""Interval exchange transformations: permutations, lengths, evaluation.

Letters are stored by their index in the alphabet. ``Perm.top`` lists the
letters in the order of the domain partition and ``Perm.bot`` in the order
of the image partition, so that ``pi0[a]`` is the 1-based position of letter
``a`` in ``top``.

Lengths may be Python ints (exact induction), floats, Fractions or gmpy2
``mpfr`` values. Physical lengths are ``lam[a] / den``.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


class IetError(ValueError):
    """Invalid permutation or length data."""


class KeaneViolation(ArithmeticError):
    """Two discontinuities are joined by an orbit (or a length tie occurs)."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


@dataclass(frozen=True)
class Perm:
    alphabet: tuple
    top: tuple
    bot: tuple

    def __post_init__(self):
        d = len(self.alphabet)
        if len(set(self.alphabet)) != d:
            raise IetError("alphabet has repeated symbols")
        if sorted(self.top) != list(range(d)) or sorted(self.bot) != list(range(d)):
            raise IetError("pi0 and pi1 must be bijections onto {1..d}")

    @classmethod
    def from_rows(cls, top, bot, alphabet=None):
        """Build from two rows of symbols (domain order, image order)."""
        top, bot = list(top), list(bot)
        if alphabet is None:
            alphabet = sorted(top, key=lambda s: str(s))
        alphabet = tuple(alphabet)
        index = {s: i for i, s in enumerate(alphabet)}
        try:
            t = tuple(index[s] for s in top)
            b = tuple(index[s] for s in bot)
        except KeyError as exc:
            raise IetError(f"unknown symbol {exc}") from None
        return cls(alphabet, t, b)

    @classmethod
    def symmetric(cls, d):
        """The permutation reversing d letters named 1..d."""
        names = tuple(str(i + 1) for i in range(d))
        return cls(names, tuple(range(d)), tuple(reversed(range(d))))

    @property
    def d(self):
        return len(self.alphabet)

    @property
    def pi0(self):
        out = [0] * self.d
        for pos, a in enumerate(self.top):
            out[a] = pos + 1
        return tuple(out)

    @property
    def pi1(self):
        out = [0] * self.d
        for pos, a in enumerate(self.bot):
            out[a] = pos + 1
        return tuple(out)

    def is_irreducible(self):
        seen_t, seen_b = set(), set()
        for k in range(self.d - 1):
            seen_t.add(self.top[k])
            seen_b.add(self.bot[k])
            if seen_t == seen_b:
                return False
        return True

    def check_irreducible(self):
        if not self.is_irreducible():
            raise IetError("reducible permutation")
        return self

    def genus(self):
        """(g, gamma): half the rank of Omega, and 1 + corank."""
        rank = np.linalg.matrix_rank(np.array(omega(self), dtype=float))
        return rank // 2, self.d - rank + 1

    def rows(self):
        return ([self.alphabet[a] for a in self.top], [self.alphabet[a] for a in self.bot])

    def __str__(self):
        t, b = self.rows()
        return " ".join(map(str, t)) + "\n" + " ".join(map(str, b))


def omega(perm: Perm):
    """The antisymmetric matrix Omega_pi as a list of int rows."""
    perm.check_irreducible()
    p0, p1 = perm.pi0, perm.pi1
    d = perm.d
    om = [[0] * d for _ in range(d)]
    for a in range(d):
        for b in range(d):
            if p1[a] > p1[b] and p0[a] < p0[b]:
                om[a][b] = 1
            elif p1[a] < p1[b] and p0[a] > p0[b]:
                om[a][b] = -1
    return om


@dataclass(frozen=True)
class Iet:
    perm: Perm
    lam: tuple
    den: object = 1
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if len(self.lam) != self.perm.d:
            raise IetError("need one length per letter")
        if any(not (x > 0) for x in self.lam):
            raise IetError("lengths must be positive")
        self.perm.check_irreducible()

    @classmethod
    def from_lengths(cls, perm, lam, den=1):
        return cls(perm, tuple(lam), den)

    @property
    def d(self):
        return self.perm.d

    def lengths(self, kind=float):
        """Physical lengths converted with ``kind`` (float, Fraction, mpfr...)."""
        if kind is Fraction:
            return [Fraction(x) / Fraction(self.den) for x in self.lam]
        if kind is float and isinstance(self.den, int):
            return [float(x / self.den) for x in self.lam]
        den = kind(self.den)
        return [kind(x) / den for x in self.lam]

    @property
    def total(self):
        return sum(self.lengths())

    def left_ends(self, kind=float):
        lam = self.lengths(kind)
        out = [None] * self.d
        acc = kind(0)
        for a in self.perm.top:
            out[a] = acc
            acc = acc + lam[a]
        return out

    def right_ends(self, kind=float):
        lam = self.lengths(kind)
        return [l + x for l, x in zip(self.left_ends(kind), lam)]

    def image_left_ends(self, kind=float):
        lam = self.lengths(kind)
        out = [None] * self.d
        acc = kind(0)
        for a in self.perm.bot:
            out[a] = acc
            acc = acc + lam[a]
        return out

    def translations(self, kind=float):
        """w = Omega lambda, the translation of each interval."""
        lam = self.lengths(kind)
        om = omega(self.perm)
        return [sum((om[a][b] * lam[b] for b in range(self.d)), kind(0)) for a in range(self.d)]

    def _float_tables(self):
        c = self._cache.get("float")
        if c is None:
            lefts = self.left_ends()
            order = list(self.perm.top)
            c = ([lefts[a] for a in order], order, self.translations(), self.total)
            self._cache["float"] = c
        return c

    def which(self, x):
        """Letter whose interval contains x."""
        starts, order, _, tot = self._float_tables()
        if not (0 <= x < tot):
            raise IetError(f"point {x} outside [0, {tot})")
        return order[bisect.bisect_right(starts, x) - 1]

    def to_json(self):
        out = {
            "alphabet": list(self.perm.alphabet),
            "pi0": self.perm.rows()[0],
            "pi1": self.perm.rows()[1],
            "lambda": [float(x) for x in self.lengths()],
        }
        if isinstance(self.lam[0], int):
            # exact data as decimal strings (JSON numbers lose the low bits)
            out["exact"] = {"lam": [str(x) for x in self.lam], "den": str(self.den)}
        return out

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        perm = Perm.from_rows(data["pi0"], data["pi1"], data.get("alphabet"))
        if "exact" in data:
            ex = data["exact"]
            return cls(perm, tuple(int(x) for x in ex["lam"]), int(ex["den"]))
        lam = data["lambda"]
        if isinstance(lam, dict):
            lam = [lam[s] for s in perm.alphabet]
        return cls(perm, tuple(float(x) for x in lam))


def apply(iet: Iet, x):
    """T(x) = x + w_a for x in I_a (floats or mpfr; exact if x is a Fraction)."""
    if isinstance(x, Fraction):
        lefts = iet.left_ends(Fraction)
        tot = sum(iet.lengths(Fraction))
        if not (0 <= x < tot):
            raise IetError(f"point {x} outside domain")
        a = max((a for a in range(iet.d) if lefts[a] <= x), key=lambda a: lefts[a])
        return x + iet.translations(Fraction)[a]
    a = iet.which(float(x))
    return x + iet._float_tables()[2][a]


def orbit(iet: Iet, x, n):
    """x, T x, ..., T^{n-1} x as a float array."""
    starts, order, w, tot = iet._float_tables()
    starts = np.asarray(starts)
    wv = np.asarray([w[a] for a in order])
    out = np.empty(n)
    for i in range(n):
        out[i] = x
        x = x + wv[np.searchsorted(starts, x, side="right") - 1]
    return out


def keane_check(iet: Iet, depth: int, exact=False, rtol=1e-10):
    """(ok, witness). The witness is (m, alpha, beta) with T^m l_alpha = l_beta."""
    if depth < 1:
        raise IetError("depth must be >= 1")
    kind = Fraction if exact else float
    lefts = iet.left_ends(kind)
    tot = sum(iet.lengths(kind))
    tol = 0 if exact else rtol * float(tot)
    targets = sorted((lefts[b], b) for b in range(iet.d) if iet.perm.pi0[b] != 1)
    tvals = [t for t, _ in targets]
    for a in range(iet.d):
        x = lefts[a]
        for m in range(1, depth + 1):
            x = apply(iet, x)
            i = bisect.bisect_left(tvals, x - tol)
            if i < len(tvals) and abs(tvals[i] - x) <= tol:
                return False, (m, iet.perm.alphabet[a], iet.perm.alphabet[targets[i][1]])
    return True, None


def partition_check(iet: Iet, rtol=1e-12):
    """The images T(I_a) tile [0,|lambda|) (sorted endpoints meet)."""
    lam = iet.lengths()
    w = iet.translations()
    lefts = iet.left_ends()
    imgs = sorted((lefts[a] + w[a], lefts[a] + w[a] + lam[a]) for a in range(iet.d))
    tol = rtol * iet.total
    pos = 0.0
    for lo, hi in imgs:
        if abs(lo - pos) > tol:
            return False
        pos = hi
    return abs(pos - iet.total) <= tol


def random_iet(perm: Perm, rng: np.random.Generator, bits=None):
    """Uniform point of the length simplex.

    With ``bits`` the lengths are exact integers of that size (den = their
    sum), suitable for long exact inductions.
    """
    if bits is None:
        lam = rng.dirichlet(np.ones(perm.d))
        return Iet(perm, tuple(float(x) for x in lam))
    nbytes = (bits + 7) // 8
    # exponential spacings give a uniform simplex point after normalisation
    e = rng.standard_exponential(perm.d)
    ints = []
    for x in e:
        # x * 2^bits with the bits below double precision randomised
        low = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - bits + 60)
        ints.append(int(Fraction(float(x)) * (1 << bits)) + low + 1)
    return Iet(perm, tuple(ints), sum(ints))


def rotation(theta, kind=float):
    """Rotation by theta on [0,1) as a 2-IET with letters A, B."""
    perm = Perm.from_rows("AB", "BA")
    return Iet(perm, (kind(1) - theta, theta))
