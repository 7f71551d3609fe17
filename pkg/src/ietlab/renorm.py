"""Rauzy-Veech induction, accelerations and the Kontsevich-Zorich cocycle.

Matrices are lists of rows of Python ints, so products never overflow.
``Z(k)`` follows the convention lambda^(k-1) = Z(k)^t lambda^(k) and
``Q(k, l) = Z(l) ... Z(k+1)``; the norm is the max absolute row sum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .iet_core import Iet, IetError, KeaneViolation, Perm, omega


# -- small exact matrix helpers ---------------------------------------------

def identity(d):
    return [[int(i == j) for j in range(d)] for i in range(d)]


def matmul(a, b):
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def transpose(a):
    return [list(r) for r in zip(*a)]


def norm(a):
    return max(sum(abs(x) for x in row) for row in a)


def det(a):
    """Bareiss fraction-free determinant of an integer matrix."""
    m = [list(r) for r in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def to_float(a):
    return np.array([[float(x) for x in row] for row in a])


# -- elementary step --------------------------------------------------------

@dataclass(frozen=True)
class RauzyStep:
    eps: int
    winner: int
    loser: int
    next: Iet

    @property
    def A(self):
        a = identity(self.next.d)
        a[self.winner][self.loser] += 1
        return a


def _step_rows(top, bot, lam, tol=0):
    """One Rauzy move in place on mutable rows and lengths; returns (eps, w, l)."""
    t, b = top[-1], bot[-1]
    diff = lam[t] - lam[b]
    if abs(diff) <= tol:
        raise KeaneViolation("tie between the last intervals", witness=(t, b))
    if diff > 0:
        eps, w, l = 0, t, b
        lam[w] -= lam[l]
        bot.pop()
        bot.insert(bot.index(w) + 1, l)
    else:
        eps, w, l = 1, b, t
        lam[w] -= lam[l]
        top.pop()
        top.insert(top.index(w) + 1, l)
    return eps, w, l


def _tie_tol(lam):
    if isinstance(lam[0], int):
        return 0
    return 1e-10 * float(sum(lam)) if isinstance(lam[0], float) else 0


def rauzy_step(iet: Iet) -> RauzyStep:
    top, bot, lam = list(iet.perm.top), list(iet.perm.bot), list(iet.lam)
    eps, w, l = _step_rows(top, bot, lam, _tie_tol(lam))
    perm = Perm(iet.perm.alphabet, tuple(top), tuple(bot))
    return RauzyStep(eps, w, l, Iet(perm, tuple(lam), iet.den))


# -- accelerated runs -------------------------------------------------------

class BalanceError(RuntimeError):
    def __init__(self, msg, kappa):
        super().__init__(msg)
        self.kappa = kappa


@dataclass
class Level:
    n: int
    perm: Perm
    lam: tuple
    kappa: float


@dataclass
class CocycleRun:
    base: Iet
    steps: list = field(default_factory=list)   # (eps, winner, loser)
    levels: list = field(default_factory=list)  # Level per k
    _Z: list = field(default_factory=list)      # Z(k+1) at index k
    _Q: dict = field(default_factory=dict, repr=False)
    _Zf: list = field(default_factory=list, repr=False)

    @property
    def d(self):
        return self.base.d

    @property
    def k_max(self):
        return len(self.levels) - 1

    @property
    def cuts(self):
        return [lv.n for lv in self.levels]

    def Z(self, k):
        """Z(k) for k >= 1."""
        if not 1 <= k <= self.k_max:
            raise IndexError(f"Z({k}) outside run of length {self.k_max}")
        return self._Z[k - 1]

    def Zf(self, k):
        if not self._Zf:
            self._Zf = [to_float(z) for z in self._Z]
        return self._Zf[k - 1]

    def Q(self, k, l=None):
        """Q(k, l) = Z(l)...Z(k+1); Q(k) = Q(0, k)."""
        if l is None:
            k, l = 0, k
        if not 0 <= k <= l <= self.k_max:
            raise IndexError(f"Q({k},{l}) outside run")
        if k == 0:
            q = self._Q.get(l)
            if q is None:
                if l == 0:
                    q = identity(self.d)
                else:
                    q = matmul(self.Z(l), self.Q(l - 1))
                self._Q[l] = q
            return q
        q = identity(self.d)
        for j in range(k + 1, l + 1):
            q = matmul(self.Z(j), q)
        return q

    def perm(self, k):
        return self.levels[k].perm

    def lam(self, k, kind=float):
        """Physical lengths lambda^(k)."""
        lv = self.levels[k]
        if kind is float and isinstance(lv.lam[0], int):
            return [x / self.base.den for x in lv.lam]
        den = kind(self.base.den)
        return [kind(x) / den for x in lv.lam]

    def length(self, k, kind=float):
        return sum(self.lam(k, kind))

    def iet(self, k):
        lv = self.levels[k]
        return Iet(lv.perm, lv.lam, self.base.den)

    def return_times(self, k):
        return [sum(row) for row in self.Q(k)]

    def level_steps(self, k):
        """Elementary steps leading from level k to level k+1."""
        return self.steps[self.levels[k].n:self.levels[k + 1].n]

    def summary(self):
        """One dict per level: {k, n_k, kappa_k, log_norm_Q, lambda_k}."""
        out = []
        for k, lv in enumerate(self.levels):
            out.append({
                "k": k,
                "n_k": lv.n,
                "kappa_k": float(lv.kappa),
                "log_norm_Q": math.log(norm(self.Q(k))),
                "lambda_k": [float(x) for x in self.lam(k)],
            })
        return out

    def summary_jsonl(self):
        return "\n".join(json.dumps(r, sort_keys=True) for r in self.summary()) + "\n"


def _kappa(lam):
    tot = sum(lam)
    m = min(lam)
    if isinstance(tot, int):
        return tot / m
    return float(tot / m)


def accelerate(iet: Iet, policy="balanced", k_max=50, kappa=None, cuts=None,
               max_steps=10**7, n_steps=None) -> CocycleRun:
    """Run Rauzy-Veech induction and group the steps into levels.

    policy: "zorich" cuts whenever the step type changes, "balanced" cuts as
    soon as |I^(k)| / min_a |I^(k)_a| <= kappa (default 2d), and "fixed" uses
    the explicit list ``cuts`` of elementary step counts n_1 < n_2 < ...
    With ``n_steps`` the run stops at the first cut after that many
    elementary steps instead of after ``k_max`` levels.
    """
    d = iet.d
    if policy == "balanced" and kappa is None:
        kappa = 2 * d
    if policy == "fixed":
        if cuts is None:
            raise ValueError("fixed policy needs cuts")
        cuts = list(cuts)
        if cuts and cuts[0] == 0:
            cuts = cuts[1:]
        if any(b <= a for a, b in zip([0] + cuts, cuts)):
            raise ValueError("cuts must be increasing")
        k_max = len(cuts)
    elif policy not in ("zorich", "balanced"):
        raise ValueError(f"unknown policy {policy!r}")

    top, bot, lam = list(iet.perm.top), list(iet.perm.bot), list(iet.lam)
    tol = _tie_tol(lam)
    run = CocycleRun(iet)
    run.levels.append(Level(0, iet.perm, tuple(lam), _kappa(lam)))
    z = identity(d)
    n = 0
    last_eps = None
    if n_steps is not None:
        k_max = 10**12
    while len(run.levels) <= k_max:
        if n_steps is not None and run.levels[-1].n >= n_steps:
            break
        if n - run.levels[-1].n > max_steps:
            raise BalanceError(f"no cut within {max_steps} steps", _kappa(lam))
        if policy == "zorich":
            # peek: a cut happens before the first step of a new type
            t, b = top[-1], bot[-1]
            eps_next = 0 if lam[t] > lam[b] else 1
            if last_eps is not None and eps_next != last_eps:
                _close(run, z, n, top, bot, lam)
                z = identity(d)
                last_eps = None
                continue
        eps, w, l = _step_rows(top, bot, lam, tol)
        run.steps.append((eps, w, l))
        n += 1
        # Z <- (Id + E_{l,w}) Z : row l += row w
        z[l] = [x + y for x, y in zip(z[l], z[w])]
        last_eps = eps
        if policy == "balanced" and _kappa(lam) <= kappa:
            _close(run, z, n, top, bot, lam)
            z = identity(d)
        elif policy == "fixed" and n == cuts[len(run.levels) - 1]:
            _close(run, z, n, top, bot, lam)
            z = identity(d)
    return run


def _close(run, z, n, top, bot, lam):
    perm = Perm(run.base.perm.alphabet, tuple(top), tuple(bot))
    run.levels.append(Level(n, perm, tuple(lam), _kappa(lam)))
    run._Z.append(z)


def replay_lengths(run: CocycleRun, k):
    """Lengths (as stored) after each elementary step of level k -> k+1."""
    lam = list(run.levels[k].lam)
    out = [tuple(lam)]
    for eps, w, l in run.level_steps(k):
        lam[w] -= lam[l]
        out.append(tuple(lam))
    return out


def replay_perms(run: CocycleRun, k):
    """Permutations (top, bot) before each elementary step of level k -> k+1."""
    top, bot = list(run.levels[k].perm.top), list(run.levels[k].perm.bot)
    out = []
    for eps, w, l in run.level_steps(k):
        out.append((tuple(top), tuple(bot)))
        if eps == 0:
            bot.remove(l)
            bot.insert(bot.index(w) + 1, l)
        else:
            top.remove(l)
            top.insert(top.index(w) + 1, l)
    return out


# -- exact consistency checks -----------------------------------------------

def check_algebra(run: CocycleRun, stride=1):
    """Assert det Z = 1, cocycle associativity and the Omega conjugation rule.

    Returns the number of elementary Omega identities verified.
    """
    d = run.d
    for k in range(1, run.k_max + 1):
        if det(run.Z(k)) != 1:
            raise AssertionError(f"det Z({k}) != 1")
    for k in range(0, run.k_max + 1, stride):
        for l in range(k, run.k_max + 1, stride):
            m = min(run.k_max, l + stride)
            if run.Q(k, m) != matmul(run.Q(l, m), run.Q(k, l)):
                raise AssertionError(f"Q({k},{m}) != Q({l},{m}) Q({k},{l})")
    count = 0
    perm = run.base.perm
    for eps, w, l in run.steps:
        top, bot = list(perm.top), list(perm.bot)
        if eps == 0:
            bot.remove(l)
            bot.insert(bot.index(w) + 1, l)
        else:
            top.remove(l)
            top.insert(top.index(w) + 1, l)
        nxt = Perm(perm.alphabet, tuple(top), tuple(bot))
        a = identity(d)
        a[w][l] += 1
        if omega(nxt) != matmul(matmul(transpose(a), omega(perm)), a):
            raise AssertionError("Omega conjugation identity fails")
        perm = nxt
        count += 1
    return count


# -- Rokhlin towers ---------------------------------------------------------

@dataclass
class Towers:
    k: int
    heights: list          # Q_a(k)
    floors: dict           # letter -> list of (left, right) floor intervals


def towers(run: CocycleRun, k: int) -> Towers:
    """Floors T^i I^(k)_a, 0 <= i < Q_a(k), located by iterating T on the base."""
    if not 0 <= k <= run.k_max:
        raise IndexError("level outside run")
    base = run.base
    starts, order, w, _ = base._float_tables()
    starts = np.asarray(starts)
    wv = np.asarray([w[a] for a in order])
    lam_k = run.lam(k)
    lk = run.iet(k).left_ends()
    heights = run.return_times(k)
    floors = {}
    for a in range(run.d):
        x = lk[a] + 0.5 * lam_k[a]          # midpoint follows the whole floor
        out = []
        for _ in range(heights[a]):
            out.append((x - 0.5 * lam_k[a], x + 0.5 * lam_k[a]))
            x = x + wv[np.searchsorted(starts, x, side="right") - 1]
        floors[a] = out
    return Towers(k, heights, floors)


def measured_return_times(run: CocycleRun, k: int, cap=10**7):
    """First return time of the midpoint of each I^(k)_a to I^(k), by orbit."""
    base = run.base
    starts, order, w, _ = base._float_tables()
    starts = np.asarray(starts)
    wv = np.asarray([w[a] for a in order])
    lk = run.iet(k).left_ends()
    lam_k = run.lam(k)
    size = run.length(k)
    out = []
    for a in range(run.d):
        x = lk[a] + 0.5 * lam_k[a]
        for t in range(1, cap):
            x = x + wv[np.searchsorted(starts, x, side="right") - 1]
            if x < size:
                out.append(t)
                break
    return out


def rtc_check(run: CocycleRun, delta: float, max_floors=10**6):
    """Per level: (ok, p_k) with {T^i I^(k)}_{i<p_k} a tower of intervals.

    Only levels whose towers have at most ``max_floors`` floors are scanned.
    """
    base = run.base
    disc = sorted(base.left_ends())[1:]
    starts, order, w, tot = base._float_tables()
    starts = np.asarray(starts)
    wv = np.asarray([w[a] for a in order])
    out = []
    for k in range(run.k_max + 1):
        size = run.length(k)
        cap = min(run.return_times(k))
        if cap > max_floors:
            break
        lo, p = 0.0, 1
        # T^i I^(k) stays an interval while no discontinuity lies inside it
        while p < cap:
            if any(lo < x < lo + size for x in disc):
                break
            lo = lo + wv[np.searchsorted(starts, lo, side="right") - 1]
            p += 1
        ok = delta <= 0 or p * size >= delta * tot
        out.append((ok, p))
    return out
