"""The cohomological equation v o T - v = phi.

Solutions are built on the orbit of 0: v(T^n 0) is the n-th Birkhoff sum
of phi, so v(0) = 0 and the equation holds exactly along the orbit. Off the
orbit v is a monotone-preserving cubic interpolant (PCHIP) through the
orbit points, which are dense and roughly uniformly spread.

Orbits are computed in exact integer arithmetic: every length is rescaled
to a common integer denominator, so orbit points, tower floors and the
time/space decompositions are exact.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import linregress

from . import numeric as nm
from .iet_core import Iet, IetError, omega
from .pfun import Domain, PFun, special_birkhoff_sum
from .renorm import norm as znorm


class SolveError(ArithmeticError):
    pass


class DecayError(SolveError):
    def __init__(self, msg, rate=None):
        super().__init__(msg)
        self.rate = rate


class ObstructedError(SolveError):
    def __init__(self, msg, triples=None):
        super().__init__(msg)
        self.triples = triples or []


class DiscontinuityHit(IetError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


# -- exact integer model -------------------------------------------------------

def _scale_of(iet: Iet):
    fr = [Fraction(x) / Fraction(iet.den) for x in iet.lam]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return den


class ExactMap:
    """T (or T^(k) of a run) on integers x = X * scale."""

    def __init__(self, iet: Iet, scale=None):
        self.iet = iet
        self.scale = _scale_of(iet) if scale is None else scale
        lam = [int(Fraction(x) / Fraction(iet.den) * self.scale) for x in iet.lam]
        self.lam = lam
        d = iet.d
        self.lefts = [0] * d
        acc = 0
        for a in iet.perm.top:
            self.lefts[a] = acc
            acc += lam[a]
        self.total = acc
        om = omega(iet.perm)
        self.w = [sum(om[a][b] * lam[b] for b in range(d)) for a in range(d)]
        self.order = list(iet.perm.top)
        self.starts = [self.lefts[a] for a in self.order]
        img = [0] * d
        acc = 0
        for a in iet.perm.bot:
            img[a] = acc
            acc += lam[a]
        self.img_order = list(iet.perm.bot)
        self.img_starts = [img[a] for a in self.img_order]
        self.disc = set(x for x in self.lefts if x != 0)

    def to_int(self, x):
        return int(math.floor(Fraction(x) * self.scale))

    def to_float(self, X):
        return X / self.scale

    def letter(self, X):
        if not 0 <= X < self.total:
            raise IetError("point outside the domain")
        return self.order[bisect.bisect_right(self.starts, X) - 1]

    def step(self, X):
        return X + self.w[self.letter(X)]

    def back(self, X):
        b = self.img_order[bisect.bisect_right(self.img_starts, X) - 1]
        return X - self.w[b], b

    def orbit(self, X, n, check=True):
        """(points, letters) of X, T X, ..., T^{n-1} X."""
        pts, lets = [], []
        for i in range(n):
            if check and X in self.disc:
                raise DiscontinuityHit(f"orbit hits a discontinuity at step {i}", i)
            a = self.letter(X)
            pts.append(X)
            lets.append(a)
            X += self.w[a]
        return pts, lets


def level_maps(run, k1):
    """ExactMap of T^(k) for k <= k1 on the scale of the base transformation."""
    cache = run.__dict__.setdefault("_exact_maps", {})
    if 0 not in cache:
        cache[0] = ExactMap(run.base)
    sc = cache[0].scale
    for k in range(1, k1 + 1):
        if k not in cache:
            cache[k] = ExactMap(run.iet(k), sc)
    return [cache[k] for k in range(k1 + 1)]


# -- time decomposition --------------------------------------------------------

@dataclass
class OrbitDecomposition:
    x: float
    N: int
    y_index: int              # y = T^{y_index} x is the orbit point closest to 0
    N_plus: int
    N_minus: int
    plus: list                # [(l, q(l), [points])], descending l
    minus: list
    z_norms: dict             # l -> ||Z(l+1)||
    space: dict = None

    @property
    def top(self):
        return self.plus[0][0] if self.plus else 0

    def counts_ok(self):
        return all(q <= self.z_norms.get(l, q) for l, q, _ in self.plus + self.minus)

    def reassemble(self, run, phi: PFun):
        """(decomposed sum, direct sum) of phi over the N orbit points, in mpfr."""
        levels = set(l for l, _, _ in self.plus + self.minus)
        sk = {}
        for l in sorted(levels):
            sk[l] = special_birkhoff_sum(run, phi, l) if l > 0 else phi
        sc = level_maps(run, 0)[0].scale
        tot = nm.ZERO
        for l, _, pts in self.plus + self.minus:
            for X in pts:
                tot += sk[l](nm.mp(X) / sc)
        m0 = level_maps(run, 0)[0]
        X0 = m0.to_int(self.x)
        pts, _ = m0.orbit(X0, self.N, check=False)
        direct = gmpy2.fsum(phi(nm.mp(X) / sc) for X in pts)
        return tot, direct

    def to_json(self):
        return {
            "x": self.x, "N": self.N, "y_index": self.y_index,
            "N_plus": self.N_plus, "N_minus": self.N_minus,
            "q_plus": {str(l): q for l, q, _ in self.plus},
            "q_minus": {str(l): q for l, q, _ in self.minus},
            "counts_ok": self.counts_ok(),
        }


def time_decompose(run, x, N: int) -> OrbitDecomposition:
    """Split the orbit of x of length N into first-return blocks of the levels."""
    if N < 1:
        raise ValueError("N must be positive")
    m0 = level_maps(run, 0)[0]
    X = m0.to_int(x)
    pts, _ = m0.orbit(X, N)
    j0 = min(range(N), key=lambda i: pts[i])
    y = pts[j0]
    n_plus, n_minus = N - j0, -j0

    # highest level whose first return from y stays inside the positive part
    top = 0
    maps = [m0]
    for l in range(1, run.k_max + 1):
        ml = level_maps(run, l)[l]
        if y >= ml.total:
            break
        if run.return_times(l)[ml.letter(y)] > n_plus:
            break
        maps.append(ml)
        top = l

    plus = []
    j, z = 0, y
    for l in range(top, -1, -1):
        ml = level_maps(run, l)[l]
        Qs = run.return_times(l)
        got = []
        while True:
            a = ml.letter(z)
            if j + Qs[a] > n_plus:
                break
            got.append(z)
            j += Qs[a]
            z += ml.w[a]
        plus.append((l, len(got), got))
    assert j == n_plus

    minus = []
    j, z = 0, y
    top_m = 0
    for l in range(1, run.k_max + 1):
        ml = level_maps(run, l)[l]
        if y >= ml.total:
            break
        zp, b = ml.back(y)
        if j - run.return_times(l)[b] < n_minus:
            break
        top_m = l
    for l in range(top_m, -1, -1):
        ml = level_maps(run, l)[l]
        Qs = run.return_times(l)
        got = []
        while True:
            zp, b = ml.back(z)
            if j - Qs[b] < n_minus:
                break
            got.append(zp)
            j -= Qs[b]
            z = zp
        minus.append((l, len(got), got))
    assert j == n_minus

    zn = {l: znorm(run.Z(l + 1)) for l in range(max(top, top_m) + 1) if l + 1 <= run.k_max}
    return OrbitDecomposition(float(x), N, j0, n_plus, n_minus, plus, minus, zn)


# -- space decomposition -------------------------------------------------------

def _colnorm(z):
    """Largest column sum: how many level-l floors one level-(l-1) floor splits into."""
    return max(sum(row[j] for row in z) for j in range(len(z)))


def partition_points(run, l, cap=10**6):
    """Sorted endpoints of the floors T^i I^(l)_a, 0 <= i < Q_a(l), plus |I|."""
    Qs = run.return_times(l)
    if sum(Qs) > cap:
        raise ValueError(f"level {l} has {sum(Qs)} floors (cap {cap})")
    m0 = level_maps(run, 0)[0]
    ml = level_maps(run, l)[l]
    pts = []
    for a in range(run.d):
        X = ml.lefts[a]
        for _ in range(Qs[a]):
            pts.append(X)
            X = m0.step(X)
    pts.sort()
    pts.append(m0.total)
    return pts


@dataclass
class SpaceDecomposition:
    x_minus: float
    x_plus: float
    k: int
    l_max: int
    J: list                   # level-k floors inside (x_-, x_+), as (lo, hi) ints
    J_plus: dict              # l -> floors filling (x_+(l-1), x_+(l))
    J_minus: dict
    scale: int
    counts: dict              # l -> (q, ||Z(l)||)

    def tiles(self):
        """True when the listed floors tile [x_-(l_max), x_+(l_max)] without gaps."""
        ivs = list(self.J)
        for d_ in (self.J_plus, self.J_minus):
            for v in d_.values():
                ivs += v
        ivs.sort()
        return all(a[1] == b[0] for a, b in zip(ivs, ivs[1:]))

    def uncovered(self):
        ivs = list(self.J) + [iv for v in self.J_plus.values() for iv in v] + \
            [iv for v in self.J_minus.values() for iv in v]
        lo = min(i[0] for i in ivs)
        hi = max(i[1] for i in ivs)
        return (lo / self.scale - self.x_minus, self.x_plus - hi / self.scale)

    def counts_ok(self):
        return all(q <= zn for q, zn in self.counts.values())


def space_decompose(run, x_minus, x_plus, l_max=None, cap=2 * 10**5):
    """Decompose (x_-, x_+) into floors of the tower partitions."""
    if not x_minus < x_plus:
        raise ValueError("need x_- < x_+")
    m0 = level_maps(run, 0)[0]
    lo, hi = m0.to_int(x_minus), m0.to_int(x_plus)
    if l_max is None:
        l_max = 0
        while l_max + 1 <= run.k_max and sum(run.return_times(l_max + 1)) <= cap:
            l_max += 1
    k = None
    J, Jp, Jm, counts = [], {}, {}, {}
    xp = xm = None
    for l in range(l_max + 1):
        P = partition_points(run, l, cap=max(cap, sum(run.return_times(l))))
        inside = [(P[i], P[i + 1]) for i in range(len(P) - 1) if P[i] >= lo and P[i + 1] <= hi]
        if k is None:
            if not inside:
                continue
            k = l
            J = inside
            xm, xp = inside[0][0], inside[-1][1]
            counts[l] = (len(inside), _colnorm(run.Z(l)) if l >= 1 else len(inside))
            continue
        # extend to the right and left with floors of level l
        right = [iv for iv in inside if iv[0] >= xp]
        left = [iv for iv in inside if iv[1] <= xm]
        Jp[l], Jm[l] = right, left
        if right:
            xp = right[-1][1]
        if left:
            xm = left[0][0]
        counts[l] = (max(len(right), len(left)), _colnorm(run.Z(l)))
    if k is None:
        raise ValueError("interval too short for the available levels")
    return SpaceDecomposition(float(x_minus), float(x_plus), k, l_max, J, Jp, Jm, m0.scale, counts)


# -- solutions -----------------------------------------------------------------

@dataclass
class HolderFit:
    exponent: float
    raw: float
    stderr: float
    scales: list
    osc: list
    saturated: bool
    continuous: bool

    def constants(self):
        """|v(y)-v(x)| / |y-x|^beta per scale."""
        return [o / h ** self.exponent if h > 0 else float("nan") for h, o in zip(self.scales, self.osc)]

    def to_json(self):
        return {"exponent": self.exponent, "raw": self.raw, "stderr": self.stderr,
                "scales": self.scales, "osc": self.osc, "constants": self.constants(),
                "saturated": self.saturated, "continuous": self.continuous}


@dataclass
class Solution:
    """v with v(0) = 0; callable on float arrays."""
    f: object
    total: float
    knots: np.ndarray = None
    values: np.ndarray = None
    poly: list = None            # exact coefficients when v is a polynomial
    regularity: float = None     # claimed r
    residual: float = None       # on the orbit test grid
    scale: float = 1.0
    mode: str = ""
    holder: HolderFit = None
    derivs: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    @classmethod
    def from_poly(cls, coeffs, total, **kw):
        c = [float(x) for x in coeffs]
        return cls(lambda x: np.polynomial.polynomial.polyval(x, c), total, poly=list(coeffs), **kw)

    @classmethod
    def from_samples(cls, knots, values, total, **kw):
        ip = PchipInterpolator(knots, values, extrapolate=True)
        return cls(ip, total, knots=knots, values=values, **kw)

    def off_orbit_residual(self, phi, n=512):
        xs = (np.arange(n) + 0.5) * self.total / n
        return float(np.max(np.abs(_apply_float(self, phi, xs))))

    def to_json(self):
        return {
            "mode": self.mode,
            "regularity_estimate": self.regularity,
            "residual": self.residual,
            "scale": self.scale,
            "holder_fits": self.holder.to_json() if self.holder else None,
            "poly": [float(c) for c in self.poly] if self.poly is not None else None,
            "notes": self.notes,
        }

    def export(self, csv_path, json_path, n=1024):
        xs = np.arange(n) * self.total / n
        vs = self(xs)
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "v"])
            for x, v in zip(xs, vs):
                wr.writerow([repr(float(x)), repr(float(v))])
        with open(json_path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def _phi_float(phi, X, lets, m0):
    """phi at exact orbit points (ints) with the given letters."""
    X = np.asarray(X, dtype=object)
    if isinstance(phi, PFun):
        ts = np.array([(x - m0.lefts[a]) / m0.scale for x, a in zip(X, lets)])
        return phi.evaluate(np.asarray(lets), ts)
    xs = np.array([x / m0.scale for x in X])
    return np.asarray(phi(xs), dtype=float)


def _apply_float(sol, phi, xs):
    """v(Tx) - v(x) - phi(x) at float points."""
    it = _float_iet(sol.total, phi)
    starts, order, w = it
    idx = np.searchsorted(starts, xs, side="right") - 1
    Tx = xs + w[idx]
    ph = phi.at(xs) if isinstance(phi, PFun) else phi(xs)
    return sol(Tx) - sol(xs) - ph


def _float_iet(total, phi):
    dom = phi.dom
    lefts = [float(x) for x in dom.lefts]
    order = list(dom.order)
    return (np.array([lefts[a] for a in order]), order, np.array([float(dom.w[a]) for a in order]))


def lam1_estimate(run, k1=None):
    """-slope of log |I^(k)|, the top exponent per level."""
    k1 = min(run.k_max, 60) if k1 is None else k1
    ks = list(range(k1 + 1))
    ys = [float(gmpy2.log(run.length(k, nm.mp))) for k in ks]
    return -float(np.polyfit(ks, ys, 1)[0])


def orbit_residual(run, sol: Solution, phi, X, lets, sample=400):
    """max |v(T x_n) - v(x_n) - phi(x_n)| over a subsample of orbit points, phi in mpfr."""
    m0 = level_maps(run, 0)[0]
    n = len(X) - 1
    idx = np.unique(np.linspace(0, n - 1, min(sample, n)).astype(int))
    xs = np.array([X[i] / m0.scale for i in idx])
    xs1 = np.array([X[i + 1] / m0.scale for i in idx])
    dv = sol(xs1) - sol(xs)
    if isinstance(phi, PFun):
        ph = np.array([float(phi.local(lets[i], nm.mp(X[i] - m0.lefts[lets[i]]) / m0.scale)) for i in idx])
    else:
        ph = np.asarray(phi(xs), dtype=float)
    return float(np.max(np.abs(dv - ph)))


def gottschalk_hedlund(run, phi, N=100_000, check_decay=True, k_range=(2, 12), strict=True):
    """v from Birkhoff sums along the orbit of 0, interpolated between orbit points."""
    m0 = level_maps(run, 0)[0]
    X, lets = m0.orbit(0, N + 1)
    notes = {"N": N}
    if check_decay and isinstance(phi, PFun):
        from .spectral import measure_exponent
        k1 = min(k_range[1], run.k_max)
        fit = measure_exponent(run, phi, "sup", (k_range[0], k1), per_piece=16)
        lam1 = lam1_estimate(run)
        notes["decay_rate"] = fit.rate
        notes["decay_rate_over_lam1"] = fit.rate / lam1
        if not fit.rate < 0:
            raise DecayError(f"Birkhoff sums do not decay (rate {fit.rate:.3f} per level)", fit.rate)
    ph = _phi_float(phi, X[:-1], lets[:-1], m0)
    if not np.all(np.isfinite(ph)):
        i = int(np.argmin(np.isfinite(ph)))
        raise SolveError(f"phi is singular on the orbit of 0 (step {i})")
    vals = np.concatenate([[0.0], np.cumsum(ph)])
    xs = np.array([x / m0.scale for x in X])
    order = np.argsort(xs)
    sol = Solution.from_samples(xs[order], vals[order], m0.total / m0.scale, mode="gottschalk_hedlund", notes=notes)
    sol.scale = float(np.max(np.abs(ph))) if len(ph) else 1.0
    sol.residual = orbit_residual(run, sol, phi, X, lets)
    sol.notes["orbit"] = (X, lets)
    _contract(sol, strict)
    return sol


def _contract(sol, strict, rtol=1e-8):
    bound = rtol * max(sol.scale, 1e-300)
    ok = sol.residual is not None and sol.residual < bound
    sol.notes["residual_ok"] = ok
    if strict and not ok:
        raise SolveError(f"residual {sol.residual:.3e} exceeds {bound:.3e}")


def polynomial_coboundary(dom: Domain, phi: PFun, deg, rtol=1e-12):
    """Coefficients c (c[0] = 0) of a polynomial p with p o T - p = phi, or None."""
    if not phi.is_polynomial():
        return None
    cols = []
    for m in range(1, deg + 1):
        e = [0] * m + [1]
        cols.append(PFun.coboundary_of_poly(dom, e))
    rows, rhs = [], []
    width = max(deg + 1, phi.max_degree() + 1)
    for a in range(dom.d):
        for i in range(width):
            rows.append([_coef(c.pieces[a].poly, i) for c in cols])
            rhs.append(_coef(phi.pieces[a].poly, i))
    A = [list(r) for r in rows]
    sol = nm.lstsq(A, rhs)
    res = max(abs(gmpy2.fsum(A[r][j] * sol[j] for j in range(deg)) - rhs[r]) for r in range(len(rhs)))
    size = max(max(abs(x) for x in rhs), nm.mp(1e-300))
    if res > rtol * size:
        return None
    return [nm.ZERO] + list(sol)


def _coef(p, i):
    return p[i] if i < len(p) else nm.ZERO


def solve(run, phi, mode="gottschalk_hedlund", N=100_000, basis=None, a=0.0, n=None, r=None,
          tol=1e-6, check_decay=True, strict=True, k_range=(2, 12)):
    """Solve v o T - v = phi with v(0) = 0."""
    if mode == "gottschalk_hedlund":
        return gottschalk_hedlund(run, phi, N, check_decay, k_range, strict)
    if mode != "spectral_reduction":
        raise ValueError(f"unknown mode {mode!r}")
    if basis is None:
        raise ValueError("spectral_reduction needs a basis")
    from .spectral import d_functionals
    n = basis.n_max if n is None else n
    rep = d_functionals(basis, phi, a, n, remainder=False)
    r = (n - a) if r is None else r
    size = float(phi.norm_Cna(a, n))
    bad = [t for t in rep.triples if t["invariant"] and t["order"] < r and abs(t["value"]) > tol * size]
    if bad:
        names = ", ".join(_tagstr(t["tag"]) for t in bad)
        raise ObstructedError(f"obstructed: nonvanishing distributions {names}", bad)
    dom = phi.dom
    psi = phi
    vpoly = [nm.ZERO]
    for t in rep.triples:
        if t["invariant"] or t["value"] == 0:
            continue
        l = t["tag"][0]
        h = basis.pfun(t["tag"])
        c = polynomial_coboundary(dom, h, l + 1, rtol=1e-10)
        if c is None:
            raise SolveError(f"no polynomial solution for {_tagstr(t['tag'])}")
        f = nm.mp(t["value"])
        psi = psi - h.scale(f)
        vpoly = [_coef(vpoly, i) + f * _coef(c, i) for i in range(max(len(vpoly), len(c)))]
    pv = [float(x) for x in vpoly]
    total = float(dom.total)
    psi_size = float(psi.sup(16))
    if psi_size <= 1e-14 * max(size, 1e-300):
        sol = Solution.from_poly(vpoly, total, mode="spectral_reduction")
        m0 = level_maps(run, 0)[0]
        X, lets = m0.orbit(0, min(N, 2000) + 1)
        sol.scale = float(phi.sup(16))
    else:
        base = gottschalk_hedlund(run, psi, N, check_decay, k_range, strict=False)
        X, lets = base.notes.pop("orbit")
        f = base.f
        sol = Solution(lambda x: f(x) + np.polynomial.polynomial.polyval(x, pv), total,
                       knots=base.knots, values=base.values + np.polynomial.polynomial.polyval(base.knots, pv),
                       poly=None, mode="spectral_reduction", notes=base.notes)
        sol.scale = base.scale
    sol.regularity = r
    sol.notes["distributions"] = rep.to_json()
    sol.residual = orbit_residual(run, sol, phi, X, lets)
    _contract(sol, strict)
    return sol


def _tagstr(t):
    return f"({t[0]},{t[1]},{t[2]})"


# -- regularity ----------------------------------------------------------------

def holder_exponent(sol: Solution, scales=range(1, 11), grid=2**15) -> HolderFit:
    """Fit beta in sup |v(x+h) - v(x)| ~ h^beta over dyadic h (grid steps 2^j)."""
    xs = np.arange(grid) * sol.total / grid
    v = sol(xs)
    hs, osc = [], []
    for j in scales:
        s = 2 ** j
        if s >= grid:
            break
        hs.append(s * sol.total / grid)
        osc.append(float(np.max(np.abs(v[s:] - v[:-s]))))
    pos = [(h, o) for h, o in zip(hs, osc) if o > 0]
    if len(pos) < 3:
        return HolderFit(1.0, float("inf"), 0.0, hs, osc, True, True)
    fit = linregress(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]))
    raw = float(fit.slope)
    sat = raw >= 0.99
    beta = 1.0 if sat else max(raw, 0.0)
    hol = HolderFit(beta, raw, float(fit.stderr), hs, osc, sat, raw > 0.05)
    sol.holder = hol
    return hol


def osc_check(run, sol: Solution, phi: PFun, ks, L=None):
    """Rows (k, osc of v on I^(k) over orbit knots, 2 sum_{l>=k} ||Z(l+1)|| ||S(l)phi||)."""
    from .pfun import birkhoff_levels
    L = min(run.k_max - 1, max(ks) + 12) if L is None else L
    sups = {}
    for l, s in birkhoff_levels(run, phi, L):
        sups[l] = float(s.sup(16))
    rows = []
    for k in ks:
        size = run.length(k)
        sel = sol.knots < size
        vals = sol.values[sel]
        osc = float(vals.max() - vals.min()) if sel.any() else 0.0
        bound = 2 * sum(znorm(run.Z(l + 1)) * sups[l] for l in range(k, L + 1))
        rows.append((k, osc, bound))
    return rows


def decay_profile(run, phi: PFun, n, k_range=(2, 12)):
    """Fitted sup rates of S(k) D^l phi, l = 0..n-1, and the L1 rate of D^n phi."""
    from .spectral import measure_exponent
    k1 = min(k_range[1], run.k_max)
    out = {}
    for l in range(n + 1):
        out[l] = measure_exponent(run, phi.deriv(l), "sup" if l < n else "L1", (k_range[0], k1), per_piece=16).rate
    return out


def higher_regularity_solve(run, phi: PFun, n: int, N=100_000, check=True, k_range=(2, 12),
                            chi_tol=1e-6, strict=True):
    """Solve by induction on n: v' solves the equation for D phi, then integrate."""
    lam1 = lam1_estimate(run)
    dom = phi.dom
    total = float(dom.total)
    # exact route for polynomial coboundaries
    if phi.is_polynomial():
        c = polynomial_coboundary(dom, phi, phi.max_degree() + 1)
        if c is not None:
            sol = Solution.from_poly(c, total, mode="polynomial", regularity=float("inf"))
            p = list(c)
            for _ in range(n - 1):
                p = [p[i] * i for i in range(1, len(p))] or [nm.ZERO]
                sol.derivs.append(Solution.from_poly(p, total, mode="polynomial"))
            m0 = level_maps(run, 0)[0]
            X, lets = m0.orbit(0, 2001)
            sol.scale = float(phi.sup(16))
            sol.residual = orbit_residual(run, sol, phi, X, lets)
            _contract(sol, strict)
            return sol
    if n <= 1:
        return gottschalk_hedlund(run, phi, N, check, k_range, strict)

    notes = {}
    if check:
        prof = decay_profile(run, phi, n, k_range)
        notes["rates"] = prof
        notes["lam1"] = lam1
    v0 = higher_regularity_solve(run, phi.deriv(), n - 1, N, check, k_range, chi_tol, strict=False)
    # antiderivative of v0 vanishing at 0
    if v0.poly is not None:
        pv = [nm.ZERO] + [c / (i + 1) for i, c in enumerate(v0.poly)]
        vt = Solution.from_poly(pv, total).f
    else:
        anti = v0.f.antiderivative()
        vt = lambda x, _a=anti: _a(x) - _a(0.0)
    m0 = level_maps(run, 0)[0]
    X, lets = m0.orbit(0, min(N, 20_000) + 1)
    xs = np.array([x / m0.scale for x in X])
    w = np.array([float(x) for x in dom.w])
    ph = _phi_float(phi, X[:-1], lets[:-1], m0)
    chi_s = ph - (vt(xs[1:]) - vt(xs[:-1]))
    lets_a = np.asarray(lets[:-1])
    chi = np.array([np.median(chi_s[lets_a == a]) if (lets_a == a).any() else 0.0 for a in range(dom.d)])
    c = float(chi @ w / (w @ w))
    fit_res = float(np.linalg.norm(chi - c * w) / max(np.linalg.norm(chi), np.linalg.norm(w) * 1e-300, 1e-300))
    notes["chi"] = chi.tolist()
    notes["c"] = c
    notes["chi_fit_residual"] = fit_res
    if fit_res > chi_tol and np.linalg.norm(chi) > chi_tol * float(phi.sup(16)):
        raise SolveError(f"chi is not a multiple of the translation vector (residual {fit_res:.2e})")
    # chi = c w = c (x o T - x), so v = v~0 + c x
    f = lambda x, _c=c: vt(x) + _c * x
    sol = Solution(f, total, mode="higher_regularity", notes=notes)
    sol.knots = v0.knots
    if v0.knots is not None:
        sol.values = f(v0.knots)
    sol.derivs = [v0] + v0.derivs
    sol.scale = float(np.max(np.abs(ph)))
    sol.residual = orbit_residual(run, sol, phi, X, lets)
    _contract(sol, strict)
    return sol
