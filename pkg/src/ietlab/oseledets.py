"""Lyapunov spectrum and Oseledets flags of the accelerated cocycle.

The spectrum comes from a QR-reorthonormalised frame pushed by Z(k); a single
balanced-acceleration matrix can be too ill-conditioned for doubles, so the
recursion runs in multiprecision and only the statistics use numpy. Flags:

* an adjoint frame is pulled back from level ``N = L + window`` with
  Z(l)^t and re-orthonormalised, giving orthonormal frames ``G_l`` whose
  leading m columns span the annihilator of the codimension m flag element;
  these spans are exactly equivariant, so E-flags need no forward pass;
* a basis h_1..h_g, c_1.., h_-g..h_-1 of R^A is read off at level 0 and
  pushed forward with QR, ``Q(l) H = B_l R_l``; leading columns of B_l then
  span the complementary flag U^(l).

Exponents are per acceleration level unless stated otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy import stats

from . import numeric as nm
from .iet_core import omega
from .renorm import CocycleRun


class DegenerateSpectrum(RuntimeError):
    pass


# -- spectrum ---------------------------------------------------------------

@dataclass
class Spectrum:
    g: int
    gamma: int
    exponents: list            # sorted, length d, per level
    confidence: list           # half-widths, same order
    steps_per_level: float
    levels: tuple              # (k0, k1) window used
    norm_slope: float          # slope of log ||Q(k)|| for cross-checking
    log_diag: np.ndarray = field(repr=False, default=None)  # per level increments
    warnings: list = field(default_factory=list)

    @property
    def lam1(self):
        return self.exponents[0]

    def positive(self):
        return self.exponents[:self.g]

    def symmetry_residuals(self):
        """|lambda_i + lambda_-i| for i = 1..g."""
        e = self.exponents
        return [abs(e[i] + e[-1 - i]) for i in range(self.g)]

    def per_step(self):
        return [x / self.steps_per_level for x in self.exponents]

    def to_json(self):
        return {
            "g": self.g,
            "gamma": self.gamma,
            "exponents": [float(x) for x in self.exponents],
            "confidence": [float(x) for x in self.confidence],
            "exponents_per_step": [float(x) for x in self.per_step()],
            "steps_per_level": float(self.steps_per_level),
            "levels": list(self.levels),
            "norm_slope": float(self.norm_slope),
            "symmetry_residuals": [float(x) for x in self.symmetry_residuals()],
            "warnings": list(self.warnings),
        }


def genus_of(run: CocycleRun):
    return run.base.perm.genus()


def estimate_spectrum(run: CocycleRun, trials=10, k_window=None, seed=0, bits=256) -> Spectrum:
    """Exponents from the diagonal of the QR recursion Z(k) X_{k-1} = X_k R_k.

    ``trials`` is the number of batches used for batch-means confidence.
    """
    d = run.d
    if run.k_max < 50:
        raise ValueError("need at least 50 acceleration levels")
    k0, k1 = k_window or (min(10, run.k_max // 10), run.k_max)
    rng = np.random.default_rng(seed)
    # a single Z(k) can have condition number far beyond 1e16, so the QR
    # recursion runs in multiprecision
    diag = np.zeros((run.k_max, d))
    with nm.working_precision(bits):
        cols = [nm.vec(c) for c in np.linalg.qr(rng.standard_normal((d, d)))[0].T]
        for k in range(1, run.k_max + 1):
            z = nm.int_matrix(run.Z(k))
            cols, r = nm.qr(nm.from_columns([nm.matvec(z, c) for c in cols]))
            diag[k - 1] = [nm.log_abs(r[i][i]) for i in range(d)]
    window = diag[k0:k1]
    batches = np.array_split(window, max(2, trials))
    means = np.array([b.mean(axis=0) for b in batches])
    est = window.mean(axis=0)
    sd = means.std(axis=0, ddof=1)
    half = stats.t.ppf(0.975, len(batches) - 1) * sd / math.sqrt(len(batches))
    order = np.argsort(-est)
    g, gamma = genus_of(run)
    ks = np.arange(k0, k1 + 1)
    lognorm = np.array([math.log(max(sum(row) for row in run.Q(k))) for k in ks])
    slope = float(np.polyfit(ks, lognorm, 1)[0])
    steps = (run.levels[k1].n - run.levels[k0].n) / max(1, k1 - k0)
    spec = Spectrum(g, gamma, [float(est[i]) for i in order], [float(half[i]) for i in order],
                    steps, (int(k0), int(k1)), slope, diag)
    e, c = spec.exponents, spec.confidence
    for i in range(d - 1):
        if e[i] - e[i + 1] < c[i] + c[i + 1] and not (g <= i < d - g - 1):
            spec.warnings.append(f"gap between exponents {i + 1} and {i + 2} below confidence")
    if e[0] - e[1] < c[0]:
        spec.warnings.append("top exponent not separated")
    return spec


# -- flags ------------------------------------------------------------------

def u_dim(j, d):
    """dim U_j: j-1 for 2 <= j <= g+1, d+j for -g <= j <= 0."""
    return j - 1 if j >= 1 else d + j


def e_codim(j, d):
    """codim E_j, which equals dim U_j."""
    return u_dim(j, d)


@dataclass
class Filtration:
    run: CocycleRun
    g: int
    gamma: int
    L: int                      # levels 0..L carry data
    G: list                     # adjoint orthonormal frames (list of columns) per level
    B: list                     # forward orthonormal frames (columns) per level
    Rp: list                    # R'_l (level l-1 -> l), index l, Rp[0] = None
    Rinv: list                  # R_l^{-1}, R_l = R'_l ... R'_1
    H: list                     # basis columns at level 0
    labels: list                # ("+", i) / ("0", s) / ("-", j)
    window: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self):
        return self.run.d

    def index(self, label):
        return self.labels.index(label)

    def h(self, i):
        """h_i for i = +-1..+-g."""
        return self.H[self.index(("+", i) if i > 0 else ("-", -i))]

    def c(self, s):
        return self.H[self.index(("0", s))]

    def _block(self, l, m):
        key = ("blk", l, m)
        out = self._cache.get(key)
        if out is None:
            F = self.G[l][:m]
            Bc = self.B[l][:m]
            M = [[nm.dot(f, b) for b in Bc] for f in F]
            out = (F, Bc, M)
            self._cache[key] = out
        return out

    def coeff_U(self, l, j, x):
        """Coordinates c with P_{U_j^(l)} x = B_l[:, :m] c."""
        m = u_dim(j, self.d)
        if m == 0:
            return []
        if m == self.d:
            return [nm.dot(b, x) for b in self.B[l]]
        F, Bc, M = self._block(l, m)
        return nm.solve(M, [nm.dot(f, x) for f in F])

    def proj_U(self, l, j, x):
        c = self.coeff_U(l, j, x)
        out = nm.zeros(self.d)
        for ci, b in zip(c, self.B[l]):
            out = nm.axpy(ci, b, out)
        return out

    def proj_E(self, l, j, x):
        return nm.vsub(list(x), self.proj_U(l, j, x))

    def pullback_U(self, l, j, x):
        """Q(l)^{-1} P_{U_j^(l)} x, expressed at level 0 (as a vector in R^A)."""
        return self.combine(self.pullback_coords(l, j, x))

    def pullback_coords(self, l, j, x):
        """H-coordinates of Q(l)^{-1} P_{U_j^(l)} x."""
        m = u_dim(j, self.d)
        c = self.coeff_U(l, j, x)
        R = self.Rinv[l]
        return [nm.dot(R[i][:m], c) for i in range(m)] + [nm.ZERO] * (self.d - m)

    def combine(self, coords):
        out = nm.zeros(self.d)
        for ci, h in zip(coords, self.H):
            if ci:
                out = nm.axpy(ci, h, out)
        return out

    def coordinates(self, x):
        """Coordinates of x in the level-0 basis H."""
        key = "Hinv"
        A = self._cache.get(key)
        if A is None:
            A = nm.inv(nm.from_columns(self.H))
            self._cache[key] = A
        return nm.matvec(A, x)

    def condition(self):
        return nm.cond(nm.from_columns(self.H))

    def sin_angle(self, l, j):
        """sin of the angle between E_j^(l) and U_j^(l)."""
        m = u_dim(j, self.d)
        if m in (0, self.d):
            return 1.0
        F, Bc, M = self._block(l, m)
        # principal angle: U spanned by Bc, E = F^perp; smallest singular value of F^t Bc
        Mf = np.array([[float(x) for x in row] for row in M])
        return float(np.linalg.svd(Mf, compute_uv=False).min())

    def growth_rates(self, k0, k1):
        """Slopes of log ||Q(k) h|| over [k0, k1] for each basis vector."""
        ks = np.arange(k0, k1 + 1)
        out = []
        for i in range(self.d):
            vals = [nm.log_abs(nm.vnorm(self.pushed(k, i))) for k in ks]
            out.append(float(np.polyfit(ks, vals, 1)[0]))
        return out

    def pushed(self, k, i):
        """Q(k) applied to the i-th basis vector, via B_k R_k."""
        R = self.R(k)
        out = nm.zeros(self.d)
        for t in range(i + 1):
            out = nm.axpy(R[t][i], self.B[k][t], out)
        return out

    def R(self, k):
        key = ("R", k)
        out = self._cache.get(key)
        if out is None:
            out = nm.inv(self.Rinv[k])
            self._cache[key] = out
        return out

    def local_exponents(self, k0, k1):
        """Mean log|R'_ii| per level over (k0, k1]: the finite-window spectrum."""
        acc = [0.0] * self.d
        for l in range(k0 + 1, k1 + 1):
            for i in range(self.d):
                acc[i] += nm.log_abs(self.Rp[l][i][i])
        return [a / (k1 - k0) for a in acc]


def estimate_flags(run: CocycleRun, L=None, window=200, seed=0, check_angles=True) -> Filtration:
    """Flags on levels 0..L using an adjoint pull-back from level L + window.

    Works at the current gmpy2 precision.
    """
    d = run.d
    g, gamma = genus_of(run)
    if L is None:
        L = max(0, run.k_max - window)
    N = min(run.k_max, L + window)
    if N - L < window:
        warnings.warn(f"flag window shortened to {N - L} levels")
    rng = np.random.default_rng(seed)
    X = [nm.vec(c) for c in np.linalg.qr(rng.standard_normal((d, d)))[0].T]
    Zm = {}

    def zmat(l):
        z = Zm.get(l)
        if z is None:
            z = nm.int_matrix(run.Z(l))
            Zm[l] = z
        return z

    G = [None] * (L + 1)
    cols = X
    for l in range(N, 0, -1):
        z = zmat(l)
        cols = [nm.tmatvec(z, c) for c in cols]
        cols, _ = nm.qr(nm.from_columns(cols))
        if l - 1 <= L:
            G[l - 1] = cols
    if N == 0:
        G[0] = X

    # level-0 basis
    om = omega(run.base.perm)
    w = nm.matvec(nm.int_matrix(om), run.lam(0, nm.mp))
    Hspace, _ = _range_basis(om)
    G0 = G[0]
    H = []
    labels = []
    for m in range(1, g + 1):
        v = list(G0[m - 1])
        # project onto H(pi), then onto the annihilator complement of F_{m-1}
        v = _project_onto(v, Hspace)
        v = _orth_out(v, G0[:m - 1])
        v = _orth_out(v, G0[:m - 1])
        H.append(nm.vscale(1 / nm.vnorm(v), v))
        labels.append(("+", m))
    for s in range(1, gamma):
        H.append(list(G0[g + s - 1]))
        labels.append(("0", s))
    for i in range(g, 1, -1):
        H.append(list(G0[d - i]))
        labels.append(("-", i))
    H.append(nm.vscale(1 / nm.vnorm(w), w))
    labels.append(("-", 1))

    B = [None] * (L + 1)
    Rp = [None] * (L + 1)
    Rinv = [None] * (L + 1)
    Bq, R0 = nm.qr(nm.from_columns(H))
    B[0] = Bq
    Rinv[0] = nm.tri_inv(R0)
    for l in range(1, L + 1):
        z = zmat(l)
        pushed = [nm.matvec(z, b) for b in B[l - 1]]
        Bq, r = nm.qr(nm.from_columns(pushed))
        B[l] = Bq
        Rp[l] = r
        Rinv[l] = nm.matmul(Rinv[l - 1], nm.tri_inv(r))
    filt = Filtration(run, g, gamma, L, G, B, Rp, Rinv, H, labels, window)
    if check_angles:
        for j in list(range(2, g + 2)) + list(range(-g, 0)):
            s = filt.sin_angle(0, j)
            if s < 1e-6:
                raise DegenerateSpectrum(f"angle collapse for flag {j}: sin = {s:.2e}")
    return filt


def _range_basis(om):
    """Orthonormal basis of the image of Omega."""
    cols = [nm.vec(c) for c in zip(*om)]
    basis = []
    for c in cols:
        v = _orth_out(_orth_out(c, basis), basis)
        n = nm.vnorm(v)
        if n > nm.mp(1e-20):
            basis.append(nm.vscale(1 / n, v))
    return basis, len(basis)


def _orth_out(v, basis):
    for b in basis:
        v = nm.axpy(-nm.dot(b, v), b, v)
    return v


def _project_onto(v, basis):
    out = nm.zeros(len(v))
    for b in basis:
        out = nm.axpy(nm.dot(b, v), b, out)
    return out


# -- restricted norms and Diophantine series --------------------------------

def _norm2(M):
    s = max(abs(x) for row in M for x in row)
    if s == 0:
        return nm.ZERO
    Mf = np.array([[float(x / s) for x in row] for row in M])
    return s * nm.mp(float(np.linalg.norm(Mf, 2)))


def _min_sv(M):
    s = max(abs(x) for row in M for x in row)
    Mf = np.array([[float(x / s) for x in row] for row in M])
    return s * nm.mp(float(np.linalg.svd(Mf, compute_uv=False).min()))


def restricted_U_inverse_norm(filt: Filtration, j, k, l):
    """||Q|_{U_j^(k)}(k,l)^{-1}||: inverse of the smallest singular value of R(k,l) block."""
    m = u_dim(j, filt.d)
    Rkl = nm.matmul(filt.R(l), filt.Rinv[k])
    block = [row[:m] for row in Rkl[:m]]
    return 1 / _min_sv(block)


def restricted_E_norm(filt: Filtration, j, k, l):
    """||Q|_{E_j^(k)}(k,l)|| using the orthonormal frames of E at both ends."""
    m = e_codim(j, filt.d)
    d = filt.d
    if m == d:
        return nm.ZERO
    q = nm.int_matrix(filt.run.Q(k, l))
    Ek = _complement(filt.G[k], m)
    El = _complement(filt.G[l], m)
    imgs = [nm.matvec(q, e) for e in Ek]
    M = [[nm.dot(f, v) for v in imgs] for f in El]
    return _norm2(M)


def _complement(G, m):
    """Orthonormal frame of span(G[:m])^perp (the remaining columns)."""
    return G[m:]


def angle_table(filt: Filtration, ks=None):
    ks = range(filt.L + 1) if ks is None else ks
    d, g = filt.d, filt.g
    out = []
    for k in ks:
        for j in list(range(2, g + 2)) + list(range(-g, 0)):
            out.append((k, j, filt.sin_angle(k, j)))
    return out


def projection_norms(filt: Filtration, j, ks):
    """(k, ||P_E||, ||P_U||) in the 2-norm."""
    out = []
    d = filt.d
    for k in ks:
        cols_u = [filt.proj_U(k, j, e) for e in nm.eye(d)]
        Pu = nm.from_columns(cols_u)
        Pe = [[(nm.mp(1) if i == t else nm.ZERO) - Pu[i][t] for t in range(d)] for i in range(d)]
        out.append((k, float(_norm2(Pe)), float(_norm2(Pu))))
    return out


def bracket(s, a):
    """<s>^a: s^a for a > 0, 1 + log s for a = 0."""
    s = nm.mp(s)
    return s ** a if a > 0 else 1 + gmpy2.log(s)


@dataclass
class DioSeries:
    kind: str
    params: dict
    first: list                # K_k or V_k per k
    second: list               # C_k or W_k per k
    depth: int
    rates: tuple               # fitted exponential rates (first, second)
    tail: float
    flagged: bool
    r_convention: str = "r(k,l) = l - k"

    def to_json(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "first": [float(nm.log_abs(x)) for x in self.first],
            "second": [float(nm.log_abs(x)) for x in self.second],
            "depth": self.depth,
            "rates": list(self.rates),
            "tail": self.tail,
            "flagged": self.flagged,
            "r_convention": self.r_convention,
        }


def dio_series(run: CocycleRun, filt: Filtration, kind="KC", a=0.0, i=2, j=0,
               tau=None, s=None, K=None):
    """Partial sums of the Diophantine series with r(k,l) = l - k.

    kind "KC" gives K^{a,i,tau}_k and C^{a,i,tau}_k; kind "VW" gives
    V^{j,tau}_k(s) and W^{j,tau}_k(s) for a sequence s (callable or list).
    Both are truncated at the last level carrying flags. Logs are returned.
    """
    L = filt.L
    K = L if K is None else min(K, L)
    if tau is None:
        tau = 0.05 * max(filt.local_exponents(0, L))
    qn = [nm.mp(max(sum(row) for row in run.Q(l))) for l in range(L + 1)]
    zn = [None] + [nm.mp(max(sum(row) for row in run.Z(l))) for l in range(1, L + 1)]
    first, second = [], []
    if kind == "KC":
        wt = [zn[l + 1] * bracket(qn[l], a) * qn[l + 1] ** tau for l in range(L)]
        for k in range(K):
            first.append(gmpy2.fsum(restricted_U_inverse_norm(filt, i, k, l + 1) * wt[l]
                                    for l in range(k, L)))
            second.append(gmpy2.fsum(restricted_E_norm(filt, i, l + 1, k) * wt[l]
                                     for l in range(k)) if k else nm.ZERO)
    elif kind == "VW":
        if s is None:
            raise ValueError("VW series needs a sequence s")
        sv = [nm.mp(s(l) if callable(s) else s[l]) for l in range(L)]
        wt = [qn[l + 1] ** tau * zn[l + 1] * sv[l] for l in range(L)]
        for k in range(K):
            first.append(gmpy2.fsum(restricted_U_inverse_norm(filt, -j, k, l + 1) * wt[l]
                                    for l in range(k, L)))
            second.append(gmpy2.fsum(restricted_E_norm(filt, -j, l + 1, k) * wt[l]
                                     for l in range(k)) if k else nm.ZERO)
    else:
        raise ValueError(f"unknown series kind {kind!r}")
    rates = (_fit_rate(first), _fit_rate(second))
    tail = float(nm.log_abs(first[-1])) if first else -math.inf
    flagged = kind == "VW" and rates[0] >= 0
    return DioSeries(kind, {"a": a, "i": i, "j": j, "tau": tau}, first, second, K, rates,
                     tail, flagged)


def _fit_rate(vals):
    pts = [(k, nm.log_abs(v)) for k, v in enumerate(vals) if v and v > 0]
    pts = pts[len(pts) // 4:]
    if len(pts) < 3:
        return float("nan")
    ks, ys = zip(*pts)
    return float(np.polyfit(ks, ys, 1)[0])
