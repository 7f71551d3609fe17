"""Saddle-local distributions and the singular models attached to saddles.

A saddle of multiplicity m is seen through the jet of f*V at the saddle,
written with Wirtinger derivatives d^k/dz^i dzbar^(k-i). ``jet[k][i]``
stores that derivative.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gamma as _gamma

from . import numeric as nm
from .pfun import PFun, geometric_type


class SaddleError(ValueError):
    pass


# -- orders -------------------------------------------------------------------

def order(m, k):
    """o(sigma, k) = (k - (m - 2)) / m, exact."""
    return Fraction(k - (m - 2), m)


def hat_order(m, k):
    return k - (m - 2)


def is_log(m, k):
    return (k - (m - 2)) % m == 0


def k_r(m, r):
    """Smoothness needed for the distributions below order r."""
    r = Fraction(str(r)) if isinstance(r, float) else Fraction(r)
    if m == 2 and r <= Fraction(1, 2):
        return math.ceil(m * r + (m - 1))
    return math.ceil(m * r + (m - 2))


def n_a(o):
    """(n, a) with n = ceil(o), a = n - o, so that n - a = o."""
    o = Fraction(o)
    n = math.ceil(o)
    return n, n - o


# -- special functions --------------------------------------------------------

def _gamma_conv(x):
    """Gamma with Gamma(0) = 1 and Gamma(-n) = (-1)^n / n!."""
    if float(x).is_integer() and x <= 0:
        n = int(-x)
        return (-1) ** n / math.factorial(n)
    return float(_gamma(x))


def frak_B(x, y):
    """pi e^{i pi (y-x)/2} / 2^(x+y-2) * Gamma(x+y-1) / (Gamma(x) Gamma(y))."""
    if float(x).is_integer() or float(y).is_integer():
        raise SaddleError("frak_B needs non-integer arguments")
    x, y = float(x), float(y)
    pre = math.pi * cmath.exp(1j * math.pi * (y - x) / 2) / 2 ** (x + y - 2)
    return pre * _gamma_conv(x + y - 1) / (_gamma(x) * _gamma(y))


def gbinom(x, n):
    """Generalised binomial x (x-1) ... (x-n+1) / n! for real x."""
    out = 1.0
    for i in range(n):
        out *= (x - i) / (i + 1)
    return out


# -- jets ---------------------------------------------------------------------

@dataclass
class SaddleJet:
    sigma: str
    m: int
    jet: dict                      # k -> list of k+1 complex values, index i = z-order

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise SaddleError("multiplicity must be an integer >= 2")
        self.jet = {int(k): [complex(v) for v in vs] for k, vs in self.jet.items()}
        for k, vs in self.jet.items():
            if len(vs) != k + 1:
                raise SaddleError(f"order {k} needs {k + 1} entries")

    @property
    def theta(self):
        return cmath.exp(1j * math.pi / self.m)

    @property
    def order(self):
        return max(self.jet) if self.jet else -1

    def d(self, k, i):
        """d^k (f V) / dz^i dzbar^(k-i) at the saddle."""
        vs = self.jet.get(k)
        if vs is None:
            raise SaddleError(f"jet lacks order {k}")
        return vs[i]

    def is_real_symmetric(self, tol=1e-10):
        """Conjugation symmetry of a real-valued f V."""
        for k, vs in self.jet.items():
            scale = max([abs(v) for v in vs] + [1e-300])
            if any(abs(vs[i] - vs[k - i].conjugate()) > tol * scale for i in range(k + 1)):
                return False
        return True

    def combine(self, other, a=1.0, b=1.0):
        ks = set(self.jet) | set(other.jet)
        z = lambda J, k: J.jet.get(k, [0j] * (k + 1))
        return SaddleJet(self.sigma, self.m, {k: [a * u + b * v for u, v in zip(z(self, k), z(other, k))] for k in ks})

    def to_json(self):
        return {"sigma": self.sigma, "m": self.m,
                "jet": {str(k): [[v.real, v.imag] for v in vs] for k, vs in sorted(self.jet.items())}}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        jet = {int(k): [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in vs]
               for k, vs in data["jet"].items()}
        return cls(str(data.get("sigma", "s")), int(data["m"]), jet)

    @classmethod
    def from_callback(cls, fV, m, order, scale=1.0, sigma="s", extra=6, check=True):
        """Wirtinger jet of fV(x, y) (vectorised) from samples on circles.

        On |z| = rho, fV = sum_{p,q} c_pq rho^(p+q) e^{i(p-q)t} with
        c_pq = d^{p+q} fV / dz^p dzbar^q / (p! q!). A Fourier transform in t
        separates p - q and a least-squares fit in rho separates p + q.
        """
        jet = _circle_jet(fV, order, 0.5 * scale, extra)
        if check:
            alt = _circle_jet(fV, order, 0.3 * scale, extra)
            err = max(abs(jet[k][i] - alt[k][i]) / max(1.0, abs(jet[k][i]))
                      for k in jet for i in range(k + 1))
            if err > 1e-6:
                raise SaddleError(f"jet extraction unstable (two radii differ by {err:.2e})")
        return cls(sigma, m, jet)


def _circle_jet(fV, order, rmax, extra):
    K = order + extra
    nt = 2 * K + 2
    nr = K + 2
    t = 2 * np.pi * np.arange(nt) / nt
    # Chebyshev nodes on (0, rmax]: mode nu has the parity of nu in rho, so
    # these are the positive half of a symmetric node set
    rho = rmax * np.cos(np.pi * (np.arange(nr) + 0.5) / (2 * nr))
    F = np.empty((nr, nt), complex)
    for r, p in enumerate(rho):
        F[r] = fV(p * np.cos(t), p * np.sin(t))
    modes = np.fft.fft(F, axis=1) / nt           # modes[:, nu] ~ sum_k c rho^k
    jet = {k: [0j] * (k + 1) for k in range(order + 1)}
    u = rho / rmax
    for nu in range(-K, K + 1):
        ks = list(range(abs(nu), K + 1, 2))
        if not ks:
            continue
        A = np.vstack([u ** k for k in ks]).T
        coef, *_ = np.linalg.lstsq(A, modes[:, nu % nt], rcond=None)
        for k, c in zip(ks, coef):
            if k > order:
                continue
            p = (k + nu) // 2
            q = k - p
            jet[k][p] = c / rmax ** k * math.factorial(p) * math.factorial(q)
    return jet


# -- saddle distributions -----------------------------------------------------

def in_TD(m, k, j):
    return 0 <= j <= min(k, m - 2) and (j - (k - (m - 1))) % m != 0


def eval_d(jet: SaddleJet, k, j):
    """d^k_{sigma,j} of the jet."""
    m = jet.m
    if not in_TD(m, k, j):
        raise SaddleError(f"({k},{j}) is not an admissible index for m={m}")
    top = ((m - 1) - j) / m - 1
    bot = ((k - j) - (m - 1)) / m
    tot = 0j
    n = 0
    while j + n * m <= k:
        c = math.comb(k, j + n * m) * gbinom(top, n) / gbinom(bot, n)
        tot += c * jet.d(k, j + n * m)
        n += 1
    return tot


def c_indices(m, k):
    return [i for i in range(k + 1) if (i - (m - 1)) % m != 0 and (i - (k - (m - 1))) % m != 0]


def eval_C(jet: SaddleJet, k, l):
    """C^k_{sigma,l} of the jet."""
    m = jet.m
    if not (isinstance(l, int) and 0 <= l):
        raise SaddleError("sector index must be a non-negative integer")
    th = jet.theta
    tot = 0j
    for i in c_indices(m, k):
        B = frak_B(((m - 1) - i) / m, ((m - 1) - k + i) / m)
        tot += th ** (l * (2 * i - k)) * math.comb(k, i) * B * jet.d(k, i)
    return tot


def eval_C_class(jet: SaddleJet, k, sectors):
    """C_[(sigma,k,l)]: the sum over the sectors of one class."""
    return sum((eval_C(jet, k, l) for l in sectors), 0j)


def TD(m, k_max):
    return [(k, j) for k in range(k_max + 1) for j in range(min(k, m - 2) + 1) if in_TD(m, k, j)]


def TC(m, k_max, sectors=None):
    sectors = range(2 * m) if sectors is None else sectors
    return [(k, l) for k in range(k_max + 1) for l in sectors]


# -- singular models on the interval -------------------------------------------

@dataclass
class SaddleClass:
    """One class [(sigma, k, l)]: saddle data and where its model lives."""
    sigma: str
    m: int
    k: int
    sectors: tuple
    letter: int
    side: str = "+"          # "+" left end of I_letter, "-" right end

    @property
    def order(self):
        return order(self.m, self.k)

    def to_json(self):
        return {"sigma": self.sigma, "m": self.m, "k": self.k, "sectors": list(self.sectors),
                "letter": self.letter, "side": self.side}


@dataclass
class XiModel:
    cls: SaddleClass
    exponent: Fraction
    log: bool
    n: int
    a: Fraction
    xi_hat: PFun
    xi: PFun = None
    zero_residual: float = None
    geometric: bool = None
    notes: dict = field(default_factory=dict)

    def to_json(self):
        return {"class": self.cls.to_json(), "exponent": str(self.exponent), "log": self.log,
                "n": self.n, "a": str(self.a), "zero_residual": self.zero_residual,
                "geometric": self.geometric, "notes": self.notes}


def xi_hat(dom, c: SaddleClass):
    """(s - l)^o / (m^2 k!) near one end of I_letter, with -log in the integer case."""
    o = c.order
    lg = is_log(c.m, c.k)
    coef = nm.mp(1) / (c.m ** 2 * math.factorial(c.k))
    if lg:
        coef = -coef
    n, a = n_a(o)
    f = PFun.atom(dom, c.letter, 0 if c.side in ("+", "left", 0) else 1, o, coef, log=1 if lg else 0)
    f.n, f.a = n, float(a)
    return f


def xi_models(basis, classes, correct=True, check=False, tol=1e-6):
    """XiModel per class; with ``correct`` the model is reduced by the spectral basis.

    ``check`` re-evaluates the functionals on each reduced model (doubles the cost).
    """
    from .spectral import Functionals, d_functionals, triples
    dom = basis.cor.dom0
    out = []
    for c in classes:
        o = c.order
        n, a = n_a(o)
        xh = xi_hat(dom, c)
        ok, _ = geometric_type(xh, basis.cor.run.perm(0), float(a), n)
        side = "+" if c.side in ("+", "left", 0) else "-"
        cp = xh.deriv(n).C_plus(c.letter, float(a)) if side == "+" else xh.deriv(n).C_minus(c.letter, float(a))
        model = XiModel(c, o, is_log(c.m, c.k), n, a, xh, geometric=ok)
        model.notes["C_end"] = float(cp)
        if correct:
            if n > basis.n_max:
                raise SaddleError(f"basis built to order {basis.n_max}, class needs {n}")
            rep = d_functionals(basis, xh, float(a), n)
            xi = rep.remainder
            xi.n, xi.a = n, float(a)
            model.xi = xi
            model.notes["f_hat"] = {str(t["tag"]): t["value"] for t in rep.triples}
            if not check:
                out.append(model)
                continue
            F = Functionals(basis, xi, float(a), n)
            vals = [abs(float(F.f(t))) for t in triples(basis, float(a), n)
                    if basis.elements[t].order < float(o)]
            model.zero_residual = max(vals, default=0.0)
        out.append(model)
    return out


# -- assembly -----------------------------------------------------------------

@dataclass
class FReport:
    r: float
    n: int
    a: float
    s_r: PFun
    F: dict                 # tag -> value
    used: list              # classes subtracted

    def to_json(self):
        return {"r": self.r, "n": self.n, "a": self.a,
                "F": {f"({t[0]},{t[1]},{t[2]})": v for t, v in self.F.items()},
                "used": [c.to_json() for c in self.used]}


def assemble_F(basis, phi: PFun, models, coeffs, r, rtol=1e-20):
    """s_r(phi) = phi - sum_{o < r} C xi and F_t = f_t(s_r) for o(t) < r."""
    from .spectral import Functionals, triples
    lo = -Fraction(max(mm.cls.m for mm in models) - 2, max(mm.cls.m for mm in models)) if models else -1
    if r < lo:
        raise SaddleError("r below the admissible range")
    rf = Fraction(str(r)) if isinstance(r, float) else Fraction(r)
    n, a = n_a(rf)
    if n > basis.n_max:
        raise SaddleError(f"basis built to order {basis.n_max}, r needs {n}")
    s = phi
    used = []
    for mdl, c in zip(models, coeffs):
        if mdl.exponent < rf:
            if mdl.xi is None:
                raise SaddleError("model was not corrected")
            s = s - mdl.xi.scale(c)
            used.append(mdl.cls)
    # leftover singular atoms stronger than the target class
    size = max(float(abs(c)) for p in phi.pieces for *_, c, _ in p.atoms) if phi.atom_count() else 0.0
    for b, p in enumerate(s.pieces):
        for side, e, j, c, off in p.atoms:
            if off == 0 and (e < rf or (e == rf and j > 0)) and abs(float(c)) > rtol * max(size, 1e-300):
                raise SaddleError(f"remainder keeps an endpoint singularity of exponent {e} on letter {b} "
                                  f"(class with order {e} not supplied)")
    s.n, s.a = n, float(a)
    F = Functionals(basis, s, float(a), n)
    vals = {}
    for t in triples(basis, float(a), n):
        if basis.elements[t].order < float(rf):
            vals[t] = float(F.f(t))
    return FReport(float(rf), n, float(a), s, vals, used)


def r_independence(basis, phi, models, coeffs, r1, r2):
    """max |F_t(r1) - F_t(r2)| over common triples."""
    A = assemble_F(basis, phi, models, coeffs, r1)
    B = assemble_F(basis, phi, models, coeffs, r2)
    common = set(A.F) & set(B.F)
    return max((abs(A.F[t] - B.F[t]) for t in common), default=0.0), A, B


def spectral_report(run, basis, phi, models, coeffs, r, k_range=(5, 25)):
    """F values, class coefficients and remainder decay against -lambda_1 r."""
    from .spectral import d_functionals, remainder_decay
    rep = assemble_F(basis, phi, models, coeffs, r)
    dist = d_functionals(basis, rep.s_r, rep.a, rep.n)
    rates = remainder_decay(run, dist, k_range)
    lam1 = basis.exps[0]
    return {
        "F": rep.to_json()["F"],
        "C": {f"{m.cls.sigma}:{m.cls.k}": c for m, c in zip(models, coeffs) if m.exponent < Fraction(str(r))},
        "remainder_rates": {str(l): v for l, v in rates.items()},
        "envelope": -lam1 * r,
    }
