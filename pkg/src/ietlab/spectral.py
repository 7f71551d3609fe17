"""Piecewise polynomial basis, d-functionals, the reduction r_{a,n} and f_t.

Basis elements are kept in "primitive form": a sum over k of the k-fold
primitive (normalised at 0) of a piecewise constant vector. Differentiation
and integration then act on the index k only, and increment sequences of
basis elements are linear combinations of cached sequences of iterated
primitives of interval indicators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import numeric as nm
from .correction import Corrector, DeltaSeq, _lam
from .pfun import PFun, birkhoff_levels


class FrameError(ArithmeticError):
    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


# -- primitive-form polynomials ------------------------------------------------

@dataclass
class PrimPoly:
    """sum_k prim^k(terms[k]) with terms[k] a vector in R^A."""
    terms: dict

    @classmethod
    def gamma(cls, vec):
        return cls({0: nm.vec(vec)})

    def deriv(self, m=1):
        return PrimPoly({k - m: v for k, v in self.terms.items() if k >= m})

    def prim(self, m=1):
        return PrimPoly({k + m: v for k, v in self.terms.items()})

    def __add__(self, other):
        out = {k: list(v) for k, v in self.terms.items()}
        for k, v in other.terms.items():
            out[k] = nm.vadd(out[k], v) if k in out else list(v)
        return PrimPoly(out)

    def scale(self, s):
        s = nm.mp(s)
        return PrimPoly({k: nm.vscale(s, v) for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + other.scale(-1)

    @property
    def degree(self):
        return max(self.terms) if self.terms else 0

    def seq(self, cor: Corrector) -> DeltaSeq:
        out = DeltaSeq([nm.zeros(cor.d) for _ in range(cor.L + 1)])
        for k, v in self.terms.items():
            if k == 0:
                out = out + cor.gamma_seq(v)
            else:
                out = out + cor.prim_seq(v, kind=k)
        return out

    def pfun(self, dom):
        tot = PFun.zero(dom)
        for k, v in sorted(self.terms.items()):
            f = PFun.from_gamma(dom, v)
            for _ in range(k):
                f = f.primitive()
            tot = tot + f
        for p in tot.pieces:
            p.trim()
        return tot

    def to_json(self):
        return {str(k): nm.to_floats(v) for k, v in sorted(self.terms.items())}


def order_of(tag, exps):
    """o(t): l - lambda_i/lambda_1, l, l + lambda_j/lambda_1."""
    l, kind, idx = tag
    l1 = exps[0]
    if kind == "+":
        return l - exps[idx - 1] / l1
    if kind == "0":
        return float(l)
    return l + exps[idx - 1] / l1


@dataclass
class BasisElement:
    tag: tuple                  # (l, "+"|"0"|"-", index)
    poly: PrimPoly
    order: float
    residuals: dict = field(default_factory=dict)

    def to_json(self):
        return {"tag": list(self.tag), "order": self.order, "terms": self.poly.to_json(),
                "residuals": self.residuals}


def index_j_i(exps, g, i):
    """1 <= j <= g with lambda_1 - lambda_j <= lambda_i < lambda_1 - lambda_{j+1}."""
    lam = lambda k: _lam(exps, g, k)
    for j in range(1, g + 1):
        if exps[0] - lam(j) <= lam(i) < exps[0] - lam(j + 1):
            return j
    raise ValueError(f"no j_i for i={i}")


def index_i_j(exps, g, j):
    """2 <= i <= g+1 with lambda_i <= lambda_1 - lambda_j < lambda_{i-1}."""
    lam = lambda k: _lam(exps, g, k)
    for i in range(2, g + 2):
        if lam(i) <= exps[0] - lam(j) < lam(i - 1):
            return i
    raise ValueError(f"no i_j for j={j}")


def index_a(exps, g, a):
    """(i_a, j_a) for a singularity exponent 0 <= a < 1."""
    lam = lambda k: _lam(exps, g, k)
    l1 = exps[0]
    ia = next(i for i in range(2, g + 2) if lam(i) <= l1 * a < lam(i - 1))
    ja = next(j for j in range(1, g + 1) if l1 - lam(j) <= l1 * a < l1 - lam(j + 1))
    return ia, ja


class Basis:
    """The elements h_{i,l}, c_{s,l}, h_{-j,l} for l <= n_max."""

    def __init__(self, cor: Corrector, n_max=2, check=True):
        self.cor = cor
        self.filt = cor.filt
        self.g, self.gamma = self.filt.g, self.filt.gamma
        self.exps = cor.exponents
        self.n_max = n_max
        self.elements = {}
        self._seq = {}
        self._build(check)

    # helpers
    def seq(self, p: PrimPoly):
        key = id(p)
        s = self._seq.get(key)
        if s is None:
            s = p.seq(self.cor)
            self._seq[key] = (s, p)
            return s
        return s[0]

    def op(self, name, p: PrimPoly, *args):
        cor = self.cor
        if name == "h":
            return cor.h(None, args[0], seq=p.seq(cor))
        if name == "hminus":
            j, i = args
            return cor.hminus(None, j, i, seq=p.seq(cor), dseq=p.deriv().seq(cor))
        if name == "h0":
            return cor.h0(None, seqs=(p.seq(cor), p.deriv().seq(cor), p.deriv(2).seq(cor)))
        raise ValueError(name)

    def _add(self, tag, poly, **res):
        self.elements[tag] = BasisElement(tag, poly, order_of(tag, self.exps),
                                          {k: float(v) for k, v in res.items()})

    def _build(self, check):
        g, f = self.g, self.filt
        n = self.n_max
        for i in range(1, g + 1):
            self._add((0, "+", i), PrimPoly.gamma(f.h(i)))
            self._add((0, "-", i), PrimPoly.gamma(f.h(-i)))
        for s in range(1, self.gamma):
            self._add((0, "0", s), PrimPoly.gamma(f.c(s)))
        if n == 0:
            return
        # level one
        for i in range(2, g + 1):
            ji = index_j_i(self.exps, g, i)
            t = self.elements[(0, "+", i)].poly.prim()
            r = self.op("hminus", t, ji, i)
            self._add((1, "+", i), t - PrimPoly.gamma(r.value))
        t = self.elements[(0, "+", 1)].poly.prim()
        r = self.op("h", t, g + 1)
        self._add((1, "+", 1), t - PrimPoly.gamma(r.value))
        for s in range(1, self.gamma):
            t = self.elements[(0, "0", s)].poly.prim()
            r = self.op("hminus", t, 1, g + 1)
            self._add((1, "0", s), t - PrimPoly.gamma(r.value))
        for j in range(1, g + 1):
            t = self.elements[(0, "-", j)].poly.prim()
            r = self.op("h0", t)
            self._add((1, "-", j), t - PrimPoly.gamma(r.value))
        # higher levels
        for l in range(1, n):
            for tag in [t for t in self.elements if t[0] == l]:
                t = self.elements[tag].poly.prim()
                if tag == (1, "+", 1):
                    r = self.op("hminus", t, 1, g + 1)
                else:
                    r = self.op("h0", t)
                self._add((l + 1, tag[1], tag[2]), t - PrimPoly.gamma(r.value))
        if check:
            self.check_vanishing()

    def vanishing_conditions(self, tag):
        """The defining vanishing condition of an element as (operator, args)."""
        l, kind, idx = tag
        g = self.g
        if l == 0:
            return None
        if kind == "+" and idx >= 2:
            return ("hminus", index_j_i(self.exps, g, idx), idx) if l == 1 else ("h0",)
        if kind == "+":
            return {1: ("h", g + 1), 2: ("hminus", 1, g + 1)}.get(l, ("h0",))
        if kind == "0":
            return ("hminus", 1, g + 1) if l == 1 else ("h0",)
        return ("h0",)

    def check_vanishing(self):
        for tag, el in self.elements.items():
            cond = self.vanishing_conditions(tag)
            if cond is None:
                continue
            r = self.op(cond[0], el.poly, *cond[1:])
            el.residuals["vanishing"] = r.norm
        return {t: e.residuals.get("vanishing") for t, e in self.elements.items()}

    def tags(self, n=None):
        n = self.n_max if n is None else n
        return sorted((t for t in self.elements if t[0] <= n), key=lambda t: (t[0], "+0-".index(t[1]), t[2]))

    def pfun(self, tag):
        return self.elements[tag].poly.pfun(self.cor.dom0)

    def __len__(self):
        return len(self.elements)


def build_basis(run, filt, n_max=2, L=None, exponents=None, check=True):
    cor = Corrector(run, filt, L=L, exponents=exponents)
    return Basis(cor, n_max, check)


# -- exponents of S(k) ------------------------------------------------------------

@dataclass
class ExponentFit:
    rate: float
    stderr: float
    ks: list
    logs: list
    wide: bool

    def to_json(self):
        return {"rate": self.rate, "stderr": self.stderr, "ks": self.ks, "logs": self.logs, "wide": self.wide}


def measure_exponent(run, phi: PFun, norm="sup", k_range=(10, 40), per_piece=24):
    """Least-squares slope of log ||S(k)phi|| over k in k_range."""
    k0, k1 = k_range
    ks, logs = [], []
    for k, s in birkhoff_levels(run, phi, k1):
        if k < k0:
            continue
        if norm == "sup":
            v = s.sup(per_piece)
        elif norm in ("L1", "l1"):
            v = s.l1(per_piece) / s.dom.total
        else:
            raise ValueError(norm)
        ks.append(k)
        logs.append(nm.log_abs(v))
    return _fit(ks, logs)


def _fit(ks, logs):
    pts = [(k, y) for k, y in zip(ks, logs) if math.isfinite(y)]
    if len(pts) < 3:
        return ExponentFit(float("nan"), float("inf"), list(ks), list(logs), True)
    x = np.array([p[0] for p in pts], float)
    y = np.array([p[1] for p in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(len(x) - 2, 1)
    se = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    rate = float(coef[0])
    return ExponentFit(rate, se, [int(k) for k in ks], [float(v) for v in logs],
                       wide=se > 0.05 * max(abs(rate), 1e-12))


# -- d-functionals and distributions --------------------------------------------

@dataclass
class DistributionReport:
    a: float
    n: int
    triples: list               # [{"tag", "order", "value", "invariant", "borderline"}]
    remainder: PFun
    condition: float
    remainder_rates: dict = field(default_factory=dict)

    def values(self):
        return {tuple(t["tag"]): t["value"] for t in self.triples}

    def to_json(self):
        return {
            "a": self.a,
            "n": self.n,
            "triples": [dict(t, tag=list(t["tag"])) for t in self.triples],
            "remainder_rates": {str(k): v for k, v in self.remainder_rates.items()},
            "condition": self.condition,
        }


def triples(basis: Basis, a, n, star=True):
    """T*_{a,n} (or T_{a,n} when star is False), in increasing l."""
    g, gam = basis.g, basis.gamma
    ia, ja = index_a(basis.exps, g, a)
    out = []
    for l in range(n + 1):
        if l == n:
            out += [(n, "+", i) for i in range(1, ia)]
        elif l == n - 1:
            out += [(l, "+", i) for i in range(1, g + 1)]
            out += [(l, "0", s) for s in range(1, gam)]
            out += [(l, "-", j) for j in range(g, ja, -1)]
        else:
            out += [(l, "+", i) for i in range(1, g + 1)]
            out += [(l, "0", s) for s in range(1, gam)]
            out += [(l, "-", j) for j in range(g, 0, -1)]
    if not star:
        out = [t for t in out if not (t[1] == "-" and t[2] == 1)]
    return out


class Functionals:
    """d^+_{i,l}, d^0_{s,l}, d^-_{-j,l} of D^m phi for one function phi."""

    def __init__(self, basis: Basis, phi, a, n, seqs=None):
        self.b = basis
        self.cor = basis.cor
        self.phi = phi
        self.a, self.n = a, n
        self.ia, self.ja = index_a(basis.exps, basis.g, a)
        cond = basis.filt.condition()
        self.condition = cond
        if cond > 1e8:
            raise FrameError(f"ill-conditioned frame (condition {cond:.3e})", cond)
        if seqs is None:
            seqs = [self.cor.deltas(phi.deriv(m)) for m in range(n + 1)]
        self.S = seqs
        self._memo = {}

    def _lbl(self, kind, idx):
        return self.b.filt.index((kind, idx))

    def _seq_minus(self, m, combo, r=0):
        """Sequence of D^r(D^m phi - sum coef * element)."""
        s = self.S[m + r]
        for coef, tag in combo:
            if coef != 0:
                s = s - self.b.elements[tag].poly.deriv(r).seq(self.cor).scale(coef)
        return s

    def d(self, l, m):
        """Coordinates (over the level-0 basis) of d_l(D^m phi)."""
        key = (l, m)
        if key in self._memo:
            return self._memo[key]
        g, gam, cor = self.b.g, self.b.gamma, self.cor
        ia, ja = self.ia, self.ja
        if l == 0:
            c = cor._sum(self.S[m], ia, f"h_{ia}").coords
            out = list(c[: ia - 1]) + [nm.ZERO] * (cor.d - ia + 1)
        elif l == 1:
            d0 = self.d(0, m + 1)
            combo = [(d0[self._lbl("+", i)], (1, "+", i)) for i in range(1, ia)]
            r = cor.hminus(None, ja, ia, a=self.a, seq=self._seq_minus(m, combo),
                           dseq=self._seq_minus(m, combo, 1))
            out = r.coords
        else:
            dd = self.d(l - 2, m + 2)
            d1 = self.d(l - 1, m + 1)
            rng_i = range(1, ia) if l == 2 else range(1, g + 1)
            combo = [(dd[self._lbl("+", i)], (2, "+", i)) for i in rng_i]
            combo += [(d1[self._lbl("+", i)], (1, "+", i)) for i in range(1, g + 1)]
            combo += [(d1[self._lbl("0", s)], (1, "0", s)) for s in range(1, gam)]
            seqs = tuple(self._seq_minus(m, combo, r) for r in range(3))
            out = cor.h0(None, a=self.a, seqs=seqs).coords
        self._memo[key] = out
        return out

    def f(self, tag):
        """f_t = d_{n-l} o D^l, component along the element's base vector."""
        l, kind, idx = tag
        return self.d(self.n - l, l)[self._lbl(kind, idx)]


def d_functionals(basis: Basis, phi: PFun, a=0.0, n=None, remainder=True, margin=None):
    """Distribution values f_t(phi) for t in T*_{a,n} and the remainder r_{a,n}(phi)."""
    n = basis.n_max if n is None else n
    if n > basis.n_max:
        raise ValueError("basis not built to this order")
    F = Functionals(basis, phi, a, n)
    ts = triples(basis, a, n)
    margin = 0.02 if margin is None else margin
    rows = []
    rem = phi
    for t in ts:
        v = F.f(t)
        o = basis.elements[t].order
        rows.append({
            "tag": t,
            "order": o,
            "value": float(v),
            "invariant": not (t[1] == "-" and t[2] == 1),
            "borderline": abs(o - (n - a)) < margin,
        })
        if remainder and v != 0:
            rem = rem - basis.pfun(t).scale(v)
    return DistributionReport(a, n, rows, rem if remainder else None, F.condition)


def remainder_decay(run, report: DistributionReport, k_range=(5, 25), norm="sup"):
    """Fitted rates of S(k) D^l r_{a,n}(phi) compared with -lambda_1 (n - l - a)."""
    out = {}
    for l in range(report.n + 1):
        fit = measure_exponent(run, report.remainder.deriv(l), "L1" if l == report.n else norm, k_range)
        out[l] = fit.rate
    report.remainder_rates = out
    return out


def coordinates_in_basis(basis: Basis, p: PrimPoly, n):
    """Exact coordinates of an element of Gamma_n in the basis (top degree first)."""
    coeffs = {}
    rest = p
    f = basis.filt
    for l in range(n, -1, -1):
        top = rest.deriv(l).terms.get(0)
        if top is None:
            continue
        c = f.coordinates(top)
        for lbl, ci in zip(f.labels, c):
            tag = (l, lbl[0], lbl[1])
            coeffs[tag] = ci
            rest = rest - basis.elements[tag].poly.scale(ci)
    return coeffs
