"""Correction operators h_j, h*_j, h_{-j,i} and h_0 as truncated series.

Everything rests on the increment sequence of a function phi on level 0:

    dv_0 = M(phi),   dv_l = M^(l)(S(l)phi) - Z(l) M^(l-1)(S(l-1)phi),

computed stably through psi_l = P_0 S(l) phi (psi_l = P_0 S(l-1,l) psi_{l-1},
whose means are dv_l). A correction operator onto U is then

    sum_l Q(l)^{-1} P_{U^(l)} dv_l.

The sequences are linear in phi, so the composite operators (which subtract
primitives of corrections of derivatives) are evaluated by combining
sequences first and summing afterwards. Summing the pieces separately would
not work: each one alone typically diverges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from . import numeric as nm
from .oseledets import Filtration, u_dim
from .pfun import PFun, Domain, birkhoff_step


class CorrectionDiverged(ArithmeticError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


class PreconditionError(ValueError):
    def __init__(self, msg, margins=None):
        super().__init__(msg)
        self.margins = margins or {}


@dataclass
class CorrectionResult:
    tag: str
    value: list                 # vector in R^A at level 0
    coords: list                # coordinates in the level-0 basis (h_i, c_s, h_-j)
    L: int
    increments: list            # ||Q(l)^{-1} P_U dv_l|| for l = 0..L
    rate: float                 # fitted log-rate of the increments (per level)
    tail: float
    marginal: bool = False
    notes: list = field(default_factory=list)

    @property
    def norm(self):
        return float(nm.vmax(self.value))

    def to_json(self):
        return {
            "operator": self.tag,
            "value": nm.to_floats(self.value),
            "coords": nm.to_floats(self.coords),
            "L": self.L,
            "increments": [float(x) for x in self.increments],
            "rate": self.rate,
            "tail": self.tail,
            "marginal": self.marginal,
            "notes": self.notes,
        }


@dataclass
class DeltaSeq:
    """dv_0..dv_L together with sup-norms of the mean-free parts psi_l.

    ``size`` is the magnitude of the data the sequence was built from; after
    cancellations it tells genuine growth apart from rounding noise.
    """
    dv: list
    psi_sup: list = None
    size: float = None

    @property
    def magnitude(self):
        if self.size is not None:
            return self.size
        return max((float(nm.vmax(v)) for v in self.dv), default=0.0)

    def __add__(self, other):
        return DeltaSeq([nm.vadd(a, b) for a, b in zip(self.dv, other.dv)],
                        size=max(self.magnitude, other.magnitude))

    def __sub__(self, other):
        return DeltaSeq([nm.vsub(a, b) for a, b in zip(self.dv, other.dv)],
                        size=max(self.magnitude, other.magnitude))

    def scale(self, s):
        s = nm.mp(s)
        return DeltaSeq([nm.vscale(s, a) for a in self.dv], size=self.magnitude * abs(float(s)))


def _lam(spec_exps, g, i):
    """lambda_i with lambda_{g+1} = 0."""
    if i > g:
        return 0.0
    return spec_exps[i - 1]


class Corrector:
    """Evaluates correction operators for a fixed run and filtration.

    ``exponents`` are the positive Lyapunov exponents (lambda_1 > ... > lambda_g),
    used only for precondition checks; by default they are read off the
    filtration's growth rates.
    """

    def __init__(self, run, filt: Filtration, L=None, exponents=None, tau=None, track_sup=False):
        self.run = run
        self.filt = filt
        self.d = run.d
        self.g = filt.g
        self.L = min(filt.L, run.k_max - 1) if L is None else min(L, filt.L, run.k_max - 1)
        if exponents is None:
            k1 = min(filt.L, 40)
            rates = filt.growth_rates(min(5, k1 // 4), k1) if k1 > 4 else [1.0] * self.g
            exponents = [float(r) for r in rates[:self.g]]
        self.exponents = list(exponents)
        self.tau = 0.05 * self.exponents[0] if tau is None else tau
        need = recommended_bits(self.exponents[0], self.L)
        if nm.precision() < need:
            warnings.warn(f"precision {nm.precision()} bits is below the {need} bits suggested for depth {self.L}; "
                          "late increments may sit on the rounding floor")
        self.track_sup = track_sup
        self.dom0 = Domain.of_level(run, 0)
        self._basis = {}

    # -- increment sequences ---------------------------------------------

    def deltas(self, phi: PFun) -> DeltaSeq:
        m = phi.means()
        dv = [m]
        sups = []
        if phi.is_polynomial() and phi.max_degree() == 0:
            return DeltaSeq(dv + [nm.zeros(self.d)] * self.L, [0.0] * (self.L + 1))
        psi = phi.add_gamma(m, sign=-1)
        if self.track_sup:
            sups.append(float(psi.sup()))
        for l in range(self.L):
            psi = birkhoff_step(self.run, psi, l)
            m = psi.means()
            dv.append(m)
            psi = psi.add_gamma(m, sign=-1)
            if self.track_sup:
                sups.append(float(psi.sup()))
        return DeltaSeq(dv, sups or None)

    def gamma_seq(self, vec) -> DeltaSeq:
        return DeltaSeq([nm.vec(vec)] + [nm.zeros(self.d)] * self.L)

    def _basis_seq(self, kind, b):
        """Sequences for the primitive (kind 1) or double primitive (kind 2) of chi_b."""
        key = (kind, b)
        s = self._basis.get(key)
        if s is None:
            e = [0] * self.d
            e[b] = 1
            f = PFun.from_gamma(self.dom0, e)
            for _ in range(kind):
                f = f.primitive()
            s = self.deltas(f)
            self._basis[key] = s
        return s

    def prim_seq(self, vec, kind=1) -> DeltaSeq:
        """Sequence of the kind-fold primitive of the piecewise constant vec."""
        out = DeltaSeq([nm.zeros(self.d) for _ in range(self.L + 1)])
        for b, c in enumerate(vec):
            if c != 0:
                out = out + self._basis_seq(kind, b).scale(c)
        return out

    # -- series ------------------------------------------------------------

    def _sum(self, seq: DeltaSeq, j, tag, strict=True):
        f = self.filt
        total = [nm.ZERO] * self.d       # H-coordinates
        incs = []
        for l, dv in enumerate(seq.dv[: self.L + 1]):
            if not any(dv):
                incs.append(nm.ZERO)
                continue
            c = f.pullback_coords(l, j, dv)
            total = nm.vadd(total, c)
            incs.append(nm.vmax(f.combine(c)))
        rate, tail = _tail(incs)
        value = f.combine(total)
        res = CorrectionResult(tag, value, total, self.L, incs, rate, tail)
        if rate > 0 and incs[-1] > 0:
            # growth below this floor is amplified rounding of cancelled data
            floor = seq.magnitude * 2.0 ** (-nm.precision() / 4)
            if incs[-1] > floor:
                if strict:
                    raise CorrectionDiverged(f"{tag}: increments grow at rate {rate:.3f}",
                                             [float(x) for x in incs])
            else:
                res.notes.append("increments at the rounding floor")
        return res

    # -- operators -----------------------------------------------------------

    def check(self, a, i=None, j=None, kind="h"):
        """Margins of the spectral preconditions; negative means violated."""
        lam = lambda k: _lam(self.exponents, self.g, k)
        l1 = self.exponents[0]
        m = {}
        if i is not None:
            m["a*l1<l_{i-1}"] = lam(i - 1) - a * l1
        if j is not None and kind == "hminus":
            m["max(a*l1,l_i)<l1-l_{j+1}"] = l1 - lam(j + 1) - max(a * l1, lam(i))
        if kind == "h0":
            g = self.g
            m["rho0"] = min(l1 - lam(2), l1 * (1 - a), lam(g))
        return m

    def _guard(self, margins, tag):
        bad = {k: v for k, v in margins.items() if v <= 0}
        if bad:
            raise PreconditionError(f"{tag}: precondition violated {bad}", margins)
        return any(v < self.tau for v in margins.values())

    def h(self, phi, j, a=0.0, seq=None):
        """h_j(phi) in U_j, 2 <= j <= g+1."""
        if not 2 <= j <= self.g + 1:
            raise ValueError("need 2 <= j <= g+1")
        marg = self._guard(self.check(a, i=j), f"h_{j}")
        seq = self.deltas(phi) if seq is None else seq
        res = self._sum(seq, j, f"h_{j}")
        res.marginal = marg
        return res

    def hstar(self, phi, j, seq=None):
        """h*_j(phi) in U_{-j}, 0 <= j <= g."""
        if not 0 <= j <= self.g:
            raise ValueError("need 0 <= j <= g")
        seq = self.deltas(phi) if seq is None else seq
        return self._sum(seq, -j, f"h*_{j}")

    def K_i_seq(self, phi, i, a=0.0, seq=None, dseq=None):
        """Sequence of K_i(phi) = phi - primitive(h_i(D phi)), plus h_i(D phi)."""
        seq = self.deltas(phi) if seq is None else seq
        dseq = self.deltas(phi.deriv()) if dseq is None else dseq
        hi = self._sum(dseq, i, f"h_{i}").value
        return seq - self.prim_seq(hi), hi

    def hminus(self, phi, j, i, a=0.0, seq=None, dseq=None):
        """h_{-j,i} = h*_j o K_i, valued in U_{-j}."""
        marg = self._guard(self.check(a, i=i, j=j, kind="hminus"), f"h_-{j},{i}")
        kseq, _ = self.K_i_seq(phi, i, a, seq, dseq)
        res = self._sum(kseq, -j, f"h_-{j},{i}")
        res.marginal = marg
        return res

    def h0_seq(self, phi, a=0.0, seqs=None):
        """Sequence of K(phi) for the operator h_0 = h*_0 o K.

        ``seqs`` may supply the sequences of (phi, D phi, D^2 phi).
        """
        g = self.g
        if seqs is None:
            seqs = (self.deltas(phi), self.deltas(phi.deriv()), self.deltas(phi.deriv(2)))
        s0, s1, s2 = seqs
        c2 = self._sum(s2, 2, "h_2").value                       # h_2(D^2 phi)
        # h_{-g,2}(D phi) = h*_g(D phi - prim(c2))
        e1 = self._sum(s1 - self.prim_seq(c2), -g, f"h_-{g},2").value
        # h_{-g,2}(prim c2) = h*_g(prim(c2 - P_{U_2} c2))
        c2e = nm.vsub(c2, self.filt.pullback_U(0, 2, c2))
        e2 = self._sum(self.prim_seq(c2e), -g, f"h_-{g},2").value
        return s0 - self.prim_seq(c2, kind=2) - self.prim_seq(nm.vsub(e1, e2))

    def h0(self, phi, a=0.0, seqs=None):
        marg = self._guard(self.check(a, kind="h0"), "h_0")
        res = self._sum(self.h0_seq(phi, a, seqs), 0, "h_0")
        res.marginal = marg
        return res

    # -- diagnostics -------------------------------------------------------------

    def direct(self, phi, j, k):
        """Q(k)^{-1} P_{U_j^(k)} M^(k) S(k) phi computed without telescoping."""
        from .pfun import special_birkhoff_sum
        v = special_birkhoff_sum(self.run, phi, k).means()
        return self.filt.pullback_U(k, j, v)

    def partial(self, seq, j, k):
        """Partial sum of the telescoped series up to level k."""
        f = self.filt
        tot = [nm.ZERO] * self.d
        for l in range(k + 1):
            if any(seq.dv[l]):
                tot = nm.vadd(tot, f.pullback_coords(l, j, seq.dv[l]))
        return f.combine(tot)


def recommended_bits(lam1, L, margin=100):
    """Pull-backs amplify rounding by about exp(2 lambda_1 l) at depth l."""
    return int(2 * lam1 * L / math.log(2)) + margin


def _tail(incs):
    """Fitted rate of log increments over the second half and a geometric tail."""
    ys = [(l, float(gmpy2.log(x))) for l, x in enumerate(incs) if x > 0]
    if len(ys) < 4:
        return -math.inf, 0.0
    half = ys[len(ys) // 2:]
    xs = np.array([p[0] for p in half], dtype=float)
    vs = np.array([p[1] for p in half])
    rate = float(np.polyfit(xs, vs, 1)[0]) if len(half) > 1 else -math.inf
    last = float(incs[-1])
    tail = last * math.exp(rate) / (1 - math.exp(rate)) if rate < 0 else math.inf
    return rate, tail


# thin functional wrappers -----------------------------------------------------

def correct_h(cor: Corrector, phi, j, a=0.0):
    return cor.h(phi, j, a)


def correct_hstar(cor: Corrector, phi, j):
    return cor.hstar(phi, j)


def correct_hminus(cor: Corrector, phi, j, i, a=0.0):
    return cor.hminus(phi, j, i, a)


def correct_h0(cor: Corrector, phi, a=0.0):
    return cor.h0(phi, a)
