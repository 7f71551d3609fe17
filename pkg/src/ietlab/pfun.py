"""Piecewise functions with polynomial parts and power/log endpoint atoms.

On the interval of letter ``a`` (length ``L``, local coordinate ``t`` in
``[0, L)``) a function is

    sum_n poly[n] t^n + sum over atoms c * s^e * log(s)^j

where an atom on the left side uses ``s = t + off`` and one on the right
side ``s = L - t + off`` (``off >= 0``). Atoms with ``off = 0`` are genuine
endpoint singularities; positive offsets appear in special Birkhoff sums,
where a singularity of the original function sits outside the current
floor. Once an offset exceeds ``R`` times the piece length the atom is
replaced by its Taylor polynomial, which keeps the atom lists short.

All scalars are gmpy2 ``mpfr`` at the ambient precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from . import numeric as nm
from .iet_core import Iet, omega

ABSORB_RATIO = 16


class PFunError(ValueError):
    pass


# -- domains ----------------------------------------------------------------

@dataclass
class Domain:
    """Lengths (mpfr, by letter) and the top-row order of the intervals."""
    lengths: list
    order: tuple
    w: list = None

    @property
    def d(self):
        return len(self.lengths)

    @property
    def lefts(self):
        out = [None] * self.d
        acc = nm.ZERO
        for a in self.order:
            out[a] = acc
            acc = acc + self.lengths[a]
        return out

    @property
    def total(self):
        return gmpy2.fsum(self.lengths)

    @classmethod
    def of_iet(cls, iet: Iet):
        lam = iet.lengths(nm.mp)
        om = omega(iet.perm)
        w = [gmpy2.fsum(om[a][b] * lam[b] for b in range(iet.d)) for a in range(iet.d)]
        return cls(lam, tuple(iet.perm.top), w)

    @classmethod
    def of_level(cls, run, k):
        return cls.of_iet(run.iet(k))


# -- scalar helpers ---------------------------------------------------------

def _pow(s, e):
    if e.denominator == 1:
        return s ** int(e)
    return s ** (nm.mp(e.numerator) / e.denominator)


def _atom_val(atom, t, L):
    side, e, j, c, off = atom
    s = (t + off) if side == 0 else (L - t + off)
    v = c * _pow(s, e)
    if j:
        v *= gmpy2.log(s) ** j
    return v


def _antideriv_terms(e, j):
    """Antiderivative of s^e log^j s as list of (coef, e', j') terms."""
    if e == -1:
        return [(Fraction(1, j + 1), Fraction(0), j + 1)]
    out = []
    ep = e + 1
    fact = 1
    for i in range(j + 1):
        # (-1)^i j!/(j-i)! / ep^(i+1)
        out.append((Fraction((-1) ** i * fact) / ep ** (i + 1), ep, j - i))
        fact *= (j - i)
    return out


def _antideriv_value(e, j, s):
    """Value at s of the antiderivative above (0 at s=0 when it vanishes there)."""
    if s == 0:
        if e > -1:
            return nm.ZERO
        raise PFunError("non-integrable endpoint singularity")
    tot = nm.ZERO
    for coef, ep, jp in _antideriv_terms(e, j):
        v = nm.mp(coef.numerator) / coef.denominator * _pow(s, ep)
        if jp:
            v *= gmpy2.log(s) ** jp
        tot += v
    return tot


def poly_shift(p, h):
    """Coefficients of p(t + h)."""
    c = list(p)
    n = len(c)
    if h == 0 or n < 2:
        return c
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            c[j] += h * c[j + 1]
    return c


def poly_eval(p, t):
    acc = nm.ZERO
    for c in reversed(p):
        acc = acc * t + c
    return acc


def poly_add(p, q):
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] = out[i] + c
    return out


def poly_scale(p, a):
    return [a * c for c in p]


def poly_deriv(p):
    return [c * i for i, c in enumerate(p)][1:] or [nm.ZERO]


def poly_integ(p):
    return [nm.ZERO] + [c / (i + 1) for i, c in enumerate(p)]


def poly_reflect(p, L):
    """Coefficients of p(L - t)."""
    q = [c if i % 2 == 0 else -c for i, c in enumerate(p)]
    return poly_shift(q, -L)


def _series_power_log(e, j, s0, N):
    """Taylor coefficients in x of (s0 (1+x))^e log(s0 (1+x))^j, up to x^(N-1).

    Returned in the variable u = s0 x, i.e. already divided by s0^n.
    """
    ee = nm.mp(e.numerator) / e.denominator
    a = [nm.ZERO] * N
    b = nm.mp(1)
    for n in range(N):
        a[n] = b
        b = b * (ee - n) / (n + 1)
    base = _pow(s0, e)
    a = [x * base for x in a]
    if j:
        ell = gmpy2.log(s0)
        lg = [ell] + [nm.mp((-1) ** (n + 1)) / n for n in range(1, N)]
        for _ in range(j):
            out = [nm.ZERO] * N
            for i, x in enumerate(a):
                if x:
                    for k in range(N - i):
                        out[i + k] += x * lg[k]
            a = out
    inv = 1 / s0
    scale = nm.mp(1)
    for n in range(N):
        a[n] *= scale
        scale *= inv
    return a


def _absorb_degree(ratio):
    """Terms needed so that ratio^N is below working precision."""
    return int(math.ceil(nm.precision() * math.log(2) / -math.log(ratio))) + 2


# -- pieces -----------------------------------------------------------------

@dataclass
class Piece:
    L: object
    poly: list
    atoms: list = field(default_factory=list)  # (side, e, j, c, off)

    def copy(self):
        return Piece(self.L, list(self.poly), list(self.atoms))

    def value(self, t):
        v = poly_eval(self.poly, t)
        for at in self.atoms:
            v += _atom_val(at, t, self.L)
        return v

    def integral(self):
        L = self.L
        tot = gmpy2.fsum(c * L ** (i + 1) / (i + 1) for i, c in enumerate(self.poly))
        for side, e, j, c, off in self.atoms:
            tot += c * (_antideriv_value(e, j, off + L) - _antideriv_value(e, j, off))
        return tot

    def normalise(self, ratio=ABSORB_RATIO, trim=True):
        """Fold integer atoms into the polynomial, absorb far atoms, trim."""
        L = self.L
        poly = list(self.poly)
        keep = {}
        far_left, far_right = [], []
        for at in self.atoms:
            side, e, j, c, off = at
            if c == 0:
                continue
            if j == 0 and e.denominator == 1 and e >= 0:
                m = int(e)
                base = [nm.ZERO] * m + [c]
                if side == 0:
                    poly = poly_add(poly, poly_shift(base, off))
                else:
                    poly = poly_add(poly, poly_reflect(poly_shift(base, off), L))
                continue
            if off > ratio * L:
                (far_left if side == 0 else far_right).append(at)
                continue
            key = (side, e, j, off)
            keep[key] = keep.get(key, nm.ZERO) + c
        if far_left or far_right:
            half = L / 2
            worst = max(half / (at[4] + half) for at in far_left + far_right)
            N = _absorb_degree(worst)
            acc = [nm.ZERO] * N
            for side, e, j, c, off in far_left + far_right:
                ser = _series_power_log(e, j, off + half, N)
                if side == 0:
                    acc = [x + c * y for x, y in zip(acc, ser)]
                else:
                    acc = [x + (c * y if n % 2 == 0 else -c * y) for n, (x, y) in enumerate(zip(acc, ser))]
            poly = poly_add(poly, poly_shift(acc, -half))
        self.poly = poly
        self.atoms = [(k[0], k[1], k[2], c, k[3]) for k, c in keep.items() if c != 0]
        if trim:
            self.trim()
        return self

    def trim(self):
        L = self.L
        p = self.poly
        if len(p) <= 1:
            if not p:
                self.poly = [nm.ZERO]
            return
        mags = [abs(c) * L ** i for i, c in enumerate(p)]
        scale = max(mags)
        if scale == 0:
            self.poly = [nm.ZERO]
            return
        cut = scale * nm.eps() * 4
        n = len(p)
        while n > 1 and mags[n - 1] <= cut:
            n -= 1
        self.poly = p[:n]

    def deriv(self):
        atoms = []
        for side, e, j, c, off in self.atoms:
            sg = 1 if side == 0 else -1
            if e != 0:
                atoms.append((side, e - 1, j, sg * c * nm.mp(e.numerator) / e.denominator, off))
            if j:
                atoms.append((side, e - 1, j - 1, sg * c * j, off))
        return Piece(self.L, poly_deriv(self.poly), atoms)

    def antideriv(self):
        """An antiderivative G (not normalised) as a Piece."""
        atoms = []
        for side, e, j, c, off in self.atoms:
            sg = 1 if side == 0 else -1
            for coef, ep, jp in _antideriv_terms(e, j):
                atoms.append((side, ep, jp, sg * c * nm.mp(coef.numerator) / coef.denominator, off))
        return Piece(self.L, poly_integ(self.poly), atoms)

    def degree(self):
        return len(self.poly) - 1


# -- functions --------------------------------------------------------------

@dataclass
class PFun:
    dom: Domain
    pieces: list
    n: int = 0
    a: float = 0.0

    @property
    def d(self):
        return self.dom.d

    def copy(self):
        return PFun(self.dom, [p.copy() for p in self.pieces], self.n, self.a)

    # construction
    @classmethod
    def zero(cls, dom):
        return cls(dom, [Piece(L, [nm.ZERO]) for L in dom.lengths])

    @classmethod
    def from_gamma(cls, dom, vec):
        return cls(dom, [Piece(L, [nm.mp(v)]) for L, v in zip(dom.lengths, vec)])

    @classmethod
    def from_polys(cls, dom, polys):
        """Per-letter polynomials in the local coordinate t = x - l_a."""
        return cls(dom, [Piece(L, [nm.mp(c) for c in p] or [nm.ZERO]) for L, p in zip(dom.lengths, polys)])

    @classmethod
    def from_global_poly(cls, dom, coeffs):
        """p(x) = sum coeffs[n] x^n restricted to each interval."""
        c = [nm.mp(x) for x in coeffs] or [nm.ZERO]
        lefts = dom.lefts
        return cls(dom, [Piece(L, poly_shift(c, l)) for L, l in zip(dom.lengths, lefts)])

    @classmethod
    def coboundary_of_poly(cls, dom, coeffs):
        """p o T - p for a global polynomial p."""
        if dom.w is None:
            raise PFunError("domain lacks translations")
        c = [nm.mp(x) for x in coeffs] or [nm.ZERO]
        lefts = dom.lefts
        pieces = []
        for a, L in enumerate(dom.lengths):
            p0 = poly_shift(c, lefts[a])
            p1 = poly_shift(c, lefts[a] + dom.w[a])
            pieces.append(Piece(L, [x - y for x, y in zip(p1, p0)]))
        out = cls(dom, pieces)
        for p in out.pieces:
            p.trim()
        return out

    @classmethod
    def coboundary_of_power(cls, dom, e, coeff=1):
        """v o T - v for v(x) = coeff * x^e (0 < e, non-integer allowed)."""
        if dom.w is None:
            raise PFunError("domain lacks translations")
        e = Fraction(e).limit_denominator(10**6)
        c = nm.mp(coeff)
        lefts = dom.lefts
        out = cls.zero(dom)
        for a, p in enumerate(out.pieces):
            p.atoms = [(0, e, 0, c, lefts[a] + dom.w[a]), (0, e, 0, -c, lefts[a])]
            p.normalise()
        return out

    @classmethod
    def atom(cls, dom, letter, side, e, coeff=1, log=0):
        """A single endpoint atom c s^e log^j s on one interval (zero elsewhere)."""
        out = cls.zero(dom)
        side = 0 if side in (0, "left", "+", "L") else 1
        out.pieces[letter].atoms.append((side, Fraction(e), int(log), nm.mp(coeff), nm.ZERO))
        out.pieces[letter].normalise()
        return out

    # arithmetic
    def _combine(self, other, sa, sb):
        pieces = []
        for p, q in zip(self.pieces, other.pieces):
            poly = poly_add(poly_scale(p.poly, sa), poly_scale(q.poly, sb))
            atoms = [(s, e, j, sa * c, o) for s, e, j, c, o in p.atoms]
            atoms += [(s, e, j, sb * c, o) for s, e, j, c, o in q.atoms]
            pc = Piece(p.L, poly, atoms)
            pc.normalise(trim=False)
            pieces.append(pc)
        return PFun(self.dom, pieces, max(self.n, other.n), max(self.a, other.a))

    def __add__(self, other):
        return self._combine(other, nm.mp(1), nm.mp(1))

    def __sub__(self, other):
        return self._combine(other, nm.mp(1), nm.mp(-1))

    def scale(self, s):
        s = nm.mp(s)
        return PFun(self.dom, [Piece(p.L, poly_scale(p.poly, s), [(a, e, j, s * c, o) for a, e, j, c, o in p.atoms])
                               for p in self.pieces], self.n, self.a)

    def __neg__(self):
        return self.scale(-1)

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def add_gamma(self, vec, sign=1):
        out = self.copy()
        for p, v in zip(out.pieces, vec):
            p.poly = poly_add(p.poly, [sign * nm.mp(v)])
        return out

    # calculus
    def deriv(self, k=1):
        out = self
        for _ in range(k):
            out = PFun(out.dom, [p.deriv() for p in out.pieces], max(out.n - 1, 0), out.a)
            for p in out.pieces:
                p.normalise(trim=False)
        return out

    def primitive(self):
        """x -> integral of self over [0, x), continuous across intervals."""
        pieces = [p.antideriv() for p in self.pieces]
        acc = nm.ZERO
        for a in self.dom.order:
            p, g = self.pieces[a], pieces[a]
            g0 = g.value(nm.ZERO) if g.atoms and not _singular_at_zero(g) else poly_eval(g.poly, nm.ZERO)
            if g.atoms and _singular_at_zero(g):
                g0 = poly_eval(g.poly, nm.ZERO) + gmpy2.fsum(
                    _atom_val(at, nm.ZERO, g.L) for at in g.atoms if not (at[0] == 0 and at[4] == 0))
            g.poly = poly_add(g.poly, [acc - g0])
            acc = acc + p.integral()
            g.normalise(trim=False)
        return PFun(self.dom, pieces, self.n + 1, self.a)

    def integral(self):
        return gmpy2.fsum(p.integral() for p in self.pieces)

    def means(self):
        """Mean value on each interval (the projection onto piecewise constants)."""
        for p in self.pieces:
            for side, e, j, c, off in p.atoms:
                if off == 0 and e <= -1:
                    raise PFunError("mean of a non-integrable atom")
        return [p.integral() / p.L for p in self.pieces]

    def mean_free(self):
        return self.add_gamma(self.means(), sign=-1)

    # evaluation
    def __call__(self, x):
        """Value at a global point x."""
        x = nm.mp(x)
        lefts = self.dom.lefts
        for a in self.dom.order[::-1]:
            if x >= lefts[a]:
                return self.pieces[a].value(x - lefts[a])
        raise PFunError("point left of the domain")

    def local(self, letter, t):
        return self.pieces[letter].value(nm.mp(t))

    def evaluate(self, letters, ts):
        """Float evaluation at local coordinates ``ts`` on the given letters."""
        letters = np.asarray(letters)
        ts = np.asarray(ts, dtype=float)
        out = np.zeros(ts.shape)
        for a, p in enumerate(self.pieces):
            m = letters == a
            if not m.any():
                continue
            t = ts[m]
            v = np.polynomial.polynomial.polyval(t, [float(c) for c in p.poly])
            L = float(p.L)
            for side, e, j, c, off in p.atoms:
                s = (t + float(off)) if side == 0 else (L - t + float(off))
                term = float(c) * s ** float(e)
                if j:
                    term = term * np.log(s) ** j
                v = v + term
            out[m] = v
        return out

    def at(self, xs):
        """Float evaluation at global points."""
        xs = np.asarray(xs, dtype=float)
        lefts = [float(x) for x in self.dom.lefts]
        order = list(self.dom.order)
        starts = np.array([lefts[a] for a in order])
        idx = np.clip(np.searchsorted(starts, xs, side="right") - 1, 0, len(order) - 1)
        letters = np.array(order)[idx]
        return self.evaluate(letters, xs - starts[idx])

    def sample(self, per_piece=48, depth=1e-12):
        """(letter, t, value) on a grid refined geometrically at both ends."""
        u = _unit_grid(per_piece, depth)
        out = []
        for a, p in enumerate(self.pieces):
            for x in u:
                t = p.L * nm.mp(x)
                out.append((a, t, p.value(t)))
        return out

    def sup(self, per_piece=48, depth=1e-12):
        return max(abs(v) for _, _, v in self.sample(per_piece, depth))

    def l1(self, per_piece=64, depth=1e-12):
        """L1 norm by trapezoid on the refined grid (plus exact sign-constant shortcut)."""
        tot = nm.ZERO
        u = _unit_grid(per_piece, depth)
        for p in self.pieces:
            ts = [p.L * nm.mp(x) for x in u]
            vs = [abs(p.value(t)) for t in ts]
            tot += gmpy2.fsum((ts[i + 1] - ts[i]) * (vs[i] + vs[i + 1]) / 2 for i in range(len(ts) - 1))
        return tot

    def variation(self, per_piece=128, depth=1e-12):
        tot = nm.ZERO
        u = _unit_grid(per_piece, depth)
        for p in self.pieces:
            vs = [p.value(p.L * nm.mp(x)) for x in u]
            tot += gmpy2.fsum(abs(vs[i + 1] - vs[i]) for i in range(len(vs) - 1))
        return tot

    def max_degree(self):
        return max(p.degree() for p in self.pieces)

    def atom_count(self):
        return sum(len(p.atoms) for p in self.pieces)

    def is_polynomial(self):
        return all(not p.atoms for p in self.pieces)

    # endpoint data
    def endpoint_coeff(self, letter, side, a):
        """lim of phi * dist^(1+a) at an end (+: left end, -: right end)."""
        s = 0 if side in ("+", 0, "left") else 1
        target = -(1 + Fraction(a).limit_denominator(10**6))
        tot = nm.ZERO
        for sd, e, j, c, off in self.pieces[letter].atoms:
            if sd != s or off != 0:
                continue
            if e < target or (e == target and j > 0):
                return nm.mp("inf") * (1 if c > 0 else -1)
            if e == target and j == 0:
                tot += c
        return tot

    def C_plus(self, letter, a, n=0):
        """C^{a,+}_{alpha,n} = (-1)^(n+1) lim D^(n+1)phi (x - l)^(1+a)."""
        return (-1) ** (n + 1) * self.deriv(n + 1).endpoint_coeff(letter, "+", a)

    def C_minus(self, letter, a, n=0):
        """C^{a,-}_{alpha,n} = lim D^(n+1)phi (r - x)^(1+a)."""
        return self.deriv(n + 1).endpoint_coeff(letter, "-", a)

    def p_a(self, a, n=0, per_piece=48):
        """sup of |D^(n+1)phi| times dist^(1+a) to the nearer end, on the grid."""
        f = self.deriv(n + 1)
        best = nm.ZERO
        u = _unit_grid(per_piece, 1e-12)
        for p in f.pieces:
            for x in u:
                t = p.L * nm.mp(x)
                dist = min(t, p.L - t)
                best = max(best, abs(p.value(t)) * dist ** (1 + nm.mp(a)))
        return best

    def seminorms(self, a=None, n=None):
        a = self.a if a is None else a
        n = self.n if n is None else n
        out = {
            "sup": float(self.sup()),
            "L1": float(self.l1()),
            "p_a": float(self.p_a(a, n)),
        }
        try:
            out["Var"] = float(self.variation()) if self.is_polynomial() else None
        except (ValueError, ZeroDivisionError):
            out["Var"] = None
        out["C_plus"] = [float(self.C_plus(b, a, n)) for b in range(self.d)]
        out["C_minus"] = [float(self.C_minus(b, a, n)) for b in range(self.d)]
        return out

    def norm_Cna(self, a=None, n=None):
        a = self.a if a is None else a
        n = self.n if n is None else n
        tot = gmpy2.fsum(self.deriv(k).l1() for k in range(n + 1))
        return tot + self.p_a(a, n)

    # serialisation
    def to_json(self):
        return {
            "order": list(self.dom.order),
            "n": self.n,
            "a": self.a,
            "pieces": [{
                "length": str(p.L),
                "poly": [str(c) for c in p.poly],
                "atoms": [{"side": "left" if s == 0 else "right", "exponent": str(e), "log": j,
                           "coeff": str(c), "offset": str(o)} for s, e, j, c, o in p.atoms],
            } for p in self.pieces],
        }

    @classmethod
    def from_json(cls, data, dom=None):
        if isinstance(data, str):
            data = json.loads(data)
        pieces = []
        for pd in data["pieces"]:
            atoms = [(0 if at["side"] == "left" else 1, Fraction(at["exponent"]), int(at["log"]),
                      nm.mp(at["coeff"]), nm.mp(at["offset"])) for at in pd["atoms"]]
            pieces.append(Piece(nm.mp(pd["length"]), [nm.mp(c) for c in pd["poly"]], atoms))
        if dom is None:
            dom = Domain([p.L for p in pieces], tuple(data["order"]))
        return cls(dom, pieces, data.get("n", 0), data.get("a", 0.0))

    def grid_csv(self, per_piece=32):
        lefts = self.dom.lefts
        rows = ["x,phi"]
        for a, t, v in self.sample(per_piece, 1e-6):
            rows.append(f"{float(lefts[a] + t):.17g},{float(v):.17g}")
        return "\n".join(rows) + "\n"


def _singular_at_zero(piece):
    return any(at[0] == 0 and at[4] == 0 and (at[1] < 0 or at[2] > 0) for at in piece.atoms)


def _unit_grid(n, depth):
    """Points in (0,1): geometric towards both ends, uniform in the middle."""
    k = max(4, n // 3)
    geo = np.geomspace(depth, 0.05, k)
    mid = np.linspace(0.05, 0.95, max(4, n - 2 * k))
    pts = np.concatenate([geo, mid, 1 - geo[::-1]])
    return np.unique(pts)


# -- geometric type ---------------------------------------------------------

def geometric_type(phi: PFun, perm, a, n):
    """(ok, products) for the two vanishing products defining geometric type."""
    top, bot = perm.top, perm.bot
    cm = phi.C_minus(top[-1], a, n) * phi.C_minus(bot[-1], a, n)
    cp = phi.C_plus(top[0], a, n) * phi.C_plus(bot[0], a, n)
    tol = nm.mp(1e-30)
    return (abs(cm) <= tol and abs(cp) <= tol), (cm, cp)


# -- special Birkhoff sums --------------------------------------------------

def step(phi: PFun, w, l, dom_next: Domain, ratio=ABSORB_RATIO):
    """One elementary Rauzy step applied to a function on the current domain."""
    Lw, Ll = phi.pieces[w].L, phi.pieces[l].L
    newLw = dom_next.lengths[w]
    pw, pl = phi.pieces[w], phi.pieces[l]
    pieces = list(phi.pieces)
    # winner keeps its left part
    aw = [(s, e, j, c, o if s == 0 else o + Ll) for s, e, j, c, o in pw.atoms]
    pieces[w] = Piece(newLw, list(pw.poly), aw).normalise(ratio)
    # loser collects phi_l(t) + phi_w(t + newLw)
    al = list(pl.atoms) + [(s, e, j, c, o + newLw if s == 0 else o) for s, e, j, c, o in pw.atoms]
    pieces[l] = Piece(Ll, poly_add(pl.poly, poly_shift(pw.poly, newLw)), al).normalise(ratio)
    return PFun(dom_next, pieces, phi.n, phi.a)


def level_domains(run, k):
    """Domains before each step of level k -> k+1, followed by level k+1."""
    from .renorm import replay_lengths, replay_perms
    lams = replay_lengths(run, k)
    perms = replay_perms(run, k)
    den = nm.mp(run.base.den)
    alphabet = run.base.perm.alphabet
    out = []
    for lam, (top, bot) in zip(lams[1:], perms):
        out.append(Domain([nm.mp(x) / den for x in lam], None))
    nxt = run.iet(k + 1)
    last = Domain.of_iet(nxt)
    # intermediate domains only need lengths; the order is fixed at the end
    for dm, (top, bot) in zip(out, perms[1:] + [(last.order, None)]):
        dm.order = top
    out[-1] = last
    return out


def birkhoff_step(run, phi: PFun, k, ratio=ABSORB_RATIO):
    """S(k, k+1) phi for phi on level k."""
    doms = level_domains(run, k)
    for (eps, w, l), dm in zip(run.level_steps(k), doms):
        phi = step(phi, w, l, dm, ratio)
    return phi



def special_birkhoff_sum(run, phi: PFun, k, k0=0, ratio=ABSORB_RATIO):
    """S(k0, k) phi."""
    if k > run.k_max:
        raise IndexError("level beyond run")
    for j in range(k0, k):
        phi = birkhoff_step(run, phi, j, ratio)
    return phi


def birkhoff_levels(run, phi: PFun, k1, k0=0, ratio=ABSORB_RATIO):
    """Yield (k, S(k0,k) phi) for k = k0..k1."""
    yield k0, phi
    for j in range(k0, k1):
        phi = birkhoff_step(run, phi, j, ratio)
        yield j + 1, phi


def gamma_action(run, vec, k0, k1):
    """S(k0,k1) on piecewise constants: the matrix Q(k0,k1)."""
    q = nm.int_matrix(run.Q(k0, k1))
    return nm.matvec(q, vec)
