from fractions import Fraction

import numpy as np
import pytest

from ietlab import numeric as nm
from ietlab.iet_core import orbit
from ietlab.pfun import (Domain, PFun, PFunError, birkhoff_step, geometric_type, poly_eval,
                         poly_shift, special_birkhoff_sum)


def test_poly_shift():
    p = [nm.mp(x) for x in (1, -2, 0.5, 3)]
    q = poly_shift(p, nm.mp(0.3))
    for t in (0.0, 0.2, 0.7):
        assert float(poly_eval(q, nm.mp(t))) == pytest.approx(float(poly_eval(p, nm.mp(t + 0.3))))


def test_coboundary_pointwise(run4):
    dom = Domain.of_level(run4, 0)
    c = [0, 0.7, -1.2, 0.5]
    phi = PFun.coboundary_of_poly(dom, c)
    xs = np.linspace(0.01, 0.99, 40) * float(dom.total)
    T = np.array([orbit(run4.base, x, 2)[1] for x in xs])
    v = np.polynomial.polynomial.polyval
    assert np.allclose(phi.at(xs), v(T, c) - v(xs, c), atol=1e-12)
    assert abs(float(phi.integral())) < 1e-60


def test_atom_values_and_endpoint_coeff(run4):
    dom = Domain.of_level(run4, 0)
    f = PFun.atom(dom, 1, "+", Fraction(-1, 2), 2.0)
    L = float(dom.lengths[1])
    assert float(f.local(1, 0.25 * L)) == pytest.approx(2.0 / np.sqrt(0.25 * L))
    assert float(f.local(0, 0.1 * float(dom.lengths[0]))) == 0.0
    assert float(f.deriv().endpoint_coeff(1, "+", 0.5)) == pytest.approx(-1.0)
    g = PFun.atom(dom, 2, "-", Fraction(1, 3), 1.0, log=1)
    s = 0.1 * float(dom.lengths[2])
    assert float(g.local(2, float(dom.lengths[2]) - s)) == pytest.approx(s ** (1 / 3) * np.log(s))


def test_means_reject_nonintegrable(run4):
    dom = Domain.of_level(run4, 0)
    with pytest.raises(PFunError):
        PFun.atom(dom, 0, "+", -1, 1.0).means()


def test_special_birkhoff_sum_matches_orbit(run4):
    dom = Domain.of_level(run4, 0)
    phi = PFun.from_global_poly(dom, [0.3, -1.0, 2.0]) + PFun.atom(dom, 0, "+", Fraction(-1, 3), 0.2)
    k = 6
    S = special_birkhoff_sum(run4, phi, k)
    lefts = S.dom.lefts
    Qa = run4.return_times(k)
    for a in range(run4.d):
        t = 0.37 * float(S.dom.lengths[a])
        pts = orbit(run4.base, float(lefts[a]) + t, Qa[a])
        direct = float(np.sum(phi.at(pts)))
        assert float(S.local(a, t)) == pytest.approx(direct, rel=1e-8)


def test_birkhoff_preserves_integral(run4):
    dom = Domain.of_level(run4, 0)
    phi = PFun.from_global_poly(dom, [0.3, -1.0, 2.0]) + PFun.atom(dom, 3, "-", Fraction(-1, 2), 1.0)
    psi = phi
    for k in range(4):
        psi = birkhoff_step(run4, psi, k)
    assert float(psi.integral()) == pytest.approx(float(phi.integral()), rel=1e-40)


def test_primitive_derivative_round_trip(run4):
    dom = Domain.of_level(run4, 0)
    phi = PFun.from_gamma(dom, [1.0, -2.0, 0.5, 3.0])
    P = phi.primitive()
    xs = np.linspace(0.05, 0.95, 9) * float(dom.total)
    assert np.allclose(P.deriv().at(xs), phi.at(xs))
    # continuity at the interval ends
    lefts = dom.lefts
    for a in dom.order[1:]:
        x = lefts[a]
        assert float(P(x)) == pytest.approx(float(P(x - nm.mp(1e-30))), abs=1e-20)


def test_json_round_trip(run4):
    dom = Domain.of_level(run4, 0)
    phi = PFun.coboundary_of_power(dom, 0.8, 0.3) + PFun.atom(dom, 2, "-", Fraction(1, 2), 1.0, 1)
    back = PFun.from_json(phi.to_json())
    xs = np.linspace(0.01, 0.99, 21) * float(dom.total)
    assert np.allclose(back.at(xs), phi.at(xs), rtol=1e-14)


def test_geometric_type(run4):
    dom = Domain.of_level(run4, 0)
    perm = run4.perm(0)
    smooth = PFun.from_global_poly(dom, [0, 1, 1])
    assert geometric_type(smooth, perm, 0.5, 0)[0]
    first = perm.top[0]
    bad = PFun.atom(dom, first, "+", Fraction(-1, 2), 1.0) + PFun.atom(dom, perm.bot[0], "+", Fraction(-1, 2), 1.0)
    assert not geometric_type(bad, perm, 0.5, 0)[0]
