import numpy as np
import pytest

from ietlab import numeric as nm
from ietlab.pfun import PFun
from ietlab.spectral import (PrimPoly, coordinates_in_basis, d_functionals, measure_exponent,
                             order_of, triples)


def test_orders(basis4):
    e = basis4.exps
    assert order_of((0, "+", 1), e) == pytest.approx(-1)
    assert order_of((1, "0", 1), e) == 1
    assert order_of((2, "-", 2), e) == pytest.approx(2 + e[1] / e[0])
    assert len(basis4.tags()) == 12
    for t in basis4.tags():
        assert basis4.elements[t].order == pytest.approx(order_of(t, e))


def test_triples_membership(basis4):
    t1 = triples(basis4, 0.0, 1)
    assert (0, "-", 1) not in t1 and (0, "-", 2) in t1
    t2 = triples(basis4, 0.0, 2)
    assert (0, "-", 1) in t2
    assert all(t[1] != "-" or t[2] != 1 for t in triples(basis4, 0.0, 2, star=False))


def test_vanishing_conditions(basis4):
    res = basis4.check_vanishing()
    big = max(v for v in res.values() if v is not None)
    assert big < 1e-20


def test_level_zero_rates(basis4, run4):
    le = basis4.exps
    fit = measure_exponent(run4, basis4.pfun((0, "+", 1)), "sup", (10, 40))
    assert fit.rate == pytest.approx(le[0], rel=0.1)
    fit = measure_exponent(run4, basis4.pfun((1, "-", 2)), "sup", (10, 40))
    assert fit.rate == pytest.approx(-le[0] - le[1], rel=0.15)


def test_coordinates_round_trip(basis4):
    rng = np.random.default_rng(1)
    coef = {t: rng.normal() for t in basis4.tags(2)}
    p = None
    for t, c in coef.items():
        q = basis4.elements[t].poly.scale(c)
        p = q if p is None else p + q
    got = coordinates_in_basis(basis4, p, 2)
    for t, c in coef.items():
        assert float(got[t]) == pytest.approx(c, abs=1e-20)


def test_functionals_recover_coefficients(basis4):
    rng = np.random.default_rng(2)
    coef = {t: rng.normal() for t in basis4.tags(2)}
    p = None
    for t, c in coef.items():
        q = basis4.elements[t].poly.scale(c)
        p = q if p is None else p + q
    rep = d_functionals(basis4, p.pfun(basis4.cor.dom0), a=0.0, n=2)
    assert len(rep.triples) == len(triples(basis4, 0.0, 2))
    for row in rep.triples:
        assert row["value"] == pytest.approx(coef[row["tag"]], abs=1e-8)


def test_coboundary_invariants_vanish(basis4):
    dom = basis4.cor.dom0
    phi = PFun.coboundary_of_poly(dom, [0, 0.7, -1.2, 0.5])
    rep = d_functionals(basis4, phi, a=0.2, n=1)
    scale = float(phi.norm_Cna(0.2, 1))
    for row in rep.triples:
        if row["invariant"]:
            assert abs(row["value"]) < 1e-10 * scale
    js = rep.to_json()
    assert js["n"] == 1 and len(js["triples"]) == len(rep.triples)


def test_primpoly_algebra():
    p = PrimPoly({0: nm.vec([1, 2]), 2: nm.vec([0, 1])})
    q = p.deriv(2)
    assert list(q.terms) == [0] and nm.to_floats(q.terms[0]) == [0, 1]
    assert p.prim().degree == 3
    assert nm.to_floats((p - p).terms[0]) == [0, 0]


def test_each_element_is_dual_at_order_one(basis4):
    ts = triples(basis4, 0.0, 1)
    for t in ts:
        vals = d_functionals(basis4, basis4.pfun(t), a=0.0, n=1).values()
        for s in ts:
            assert vals[s] == pytest.approx(1.0 if s == t else 0.0, abs=1e-10)
