import numpy as np
import pytest

from ietlab import numeric as nm
from ietlab.cohom import (DecayError, ObstructedError, Solution, higher_regularity_solve,
                          holder_exponent, osc_check, solve, space_decompose, time_decompose)
from ietlab.iet_core import Perm, random_iet
from ietlab.pfun import Domain, PFun
from ietlab.renorm import accelerate

CUBIC = [0, 0.7, -1.2, 0.5]


@pytest.fixture(scope="module")
def small():
    nm.set_precision(200)
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(5), bits=400)
    run = accelerate(iet, k_max=60)
    return run, Domain.of_iet(iet)


def _grid(dom, n=4001):
    return np.linspace(0, float(dom.total), n)[:-1]


def test_time_decomposition_reassembles(small):
    run, dom = small
    od = time_decompose(run, 0.123456, 1000)
    assert od.counts_ok()
    assert od.N_plus - od.N_minus == 1000   # N_minus counts backwards
    a, b = od.reassemble(run, PFun.from_global_poly(dom, [0, 1]))
    assert abs(float(a - b)) <= 1e-40 * abs(float(b))


def test_space_decomposition_tiles(small):
    run, _ = small
    sd = space_decompose(run, 0.2, 0.35)
    assert sd.tiles()
    assert sd.counts_ok()


def test_callable_smooth_round_trip(small):
    run, dom = small
    I = float(dom.total)
    lefts = [float(x) for x in dom.lefts]
    starts = np.array([lefts[a] for a in dom.order])
    wo = np.array([float(dom.w[a]) for a in dom.order])

    def v0(x):
        return np.sin(2 * np.pi * x / I) + 0.3 * np.cos(6 * np.pi * x / I)

    def phi(x):
        return v0(x + wo[np.searchsorted(starts, x, side="right") - 1]) - v0(x)

    sol = solve(run, phi, check_decay=False)
    xs = _grid(dom)
    assert np.max(np.abs(sol(xs) - (v0(xs) - v0(0)))) < 1e-6
    assert holder_exponent(sol).exponent >= 0.9


def test_holder_perturbation(small):
    run, dom = small
    phi = PFun.coboundary_of_poly(dom, CUBIC) + PFun.coboundary_of_power(dom, 0.8, 0.3)
    sol = solve(run, phi)
    xs = _grid(dom)
    vt = np.polynomial.polynomial.polyval(xs, CUBIC) + 0.3 * xs ** 0.8
    assert np.max(np.abs(sol(xs) - vt)) < 1e-6
    assert sol.residual < 1e-8
    assert sol.notes["decay_rate"] < 0
    for k, osc, bound in osc_check(run, sol, phi, [1, 2, 3]):
        assert osc <= bound


def test_translation_vector_gives_affine_solution(small):
    run, dom = small
    w = np.array([float(x) for x in dom.w])
    h = PFun.from_gamma(dom, w / np.linalg.norm(w))
    sol = solve(run, h, check_decay=False)
    xs = _grid(dom)
    assert np.max(np.abs(sol(xs) - xs / np.linalg.norm(w))) < 1e-8


def test_non_coboundary_is_rejected(small):
    run, dom = small
    phi = PFun.from_global_poly(dom, [0, 1])   # positive mean: no bounded solution
    with pytest.raises(DecayError):
        solve(run, phi)


def test_higher_regularity_polynomial(small):
    run, dom = small
    sol = higher_regularity_solve(run, PFun.coboundary_of_poly(dom, CUBIC), 3)
    assert [float(c) for c in sol.poly] == pytest.approx(CUBIC, abs=1e-12)


def test_higher_regularity_fractional(small):
    run, dom = small
    phi = PFun.coboundary_of_poly(dom, CUBIC) + PFun.coboundary_of_power(dom, 1.8, 0.3)
    sol = higher_regularity_solve(run, phi, 2, check=False, strict=False)
    xs = _grid(dom)
    vt = np.polynomial.polynomial.polyval(xs, CUBIC) + 0.3 * xs ** 1.8
    assert np.max(np.abs(sol(xs) - vt)) < 1e-8


def test_spectral_reduction(run4, flags4, basis4):
    dom = basis4.cor.dom0
    with pytest.raises(ObstructedError) as ei:
        solve(run4, PFun.from_gamma(dom, flags4.h(1)), mode="spectral_reduction", basis=basis4, n=2)
    assert ei.value.triples[0]["tag"] == (0, "+", 1)
    sol = solve(run4, PFun.from_gamma(dom, flags4.h(-1)), mode="spectral_reduction", basis=basis4, n=2)
    assert sol.poly is not None and len(sol.poly) == 2


def test_solution_export(small, tmp_path):
    run, dom = small
    sol = solve(run, PFun.coboundary_of_poly(dom, CUBIC), check_decay=False)
    sol.notes.pop("orbit", None)
    sol.export(tmp_path / "v.csv", tmp_path / "v.json")
    head = (tmp_path / "v.csv").read_text().splitlines()[0]
    assert head.startswith("x")
    assert (tmp_path / "v.json").stat().st_size > 0
    assert isinstance(sol, Solution)
