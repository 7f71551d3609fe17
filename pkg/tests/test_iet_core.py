from fractions import Fraction

import numpy as np
import pytest

from ietlab.iet_core import (Iet, IetError, Perm, apply, keane_check, omega, orbit,
                             partition_check, random_iet, rotation)


def test_symmetric_perm_genus():
    p = Perm.symmetric(4)
    assert p.pi0 == (1, 2, 3, 4)
    assert p.pi1 == (4, 3, 2, 1)
    assert p.genus() == (2, 1)
    assert Perm.symmetric(5).genus() == (2, 2)


def test_reducible_rejected():
    p = Perm.from_rows("ABC", "BAC")
    assert not p.is_irreducible()
    with pytest.raises(IetError):
        p.check_irreducible()
    with pytest.raises(IetError):
        Perm.from_rows("AB", "AX")


def test_omega_antisymmetric():
    om = np.array(omega(Perm.symmetric(5)))
    assert (om == -om.T).all()
    assert np.linalg.matrix_rank(om) == 4


def test_translations_tile_the_image():
    rng = np.random.default_rng(0)
    for d in (3, 4, 5, 6):
        iet = random_iet(Perm.symmetric(d), rng)
        assert partition_check(iet)
        w = np.array(iet.translations())
        lam = np.array(iet.lengths())
        # translation vector is Omega lambda
        assert np.allclose(w, np.array(omega(iet.perm)) @ lam)


def test_orbit_matches_apply():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(1))
    xs = orbit(iet, 0.123, 50)
    x = 0.123
    for v in xs:
        assert v == pytest.approx(x, abs=1e-12)
        x = apply(iet, x)


def test_rotation_is_translation_mod_one():
    theta = (np.sqrt(5) - 1) / 2
    r = rotation(theta)
    for x in np.linspace(0, 0.999, 17):
        assert apply(r, x) == pytest.approx((x + theta) % 1.0, abs=1e-12)


def test_keane_detects_rational_rotation():
    r = rotation(Fraction(1, 3), kind=Fraction)
    ok, wit = keane_check(r, 10, exact=True)
    assert not ok and wit[0] <= 3
    g = rotation((np.sqrt(5) - 1) / 2)
    assert keane_check(g, 200)[0]


def test_exact_random_lengths():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(2), bits=400)
    assert all(isinstance(x, int) and x > 0 for x in iet.lam)
    assert sum(iet.lam) == iet.den
    assert iet.total == pytest.approx(1.0)


def test_json_round_trip():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(3), bits=200)
    back = Iet.from_json(iet.to_json())
    assert back.perm == iet.perm and back.lam == iet.lam and back.den == iet.den
