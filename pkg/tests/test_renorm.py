import math

import numpy as np
import pytest

from ietlab.iet_core import KeaneViolation, Perm, random_iet, rotation
from ietlab.renorm import (accelerate, check_algebra, det, measured_return_times, norm,
                           rauzy_step, towers)


def test_single_step_matrix():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(0))
    st = rauzy_step(iet)
    assert det(st.A) == 1
    lam, new = iet.lengths(), st.next.lengths()
    assert lam[st.winner] - lam[st.loser] == pytest.approx(new[st.winner])


def test_tie_raises():
    iet = rotation(0.5)
    with pytest.raises(KeaneViolation):
        rauzy_step(iet)


def test_algebra_on_exact_run(run4):
    assert check_algebra(run4, stride=10) == run4.levels[-1].n


def test_policies_agree_on_matrices():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(4), bits=800)
    bal = accelerate(iet, k_max=20)
    fix = accelerate(iet, policy="fixed", cuts=bal.cuts)
    assert fix.Q(20) == bal.Q(20)
    zor = accelerate(iet, policy="zorich", k_max=30)
    n = zor.levels[-1].n
    # every Zorich level is a run of one step type
    for k in range(zor.k_max):
        assert len({e for e, _, _ in zor.level_steps(k)}) == 1
    assert n > 0


def test_bad_cuts_rejected():
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(4), bits=200)
    with pytest.raises(ValueError):
        accelerate(iet, policy="fixed", cuts=[3, 2])
    with pytest.raises(ValueError):
        accelerate(iet, policy="nope")


def test_balanced_levels_are_balanced(run4):
    for lv in run4.levels[1:]:
        assert lv.kappa <= 2 * run4.d


def test_lengths_shrink_by_Q(run4):
    # lambda^(0) = Q(k)^T lambda^(k)
    for k in (5, 40, 100):
        q = np.array(run4.Q(k), dtype=object)
        lamk = np.array(run4.levels[k].lam, dtype=object)
        assert list(q.T.dot(lamk)) == list(run4.levels[0].lam)


def test_towers_and_return_times(run4):
    for k in (3, 8):
        tw = towers(run4, k)
        assert tw.heights == run4.return_times(k)
        assert measured_return_times(run4, k) == run4.return_times(k)
        tot = sum(r - l for fl in tw.floors.values() for l, r in fl)
        assert tot == pytest.approx(run4.base.total, rel=1e-9)


def test_golden_rotation_partial_quotients():
    theta = (math.sqrt(5) - 1) / 2
    run = accelerate(rotation(theta), policy="zorich", k_max=20)
    # all continued fraction quotients are one: every Zorich run has one step
    assert all(len(run.level_steps(k)) == 1 for k in range(run.k_max))


def test_norm_grows(run4):
    assert norm(run4.Q(50)) > norm(run4.Q(10)) > 1
