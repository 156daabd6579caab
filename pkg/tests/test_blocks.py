import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radius_lab import blocks, lyapunov, radii
from radius_lab.blocks import BlockParams
from radius_lab.cocycle import Sign

from conftest import LOG_LAMBDA


@pytest.fixture(scope="module")
def hoelder05(shear05):
    return radii.estimate_hoelder(shear05, Sign.PLUS, 1.0, 10_000, 0.25, seed=0)


def test_params_defaults_and_checks():
    p = BlockParams(0.5, 7)
    assert p.horizon == 70 and p.sign is Sign.PLUS
    for bad in (dict(gamma=0.0, N=1), dict(gamma=1.0, N=0), dict(gamma=1.0, N=5, horizon=4)):
        with pytest.raises(ValueError):
            BlockParams(**bad)


def test_cat_members(cat, rng):
    for p in rng.random((10, 2)):
        for N, gamma in ((1, 1.0), (5, 2 * 0.9624236)):
            b = blocks.block_membership(cat, p, BlockParams(gamma, N))
            assert b.member and b.first_violation is None and b.horizon == 10 * N


def test_cat_gamma_too_large(cat):
    for N in (1, 4, 9):
        b = blocks.block_membership(cat, (0.3, 0.3), BlockParams(3.0, N))
        assert not b.member and b.first_violation == N


def test_minus_sign_block(cat):
    assert blocks.block_membership(cat, (0.1, 0.2), BlockParams(1.0, 2, sign=Sign.MINUS)).member
    assert not blocks.block_membership(cat, (0.1, 0.2), BlockParams(2.0, 2, sign=Sign.MINUS)).member


def test_first_violation_by_hand():
    avg = np.array([0.1, 0.6, 0.2, 0.7, 0.8])
    b = blocks.membership_from_averages(avg, BlockParams(1.0, 2, 5))
    assert not b.member and b.first_violation == 3
    assert blocks.minimal_block_N(avg, 1.0, 5) == 4
    assert blocks.minimal_block_N(avg, 2.0, 5) is None
    assert blocks.minimal_block_N(avg, 0.1, 5) == 1


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0.5, 2.2), st.integers(1, 20))
def test_nesting_and_shrinking(x, y, gamma, N):
    from radius_lab import systems
    sp = systems.shear(0.1)
    horizon = 400
    avg = blocks.running_averages(sp, (x, y), Sign.PLUS, horizon)
    here = blocks.membership_from_averages(avg, BlockParams(gamma, N, horizon))
    if here.member:
        assert blocks.membership_from_averages(avg, BlockParams(gamma, N + 1, horizon)).member
        assert blocks.membership_from_averages(avg, BlockParams(gamma * 0.9, N, horizon)).member


def test_block_map_rows(shear05):
    pts = np.array([[0.1, 0.2], [0.5, 0.5]])
    rows = blocks.block_map(shear05, pts, BlockParams(1.5, 3))
    assert [r[:2] for r in rows] == [(0.1, 0.2), (0.5, 0.5)]
    assert all(isinstance(r[2], bool) for r in rows)


def test_time_bound_vacuous(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 200, 0.25, seed=0)
    tb = blocks.time_bound_check(cat, (0.2, 0.3), LOG_LAMBDA, 100, est, 100)
    assert tb.vacuous and tb.R0 == math.inf


def test_time_bound_shear(shear05, hoelder05):
    le = lyapunov.le_estimate(shear05, Sign.PLUS, 10_000, 5, seed=0).mean
    for i in range(5):
        tb = blocks.time_bound_check(shear05, lyapunov.sample_start(17, i), le, 1000, hoelder05, 1000)
        assert tb.R0 == pytest.approx((le / (4 * hoelder05.C)))
        assert tb.T == max(1000, tb.N)
        assert (not tb.hypothesis_met) or tb.conclusion_met


def test_proof_chain_replayed(shear05, hoelder05):
    le = lyapunov.le_estimate(shear05, Sign.PLUS, 10_000, 5, seed=0).mean
    for i in range(5):
        tb = blocks.time_bound_check(shear05, lyapunov.sample_start(3, i), le, 200, hoelder05, 200)
        assert tb.proof_chain is True


def test_proof_chain_detects_broken_display(hoelder05):
    r = np.array([1e-3, 2e-3, 4e-3, 8e-3])
    shrinking = np.array([0.5, 0.5, 0.5])
    assert blocks.proof_chain(r, shrinking, 1, 1.0, hoelder05, 0.2) is False
    assert blocks.proof_chain(r, np.full(3, 2.0), 1, 1.0, hoelder05, 0.2) is True
    assert blocks.proof_chain(r, np.full(3, 2.0), 1, 1.0, hoelder05, 1e-4) is None
