import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radius_lab import cocycle, lyapunov, radii, systems
from radius_lab.cocycle import Sign
from radius_lab.errors import NonConvergenceError
from radius_lab.radii import Mode

from conftest import LAMBDA, LOG_LAMBDA


@pytest.fixture(scope="module")
def hoelder05(shear05):
    return radii.estimate_hoelder(shear05, Sign.PLUS, 1.0, 10_000, 0.25, seed=0)


# ---------------------------------------------------------------- Hoelder

def test_linear_hoelder_is_zero(cat):
    for alpha in (0.3, 1.0):
        est = radii.estimate_hoelder(cat, Sign.PLUS, alpha, 2000, 0.25, seed=1)
        assert est.C == 0.0 and est.max_ratio == 0.0 and est.vacuous


def test_hoelder_sampling_stability(shear05, hoelder05):
    big = radii.estimate_hoelder(shear05, Sign.PLUS, 1.0, 100_000, 0.25, seed=0)
    assert 0 < hoelder05.C < math.inf
    assert abs(big.C - hoelder05.C) / big.C < 0.2


def test_hoelder_alpha_consistency(shear05):
    one = radii.estimate_hoelder(shear05, Sign.PLUS, 1.0, 5000, 0.1, seed=4, safety=1.0)
    half = radii.estimate_hoelder(shear05, Sign.PLUS, 0.5, 5000, 0.1, seed=4, safety=1.0)
    assert one.C >= half.C * 0.1 ** -0.5 * (1 - 1e-12)


def test_hoelder_certificate_in_and_out_of_sample(shear05, hoelder05):
    x, y = radii.sample_pairs(0, 10_000, 0.25)
    _, diff, d = radii.pair_ratios(shear05, x, y, Sign.PLUS, 1.0)
    assert np.all(diff <= hoelder05.C * d)
    assert radii.hoelder_failure_fraction(shear05, hoelder05, 100_000, seed=777) < 0.01


def test_hoelder_argument_checks(cat):
    for kw in (dict(alpha=0.0), dict(alpha=1.5), dict(d_max=0.3), dict(safety=0.5)):
        with pytest.raises(ValueError):
            radii.estimate_hoelder(cat, **kw)


# ---------------------------------------------------------------- sequences

def test_cat_closed_form(cat):
    seq = radii.radii_sequence(cat, (0.1, 0.7), 1e-3, 10)
    np.testing.assert_allclose(seq.r, 1e-3 * LAMBDA ** np.arange(11), rtol=1e-9)
    tiny = radii.radii_sequence(cat, (0.1, 0.7), 1e-14, 30)
    np.testing.assert_allclose(tiny.r, 1e-14 * LAMBDA ** np.arange(31), rtol=1e-9)
    assert not tiny.chart_exceeded


def test_neutral_multiplier_keeps_radius(shear05):
    seq = radii.radii_sequence(shear05, (0.2, 0.2), 0.01, 50, Mode.POINTWISE_PROXY,
                               proxy_log_field=lambda pts: np.zeros(len(pts)))
    assert np.all(seq.r == 0.01)


def test_recomputation_oracle_bit_identical(shear05):
    seq = radii.radii_sequence(shear05, (0.37, 0.61), 1e-4, 200)
    orbit = systems.iterate(shear05, (0.37, 0.61), 200)
    r = [1e-4]
    for k in range(200):
        r.append(cocycle.psi_ball(shear05, orbit[k], Sign.PLUS, 1, r[-1]).value * r[-1])
    assert seq.r.tolist() == r


@pytest.mark.parametrize("mode", [Mode.BALL_EXACT, Mode.POINTWISE_PROXY])
def test_recursion_consistency(shear10, mode):
    seq = radii.radii_sequence(shear10, (0.5, 0.1), 1e-5, 300, mode)
    with np.errstate(over="ignore"):
        assert np.all(seq.r[1:] == seq.m * seq.r[:-1])


def test_ball_multiplier_matches_psi_ball(shear05):
    seq = radii.radii_sequence(shear05, (0.9, 0.05), 1e-3, 5)
    for k in range(5):
        assert seq.m[k] == cocycle.psi_ball(shear05, seq.orbit[k], Sign.PLUS, 1, seq.r[k]).value


def test_chart_flag_and_clamp(shear05):
    free = radii.radii_sequence(shear05, (0.3, 0.3), 1e-3, 40)
    assert free.chart_exceeded and not free.clamped
    assert np.isinf(free.r[-1]) or free.r[-1] > 1e10
    capped = radii.radii_sequence(shear05, (0.3, 0.3), 1e-3, 40, clamp=True)
    assert capped.chart_exceeded and capped.clamped
    assert capped.r.max() == radii.CHART_RADIUS


def test_sequence_rows(cat):
    seq = radii.radii_sequence(cat, (0.1, 0.1), 1e-3, 3)
    rows = list(seq.rows())
    assert [r[0] for r in rows] == [0, 1, 2, 3]
    assert rows[-1][2] is None
    assert rows[1][3] == pytest.approx(math.log(1e-3) + LOG_LAMBDA)


def test_sequence_argument_checks(cat):
    with pytest.raises(ValueError):
        radii.radii_sequence(cat, (0, 0), 0.0, 5)
    with pytest.raises(ValueError):
        radii.radii_sequence(cat, (0, 0), 1e-3, 5, mode="bogus")


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(1e-6, 0.1), st.sampled_from([0.25, 0.5, 1.0]))
def test_power_mean_on_sequences(x, y, r0, alpha):
    seq = radii.radii_sequence(systems.shear(0.05), (x, y), r0, 12)
    assert radii.power_mean_holds(seq.r, alpha)


# ---------------------------------------------------------------- growth inequality

def test_linear_growth_is_equality(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 500, 0.25, seed=0)
    chk = radii.check_growth_inequality(radii.radii_sequence(cat, (0.3, 0.3), 1e-4, 50), est)
    assert chk.holds
    np.testing.assert_allclose(chk.lhs, LOG_LAMBDA, rtol=1e-12)
    np.testing.assert_allclose(chk.rhs, LOG_LAMBDA, rtol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_growth_inequality_holds(x, y):
    sp = systems.shear(0.05)
    est = radii.estimate_hoelder(sp, Sign.PLUS, 1.0, 10_000, 0.25, seed=0)
    chk = radii.check_growth_inequality(radii.radii_sequence(sp, (x, y), 1e-4, 1000), est)
    assert chk.holds


def test_critical_C_regression(shear05, hoelder05):
    seq = radii.radii_sequence(shear05, (0.3, 0.4), 1e-4, 1000)
    c = radii.critical_C(seq)
    assert c == pytest.approx(0.8639785775540978, rel=1e-9)
    assert c < hoelder05.C
    above = radii.HoelderEstimate(c * 1.001, 1.0, 0, 0.25, hoelder05.worst_pair, Sign.PLUS)
    below = radii.HoelderEstimate(c * 0.999, 1.0, 0, 0.25, hoelder05.worst_pair, Sign.PLUS)
    assert radii.check_growth_inequality(seq, above).holds
    assert not radii.check_growth_inequality(seq, below).holds


def test_growth_requires_ball_mode(shear05, hoelder05):
    seq = radii.radii_sequence(shear05, (0.3, 0.4), 1e-4, 10, Mode.POINTWISE_PROXY)
    with pytest.raises(ValueError):
        radii.check_growth_inequality(seq, hoelder05)


# ---------------------------------------------------------------- horizon / averaged bound

def test_cat_horizon_vacuous(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 500, 0.25, seed=0)
    h = radii.claim_horizon(cat, (0.2, 0.2), 0.1, 1e-3, est, LOG_LAMBDA)
    assert h.n == 1 and h.vacuous


def test_shear_horizon_exists_and_is_monotone(shear05, hoelder05):
    le = lyapunov.le_estimate(shear05, Sign.PLUS, 10_000, 10, seed=1).mean
    for i in range(10):
        x = lyapunov.sample_start(31, i)
        h1 = radii.claim_horizon(shear05, x, 0.1, 1e-4, hoelder05, le, 10_000)
        h2 = radii.claim_horizon(shear05, x, 0.2, 1e-4, hoelder05, le, 10_000)
        assert h1.found and h1.n <= 10_000
        assert h2.n <= h1.n


def test_L_bounds_pointwise(shear05):
    L = radii.max_log_psi_plus(shear05)
    assert L == pytest.approx(cocycle.log_psi_array(shear05, cocycle.grid_points(256)).max(), abs=0)
    assert L > LOG_LAMBDA


def test_theorem3_linear_vacuous(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 500, 0.25, seed=0)
    res = radii.check_theorem3(cat, (0.4, 0.4), 1e-3, 100, est, LOG_LAMBDA)
    assert res.bound_satisfied and res.vacuous


def test_theorem3_shear(shear05, hoelder05):
    le = lyapunov.le_estimate(shear05, Sign.PLUS, 10_000, 10, seed=2).mean
    for i in range(3):
        res = radii.check_theorem3(shear05, lyapunov.sample_start(8, i), 1e-4, 10_000, hoelder05, le - 0.05)
        assert res.bound_satisfied and not res.vacuous and res.power_mean_ok


def test_tail_min_average_by_hand():
    r = np.array([1.0, 2.0, 3.0, 4.0])
    # prefix means 1, 1.5, 2, 2.5; last half n in {2,3,4}
    assert radii.tail_min_average(r, 4, 2.0, 1.0) == 3.0


# ---------------------------------------------------------------- A+(N)

def test_cat_region_is_everything(cat):
    for N in (1, 3):
        reg = radii.region_a_plus(cat, N, 64)
        assert reg.indicator.all() and not reg.complement_nonempty
        assert reg.distance_to_complement((0.1, 0.1)) == math.inf


def test_region_matches_recomputation(da):
    reg = radii.region_a_plus(da, 1, 64)
    pts = cocycle.grid_points(64)
    v = cocycle.log_psi_array(da, pts, Sign.PLUS, 1, strict=False).reshape(64, 64)
    assert np.array_equal(reg.indicator, np.nan_to_num(v, nan=-1) > 1e-12)
    assert reg.complement_nonempty
    assert not reg.indicator[0, 0]  # the weakened fixed point


def test_shear_region_fraction(shear05):
    assert radii.region_a_plus(shear05, 1, 256).fraction == 1.0


# ---------------------------------------------------------------- periodic points

def test_cat_fixed_point_bounds(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 500, 0.25, seed=0)
    b = radii.periodic_point_bounds(cat, (0.0, 0.0), 1, est, grid_n=64)
    assert b.proposition_lower == math.inf
    assert b.le_plus == pytest.approx(LOG_LAMBDA, abs=1e-12)
    assert not b.corollary_checked and b.corollary_holds is None


def test_rational_point_period_by_brute_force(cat):
    A = np.array([[2, 1], [1, 1]])
    v = w = np.array([1, 2])
    n = 0
    while True:
        w, n = A @ w % 5, n + 1
        if (w == v).all():
            break
    assert n == 2
    assert radii.minimal_period(cat, (0.2, 0.4), 10) == n
    assert radii.periodicity_defect(cat, (0.2, 0.4), n) < 1e-12


def test_da_periodic_lower_bound(da):
    est = radii.estimate_hoelder(da, Sign.PLUS, 1.0, 5000, 0.25, seed=0)
    p = radii.find_periodic(da, 2, (0.21, 0.39))
    b = radii.periodic_point_bounds(da, p, 2, est, grid_n=256)
    assert 0 < b.proposition_lower < math.inf
    assert b.proposition_lower == pytest.approx(0.4145523340849892, abs=1e-12)
    checked = radii.periodic_point_bounds(da, p, 2, est, grid_n=256, r_plus_upper=1.0)
    assert checked.corollary_checked and checked.corollary_holds


def test_periodic_bounds_errors(cat):
    est = radii.estimate_hoelder(cat, Sign.PLUS, 1.0, 100, 0.25, seed=0)
    with pytest.raises(ValueError, match="not"):
        radii.periodic_point_bounds(cat, (0.1, 0.1), 1, est, 32)
    with pytest.raises(ValueError, match="mismatch"):
        radii.periodic_point_bounds(cat, (0.0, 0.0), 2, est, 32)


def test_newton_cat_period_one(cat, rng):
    for p in rng.random((10, 2)):
        q = radii.find_periodic(cat, 1, p)
        assert systems.torus_distance(q, (0, 0)) < 1e-12


def test_newton_cat_period_two_lands_on_lattice(cat, rng):
    A2 = np.array([[5, 3], [3, 2]])
    lattice = [(i / 5, j / 5) for i in range(5) for j in range(5)
               if ((A2 @ [i, j]) % 5 == [i, j]).all()]
    assert round(abs(np.linalg.det(A2 - np.eye(2)))) == 5
    for p in rng.random((10, 2)):
        q = radii.find_periodic(cat, 2, p)
        assert min(systems.torus_distance(q, l) for l in lattice) < 1e-12


def test_newton_shear_fixed_point(shear05):
    q = radii.find_periodic(shear05, 1, (0.0, 0.0))
    assert radii.periodicity_defect(shear05, q, 1) < 1e-12
    assert systems.apply(shear05, (0.0, 0.0)) == systems.TorusPoint(0.0, 0.0)


def test_newton_failure(shear05, monkeypatch):
    with pytest.raises(NonConvergenceError):
        radii.find_periodic(shear05, 3, (0.123, 0.456), max_steps=1)
