import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radius_lab import systems
from radius_lab.errors import ConfigError
from radius_lab.systems import Kind, SystemSpec, TorusPoint, torus_distance

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


def test_cat_map_fixes_origin(cat):
    assert systems.apply(cat, (0.0, 0.0)) == TorusPoint(0.0, 0.0)
    assert systems.apply_inverse(cat, (0.0, 0.0)) == TorusPoint(0.0, 0.0)


def test_cat_map_half_point(cat):
    assert systems.apply(cat, (0.5, 0.5)) == TorusPoint(0.5, 0.0)
    # inverse matrix [[1, -1], [-1, 2]]
    assert systems.apply_inverse(cat, (0.5, 0.0)) == TorusPoint(0.5, 0.5)


def test_shear_image_by_hand():
    sp = systems.shear(0.1)
    # S(0.25, 0) = (0.25, 0.1); [[2,1],[1,1]] (0.25, 0.1) = (0.6, 0.35)
    q = systems.apply(sp, (0.25, 0.0))
    assert q.x == pytest.approx(0.6, abs=1e-15)
    assert q.y == pytest.approx(0.35, abs=1e-15)


@pytest.mark.parametrize("name", ["cat", "shear05", "shear10", "da"])
def test_round_trip(name, request, rng):
    sp = request.getfixturevalue(name)
    pts = rng.random((1000, 2))
    back = systems.apply_many(sp, systems.apply_many(sp, pts), backward=True)
    assert systems.torus_distances(back, pts).max() < 1e-12
    fwd = systems.apply_many(sp, systems.apply_many(sp, pts, backward=True))
    assert systems.torus_distances(fwd, pts).max() < 1e-12


def _fd_jacobian(sp, x, y, h=1e-6):
    cols = []
    for dx, dy in ((h, 0.0), (0.0, h)):
        p = np.array(systems.apply(sp, (x + dx, y + dy)).as_tuple())
        m = np.array(systems.apply(sp, (x - dx, y - dy)).as_tuple())
        d = p - m
        d -= np.floor(d + 0.5)
        cols.append(d / (2 * h))
    return np.column_stack(cols)


@pytest.mark.parametrize("name", ["cat", "shear05", "shear10", "da"])
def test_jacobian_matches_finite_differences(name, request, rng):
    sp = request.getfixturevalue(name)
    pts = rng.random((1000, 2))
    worst = 0.0
    for x, y in pts:
        J = systems.jacobian(sp, (x, y)).as_array()
        worst = max(worst, np.abs(J - _fd_jacobian(sp, x, y)).max())
    assert worst < 1e-6


def test_shear_jacobian_chain_rule(shear05):
    x = 0.3
    s = 2 * math.pi * 0.05 * math.cos(2 * math.pi * x)
    expected = np.array([[2, 1], [1, 1]]) @ np.array([[1, 0], [s, 1]])
    np.testing.assert_allclose(systems.jacobian(shear05, (x, 0.7)).as_array(), expected, atol=1e-15)


def test_linear_jacobian_constant(cat, rng):
    for x, y in rng.random((20, 2)):
        assert systems.jacobian(cat, (x, y)).as_array().tolist() == [[2, 1], [1, 1]]


def test_da_jacobian_outside_bump_is_matrix(da):
    assert systems.jacobian(da, (0.5, 0.5)).as_array().tolist() == [[2, 1], [1, 1]]


@pytest.mark.parametrize("name", ["cat", "shear05", "shear10"])
def test_area_preservation(name, request, rng):
    sp = request.getfixturevalue(name)
    a, b, c, d = systems.jacobian_arrays(sp, *rng.random((2, 1000)))
    assert np.abs(np.abs(a * d - b * c) - 1.0).max() < 1e-12


def test_distance_examples():
    assert torus_distance((0.3, 0.4), (0.3, 0.4)) == 0.0
    assert torus_distance((0.9, 0.0), (0.1, 0.0)) == pytest.approx(0.2, abs=1e-15)
    assert torus_distance((0.0, 0.0), (0.5, 0.5)) == pytest.approx(math.sqrt(0.5), abs=1e-15)


def _brute_distance(p, q):
    return min(math.hypot(p[0] - q[0] + i, p[1] - q[1] + j) for i in (-1, 0, 1) for j in (-1, 0, 1))


@given(unit, unit, unit, unit)
def test_distance_is_min_over_translates(a, b, c, d):
    assert torus_distance((a, b), (c, d)) == pytest.approx(_brute_distance((a, b), (c, d)), abs=1e-15)
    assert torus_distance((a, b), (c, d)) == torus_distance((c, d), (a, b))
    assert torus_distance((a, b), (c, d)) <= math.sqrt(0.5) + 1e-15


def test_triangle_inequality(rng):
    p, q, r = rng.random((3, 1000, 2))
    d = systems.torus_distances
    assert np.all(d(p, r) <= d(p, q) + d(q, r) + 1e-12)


@settings(max_examples=200)
@given(unit, unit)
def test_points_stay_in_unit_square(x, y):
    for sp in (systems.cat_map(), systems.shear(0.05)):
        q = systems.apply(sp, (x, y))
        assert 0.0 <= q.x < 1.0 and 0.0 <= q.y < 1.0
        q = systems.apply_inverse(sp, (x, y))
        assert 0.0 <= q.x < 1.0 and 0.0 <= q.y < 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind=Kind.LINEAR, matrix=((1, 0), (0, 1))),
        dict(kind=Kind.LINEAR, matrix=((2, 0), (0, 1))),
        dict(kind=Kind.LINEAR, matrix=((1, 1), (0, 1))),
        dict(kind=Kind.LINEAR, matrix=((2.5, 1), (1, 1))),
        dict(kind=Kind.LINEAR, eps=0.1),
        dict(kind=Kind.SHEAR, eps=-0.1),
        dict(kind=Kind.DA, eps=0.5, da_radius=0.3),
        dict(kind=Kind.DA, eps=1.2),
    ],
)
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(ConfigError):
        SystemSpec(**kwargs)


def test_toml_round_trip(tmp_path):
    path = tmp_path / "sys.toml"
    path.write_text('kind = "ShearPerturbed"\nmatrix = [[2,1],[1,1]]\neps = 0.05\n')
    sp = SystemSpec.from_toml(path)
    assert sp == systems.shear(0.05)
    path.write_text('[system]\nkind = "da"\neps = 0.7\nda_center = [0.0, 0.0]\nda_radius = 0.2\n')
    assert SystemSpec.from_toml(path) == systems.derived_from_anosov(0.7)


def test_toml_bad_kind(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('kind = "henon"\n')
    with pytest.raises(ConfigError):
        SystemSpec.from_toml(path)
