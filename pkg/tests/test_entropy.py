import math

import numpy as np
import pytest

from qmorse.entropy import (
    LambdaProfile,
    SardParameters,
    ball_cover_centers,
    ball_covering_number,
    covering_number,
    covers,
    lambda_critical_points,
    packing_number,
    sard_bound,
    sard_compare,
    sard_csv,
    volumetric_ball_bound,
)
from qmorse.jetcalc import ComponentMap, GradientMap, ball_grid, parse

# --------------------------------------------------------------------------
# covering numbers


def test_unit_interval_needs_five_balls():
    pts = np.linspace(0, 1, 101)[:, None]
    est = covering_number(pts, 0.1)
    assert est.upper == 5
    assert est.lower <= 5
    assert covers(pts, est.centers, 0.1)


def test_singleton_has_covering_number_one():
    for eps in (1e-6, 0.3, 10.0):
        est = covering_number(np.array([[0.2, -0.7]]), eps)
        assert est.upper == est.lower == 1


def test_empty_set_has_covering_number_zero():
    est = covering_number(np.zeros((0, 2)), 0.1)
    assert est.upper == est.lower == 0


def test_unit_square_grid_at_half():
    g = np.linspace(0, 1, 64)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    est = covering_number(pts, 0.5)
    assert 1 <= est.upper <= 4
    # four quarter-point centers cover the square, a single ball cannot (diameter sqrt 2 > 1)
    quarter = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
    assert covers(pts, quarter, 0.5)
    assert est.upper >= 2 and est.lower >= 1


def test_cover_is_valid_and_sandwiched_on_random_clouds():
    rng = np.random.default_rng(5)
    for _ in range(10):
        pts = rng.uniform(-1, 1, size=(rng.integers(20, 200), rng.integers(1, 4)))
        eps = rng.uniform(0.05, 0.5)
        est = covering_number(pts, eps)
        assert covers(pts, est.centers, eps)
        assert est.lower <= est.upper
        assert packing_number(pts, 2 * eps) <= est.upper


def test_cover_shrinks_as_radius_grows():
    rng = np.random.default_rng(6)
    pts = rng.uniform(-1, 1, size=(300, 2))
    uppers = [covering_number(pts, e).upper for e in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(a >= b for a, b in zip(uppers, uppers[1:]))


def test_covering_is_deterministic():
    rng = np.random.default_rng(8)
    pts = rng.uniform(size=(150, 2))
    a, b = covering_number(pts, 0.15), covering_number(pts, 0.15)
    assert a.upper == b.upper and np.array_equal(a.centers, b.centers)


def test_ball_covering_unit_radius():
    for n in (1, 2, 3):
        assert ball_covering_number(n, 1.0) == 1
        assert volumetric_ball_bound(n, 1.0) == 3**n


def test_ball_covering_interval_at_half():
    assert ball_covering_number(1, 0.5) == 2


def test_ball_covering_disc_at_half_against_brute_force():
    count = ball_covering_number(2, 0.5)
    assert 4 <= count <= 9
    centers = ball_cover_centers(2, 0.5)
    assert covers(ball_grid(2, 201), centers, 0.5)
    # lower bound: a disc of radius 1 has area pi, each ball covers at most pi/4
    assert count >= math.ceil(math.pi / (math.pi * 0.25))


def test_ball_covering_volumetric_branch_for_high_dimension():
    assert ball_covering_number(5, 0.3) == volumetric_ball_bound(5, 0.3)
    assert ball_covering_number(2, 0.01, constructive=False) == math.ceil((1 + 2 / 0.01) ** 2)


# --------------------------------------------------------------------------
# Lambda-critical sets and the Sard bound


def test_lambda_critical_set_of_convex_gradient_is_empty():
    F = GradientMap(parse("x1^2 + x2^2", 2, 3))
    sample = lambda_critical_points(F, LambdaProfile((0.1, 0.1)), 32)
    assert len(sample.points) == 0 and sample.sampled > 0


def test_infinite_thresholds_keep_every_grid_point():
    F = GradientMap(parse("x1^2 + x2^2", 2, 3))
    sample = lambda_critical_points(F, LambdaProfile((math.inf, math.inf)), 16)
    assert len(sample.points) == sample.sampled == len(ball_grid(2, 16))


def test_lambda_critical_points_of_cubic_gradient():
    F = GradientMap(parse("x1^3", 1, 3))
    sample = lambda_critical_points(F, LambdaProfile((0.3,)), 201)
    grid = ball_grid(1, 201)
    expected = grid[np.abs(6 * grid[:, 0]) <= 0.3]
    assert np.array_equal(sample.points, expected)
    assert np.all(np.abs(sample.points) <= 0.05 + 1e-15)
    assert np.allclose(sample.values[:, 0], 3 * sample.points[:, 0] ** 2)


def test_lambda_profile_must_be_non_increasing():
    with pytest.raises(ValueError):
        LambdaProfile((0.1, 0.2))
    with pytest.raises(ValueError):
        LambdaProfile((-1.0,))


def test_sard_bound_small_closed_form():
    p = SardParameters(n=1, m=1, k=2, r=1.0, K_lip=1.0, c=1.0, delta=1.0)
    assert p.Rk == 1.0
    assert sard_bound(p, LambdaProfile((2.0,)), 1.0) == pytest.approx(2.0, rel=1e-15)


def test_sard_bound_with_huge_thresholds_at_eps_equal_delta():
    p = SardParameters(n=2, m=2, k=3, r=1.0, K_lip=2.0, c=1.5, delta=0.5)
    bound = sard_bound(p, LambdaProfile((1e9, 1e9)), 0.5)
    assert bound == pytest.approx(1.5 * (p.Rk / 0.5) ** (2 / 3) * 3, rel=1e-14)


def test_sard_bound_cubic_example():
    p = SardParameters(n=1, m=1, k=3, r=1.0, K_lip=6.0, c=1.0, delta=1.0)
    assert p.Rk == 3.0
    expected = 30 ** (1 / 3) * (1 + min(0.3 * 10 * (0.1 / 3) ** (1 / 3), 10))
    assert sard_bound(p, LambdaProfile((0.3,)), 0.1) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(6.11, abs=0.01)


def test_sard_bound_rejects_eps_above_delta_and_handles_zero_rk():
    p = SardParameters(n=1, m=1, k=3, r=1.0, K_lip=6.0, delta=0.5)
    with pytest.raises(ValueError):
        sard_bound(p, LambdaProfile((0.3,)), 1.0)
    with pytest.raises(ValueError):
        sard_bound(p, LambdaProfile((0.3,)), 0.0)
    flat = SardParameters(n=1, m=1, k=3, r=1.0, K_lip=0.0)
    assert sard_bound(flat, LambdaProfile((0.3,)), 0.5) == 0.0


def test_sard_bound_is_non_increasing_in_eps():
    p = SardParameters(n=2, m=2, k=3, r=1.0, K_lip=4.0, c=1.0, delta=1.0)
    L = LambdaProfile((0.5, 0.05))
    eps = np.geomspace(1e-3, 1.0, 20)
    vals = [sard_bound(p, L, e) for e in eps]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_sard_table_for_empty_critical_set_is_all_zero():
    F = GradientMap(parse("x1^2 + x2^2", 2, 3))
    p = SardParameters(2, 2, 2, 1.0, 2.0)
    rows = sard_compare(F, LambdaProfile((0.1, 0.1)), p, [0.5, 0.25], grid=16)
    assert [r.empirical_upper for r in rows] == [0, 0]
    assert all(not r.exceeds for r in rows)


def test_sard_counts_grow_as_eps_shrinks_for_cubic():
    F = GradientMap(parse("x1^3", 1, 3))
    p = SardParameters(1, 1, 2, 1.0, 6.0)
    rows = sard_compare(F, LambdaProfile((0.3,)), p, [0.5, 0.25, 0.1], grid=201)
    counts = [r.empirical_upper for r in rows]
    assert counts == sorted(counts)


def test_sard_ratios_are_finite_and_positive_for_a_quadratic_map():
    F = ComponentMap([parse("x1^2 - x2^2", 2, 3), parse("x1 * x2", 2, 3)])
    p = SardParameters(2, 2, 3, 1.0, 1.0)
    rows = sard_compare(F, LambdaProfile((3.0, 0.5)), p, [0.5, 0.25], grid=32)
    assert all(0 < r.ratio < math.inf for r in rows)
    csv_text = sard_csv(rows)
    assert csv_text.splitlines()[0] == "epsilon,empirical_upper,bound,ratio"
    assert len(csv_text.splitlines()) == 3
