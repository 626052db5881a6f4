import math

import mpmath
import numpy as np
import pytest

from helpers import hadamard_1d
from qmorse.certify import isolate_criticals
from qmorse.jetcalc import ball_grid, estimate_budget, parse
from qmorse.linalg import DegenerateMatrixError
from qmorse.morse import (
    AnalysisError,
    BumpSum,
    ConstantsError,
    PerturbedField,
    build_perturbation,
    compute_constants,
    hadamard_form,
    hadamard_forms,
    morse_chart,
    near_critical_values,
    residual_tolerance,
    run_analysis,
    select_regular_value,
    verify_theorem,
)
from qmorse.morse.perturb import U_FLAT, bump_profile_sups

# --------------------------------------------------------------------------
# constants


def test_constants_example_against_high_precision_recomputation():
    mc = compute_constants(K=1.0, eps=0.1, n=2, k=3, c=1.0)
    mp = mpmath.mp
    K, eps, n, k = mp.mpf(1), mp.mpf("0.1"), 2, 3
    Rk = K / 2
    r = min(eps, (eps / Rk ** (mp.mpf(1) / k)) ** (mp.mpf(k) / (k - 1))) / 2
    gamma = Rk ** (mp.mpf(1) / k) * r * (1 - r**n * Rk ** (mp.mpf(n) / k) / (eps**n * r ** (mp.mpf(n) / k)))
    d = gamma**2 / (4 * K**2)
    assert mc.Rk == 0.5
    assert mc.r_eps == pytest.approx(float(r), rel=1e-14)
    assert mc.gamma == pytest.approx(float(gamma), rel=1e-13)
    assert mc.d_sep == pytest.approx(float(d), rel=1e-13)
    # quoted values are rounded: half a unit in the last digit
    assert mc.r_eps == pytest.approx(0.02236, abs=5e-6)
    assert mc.gamma == pytest.approx(0.0107, abs=5e-5)
    assert mc.d_sep == pytest.approx(2.86e-5, abs=5e-8)


def test_constant_identities_hold_exactly():
    for K, eps, n, k in [(1.0, 0.1, 2, 3), (3.7, 0.05, 3, 4), (0.8, 0.2, 1, 5)]:
        mc = compute_constants(K, eps, n, k)
        assert mc.psi1 == mc.gamma
        assert mc.d_sep == mc.gamma**2 / (4 * K**2)
        assert mc.eta == mc.r_loc * mc.gamma / 4
        assert mc.psi3 == mc.gamma / (2 * n * (K + eps))
        assert mc.sigma == mc.gamma / 2
        assert mc.r_loc == min(mc.sigma / (K + eps), mc.gamma / (mc.sigma * n))
        assert all(v > 0 for v in (mc.gamma, mc.d_sep, mc.psi2, mc.psi3, mc.eta, mc.N_bound))


def test_doubling_K_decreases_gamma_and_separation():
    # with R_k <= eps the radius r_eps = eps/2 no longer depends on K
    for n in (1, 2, 3):
        for k in (3, 4, 5):
            for eps in (0.05, 0.1, 0.2):
                for R in (0.5, 1.0, 2.0, 4.0):
                    K = R * math.factorial(k - 1)
                    a, b = compute_constants(K, eps, n, k), compute_constants(2 * K, eps, n, k)
                    assert b.gamma < a.gamma and b.d_sep < a.d_sep


def test_constants_reject_bad_parameters():
    with pytest.raises(ConstantsError):
        compute_constants(0.0, 0.1, 2, 3)
    with pytest.raises(ConstantsError):
        compute_constants(1.0, 0.1, 2, 2)
    with pytest.raises(ConstantsError):
        compute_constants(1.0, -0.1, 2, 3)


def test_gamma_stays_positive_for_large_covering_constants():
    # the bracket is at least 1 - 2^(-n(k-1)/k) whatever c is
    for c in (1.0, 1e3, 1e9):
        for n, k in [(1, 3), (2, 3), (3, 5)]:
            mc = compute_constants(1.0, 0.1, n, k, c=c)
            assert mc.gamma >= mc.Rk ** (1 / k) * mc.r_eps * (1 - 2 ** (-n * (k - 1) / k)) * (1 - 1e-12)


def test_measured_bump_budget_feeds_psi2():
    mc = compute_constants(1.0, 0.1, 2, 3).with_C1(1e6)
    assert mc.C1 == 1e6
    assert mc.psi2 == 0.1 / (2 * 3 * 1e6 * mc.N_bound**2)


# --------------------------------------------------------------------------
# regular value


def _setup(text, n, k=3, eps=0.1, grid=64):
    f0 = parse(text, n, k)
    budget = estimate_budget(f0, grid)
    return f0, budget, compute_constants(budget.K, eps, n, k)


def test_constant_hessian_gives_zero_shift():
    f0, budget, mc = _setup("x1^2 + x2^2", 2)
    assert len(near_critical_values(f0, mc.gamma, 64)) == 0
    rv = select_regular_value(f0, budget, mc, 64)
    assert rv.v.tolist() == [0.0, 0.0]


def test_affine_function_gives_zero_shift():
    f0, budget, mc = _setup("0.3*x1 - 0.2*x2", 2)
    assert select_regular_value(f0, budget, mc, 32).v.tolist() == [0.0, 0.0]


def test_cubic_shift_avoids_near_critical_values():
    f0 = parse("x1^3", 1, 3)
    budget = estimate_budget(f0, 64)
    mc = compute_constants(budget.K, 0.1, 1, 3)
    grid = 1001  # odd: samples the degenerate point
    S = near_critical_values(f0, mc.gamma, grid)
    assert len(S) > 0
    assert np.all((S >= 0) & (S <= 3 * (mc.gamma / 6) ** 2 + 1e-15))
    rv = select_regular_value(f0, budget, mc, grid)
    assert abs(rv.v[0]) < mc.eps / 2
    assert rv.distance > 0
    assert np.min(np.abs(S[:, 0] - rv.v[0])) == pytest.approx(rv.distance)


# --------------------------------------------------------------------------
# bumps and perturbation


def test_bump_is_one_inside_and_zero_outside():
    bump = BumpSum(np.zeros((1, 2)), np.ones(1), 0.1)
    pts = np.array([[0.0, 0.0], [0.05, 0.0], [0.1, 0.0], [0.15, 0.0], [0.2, 0.0], [0.3, 0.0]])
    vals = bump.jets(pts, 0).value
    assert vals[:3].tolist() == [1.0, 1.0, 1.0]
    assert 0 < vals[3] < 1
    assert vals[4:].tolist() == [0.0, 0.0]


def test_bump_profile_derivatives_scale_with_inverse_radius():
    s1 = bump_profile_sups(1, 1.0, 3)
    s2 = bump_profile_sups(1, 0.5, 3)
    assert s1[0] == pytest.approx(1.0, abs=1e-6)
    for j in (1, 2, 3):
        assert s2[j] == pytest.approx(s1[j] * 2**j, rel=1e-10)


def test_bump_derivatives_match_mpmath():
    bump = BumpSum(np.zeros((1, 1)), np.ones(1), 1.0)

    def g(r):
        u = (abs(r) - 1) / 1
        if u <= 0:
            return mpmath.mpf(1)
        if u >= 1:
            return mpmath.mpf(0)
        e = lambda t: mpmath.exp(-1 / t)
        return e(1 - u) / (e(u) + e(1 - u))

    x = 1.37
    j = bump.jets(np.array([[x]]), 3)
    for order in (0, 1, 2, 3):
        assert j.derivative(order)[0].ravel()[0] == pytest.approx(float(mpmath.diff(g, x, order)), rel=1e-10)


def test_single_critical_point_perturbation():
    f0, budget, mc = _setup("x1^2 + x2^2", 2)
    v = np.zeros(2)
    iso = isolate_criticals(PerturbedField(f0, v), budget, mc.psi1, 64)
    pert, f, mc2 = build_perturbation(f0, v, iso.certificates, mc)
    c1 = pert.bump_coeffs[0]
    assert c1 == mc.eps / (2 * pert.C1 * mc.k * 1)
    x1 = iso.certificates[0].point
    assert f(x1) - f0(x1) == pytest.approx(c1, rel=1e-12, abs=0)
    before, after = f0.jets(x1[None, :], 2), f.jets(x1[None, :], 2)
    assert np.max(np.abs(after.derivative(1) - before.derivative(1))) <= 1e-12
    assert np.max(np.abs(after.derivative(2) - before.derivative(2))) <= 1e-12
    assert pert.inner_radius == mc.d_sep / 4 and pert.outer_radius == mc.d_sep / 2
    assert pert.h_ck_norm_estimate <= mc.eps
    assert mc2.C1 == pert.C1 and mc2.psi2 < mc.psi2


def test_zero_critical_points_means_no_bumps():
    f0, budget, mc = _setup("x1 + x2", 2)
    v = np.array([0.01, 0.0])
    pert, f, _ = build_perturbation(f0, v, [], mc)
    assert len(pert.bump_coeffs) == 0
    x = np.array([0.3, 0.4])
    assert f(x) == f0(x) - v @ x


def test_equal_critical_values_are_separated_by_at_least_psi2():
    f0, budget, mc = _setup("(x1^2 - 0.25)^2 + x2^2", 2)
    v = np.zeros(2)
    iso = isolate_criticals(PerturbedField(f0, v), budget, mc.psi1, 64)
    minima = [c for c in iso.certificates if c.morse_index == 0]
    assert len(minima) == 2 and minima[0].value == minima[1].value
    pert, f, mc2 = build_perturbation(f0, v, iso.certificates, mc)
    vals = sorted(f(c.point) for c in iso.certificates)
    gaps = np.diff(vals)
    assert np.all(gaps >= mc2.psi2)
    assert mc2.psi2 == pytest.approx(mc.eps / (2 * mc.k * pert.C1 * len(vals) ** 2), rel=1e-14)


def test_overlapping_bumps_are_rejected():
    from qmorse.certify import CriticalCertificate
    from qmorse.morse import PerturbationError

    f0, budget, mc = _setup("x1^2 + x2^2", 2)
    mk = lambda p: CriticalCertificate(np.array(p), 1e-3, np.array([2.0, 2.0]), 2.0, 0, 0.0, 0.0)
    with pytest.raises(PerturbationError, match="overlap"):
        build_perturbation(f0, np.zeros(2), [mk([0.0, 0.0]), mk([mc.d_sep / 3, 0.0])], mc)


# --------------------------------------------------------------------------
# Hadamard form


def test_hadamard_of_sum_of_squares_is_identity():
    f = parse("x1^2 + x2^2", 2, 3)
    xs = ball_grid(2, 7, 0.9)
    B, _ = hadamard_forms(f, np.zeros(2), xs)
    assert np.allclose(B, np.eye(2), atol=1e-15)
    assert np.allclose(np.einsum("pi,pij,pj->p", xs, B, xs), np.sum(xs**2, axis=1), atol=1e-15)


def test_hadamard_of_quadratic_plus_cubic():
    f = parse("x1^2 + x1^3", 1, 3)
    B = hadamard_form(f, [0.0], [0.2])
    assert B[0, 0] == pytest.approx(1.2, abs=1e-15)
    assert B[0, 0] * 0.2**2 == pytest.approx(0.048, abs=1e-15)
    xs = np.linspace(-0.9, 0.9, 37)[:, None]
    Bs, _ = hadamard_forms(f, [0.0], xs)
    assert np.max(np.abs(Bs[:, 0, 0] - (1 + xs[:, 0]))) <= 1e-12


def test_hadamard_at_center_is_half_the_hessian():
    f = parse("sin(x1) * exp(x2) + x1 * x2^2", 2, 4)
    c = np.array([0.2, -0.1])
    H = f.jets(c[None, :], 2).derivative(2)[0]
    assert np.allclose(hadamard_form(f, c, c), H / 2, atol=1e-15)


def test_hadamard_matches_one_dimensional_oracle():
    f = parse("cos(2*x1) + x1^3 * exp(x1)", 1, 4)
    for x in (-0.7, -0.1, 0.4, 0.9):
        assert hadamard_form(f, [0.1], [x])[0, 0] == pytest.approx(hadamard_1d(f, 0.1, x), rel=1e-12, abs=1e-14)


def test_hadamard_identity_on_sampled_points():
    f = parse("sin(x1) * cos(x2) + 0.5*x1^2 + x2^2", 2, 4)
    c = np.array([0.05, 0.0])
    rng = np.random.default_rng(3)
    xs = c + 0.5 * rng.uniform(-1, 1, size=(200, 2)) / math.sqrt(2)
    B, _ = hadamard_forms(f, c, xs)
    h = xs - c
    fx, fc = f.jets(xs, 0).value, f(c)
    gc = f.jets(c[None, :], 1).derivative(1)[0]
    # with Df(c) != 0 the Taylor remainder carries the linear part
    resid = np.abs(fx - fc - h @ gc - np.einsum("pi,pij,pj->p", h, B, h))
    assert np.all(resid <= 1e-9 * (1 + np.abs(fx)))


def test_hadamard_across_bump_kinks():
    f0 = parse("x1^2 + x2^2", 2, 3)
    bumps = BumpSum(np.array([[0.0, 0.0], [0.3, 0.1]]), np.array([0.01, 0.02]), 0.05)
    f = PerturbedField(f0, np.zeros(2), bumps)
    xs = np.array([[0.2, 0.0], [0.4, 0.2], [0.35, 0.15], [-0.08, 0.0], [0.0, 0.6]])
    B, _ = hadamard_forms(f, np.zeros(2), xs)
    fx, f0c = f.jets(xs, 0).value, f(np.zeros(2))
    resid = np.abs(fx - f0c - np.einsum("pi,pij,pj->p", xs, B, xs))
    assert np.all(resid <= 1e-12)


# --------------------------------------------------------------------------
# charts


def test_chart_of_pure_saddle_is_identity():
    f = parse("x1^2 - x2^2", 2, 3)
    ch = morse_chart(f, np.zeros(2), radius=0.3)
    assert np.array_equal(ch.ctx.Q0, np.eye(2))
    assert ch.l == 1
    xs = ball_grid(2, 9, 0.3)
    assert np.allclose(ch(xs), xs, atol=1e-15)
    assert ch.residual_sup <= 1e-15
    assert np.array_equal(ch(np.zeros((1, 2))), np.zeros((1, 2)))


def test_chart_of_quadratic_plus_cubic_is_closed_form():
    f = parse("x1^2 + x1^3", 1, 3)
    ch = morse_chart(f, np.zeros(1), radius=0.4)
    xs = np.linspace(-0.4, 0.4, 41)[:, None]
    assert np.allclose(ch(xs)[:, 0], xs[:, 0] * np.sqrt(1 + xs[:, 0]), atol=1e-14)
    y = ch(np.array([[0.2]]))[0, 0]
    assert abs(0.048 - y**2) <= 1e-15
    assert ch.residual_sup <= 1e-12


def test_chart_with_cubic_term_in_two_dimensions():
    f0, budget, mc = _setup("x1^2 + x2^2 + x1^3", 2)
    iso = isolate_criticals(f0, budget, mc.psi1, 64)
    origin = [c for c in iso.certificates if np.linalg.norm(c.point) < 1e-6][0]
    ch = morse_chart(f0, origin, mc)
    assert ch.radius == mc.psi3
    assert ch.test_points >= 1000
    assert ch.residual_sup <= 1e-8
    assert ch.residual_sup <= residual_tolerance(mc.K)


def test_chart_radius_shrinks_outside_the_congruence_neighborhood():
    f = parse("x1^2 + x1^3", 1, 3)
    ch = morse_chart(f, np.zeros(1), radius=0.9)
    # B(x) = 1 + x must stay within 1/2 of A = 1
    assert ch.requested_radius == 0.9
    assert 0.4 < ch.radius <= 0.5


def test_chart_of_degenerate_point_raises():
    with pytest.raises(DegenerateMatrixError):
        morse_chart(parse("x1^4", 1, 4), np.zeros(1), radius=0.1)


def test_chart_norm_estimate_is_reported():
    f = parse("x1^2 + x1^3", 1, 3)
    ch = morse_chart(f, np.zeros(1), radius=0.2)
    # phi'(x) = (1 + 3x/2) / sqrt(1 + x) is about 1 near 0
    assert len(ch.chart_norms) == 2
    assert ch.chart_norms[0] == pytest.approx(1.0, abs=0.1)


# --------------------------------------------------------------------------
# verification and pipeline


def test_pipeline_on_convex_quadratic_passes_everything():
    a = run_analysis(parse("x1^2 + x2^2", 2, 3), 0.1, 64)
    assert a.passed
    assert len(a.isolation.certificates) == 1
    assert a.perturbation.h_ck_norm_estimate <= 0.1


def test_cubic_with_positive_shift_has_two_critical_points():
    f0, budget, mc = _setup("x1^3", 1)
    v = np.array([0.03])
    f1 = PerturbedField(f0, v)
    iso1 = isolate_criticals(f1, budget, mc.psi1, 64)
    pert, f, mc2 = build_perturbation(f0, v, iso1.certificates, mc)
    iso = isolate_criticals(f, budget, mc2.psi1, 64)
    pts = sorted(c.point[0] for c in iso.certificates)
    assert pts == pytest.approx([-math.sqrt(0.01), math.sqrt(0.01)], abs=1e-10)
    charts = [morse_chart(f, c, mc2) for c in iso.certificates]
    report = verify_theorem(f, iso, mc2, 64, charts)
    for item in ("i", "ii", "v"):
        assert report.items[item].passed
    assert report.passed


def test_degenerate_input_fails_item_one_with_witness():
    f0, budget, mc = _setup("x1^4", 1, k=4)
    f = PerturbedField(f0, np.zeros(1))
    iso = isolate_criticals(f, budget, mc.psi1, 64)
    report = verify_theorem(f, iso, mc, 64)
    assert not report.items["i"].passed
    witness = report.items["i"].witnesses[0]["point"]
    assert abs(witness[0]) < 1e-3
    assert "i" in report.failed()


def test_localization_item_flags_unexplained_small_gradients():
    f0, budget, mc = _setup("x1^2 + x2^2", 2)
    iso = isolate_criticals(f0, budget, mc.psi1, 65)
    iso.certificates.clear()
    report = verify_theorem(f0, iso, mc, 65)
    assert not report.items["v"].passed
    assert report.items["v"].witnesses[0]["point"] == [0.0, 0.0]


def test_pipeline_rejects_constant_functions():
    with pytest.raises(AnalysisError):
        run_analysis(parse("1.5", 2, 3), 0.1, 16)


def test_pipeline_perturbation_budget_and_plateau():
    f0 = parse("x1^4 + x2^2", 2, 4)
    a = run_analysis(f0, 0.1, 64)
    assert a.passed
    p = a.perturbation
    assert p.h1_ck_norm + p.lambda_ck_norm <= 0.1
    assert np.linalg.norm(p.v) < 0.05
    assert p.plateau_max_change <= 1e-12
    for c in a.isolation.certificates:
        assert a.field.jets(c.point[None, :], 1).derivative(1)[0] == pytest.approx([0, 0], abs=1e-10)


def test_bump_flat_zone_is_below_double_resolution():
    assert math.exp(-1 / U_FLAT) < 1e-200
