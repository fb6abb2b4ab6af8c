import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from cosymplectic import threebody as tb
from cosymplectic.core import (DomainError, evolution_field, gradient_field, hamiltonian_field,
                               lie_derivative_bivector)
from cosymplectic.dynamics import IntegratorConfig, integrate

P = tb.ThreeBodyParams(0.99)


def _random_states(rng, params, count):
    """States with r in [0.3, 2] kept well away from both primaries."""
    out = []
    while len(out) < count:
        x = np.array([rng.uniform(0, 3), rng.uniform(0.3, 2.0), rng.uniform(-math.pi, math.pi),
                      rng.normal(), rng.normal()])
        d1, d2 = tb._distances_sq(params, x[1], x[2] - params.varpi * x[0])
        if min(d1, d2) > 0.05:
            out.append(x)
    return out


def _explicit_rhs(params, x):
    """Equations of motion written out by hand."""
    t, r, phi, pr, pphi = x
    mu, r1, r2 = params.mu, params.r1, params.r2
    a = phi - params.varpi * t
    c, s = math.cos(a), math.sin(a)
    d1 = math.sqrt(r * r + r1 * r1 + 2 * r * r1 * c)
    d2 = math.sqrt(r * r + r2 * r2 - 2 * r * r2 * c)
    return np.array([
        pr,
        pphi / r ** 2,
        pphi ** 2 / r ** 3 - mu * (r + r1 * c) / d1 ** 3 - (1 - mu) * (r - r2 * c) / d2 ** 3,
        r1 * r2 * r * s * (1 / d1 ** 3 - 1 / d2 ** 3),
    ])


def test_params_validation():
    for bad in (0.5, 1.0, 0.3, float("nan")):
        with pytest.raises(ValueError):
            tb.ThreeBodyParams(bad)
    with pytest.raises(ValueError):
        tb.ThreeBodyParams(0.9, 2)
    assert P.r1 == pytest.approx(0.01) and P.r2 == 0.99


@pytest.mark.parametrize("varpi", [1, -1])
def test_hamilton_equations_match_explicit_form(rng, varpi):
    params = tb.ThreeBodyParams(0.9, varpi)
    h = tb.hamiltonian(params)
    for x in _random_states(rng, params, 50):
        ref = _explicit_rhs(params, x)
        assert np.max(np.abs(hamiltonian_field(h, x)[1:] - ref)) <= 1e-12
        assert np.max(np.abs(evolution_field(h, x) - np.concatenate([[1.0], ref]))) <= 1e-12


def test_kepler_limit():
    params = tb.ThreeBodyParams(1 - 1e-12)
    h = tb.hamiltonian(params)
    for r in np.linspace(0.2, 0.6, 9):
        for phi in (0.0, 1.0, 2.5):
            assert abs(h([0.3, r, phi, 0.0, 0.0]) + 1 / r) <= 1e-10


def test_collision_raises():
    h = tb.hamiltonian(P)
    with pytest.raises(DomainError):
        h([0.0, P.r2, 0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        h([0.0, -0.5, 0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        tb.separation_guard(P)([0.0, P.r1, math.pi, 0.0, 0.0])


def test_upsilon_gradient_and_bivector_invariance(rng):
    for varpi in (1, -1):
        params = tb.ThreeBodyParams(0.95, varpi)
        ups = tb.upsilon(params)
        Y = lambda x: gradient_field(ups, x)  # noqa: E731
        for x in _random_states(rng, params, 20):
            assert np.array_equal(Y(x), tb.rotation_generator(params))
            assert ups.gradient(x)[0] == 1.0
            assert np.max(np.abs(lie_derivative_bivector(Y, x))) <= 1e-6


def test_reduction_formula(rng):
    rep = tb.reduction_formula_residual(P, _random_states(rng, P, 50))
    assert rep.passed and rep.max_residual <= 1e-10
    assert rep.details["integrand_spread"] <= 1e-12


def test_pushforward_matches_reduced_field(rng):
    h = tb.hamiltonian(P)
    red = tb.reduce(P)
    for x in _random_states(rng, P, 50):
        w = red.project(x)
        rhs = _explicit_rhs(P, x)
        expected = np.array([rhs[0], rhs[1] - P.varpi, rhs[2], rhs[3]])
        push = red.pushforward(h, x)
        assert np.max(np.abs(push - expected)) <= 1e-10
        assert np.max(np.abs(red.field(w) - push)) <= 1e-10


def test_reduced_hamiltonian_ignores_time(rng):
    red = tb.reduce(P)
    for x in _random_states(rng, P, 10):
        assert red.k.gradient(x)[0] == 0.0
        y = x.copy()
        y[0] += 7.0
        assert red.k(x) == red.k(y)


def test_quintic_triple_root_at_unit_mass():
    for sign in (1, -1):
        c = tb.quintic_coefficients(1.0, sign)
        assert abs(np.polyval(c, 1.0)) <= 1e-15
        assert np.polyval(tb.quintic_coefficients(0.99, sign), 0.0) < 0
    with pytest.raises(ValueError):
        tb.quintic_coefficients(0.9, 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.51, 0.999), st.sampled_from([1, -1]))
def test_quintic_matches_cleared_force_balance(r, mu, sign):
    direct = r * (r + 1 - mu) ** 2 * (mu - r) ** 2 - mu * (mu - r) ** 2 + sign * (1 - mu) * (r + 1 - mu) ** 2
    assert abs(np.polyval(tb.quintic_coefficients(mu, sign), r) - direct) <= 1e-10


def test_collinear_points_at_reference_mass():
    pts = tb.solve_collinear(P)
    approx = tb.hill_approximations(P.mu)
    assert pts["L1"].r == pytest.approx(0.848078712976, abs=1e-10)
    assert pts["L2"].r == pytest.approx(1.146765042124, abs=1e-10)
    for label in ("L1", "L2", "L3"):
        p = pts[label]
        assert p.residual_quintic <= 1e-12
        assert p.p_r == 0.0 and p.p_phi == pytest.approx(P.varpi * p.r ** 2, abs=1e-12)
    assert abs(pts["L1"].r - approx["L1"]) <= 0.02 and abs(pts["L2"].r - approx["L2"]) <= 0.02
    assert abs(pts["L3"].r - (1 + 5 * 0.01 / 12)) <= 2e-3
    assert pts["L3"].offset == math.pi and pts["L1"].offset == 0.0


def test_positive_root_scan_reports_trace():
    roots, trace = tb.positive_roots([1.0, 0.0, -2.0])
    assert roots == [pytest.approx(math.sqrt(2), abs=1e-13)]
    assert trace["sign_changes"] == 1 and trace["within_tol"]
    roots, trace = tb.positive_roots([1.0, 0.0, 1.0])
    assert roots == [] and trace["sign_changes"] == 0


def test_l3_minus_branch_has_no_positive_root():
    for mu in (0.6, 0.9, 0.99, 0.9999):
        roots, trace = tb.positive_roots(tb.l3_coefficients(mu, -1))
        assert roots == [] and trace["interval"] == (1e-3, 3.0)


def test_triangular_points():
    pts = tb.solve_triangular(P)
    assert pts["L4"].r == pytest.approx(math.sqrt(0.9901), abs=1e-12)
    for p in pts.values():
        d1, d2 = tb._distances_sq(P, p.r, p.offset)
        assert abs(math.sqrt(d1) - 1) <= 1e-12 and abs(math.sqrt(d2) - 1) <= 1e-12
    assert pts["L4"].offset == -pts["L5"].offset
    assert abs(pts["L4"].residual_field - pts["L5"].residual_field) <= 1e-12
    near = tb.solve_triangular(tb.ThreeBodyParams(1 - 1e-9), with_field_residual=False)
    assert near["L4"].r == pytest.approx(1.0, abs=1e-8)
    assert near["L4"].offset == pytest.approx(math.pi / 3, abs=1e-8)


@pytest.mark.parametrize("varpi", [1, -1])
def test_gradient_rep_residuals(varpi):
    params = tb.ThreeBodyParams(0.99, varpi)
    for p in tb.lagrange_points(params):
        rep = tb.gradient_rep_residual(params, p)
        assert rep.max_residual <= 1e-8, p.label
        assert tb.reduced_equilibrium_residual(params, p) <= 1e-8
        # the literal gradient condition differs by the Reeb component of h
        assert rep.details["literal"] == pytest.approx(1.0, abs=1e-8)
        bumped = tb.LagrangePoint(p.label, p.r + 1e-3, p.mode, p.offset, p.varpi)
        assert tb.gradient_rep_residual(params, bumped).max_residual > 1e-5


def test_lagrange_csv_layout():
    text = tb.lagrange_csv(tb.lagrange_points(P))
    lines = text.splitlines()
    assert lines[0] == "label,r,delta_or_k,p_phi,residual_field,residual_quintic"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["L1", "L2", "L3", "L4", "L5"]
    assert float(lines[3].split(",")[2]) == 1.0


def test_hill_report():
    approx = tb.hill_approximations(0.99)
    assert approx["hill_offset"] == pytest.approx(0.149380, abs=5e-7)
    assert approx["L1"] == pytest.approx(1 - 0.149380, abs=5e-7)
    rep = tb.hill_and_l3_approx(0.99)
    assert max(rep.l1_ratio) <= 1 and max(rep.l2_ratio) <= 1
    e = rep.l3_error
    assert e[0] <= 2e-3 and e[0] / e[1] >= 8 and e[1] / e[2] >= 8
    tiny = tb.hill_approximations(1 - 1e-12)
    assert abs(tiny["L1"] - 1) < 1e-3 and abs(tiny["L3"] - 1) < 1e-11


def test_ambient_and_reduced_trajectories_agree(rng):
    h = tb.hamiltonian(P)
    red = tb.reduce(P)
    cfg = IntegratorConfig(atol=1e-12, rtol=1e-12)
    grid = np.linspace(0, 2, 21)
    for x0 in _random_states(rng, P, 3):
        x0[0] = 0.0
        x0[3:] *= 0.3
        amb = integrate("evolution", h, x0, 0, 2, cfg, t_eval=grid)
        sol = solve_ivp(lambda _, w: red.field(w), (0, 2), red.project(x0), method="DOP853",
                        t_eval=amb.times, rtol=1e-12, atol=1e-12)
        proj = np.array([red.project(x) for x in amb.states])
        assert np.max(np.abs(proj - sol.y.T)) <= 1e-6
        k = [red.k_value(w) for w in proj]
        assert max(k) - min(k) <= 1e-8
