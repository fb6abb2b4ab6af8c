import math

import numpy as np
import pytest
from scipy.linalg import expm

from cosymplectic import quantum
from cosymplectic.core import evolution_field, hamiltonian_field, lie_bracket
from cosymplectic.dynamics import IntegratorConfig, integrate
from cosymplectic.equilibria import find_rep
from cosymplectic.stability import classify, spectral_scan
from cosymplectic.symmetry import verify_momentum_map, verify_reduction

from conftest import random_points, two_level

TIGHT = IntegratorConfig(atol=1e-12, rtol=1e-12)


def test_envelopes():
    assert quantum.Envelope()(3.0) == 1.0
    assert quantum.Envelope("sine")(1.0) == pytest.approx(1 + 0.5 * math.sin(1.0))
    assert quantum.Envelope("exp_decay", 0.5, 2.0)(1.0) == pytest.approx(1 + 0.5 * math.exp(-2.0))
    with pytest.raises(ValueError):
        quantum.Envelope("square")


def test_path_validation():
    with pytest.raises(ValueError):
        quantum.HermitianPath.constant(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        quantum.HermitianPath.two_level((1, 2, 3))


def test_observable_fields(rng):
    h0, h1, h2, h3 = quantum.pauli_fields()
    for x in random_points(rng, 5, 100):
        _, q1, q2, p1, p2 = x
        assert h0(x) == pytest.approx(0.5 * (q1 ** 2 + p1 ** 2 + q2 ** 2 + p2 ** 2), abs=1e-14)
        assert h3(x) == pytest.approx(0.25 * (p1 ** 2 + q1 ** 2 - p2 ** 2 - q2 ** 2), abs=1e-14)
        assert abs(h0(x) ** 2 - 4 * (h1(x) ** 2 + h2(x) ** 2 + h3(x) ** 2)) <= 1e-10


def test_chart_round_trip():
    psi = np.array([0.3 - 0.2j, -1.1 + 0.5j])
    x = quantum.to_chart(psi, 2.0)
    assert x[0] == 2.0 and np.array_equal(quantum.from_chart(x), psi)


def test_evolution_field_matches_real_linear_system(rng):
    # reference matrix acts on the interleaved order (q1, p1, q2, p2)
    interleave = [0, 2, 1, 3]
    for _ in range(5):
        B0, B1, B2, B3 = rng.normal(size=4)
        env = quantum.Envelope("sine")
        _, h = two_level((B0, B1, B2, B3), env)
        M = 0.5 * np.array([[0, 2 * B0 + B3, -B2, B1], [-2 * B0 - B3, 0, -B1, -B2],
                            [B2, B1, 0, 2 * B0 - B3], [-B1, B2, -2 * B0 + B3, 0]])
        for x in random_points(rng, 5, 10):
            E = evolution_field(h, x)
            ref = env(x[0]) * M @ x[1:][interleave]
            assert E[0] == 1.0
            assert np.max(np.abs(E[1:][interleave] - ref)) <= 1e-12


def test_schrodinger_flow_matches_matrix_exponential():
    B = (0.2, 0.7, -0.4, 1.0)
    path, h = two_level(B)
    psi0 = np.array([0.6 + 0.1j, -0.3 + 0.5j])
    traj = integrate("evolution", h, quantum.to_chart(psi0), 0, 4, TIGHT, t_eval=[1, 2, 4])
    for t, x in zip(traj.times, traj.states):
        ref = expm(-1j * path(0.0) * t) @ psi0
        assert np.max(np.abs(quantum.from_chart(x) - ref)) <= 1e-9
    # psi(0) = (1, 0) under S3 picks up the phase e^{-it/2}
    path, h = two_level()
    traj = integrate("evolution", h, quantum.to_chart([1, 0]), 0, 3, TIGHT)
    assert abs(quantum.from_chart(traj.states[-1])[0] - np.exp(-1.5j)) <= 1e-9


def test_norm_and_inner_products_are_conserved():
    _, h = two_level((0.1, 0.5, 0.3, 1.0), quantum.Envelope("sine"))
    a0, b0 = np.array([0.8, 0.3j]), np.array([0.2 - 0.4j, 0.9])
    ta = integrate("evolution", h, quantum.to_chart(a0), 0, 10, TIGHT, t_eval=np.linspace(1, 10, 10))
    tb = integrate("evolution", h, quantum.to_chart(b0), 0, 10, TIGHT, t_eval=np.linspace(1, 10, 10))
    J = quantum.u1_action(2).J[0]
    norms = [J(x) for x in ta.states]
    assert max(norms) - min(norms) <= 1e-8
    ip0 = np.vdot(a0, b0)
    for xa, xb in zip(ta.states, tb.states):
        assert abs(np.vdot(quantum.from_chart(xa), quantum.from_chart(xb)) - ip0) <= 1e-8


def test_pauli_field_commutators(rng):
    h = quantum.pauli_fields()
    X = [lambda x, f=f: hamiltonian_field(f, x) for f in h]
    for x in random_points(rng, 5, 5):
        for i, j, k in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
            assert np.max(np.abs(lie_bracket(X[i], X[j], x) + X[k](x))) <= 1e-6
        assert np.max(np.abs(lie_bracket(X[0], X[1], x))) <= 1e-6


def test_u1_action(rng):
    J = quantum.u1_action(2)
    h0 = quantum.pauli_fields()[0]
    pts = random_points(rng, 5, 20)
    assert all(J.J[0](x) == pytest.approx(h0(x), abs=1e-15) for x in pts)
    for _ in range(5):
        _, h = two_level(tuple(rng.normal(size=4)), quantum.Envelope("sine"))
        assert verify_momentum_map(J, h, pts).details["worst"]["invariance"] <= 1e-10


def test_hopf_chart_examples():
    mu = 0.5
    chart = quantum.hopf_chart(mu)
    J = quantum.u1_action(2)
    ws = [[0.0, phi, 0.7] for phi in np.linspace(0.1, math.pi / 2 - 0.1, 11)]
    assert verify_reduction(chart, J, ws).passed
    for w in ws:
        for s in (0.0, 1.1, -2.0):
            assert abs(J.momentum(chart.point(w, s))[0] - mu) <= 1e-12
            assert np.allclose(chart.ambient_to_reduced(chart.point(w, s)), w, atol=1e-12)
    with pytest.raises(ValueError):
        quantum.hopf_chart(0.0)


def test_eigenvector_certification_examples():
    for env in (quantum.Envelope(), quantum.Envelope("sine"), quantum.Envelope("exp_decay")):
        path = quantum.HermitianPath.two_level((0, 0, 0, 1), env)
        cert = quantum.rep_eigenvector_certify(path, np.linspace(0, 10, 9), crosscheck=True)
        rays = sorted(tuple(np.round(np.abs(v), 12)) for v in cert.rays)
        assert rays == [(0.0, 1.0), (1.0, 0.0)]
        assert all(c <= 1e-8 for c in cert.crosscheck)
    rotating = quantum.HermitianPath([(math.sin, quantum.SPIN[1]), (math.cos, quantum.SPIN[3])])
    cert = quantum.rep_eigenvector_certify(rotating, np.linspace(0, 3, 9))
    assert cert.rays == [] and len(cert.rejected) == 2
    diag = quantum.HermitianPath.constant(np.diag([1.0, 2.0, 3.0]), quantum.Envelope("sine"))
    cert = quantum.rep_eigenvector_certify(diag, np.linspace(0, 5, 9))
    assert len(cert.rays) == 3


def test_degenerate_spectrum_is_flagged():
    path = quantum.HermitianPath.two_level((1, 0, 0, 0))
    cert = quantum.rep_eigenvector_certify(path, [0.0, 1.0])
    assert cert.rays == [] and cert.flags


def test_hermitian_eig_phase_convention(rng):
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    A = A + A.conj().T
    vals, vecs = quantum.hermitian_eig(A)
    assert np.allclose(np.sort(vals), np.linalg.eigvalsh(A), atol=1e-10)
    for lam, v in zip(vals, vecs):
        assert np.linalg.norm(A @ v - lam * v) <= 1e-9
        first = v[np.argmax(np.abs(v) > 1e-12)]
        assert abs(first.imag) <= 1e-12 and first.real > 0


def _stationarity(B, z0, horizon=10.0):
    _, h = two_level(B, quantum.Envelope("sine"))
    J = quantum.u1_action(2)
    cand = find_rep(h, J, z0)
    traj = integrate("evolution", h, cand.point(0.0), 0, horizon, TIGHT, t_eval=np.linspace(0.5, horizon, 20))
    chart = quantum.hopf_chart(J.momentum(cand.point(0))[0])
    red = np.array([chart.ambient_to_reduced(x)[1:] for x in traj.states])
    bloch = np.array([quantum.bloch_vector(x) for x in traj.states])
    return red, bloch


def test_projection_stationarity_at_pole():
    red, bloch = _stationarity((0, 0, 0, 1), [1.0, 0, 0, 0])
    assert np.ptp(red[:, 0]) <= 1e-6  # phi; theta is undefined at the pole
    assert np.max(np.ptp(bloch, axis=0)) <= 1e-6


def test_projection_stationarity_off_pole():
    red, bloch = _stationarity((0, 1, 0, 0), [0.8, 0.6, 0, 0])
    assert np.max(np.ptp(red, axis=0)) <= 1e-6
    assert np.max(np.ptp(bloch, axis=0)) <= 1e-6


def test_two_level_stability_is_indeterminate():
    _, h = two_level()
    J = quantum.u1_action(2)
    grid = np.linspace(0, 10, 11)
    cand = find_rep(h, J, [1.0, 0, 0, 0], times=grid)
    assert classify(spectral_scan(h, J, cand, 0.5, grid, samples=50)).kind == "indeterminate"
