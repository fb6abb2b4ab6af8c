import math

import numpy as np
import pytest

from cosymplectic import quantum, threebody
from cosymplectic.core import parse_field
from cosymplectic.dynamics import IntegratorConfig, integrate, monitor

from conftest import two_level

OSC = parse_field("(q^2 + p^2)/2", 1)


def exact(tau, x0=(0.0, 1.0, 0.0)):
    t, q, p = x0
    return np.array([t + tau, q * math.cos(tau) + p * math.sin(tau), -q * math.sin(tau) + p * math.cos(tau)])


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk4")
    with pytest.raises(ValueError):
        IntegratorConfig(atol=0)
    with pytest.raises(ValueError):
        integrate("evolution", OSC, [0, 1, 0], 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate("flow", OSC, [0, 1, 0], 0.0, 1.0)


def test_rk4_closes_the_circle():
    traj = integrate("evolution", OSC, [0, 1, 0], 0, 2 * math.pi, IntegratorConfig("rk4", step=1e-3))
    assert traj.completed
    assert np.max(np.abs(traj.states[-1] - [2 * math.pi, 1, 0])) <= 1e-9


def test_zero_field_moves_only_time():
    traj = integrate("evolution", parse_field("0", 1), [0.5, 1.0, -2.0], 0, 3)
    assert np.all(traj.states[:, 1:] == [1.0, -2.0])
    assert traj.states[-1, 0] == 3.5


def test_hamiltonian_kind_keeps_time_fixed():
    h = parse_field("(1 + t^2) * (q^2 + p^2) / 2", 1)
    traj = integrate("hamiltonian", h, [0.7, 1, 0], 0, 4)
    assert np.all(traj.states[:, 0] == 0.7)


def test_monitor_examples():
    h = parse_field("q^4/4 + p^2/2", 1)
    traj = integrate("hamiltonian", h, [0, 1, 0.3], 0, 10)
    t_field = parse_field("t", 1)
    mon = monitor(traj, [h, t_field])
    assert mon.drift[0] <= 1e-9
    assert mon.drift[1] == 0.0
    _, h2 = two_level((0, 0.5, 0, 1), quantum.Envelope("sine"))
    traj = integrate("evolution", h2, [0, 0.6, 0.1, 0.3, -0.5], 0, 10)
    assert monitor(traj, quantum.u1_action(2).J).drift[0] <= 1e-8


def test_rk4_order():
    steps = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = []
    for h in steps:
        traj = integrate("evolution", OSC, [0, 1, 0], 0, 2.0, IntegratorConfig("rk4", step=float(h)))
        errs.append(np.max(np.abs(traj.states[-1] - exact(2.0))))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert 3.8 <= slope <= 4.2


@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10])
def test_rk45_error_within_tolerance(tol):
    traj = integrate("evolution", OSC, [0, 1, 0], 0, 2 * math.pi, IntegratorConfig(atol=tol, rtol=tol))
    assert np.max(np.abs(traj.states[-1] - exact(2 * math.pi))) <= 100 * tol


def test_t_eval_records_requested_points():
    times = [0.5, 1.0, 2.5]
    traj = integrate("evolution", OSC, [0, 1, 0], 0, 3, t_eval=times)
    assert list(traj.times) == [0, 0.5, 1.0, 2.5, 3.0]
    for s, x in zip(traj.times, traj.states):
        assert np.max(np.abs(x - exact(s))) <= 1e-8


def test_domain_error_terminates():
    params = threebody.ThreeBodyParams(0.99)
    h = threebody.hamiltonian(params)
    # head straight at the light primary at (r, phi) = (0.99, 0) in the rotating sense
    traj = integrate("evolution", h, [0, 0.99, 0, 0, 0], 0, 1, guard=threebody.separation_guard(params))
    assert traj.termination == "domain_error"
    assert np.array_equal(traj.terminal_point, [0, 0.99, 0, 0, 0])
    assert len(traj.times) == 1


def test_step_budget():
    traj = integrate("evolution", OSC, [0, 1, 0], 0, 10, IntegratorConfig("rk4", step=1e-3, max_steps=100))
    assert traj.termination == "max_steps"


def test_csv_output_is_full_precision():
    traj = integrate("evolution", OSC, [0, 1, 0], 0, 1, IntegratorConfig("rk4", step=0.5))
    lines = traj.csv_text().splitlines()
    assert lines[0] == "s,t,q1,p1"
    assert len(lines) == 4
    row = [float(v) for v in lines[-1].split(",")]
    assert row[2] == traj.states[-1][1]


def test_drift_improves_with_tolerance():
    _, h = two_level((0, 0, 0, 1), quantum.Envelope("sine"))
    x0 = [0, 0.6, 0.3, 0.2, -0.7]
    J = quantum.u1_action(2).J
    d = [monitor(integrate("evolution", h, x0, 0, 10, IntegratorConfig(atol=tol, rtol=tol)), J).drift[0]
         for tol in (1e-9, 1e-10)]
    assert d[1] <= 1e-8
    assert d[0] >= 5 * d[1]
