"""Integration of Hamiltonian, gradient and evolution fields."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import FIELD_KINDS, DomainError, ScalarField

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    step: float | None = None  # fixed step for rk4, initial step for rk45
    atol: float = 1e-10
    rtol: float = 1e-10
    max_step: float = math.inf
    max_steps: int = 2_000_000
    min_step: float = 1e-14

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and (self.step is None or not self.step > 0):
            raise ValueError("rk4 needs a positive step")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not (self.atol > 0 and self.rtol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    kind: str
    termination: str = "completed"  # completed | domain_error | step_underflow | max_steps
    terminal_point: np.ndarray | None = None
    message: str = ""
    labels: Sequence[str] = field(default_factory=tuple)

    @property
    def completed(self) -> bool:
        return self.termination == "completed"

    def csv_text(self) -> str:
        buf = io.StringIO()
        labels = list(self.labels) or ["t"] + [f"x{i}" for i in range(1, self.states.shape[1])]
        buf.write(",".join(["s"] + labels) + "\n")
        for s, x in zip(self.times, self.states):
            buf.write(",".join(format(float(v), ".17g") for v in (s, *x)) + "\n")
        return buf.getvalue()


def _rk4_step(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def _initial_step(rhs, y0, f0, span, cfg):
    scale = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return float(min(h, span, cfg.max_step))


def integrate(kind: str, f: ScalarField, x0, t0: float, t1: float, cfg: IntegratorConfig | None = None,
              guard: Callable | None = None, t_eval: Sequence[float] | None = None) -> Trajectory:
    """Integrate dx/ds = field(x) from s = t0 to s = t1.

    ``kind`` is ``hamiltonian``, ``gradient`` or ``evolution``. For the evolution
    field dt/ds = 1, so when ``x0[0] == t0`` the parameter is the time coordinate.
    ``guard(x)`` may raise :class:`DomainError` to stop the run (collision checks).
    With ``t_eval`` only those parameter values are recorded (steps are clipped
    to land on them); otherwise every accepted step is recorded.
    """
    cfg = cfg or IntegratorConfig()
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    vf = FIELD_KINDS[kind]
    y = f.chart.check(np.array(x0, dtype=float)).copy()
    clock = kind == "evolution"
    time_offset = y[0] - t0

    def rhs(state):
        v = vf(f, state)
        if not np.all(np.isfinite(v)):
            raise DomainError("non-finite field value", state)
        return v

    targets = None
    if t_eval is not None:
        targets = sorted(float(s) for s in t_eval if t0 < s <= t1)
        if not targets or targets[-1] < t1:
            targets.append(t1)
    times, states = [t0], [y.copy()]
    out = Trajectory(np.empty(0), np.empty((0, y.size)), kind, labels=f.chart.labels)

    def record(s, state):
        if targets is None or (k_target < len(targets) and s == targets[k_target]):
            times.append(s)
            states.append(state.copy())

    def finish(termination="completed", point=None, message=""):
        out.times = np.array(times)
        out.states = np.array(states)
        out.termination = termination
        out.terminal_point = None if point is None else np.array(point, dtype=float)
        out.message = message
        return out

    k_target = 0
    s = t0
    try:
        if guard is not None:
            guard(y)
        if cfg.method == "rk4":
            n_steps = 0
            while s < t1:
                stop = targets[k_target] if targets is not None else t1
                h = min(cfg.step, stop - s)
                y = _rk4_step(rhs, y, h)
                s_new = s + h if stop - s > cfg.step else stop
                if clock:
                    y[0] = s_new + time_offset
                if guard is not None:
                    guard(y)
                s = s_new
                record(s, y)
                if targets is not None and s == targets[k_target]:
                    k_target += 1
                n_steps += 1
                if n_steps > cfg.max_steps:
                    return finish("max_steps", y, "step budget exhausted")
            return finish()

        f0 = rhs(y)
        h = cfg.step if cfg.step is not None else _initial_step(rhs, y, f0, t1 - t0, cfg)
        err_prev = 1e-4
        rejected = False
        n_steps = 0
        while s < t1:
            stop = targets[k_target] if targets is not None else t1
            h = min(h, cfg.max_step)
            clipped = s + h >= stop
            if clipped:
                h = stop - s
            if clipped and h < cfg.min_step * max(1.0, abs(stop)):
                # remaining gap is rounding noise: land on the target without a step
                s = stop
                if clock:
                    y[0] = s + time_offset
                record(s, y)
                if targets is not None:
                    k_target += 1
                continue
            if h < cfg.min_step:
                return finish("step_underflow", y, f"step {h:.3e} below {cfg.min_step:.0e}")
            k = [f0]
            for i in range(1, 7):
                yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
                k.append(rhs(yi))
            y_new = y + h * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
            err_vec = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            n_steps += 1
            if n_steps > cfg.max_steps:
                return finish("max_steps", y, "step budget exhausted")
            if err <= 1.0:
                s_new = stop if clipped else s + h
                if clock:
                    y_new[0] = s_new + time_offset
                if guard is not None:
                    guard(y_new)
                # FSAL reuse; the clock reset above moves t by at most an ulp
                y, s, f0 = y_new, s_new, k[6]
                record(s, y)
                if targets is not None and clipped:
                    k_target += 1
                fac = 0.9 * max(err, 1e-10) ** (-0.7 / 5) * err_prev ** (0.4 / 5)
                fac = min(5.0, max(0.2, fac))
                if rejected:
                    fac = min(fac, 1.0)
                h = h * fac
                err_prev = max(err, 1e-4)
                rejected = False
            else:
                h = h * max(0.2, 0.9 * err ** (-1 / 5))
                rejected = True
        return finish()
    except DomainError as exc:
        point = exc.point if exc.point is not None else y
        return finish("domain_error", point, str(exc))


@dataclass
class MonitorResult:
    names: list
    values: np.ndarray  # (N, m)
    series: np.ndarray  # |f(x_k) - f(x_0)|
    drift: np.ndarray  # max over k


def monitor(traj: Trajectory, fields: Sequence[ScalarField]) -> MonitorResult:
    vals = np.array([[f(x) for f in fields] for x in traj.states]).reshape(len(traj.states), len(fields))
    series = np.abs(vals - vals[0]) if len(vals) else vals
    drift = series.max(axis=0) if len(vals) else np.zeros(len(fields))
    return MonitorResult([f.name for f in fields], vals, series, drift)
