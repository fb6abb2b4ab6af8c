"""Command-line front end: ``verify``, ``integrate``, ``rep`` and ``stability``.

Configuration files are flat ``key = value`` text with ``#`` comments and dotted
keys for nested settings, e.g.::

    system = two_level
    B = 0, 0, 0, 1
    envelope = sine
    integrator.rtol = 1e-10
"""
from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets, quantum, threebody
from .core import (DomainError, ExpressionError, ScalarField, gradient_field,
                   lie_derivative_bivector, parse_field, quadratic_field)
from .dynamics import IntegratorConfig, integrate, monitor
from .equilibria import RepSearchError, chebyshev_grid, find_rep
from .stability import DEFAULT_SEED, RegularityError, classify, spectral_scan
from .symmetry import (LieAlgebraSpec, SymmetryAction, cocycle_form, tangency_check, verify_momentum_map,
                       verify_reduction)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

SYSTEMS = ("harmonic", "two_level", "n_level", "three_body", "custom_polynomial")

COMMON_KEYS = {
    "system", "t0", "t1", "x0", "field", "action", "momentum", "samples",
    "integrator.method", "integrator.step", "integrator.atol", "integrator.rtol",
    "integrator.max_step", "integrator.max_steps",
    "rep.z0", "rep.tol", "rep.grid", "rep.file",
    "stability.grid", "stability.radius", "stability.samples", "stability.require",
    "output.report", "output.trajectory", "output.drift", "output.rep", "output.lagrange",
    "output.scan", "output.verdict",
}
SYSTEM_KEYS = {
    "harmonic": {"n"},
    "two_level": {"B", "B_sin", "B_cos", "envelope", "envelope.a", "envelope.b"},
    "n_level": {"diag", "envelope", "envelope.a", "envelope.b"},
    "three_body": {"mu", "varpi", "start", "perturb"},
    "custom_polynomial": {"n", "hamiltonian"},
}
DEFAULT_OUTPUTS = {
    "report": "report.txt", "trajectory": "trajectory.csv", "drift": "drift.csv", "rep": "rep.txt",
    "lagrange": "lagrange.csv", "scan": "scan.csv", "verdict": "verdict.txt",
}


class ConfigError(ValueError):
    pass


# --- configuration -------------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _float(raw: dict, key: str, default=None) -> float:
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return float(default)
    try:
        v = float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}") from exc
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def _int(raw: dict, key: str, default: int) -> int:
    if key not in raw:
        return default
    try:
        return int(raw[key], 0)
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {raw[key]!r}") from exc


def _vector(raw: dict, key: str, default=None, size: int | None = None) -> np.ndarray | None:
    if key not in raw:
        return None if default is None else np.asarray(default, float)
    try:
        v = np.array([float(s) for s in raw[key].replace(";", ",").split(",") if s.strip()])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers") from exc
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"{key}: entries must be finite")
    if size is not None and v.size != size:
        raise ConfigError(f"{key}: expected {size} entries, got {v.size}")
    return v


@dataclass
class SystemConfig:
    system: str
    raw: dict
    t0: float
    t1: float
    integrator: IntegratorConfig
    outputs: dict = field(default_factory=dict)


def load_config(text: str) -> SystemConfig:
    raw = parse_config(text)
    system = raw.get("system")
    if system is None:
        raise ConfigError("missing key 'system'")
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}")
    unknown = sorted(set(raw) - COMMON_KEYS - SYSTEM_KEYS[system])
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(unknown))
    t0 = _float(raw, "t0", 0.0)
    t1 = _float(raw, "t1", 10.0)
    try:
        step = _float(raw, "integrator.step") if "integrator.step" in raw else None
        integ = IntegratorConfig(
            method=raw.get("integrator.method", "rk45"),
            step=step,
            atol=_float(raw, "integrator.atol", 1e-10),
            rtol=_float(raw, "integrator.rtol", 1e-10),
            max_step=_float(raw, "integrator.max_step", math.inf) if "integrator.max_step" in raw else math.inf,
            max_steps=_int(raw, "integrator.max_steps", 2_000_000),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    outputs = {k: raw.get(f"output.{k}", v) for k, v in DEFAULT_OUTPUTS.items()}
    for name in outputs.values():
        if not name or os.path.basename(name) != name:
            raise ConfigError(f"output names must be plain file names, got {name!r}")
    return SystemConfig(system, raw, t0, t1, integ, outputs)


# --- built-in systems ----------------------------------------------------------------

@dataclass
class System:
    name: str
    h: ScalarField
    action: SymmetryAction
    x0: np.ndarray
    labels: tuple = ()
    path: quantum.HermitianPath | None = None
    params: threebody.ThreeBodyParams | None = None
    guard: Callable | None = None
    monitors: list = field(default_factory=list)
    sampler: Callable | None = None


def _envelope(raw: dict) -> quantum.Envelope:
    try:
        return quantum.Envelope(raw.get("envelope", "constant"), _float(raw, "envelope.a", 0.5),
                                _float(raw, "envelope.b", 1.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trivial_action() -> SymmetryAction:
    return SymmetryAction(LieAlgebraSpec.abelian(0), [], name="trivial")


def _choose_action(raw: dict, n: int, default: str) -> SymmetryAction:
    if "momentum" in raw:
        try:
            J = parse_field(raw["momentum"], n, "J")
        except ExpressionError as exc:
            raise ConfigError(f"momentum: {exc}") from exc
        return SymmetryAction(LieAlgebraSpec.abelian(1), [J], name="custom")
    kind = raw.get("action", default)
    if kind == "none":
        return _trivial_action()
    if kind == "u1":
        return quantum.u1_action(n)
    if kind == "su2":
        if n != 2:
            raise ConfigError("action su2 needs a two-level system")
        return quantum.su2_action()
    raise ConfigError(f"unknown action {kind!r}")


def _gaussian_sampler(dim: int):
    def sample(rng, t0, t1):
        return np.concatenate([[rng.uniform(t0, t1)], rng.normal(size=dim - 1)])
    return sample


def build_system(cfg: SystemConfig) -> System:
    raw, name = cfg.raw, cfg.system
    if name in ("harmonic", "custom_polynomial"):
        n = _int(raw, "n", 1)
        if n < 1:
            raise ConfigError("n must be positive")
        if name == "harmonic":
            h = quadratic_field(np.eye(2 * n), "h")
        else:
            if "hamiltonian" not in raw:
                raise ConfigError("custom_polynomial needs 'hamiltonian'")
            try:
                h = parse_field(raw["hamiltonian"], n, "h")
            except ExpressionError as exc:
                raise ConfigError(f"hamiltonian: {exc}") from exc
        default_x0 = np.zeros(2 * n + 1)
        default_x0[1] = 1.0
        x0 = _vector(raw, "x0", default_x0, 2 * n + 1)
        action = _choose_action(raw, n, "none")
        return System(name, h, action, x0, monitors=[h, *action.J], sampler=_gaussian_sampler(2 * n + 1))

    if name in ("two_level", "n_level"):
        env = _envelope(raw)
        if name == "two_level":
            B = _vector(raw, "B", [0, 0, 0, 1], 4)
            terms = [(env, sum(b * s for b, s in zip(B, quantum.SPIN)))]
            for key in ("B_sin", "B_cos"):
                extra = _vector(raw, key, None, 4)
                if extra is not None:
                    terms.append((_TimeProfile(key), sum(b * s for b, s in zip(extra, quantum.SPIN))))
            n = 2
        else:
            diag = _vector(raw, "diag", [1, 2, 3])
            n = diag.size
            terms = [(env, np.diag(diag).astype(complex))]
        try:
            path = quantum.HermitianPath(terms)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        h = quantum.schrodinger_field(path)
        default_x0 = np.zeros(2 * n + 1)
        default_x0[1] = 1.0
        x0 = _vector(raw, "x0", default_x0, 2 * n + 1)
        action = _choose_action(raw, n, "u1")
        return System(name, h, action, x0, path=path, monitors=[h, *action.J],
                      sampler=_gaussian_sampler(2 * n + 1))

    # three_body
    try:
        params = threebody.ThreeBodyParams(_float(raw, "mu", 0.99), _int(raw, "varpi", 1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    h = threebody.hamiltonian(params)
    if "x0" in raw:
        x0 = _vector(raw, "x0", None, 5)
    else:
        label = raw.get("start", "L4")
        pts = {p.label: p for p in threebody.lagrange_points(params)}
        if label not in pts:
            raise ConfigError(f"start must be one of {', '.join(pts)}")
        x0 = pts[label].state(cfg.t0)
        x0[1] += _float(raw, "perturb", 1e-3)
    if "momentum" in raw or "action" in raw:
        raise ConfigError("three_body uses the built-in rotation symmetry; 'momentum'/'action' are not accepted")
    jacobi = threebody.reduce(params).pullback()

    def sample(rng, t0, t1):
        while True:
            x = np.array([rng.uniform(t0, t1), rng.uniform(0.5, 2.0), rng.uniform(0, 2 * math.pi),
                          rng.normal(), rng.normal()])
            d1, d2 = threebody._distances_sq(params, x[1], x[2] - params.varpi * x[0])
            if min(d1, d2) > 0.01:
                return x

    return System(name, h, _trivial_action(), x0, labels=("t", "r", "phi", "p_r", "p_phi"), params=params,
                  guard=threebody.separation_guard(params), monitors=[h, jacobi], sampler=sample)


class _TimeProfile:
    """sin t or cos t as an envelope (jet-aware)."""

    def __init__(self, key: str):
        self._f = jets.sin if key == "B_sin" else jets.cos

    def __call__(self, t):
        return self._f(t)


# --- report ----------------------------------------------------------------------------

@dataclass
class RunReport:
    command: str
    system: str
    digest: str
    seed: int
    exit_code: int = EXIT_OK
    wall_time: float = 0.0
    summary: list = field(default_factory=list)  # ordered (key, value)

    def add(self, key: str, value) -> None:
        if isinstance(value, float):
            value = format(value, ".17g")
        elif isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, (list, tuple, np.ndarray)):
            value = ", ".join(format(float(v), ".17g") for v in np.ravel(value))
        self.summary.append((key, str(value)))

    def text(self) -> str:
        lines = [
            f"command = {self.command}",
            f"system = {self.system}",
            f"config_sha256 = {self.digest}",
            f"seed = {self.seed}",
            f"exit_code = {self.exit_code}",
            f"wall_time_s = {self.wall_time:.3f}",
            "[summary]",
        ]
        lines += [f"{k} = {v}" for k, v in self.summary]
        return "\n".join(lines) + "\n"


def _sample_points(system: System, cfg: SystemConfig, seed: int, count: int):
    rng = np.random.default_rng(seed)
    return [system.sampler(rng, cfg.t0, cfg.t1) for _ in range(count)]


def _check(report: RunReport, name: str, fn: Callable) -> bool:
    try:
        passed, value = fn()
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        report.add(f"{name}.passed", False)
        report.add(f"{name}.error", str(exc))
        return False
    report.add(f"{name}.max_residual", float(value))
    report.add(f"{name}.passed", bool(passed))
    return bool(passed)


# --- commands --------------------------------------------------------------------------

def cmd_verify(cfg: SystemConfig, system: System, report: RunReport, seed: int) -> dict:
    count = _int(cfg.raw, "samples", 100)
    pts = _sample_points(system, cfg, seed, count)
    ok = True
    action, h = system.action, system.h
    if system.params is not None:
        params = system.params
        ups = threebody.upsilon(params)
        Y = threebody.rotation_generator(params)
        red = threebody.reduce(params)
        ok &= _check(report, "rotation_generator", lambda: _max_ok(
            [np.max(np.abs(gradient_field(ups, x) - Y)) for x in pts], 1e-14))
        ok &= _check(report, "rotation_preserves_h", lambda: _max_ok(
            [abs(Y @ h.gradient(x)) for x in pts], 1e-10))
        ok &= _check(report, "rotation_preserves_bivector", lambda: _max_ok(
            [np.max(np.abs(lie_derivative_bivector(lambda z: gradient_field(ups, z), x))) for x in pts[:20]],
            1e-6))
        rep = threebody.reduction_formula_residual(params, pts[:50])
        ok &= _check(report, "reduction_formula", lambda: (rep.passed, rep.max_residual))
        ok &= _check(report, "reduced_field_matches_pushforward", lambda: _max_ok(
            [np.max(np.abs(red.pushforward(h, x) - red.field(red.project(x)))) for x in pts], 1e-10))
    elif action.d == 0:
        report.add("momentum_map", "no symmetry configured; structural checks are vacuous")
    else:
        mm = verify_momentum_map(action, h, pts, tol=1e-9)
        for key, v in mm.details["worst"].items():
            report.add(f"momentum_map.{key}", v)
        ok &= _check(report, "momentum_map", lambda: (mm.passed, mm.max_residual))

        def cocycle():
            _, r = cocycle_form(action, pts)
            return r.passed, r.max_residual
        ok &= _check(report, "cocycle_constant", cocycle)

        def tangency():
            worst = 0.0
            for x in pts[:10]:
                r = tangency_check(action, action.momentum(x), x)
                if not r.passed:
                    return False, r.max_residual
                worst = max(worst, r.max_residual)
            return True, worst
        ok &= _check(report, "tangency", tangency)
        if system.path is not None and system.path.n == 2 and action.name == "U(1)":
            def hopf():
                chart = quantum.hopf_chart(0.5)
                ws = [[cfg.t0, phi, th] for phi in np.linspace(0.1, math.pi / 2 - 0.1, 7)
                      for th in (-2.0, 0.3, 1.9)]
                r = verify_reduction(chart, action, ws)
                return r.passed, r.max_residual
            ok &= _check(report, "hopf_reduction", hopf)
    report.add("samples", count)
    report.exit_code = EXIT_OK if ok else EXIT_FAILED
    return {}


def _max_ok(values, tol):
    mx = float(max(values, default=0.0))
    return mx <= tol, mx


def _harmonic_exact(x0, tau):
    n = (x0.size - 1) // 2
    q, p = x0[1:n + 1], x0[n + 1:]
    c, s = math.cos(tau), math.sin(tau)
    return np.concatenate([[x0[0] + tau], q * c + p * s, -q * s + p * c])


def cmd_integrate(cfg: SystemConfig, system: System, report: RunReport, seed: int) -> dict:
    kind = cfg.raw.get("field", "evolution")
    if kind not in ("evolution", "hamiltonian", "gradient"):
        raise ConfigError(f"unknown field kind {kind!r}")
    traj = integrate(kind, system.h, system.x0, cfg.t0, cfg.t1, cfg.integrator, guard=system.guard)
    if system.labels:
        traj.labels = system.labels
    report.add("field", kind)
    report.add("method", cfg.integrator.method)
    report.add("termination", traj.termination)
    report.add("steps", len(traj.times) - 1)
    files = {cfg.outputs["trajectory"]: traj.csv_text()}
    if not traj.completed:
        report.add("terminal_point", traj.terminal_point)
        report.add("message", traj.message)
        report.exit_code = EXIT_FAILED
        return files
    mon = monitor(traj, system.monitors)
    for name, d in zip(mon.names, mon.drift):
        report.add(f"drift.{name}", float(d))
    rows = ["s," + ",".join(mon.names)]
    rows += [",".join(format(float(v), ".17g") for v in (s, *row)) for s, row in zip(traj.times, mon.series)]
    files[cfg.outputs["drift"]] = "\n".join(rows) + "\n"
    if system.name == "harmonic" and kind == "evolution":
        exact = _harmonic_exact(system.x0, cfg.t1 - cfg.t0)
        report.add("endpoint_error", float(np.max(np.abs(traj.states[-1] - exact))))
    report.add("endpoint", traj.states[-1])
    return files


def _grid(raw: dict, key: str, default, kind: str) -> np.ndarray:
    parts = _vector(raw, key, default)
    if parts.size != 3:
        raise ConfigError(f"{key}: expected 'start, stop, count'")
    a, b, k = parts
    if k != int(k) or k < 1:
        raise ConfigError(f"{key}: empty or invalid time grid")
    if kind == "chebyshev":
        return chebyshev_grid(a, b, int(k))
    return np.linspace(a, b, int(k))


def _rep_start(cfg: SystemConfig, system: System) -> np.ndarray:
    raw = cfg.raw
    if "rep.file" in raw:
        try:
            with open(raw["rep.file"], encoding="utf-8") as fh:
                for line in fh:
                    if line.startswith("z_e ="):
                        return np.array([float(s) for s in line.split("=", 1)[1].split(",")])
        except OSError as exc:
            raise ConfigError(f"rep.file: {exc}") from exc
        raise ConfigError("rep.file holds no 'z_e =' line")
    z0 = _vector(raw, "rep.z0", system.x0[1:], system.x0.size - 1)
    return z0


def cmd_rep(cfg: SystemConfig, system: System, report: RunReport, seed: int) -> dict:
    raw = cfg.raw
    tol = _float(raw, "rep.tol", 1e-10)
    if system.params is not None:
        pts = threebody.lagrange_points(system.params)
        for p in pts:
            report.add(f"{p.label}.r", p.r)
            report.add(f"{p.label}.residual_field", p.residual_field)
        ok = all(p.residual_field <= 1e-8 for p in pts)
        report.add("certified", sum(p.residual_field <= 1e-8 for p in pts))
        report.exit_code = EXIT_OK if ok else EXIT_FAILED
        return {cfg.outputs["lagrange"]: threebody.lagrange_csv(pts)}
    times = _grid(raw, "rep.grid", [cfg.t0, cfg.t1, 9], "chebyshev")
    if system.path is not None and "rep.z0" not in raw and "momentum" not in raw and system.action.name == "U(1)":
        cert = quantum.rep_eigenvector_certify(system.path, times, tol=tol, crosscheck=True)
        g = lambda v: format(float(v), ".17g")  # noqa: E731
        lines = ["[rays]"]
        for v, lam, res, cc in zip(cert.rays, cert.eigenvalues, cert.residuals, cert.crosscheck):
            lines.append("ray = " + ", ".join(f"{g(c.real)}{c.imag:+.17g}j" for c in v)
                         + f"; eigenvalue_t0 = {g(lam[0])}; residual = {g(res)}; crosscheck = {g(cc)}")
        lines += [f"flag = {f}" for f in cert.flags]
        lines += [f"rejected residual = {g(r)}" for _, r in cert.rejected]
        report.add("rays", len(cert.rays))
        report.add("rejected", len(cert.rejected))
        report.add("flags", len(cert.flags))
        crosscheck_ok = all(c <= 1e-8 for c in cert.crosscheck)
        report.add("crosscheck_passed", crosscheck_ok)
        report.exit_code = EXIT_OK if cert.rays and crosscheck_ok else EXIT_FAILED
        return {cfg.outputs["rep"]: "\n".join(lines) + "\n"}
    try:
        cand = find_rep(system.h, system.action, _rep_start(cfg, system), times=times, tol=tol)
    except RepSearchError as exc:
        report.add("error", str(exc))
        report.exit_code = EXIT_FAILED
        return {}
    report.add("accepted", cand.accepted)
    report.add("max_residual", float(cand.residuals.max()))
    report.add("z_e", cand.z_e)
    report.exit_code = EXIT_OK if cand.accepted else EXIT_FAILED
    return {cfg.outputs["rep"]: cand.export_text()}


def cmd_stability(cfg: SystemConfig, system: System, report: RunReport, seed: int) -> dict:
    raw = cfg.raw
    if system.params is not None:
        raise ConfigError("stability classification is not offered for three_body")
    grid = _grid(raw, "stability.grid", [cfg.t0, cfg.t1, 11], "uniform")
    require = raw.get("stability.require", "any")
    if require not in ("any", "stable", "uniform"):
        raise ConfigError("stability.require must be any, stable or uniform")
    try:
        cand = find_rep(system.h, system.action, _rep_start(cfg, system), times=grid,
                        tol=_float(raw, "rep.tol", 1e-10))
    except RepSearchError as exc:
        report.add("error", str(exc))
        report.exit_code = EXIT_FAILED
        return {}
    report.add("candidate_accepted", cand.accepted)
    if not cand.accepted:
        report.exit_code = EXIT_FAILED
        return {cfg.outputs["rep"]: cand.export_text()}
    try:
        scan = spectral_scan(system.h, system.action, cand, cand.mu, grid,
                             neighborhood_radius=_float(raw, "stability.radius", 0.1),
                             samples=_int(raw, "stability.samples", 200), seed=seed)
    except RegularityError as exc:
        report.add("error", str(exc))
        report.exit_code = EXIT_FAILED
        return {cfg.outputs["rep"]: cand.export_text()}
    verdict = classify(scan)
    report.add("verdict", verdict.kind)
    report.add("inf_lambda_min", scan.inf_lambda_min)
    report.add("sup_lambda_max", scan.sup_lambda_max)
    wanted = {"any": True,
              "stable": verdict.kind != "indeterminate",
              "uniform": verdict.kind == "uniformly_stable_from_t0"}[require]
    report.exit_code = EXIT_OK if wanted else EXIT_FAILED
    return {cfg.outputs["scan"]: scan.csv_text(), cfg.outputs["verdict"]: verdict.text(),
            cfg.outputs["rep"]: cand.export_text()}


COMMANDS = {"verify": cmd_verify, "integrate": cmd_integrate, "rep": cmd_rep, "stability": cmd_stability}


# --- output ----------------------------------------------------------------------------

def _write_atomic(directory: str, files: dict[str, str]) -> None:
    """Write every file to a temporary name first, then rename them all into place."""
    os.makedirs(directory, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(directory, name)))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosymplectic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="sampling seed (default 0x5EED)")
    return parser


def run(command: str, config_text: str, out_dir: str, seed: int = DEFAULT_SEED) -> int:
    start = time.perf_counter()
    digest = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
    try:
        cfg = load_config(config_text)
        system = build_system(cfg)
        report = RunReport(command, cfg.system, digest, seed)
        files = COMMANDS[command](cfg, system, report, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        report = RunReport(command, cfg.system, digest, seed, EXIT_FAILED)
        report.add("error", str(exc))
        files = {}
    report.wall_time = time.perf_counter() - start
    files[cfg.outputs["report"]] = report.text()
    _write_atomic(out_dir, files)
    return report.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(args.command, text, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
