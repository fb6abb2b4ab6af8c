"""Lie algebra actions with momentum maps, and checks of reduced structures."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import null_space, subspace_angles

from . import jets
from .core import (
    DimensionError,
    Report,
    ScalarField,
    combine,
    hamiltonian_field,
    omega_matrix,
    poisson_bracket,
)


class ChartDegeneracyError(ValueError):
    """A reduction chart was evaluated on one of its declared degeneracy loci."""


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants ``c[k, i, j]`` of ``[xi_i, xi_j] = sum_k c[k, i, j] xi_k``."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError("structure constants must have shape (d, d, d)")
        object.__setattr__(self, "c", c)
        if np.max(np.abs(c + np.transpose(c, (0, 2, 1))), initial=0.0) > 1e-12:
            raise ValueError("structure constants are not antisymmetric")
        if self.jacobi_defect() > 1e-12:
            raise ValueError("structure constants violate the Jacobi identity")

    @property
    def d(self) -> int:
        return self.c.shape[0]

    def bracket(self, a, b) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, np.asarray(a, float), np.asarray(b, float))

    def jacobi_defect(self) -> float:
        c = self.c
        # sum over cyclic (i, j, k) of [[xi_i, xi_j], xi_k]
        t = np.einsum("mij,lmk->lijk", c, c)
        s = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
        return float(np.max(np.abs(s), initial=0.0))

    @classmethod
    def abelian(cls, d: int) -> "LieAlgebraSpec":
        return cls(np.zeros((d, d, d)))

    @classmethod
    def su2(cls) -> "LieAlgebraSpec":
        """[xi_1, xi_2] = xi_3 and cyclic."""
        c = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            c[k, i, j] = 1.0
            c[k, j, i] = -1.0
        return cls(c)


class SymmetryAction:
    """An infinitesimal action given by its momentum components ``J_1..J_d``.

    Fundamental fields are the Hamiltonian fields of the components.
    """

    def __init__(self, algebra: LieAlgebraSpec, J: Sequence[ScalarField], name: str = ""):
        J = list(J)
        if len(J) != algebra.d:
            raise ValueError(f"algebra has dimension {algebra.d} but {len(J)} momentum components were given")
        dims = {f.dim for f in J}
        if len(dims) > 1:
            raise DimensionError("momentum components live on different charts")
        self.algebra = algebra
        self.J = J
        self.name = name
        self._dim = dims.pop() if dims else None

    @property
    def d(self) -> int:
        return self.algebra.d

    def momentum(self, point) -> np.ndarray:
        return np.array([f(point) for f in self.J])

    def jacobian(self, point) -> np.ndarray:
        """D J as a d x (2n+1) matrix (t column included)."""
        x = np.asarray(point, float)
        if not self.J:
            return np.zeros((0, x.shape[0]))
        return np.array([f.gradient(x) for f in self.J])

    def generators(self, point) -> np.ndarray:
        """Columns are the fundamental fields of the basis elements."""
        x = np.asarray(point, float)
        if not self.J:
            return np.zeros((x.shape[0], 0))
        return np.column_stack([hamiltonian_field(f, x) for f in self.J])

    def component(self, a) -> ScalarField:
        """J_xi for xi = sum a^i xi_i."""
        return combine([(float(ai), f) for ai, f in zip(a, self.J)])

    def fundamental_field(self, a, point) -> np.ndarray:
        return self.generators(point) @ np.asarray(a, float)


def verify_momentum_map(action: SymmetryAction, h: ScalarField, sample_points, tol: float = 1e-10) -> Report:
    """Per-point residuals of the momentum-map conditions for each basis element.

    ``omega``: iota_{xi_M} omega - dJ on ker eta; ``reeb``: R J; ``eta``: iota_{xi_M} eta;
    ``invariance``: xi_M h.
    """
    pts = [np.asarray(x, float) for x in sample_points]
    keys = ("omega", "reeb", "eta", "invariance")
    res = {k: np.zeros((len(pts), action.d)) for k in keys}
    for a, x in enumerate(pts):
        W = omega_matrix(h.chart)
        dh = h.gradient(x)
        for i, f in enumerate(action.J):
            dJ = f.gradient(x)
            X = hamiltonian_field(f, x)
            res["omega"][a, i] = np.linalg.norm((W.T @ X)[1:] - dJ[1:])
            res["reeb"][a, i] = abs(dJ[0])
            res["eta"][a, i] = abs(X[0])
            res["invariance"][a, i] = abs(dh @ X)
    per_point = np.max(np.stack([res[k] for k in keys]), axis=(0, 2)) if pts and action.d else np.zeros(len(pts))
    worst = {k: float(v.max(initial=0.0)) for k, v in res.items()}
    mx = max(worst.values(), default=0.0)
    return Report(mx <= tol, mx, per_point, {"worst": worst, "residuals": res, "tol": tol})


def conservation_along_flow(action: SymmetryAction, h: ScalarField, trajectory, kind: str | None = None) -> Report:
    """Drift of each momentum component along a computed trajectory."""
    kind = kind or getattr(trajectory, "kind", None)
    states = np.asarray(trajectory.states)
    vals = np.array([[f(x) for f in action.J] for x in states]).reshape(len(states), action.d)
    series = np.abs(vals - vals[0])
    drift = series.max(axis=0) if len(states) else np.zeros(action.d)
    mx = float(drift.max(initial=0.0))
    return Report(True, mx, drift, {"kind": kind, "series": series, "values": vals})


def cocycle_form(action: SymmetryAction, sample_points, tol: float = 1e-8):
    """Sigma(xi_i, xi_j) = {J_j, J_i} - J_[xi_j, xi_i] at each sample point.

    Returns the mean matrix and a report whose residual is the largest deviation
    from the mean (Sigma must be constant).
    """
    d = action.d
    c = action.algebra.c
    mats = []
    for x in sample_points:
        x = np.asarray(x, float)
        Jx = action.momentum(x)
        S = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                S[i, j] = poisson_bracket(action.J[j], action.J[i], x) - c[:, j, i] @ Jx
        mats.append(S)
    mats = np.array(mats).reshape(-1, d, d)
    mean = mats.mean(axis=0) if len(mats) else np.zeros((d, d))
    dev = np.abs(mats - mean).max(axis=(1, 2)) if len(mats) and d else np.zeros(len(mats))
    mx = float(dev.max(initial=0.0))
    return mean, Report(mx <= tol, mx, dev, {"antisymmetry": float(np.abs(mean + mean.T).max(initial=0.0))})


def _span_angle(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[1] != B.shape[1]:
        return float(np.pi / 2)
    if A.shape[1] == 0:
        return 0.0
    return float(np.max(subspace_angles(A, B)))


def tangency_check(action: SymmetryAction, mu, point, tol: float = 1e-9, level_tol: float = 1e-10) -> Report:
    """Check T J^-1(mu) = (T Gx)^omega and (ker DJ)^omega = T Gx + <R> at a point.

    Subspaces are compared through their largest principal angle.
    """
    x = np.asarray(point, float)
    mu = np.atleast_1d(np.asarray(mu, float))
    level = float(np.max(np.abs(action.momentum(x) - mu), initial=0.0))
    D = action.jacobian(x)
    s = np.linalg.svd(D, compute_uv=False) if D.size else np.zeros(0)
    rank = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
    details = {"level_residual": level, "rank": rank, "regular": rank == action.d}
    if level > level_tol:
        details["reason"] = "point is not on the level set"
        return Report(False, level, np.array([level]), details)
    if rank < action.d:
        details["reason"] = "momentum map is not regular at this point"
        return Report(False, float("inf"), np.array([np.inf]), details)
    W = omega_matrix(action.J[0].chart)
    m = x.shape[0]
    K = null_space(D) if D.size else np.eye(m)
    Xi = action.generators(x)
    orth_orbit = null_space(Xi.T @ W) if Xi.size else np.eye(m)
    orth_kernel = null_space(K.T @ W)
    R = np.zeros((m, 1))
    R[0, 0] = 1.0
    orbit_plus_reeb = np.linalg.qr(np.column_stack([Xi, R]))[0]
    a2 = _span_angle(K, orth_orbit)
    a3 = _span_angle(orth_kernel, orbit_plus_reeb)
    details.update({
        "angle_tangent": a2,
        "angle_complement": a3,
        "dim_kernel": K.shape[1],
        "dim_orbit_orthogonal": orth_orbit.shape[1],
    })
    mx = max(a2, a3)
    return Report(mx <= tol, mx, np.array([a2, a3]), details)


# --- reduction charts -------------------------------------------------------------

def map_jacobian(fn: Callable, u) -> np.ndarray:
    """Jacobian of a vector-valued map written with jet-aware functions."""
    u = np.asarray(u, float)
    out = fn(jets.variables(u, 1))
    rows = []
    for c in out:
        if isinstance(c, jets.Jet2):
            rows.append(c.gradient)
        else:
            rows.append(np.zeros(u.shape[0]))
    return np.array(rows)


def _as_floats(seq) -> np.ndarray:
    return np.array([jets.value_of(c) for c in seq])


@dataclass
class ReductionChart:
    """A user-supplied local description of a reduced space.

    ``sigma`` maps level-set coordinates ``u`` (with ``u[0] = t``) to the ambient
    chart; ``project`` maps ``u`` to reduced coordinates ``w`` (with ``w[0] = t``);
    ``lift(w, s)`` returns the level-set coordinates of the preimage of ``w``
    labelled by the fibre parameter ``s``. ``omega_reduced(w)`` is the matrix of
    the reduced two-form on the spatial reduced coordinates, and the reduced
    one-form is ``dt``. All callables except ``omega_reduced``, ``degenerate`` and
    ``ambient_to_reduced`` must accept jets.
    """

    mu: np.ndarray
    sigma: Callable
    project: Callable
    lift: Callable
    omega_reduced: Callable
    ambient_to_reduced: Callable
    degenerate: Callable = field(default=lambda w: False)
    level_dim: int = 0
    reduced_dim: int = 0
    fiber_dim: int = 1
    name: str = ""

    def check(self, w) -> np.ndarray:
        w = np.asarray(w, float)
        if self.degenerate(w):
            raise ChartDegeneracyError(f"reduced point {w} lies on a degeneracy locus of {self.name or 'the chart'}")
        return w

    def point(self, w, fiber=0.0) -> np.ndarray:
        """Ambient point over reduced coordinates ``w``."""
        u = _as_floats(self.lift(list(self.check(w)), fiber))
        return _as_floats(self.sigma(list(u)))


def verify_reduction(chart: ReductionChart, action: SymmetryAction, sample_reduced_points,
                     tol: float = 1e-9, fibers=(0.0, 0.7)) -> Report:
    """Check iota^* omega = pi^* omega_mu, iota^* eta = pi^* eta_mu and J(sigma(u)) = mu."""
    mu = np.atleast_1d(np.asarray(chart.mu, float))
    res_omega, res_eta, res_level = [], [], []
    for w in sample_reduced_points:
        w = chart.check(w)
        for s in fibers:
            u = _as_floats(chart.lift(list(w), s))
            x = _as_floats(chart.sigma(list(u)))
            res_level.append(float(np.max(np.abs(action.momentum(x) - mu))))
            Ds = map_jacobian(chart.sigma, u)
            Dp = map_jacobian(chart.project, u)
            W = omega_matrix(action.J[0].chart)
            pulled = Ds.T @ W @ Ds
            wr = _as_floats(chart.project(list(u)))
            Wr = np.zeros((len(wr), len(wr)))
            Wr[1:, 1:] = np.asarray(chart.omega_reduced(wr), float)
            pushed = Dp.T @ Wr @ Dp
            res_omega.append(float(np.max(np.abs(pulled - pushed))))
            eta_amb = np.zeros(x.shape[0])
            eta_amb[0] = 1.0
            eta_red = np.zeros(len(wr))
            eta_red[0] = 1.0
            res_eta.append(float(np.max(np.abs(Ds.T @ eta_amb - Dp.T @ eta_red))))
    worst = {
        "omega": max(res_omega, default=0.0),
        "eta": max(res_eta, default=0.0),
        "level": max(res_level, default=0.0),
    }
    mx = max(worst.values())
    ok = worst["omega"] <= tol and worst["eta"] <= tol and worst["level"] <= 1e-10
    return Report(ok, mx, np.asarray(res_omega), {"worst": worst})


def reduced_hamiltonian(chart: ReductionChart, h: ScalarField, fiber: float = 0.0) -> ScalarField:
    """k_mu with pi^* k_mu = h restricted to the level set."""

    def fn(w):
        return h.fn(chart.sigma(chart.lift(w, fiber)))

    if h.fn is None:
        raise ValueError("reduced_hamiltonian needs a field with a jet-aware evaluation function")
    return ScalarField(fn, chart.reduced_dim, f"reduced {h.name}")


def reduced_well_defined(chart: ReductionChart, h: ScalarField, sample_reduced_points,
                         tol: float = 1e-10, fibers=(0.0, 1.3)) -> Report:
    """h must agree on distinct preimages of the same reduced point."""
    res = []
    for w in sample_reduced_points:
        vals = [h(chart.point(w, s)) for s in fibers]
        res.append(max(vals) - min(vals))
    res = np.asarray(res)
    mx = float(res.max(initial=0.0))
    return Report(mx <= tol, mx, res)


def reduced_evolution_field(chart: ReductionChart, k: ScalarField, w) -> np.ndarray:
    """R_mu + X_k in reduced coordinates, solving iota_X omega_mu = dk on spatial directions."""
    w = chart.check(w)
    dk = k.gradient(w)
    Wr = np.asarray(chart.omega_reduced(w), float)
    out = np.empty(len(w))
    out[0] = 1.0
    out[1:] = np.linalg.solve(Wr.T, dk[1:])
    return out
