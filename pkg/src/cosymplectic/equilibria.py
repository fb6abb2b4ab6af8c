"""Relative equilibrium points: search, certification and second variations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .core import Report, ScalarField, hamiltonian_field
from .symmetry import SymmetryAction


class RepSearchError(RuntimeError):
    def __init__(self, message: str, rank: int | None = None):
        super().__init__(message)
        self.rank = rank


def chebyshev_grid(a: float, b: float, k: int = 9) -> np.ndarray:
    """Chebyshev-Lobatto points on [a, b], ascending, endpoints included."""
    if k < 1:
        raise ValueError("grid needs at least one point")
    if k == 1:
        return np.array([float(a)])
    j = np.arange(k)
    x = -np.cos(np.pi * j / (k - 1))
    return a + (b - a) * (x + 1) / 2


@dataclass
class REPCandidate:
    z_e: np.ndarray
    times: np.ndarray
    xi_samples: np.ndarray  # shape (len(times), d)
    residuals: np.ndarray
    tol: float
    mu: np.ndarray
    accepted: bool
    iterations: int = 0
    kkt_rank: int = 0
    info: dict = field(default_factory=dict)

    def point(self, t: float) -> np.ndarray:
        return np.concatenate([[float(t)], self.z_e])

    @property
    def grid_spacing(self) -> float:
        return float(np.max(np.diff(self.times))) if len(self.times) > 1 else 0.0

    def export_text(self) -> str:
        g = lambda v: format(float(v), ".17g")  # noqa: E731
        lines = [
            "[rep]",
            "z_e = " + ", ".join(g(v) for v in self.z_e),
            "mu = " + ", ".join(g(v) for v in self.mu),
            f"accepted = {str(self.accepted).lower()}",
            f"tol = {g(self.tol)}",
            f"grid_points = {len(self.times)}",
            f"grid_max_spacing = {g(self.grid_spacing)}",
        ]
        for t, xi, r in zip(self.times, self.xi_samples, self.residuals):
            lines.append(f"t = {g(t)}; xi = " + ", ".join(g(v) for v in xi) + f"; residual = {g(r)}")
        return "\n".join(lines) + "\n"


def _spatial_generators(action: SymmetryAction, x: np.ndarray) -> np.ndarray:
    return action.generators(x)[1:, :]


def multipliers_at(h: ScalarField, action: SymmetryAction, z, t: float):
    """Least-squares xi(t) with xi_M = X_h at (t, z), and the residual norm."""
    x = np.concatenate([[float(t)], np.asarray(z, float)])
    Xh = hamiltonian_field(h, x)[1:]
    G = _spatial_generators(action, x)
    if G.shape[1] == 0:
        return np.zeros(0), float(np.linalg.norm(Xh))
    xi = np.linalg.lstsq(G, Xh, rcond=None)[0]
    return xi, float(np.linalg.norm(Xh - G @ xi))


def rep_residual(h: ScalarField, action: SymmetryAction, z, xi_of_t, times) -> float:
    """max_t |X_h - sum xi^i(t) X_{J_i}| at (t, z).

    ``xi_of_t`` is a callable t -> xi or an array with one row per time.
    """
    z = np.asarray(z, float)
    worst = 0.0
    for k, t in enumerate(times):
        xi = xi_of_t(t) if callable(xi_of_t) else np.asarray(xi_of_t)[k]
        x = np.concatenate([[float(t)], z])
        r = hamiltonian_field(h, x)[1:] - _spatial_generators(action, x) @ np.atleast_1d(xi)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def _kkt(h, action, t, z, xi, mu0):
    x = np.concatenate([[t], z])
    jh = h.jet(x, 2)
    m = z.size
    d = action.d
    grad = jh.gradient[1:].copy()
    hess = jh.hessian[1:, 1:].copy()
    DJ = np.zeros((d, m))
    Jz = np.zeros(d)
    for i, f in enumerate(action.J):
        jf = f.jet(x, 2)
        grad -= xi[i] * jf.gradient[1:]
        hess -= xi[i] * jf.hessian[1:, 1:]
        DJ[i] = jf.gradient[1:]
        Jz[i] = jf.value
    F = np.concatenate([grad, Jz - mu0])
    K = np.zeros((m + d, m + d))
    K[:m, :m] = hess
    K[:m, m:] = -DJ.T
    K[m:, :m] = DJ
    return F, K


def find_rep(h: ScalarField, action: SymmetryAction, z0, times=None, tol: float = 1e-10,
             window=(0.0, 1.0), max_iter: int = 50) -> REPCandidate:
    """Locate a relative equilibrium near ``z0`` and certify it on a time grid.

    At the first grid time the critical-point equations of h - xi.J are solved
    together with J(z) = J(z0) by damped least-squares Newton. Afterwards z is
    frozen and xi(t) is recovered by least squares at every grid time.
    """
    times = chebyshev_grid(*window) if times is None else np.asarray(times, float)
    if times.size == 0:
        raise ValueError("empty time grid")
    t0 = float(times[0])
    z = np.asarray(z0, float).copy()
    d = action.d
    x0 = np.concatenate([[t0], z])
    mu0 = action.momentum(x0)
    xi = np.zeros(0)
    # initial multiplier from the gradient relation grad h = xi . grad J
    if d:
        DJ = action.jacobian(x0)[:, 1:]
        xi = np.linalg.lstsq(DJ.T, h.gradient(x0)[1:], rcond=None)[0]
    F, K = _kkt(h, action, t0, z, xi, mu0)
    norm = float(np.linalg.norm(F))
    it = 0
    rank = int(np.linalg.matrix_rank(K))
    for it in range(1, max_iter + 1):
        if norm <= 1e-14:
            break
        step = np.linalg.lstsq(K, -F, rcond=1e-12)[0]
        alpha = 1.0
        accepted = False
        for _ in range(31):
            z_try = z + alpha * step[: z.size]
            xi_try = xi + alpha * step[z.size:]
            F_try, K_try = _kkt(h, action, t0, z_try, xi_try, mu0)
            n_try = float(np.linalg.norm(F_try))
            if n_try < norm * (1 - 1e-4 * alpha):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        small_step = np.linalg.norm(alpha * step) <= 1e-15 * max(1.0, np.linalg.norm(z))
        z, xi, F, K, norm = z_try, xi_try, F_try, K_try, n_try
        rank = int(np.linalg.matrix_rank(K))
        if small_step:
            break
    if not np.isfinite(norm) or norm > max(tol, 1e-8):
        raise RepSearchError(
            f"Newton did not converge after {it} iterations (|F| = {norm:.3e}); KKT rank {rank} of {K.shape[0]}",
            rank)

    xis, res = [], []
    for t in times:
        xt, r = multipliers_at(h, action, z, t)
        xis.append(xt)
        res.append(r)
    res = np.asarray(res)
    x_e = np.concatenate([[t0], z])
    return REPCandidate(
        z_e=z,
        times=times,
        xi_samples=np.asarray(xis).reshape(len(times), d),
        residuals=res,
        tol=tol,
        mu=action.momentum(x_e),
        accepted=bool(np.all(res <= tol)),
        iterations=it,
        kkt_rank=rank,
        info={"newton_residual": norm, "kkt_size": K.shape[0]},
    )


def _xi_at(h, action, candidate: REPCandidate, t: float) -> np.ndarray:
    hit = np.nonzero(candidate.times == t)[0]
    if hit.size:
        return candidate.xi_samples[hit[0]]
    return multipliers_at(h, action, candidate.z_e, t)[0]


@dataclass
class SecondVariation:
    t: float
    matrix: np.ndarray


def hessian_h_xi(h: ScalarField, action: SymmetryAction, z, t: float, xi) -> np.ndarray:
    x = np.concatenate([[float(t)], np.asarray(z, float)])
    H = h.hessian(x)[1:, 1:].copy()
    for c, f in zip(np.atleast_1d(xi), action.J):
        H -= c * f.hessian(x)[1:, 1:]
    return 0.5 * (H + H.T)


def second_variation(h: ScalarField, action: SymmetryAction, candidate: REPCandidate, t: float) -> SecondVariation:
    """Spatial Hessian of h - sum xi^i(t) (J_i - J_i(z_e)) at (t, z_e)."""
    xi = _xi_at(h, action, candidate, t)
    return SecondVariation(float(t), hessian_h_xi(h, action, candidate.z_e, t, xi))


def kernel_directions(action: SymmetryAction, x) -> np.ndarray:
    """Orthonormal basis (columns, spatial coordinates) of ker DJ inside ker eta."""
    x = np.asarray(x, float)
    m = x.size - 1
    if action.d == 0:
        return np.eye(m)
    return null_space(action.jacobian(x)[:, 1:])


def gauge_kernel_check(h: ScalarField, action: SymmetryAction, candidate: REPCandidate, mu, t: float,
                       tol: float = 1e-8, probes=None) -> Report:
    """Pairings of the second variation between gauge directions and ker DJ.

    ``probes`` (columns) replaces the kernel basis, e.g. to test directions that
    deliberately leave ker DJ.
    """
    if action.d == 0:
        return Report(True, 0.0, np.zeros(0), {"vacuous": True})
    x = candidate.point(t)
    DJ = action.jacobian(x)[:, 1:]
    rank = int(np.linalg.matrix_rank(DJ, tol=1e-10))
    if rank < action.d:
        return Report(False, float("inf"), np.zeros(0), {"reason": "momentum map not regular", "rank": rank})
    H = second_variation(h, action, candidate, t).matrix
    V = kernel_directions(action, x) if probes is None else np.asarray(probes, float).reshape(x.size - 1, -1)
    Z = _spatial_generators(action, x)
    pairings = Z.T @ H @ V
    mx = float(np.max(np.abs(pairings), initial=0.0))
    return Report(mx <= tol, mx, pairings.ravel(), {"rank": rank, "mu": np.atleast_1d(mu)})
