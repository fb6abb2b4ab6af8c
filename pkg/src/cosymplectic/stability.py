"""Energy-momentum stability tests on a slice transverse to the gauge directions."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import null_space, orth
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .core import Report, ScalarField
from .equilibria import REPCandidate, _spatial_generators, _xi_at, hessian_h_xi, kernel_directions
from .symmetry import SymmetryAction

DEFAULT_SEED = 0x5EED


class RegularityError(ValueError):
    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 64):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                V = V @ rot
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


@dataclass
class SliceBasis:
    t: float
    z_e: np.ndarray
    basis: np.ndarray  # columns, spatial coordinates
    gauge: np.ndarray  # gauge directions tangent to the level set
    kernel: np.ndarray  # ker DJ inside ker eta

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def project_out(vectors, gauge) -> np.ndarray:
    """Remove the gauge span from ``vectors`` and orthonormalize the remainder."""
    V = np.asarray(vectors, float)
    G = np.asarray(gauge, float)
    if G.size:
        Q = orth(G)
        V = V - Q @ (Q.T @ V)
    return orth(V) if V.size else V


def build_slice(h: ScalarField, action: SymmetryAction, candidate: REPCandidate, mu, t: float) -> SliceBasis:
    """Orthonormal complement of the gauge directions inside ker DJ and ker eta."""
    x = candidate.point(t)
    m = candidate.z_e.size
    if action.d == 0:
        return SliceBasis(float(t), candidate.z_e, np.eye(m), np.zeros((m, 0)), np.eye(m))
    DJ = action.jacobian(x)[:, 1:]
    rank = int(np.linalg.matrix_rank(DJ, tol=1e-10))
    if rank < action.d:
        raise RegularityError(f"momentum map has rank {rank} < {action.d} at the candidate", rank)
    K = kernel_directions(action, x)
    Xi = _spatial_generators(action, x)
    # gauge directions that are tangent to the level set: span(Xi) intersected with span(K)
    coeffs = null_space(np.hstack([Xi, -K]), rcond=1e-10)
    G = K @ coeffs[Xi.shape[1]:, :] if coeffs.size else np.zeros((m, 0))
    G = orth(G) if G.size else np.zeros((m, 0))
    if G.shape[1]:
        S = K @ null_space(G.T @ K)
    else:
        S = K
    return SliceBasis(float(t), candidate.z_e, S, G, K)


def reduced_hessian(h: ScalarField, action: SymmetryAction, candidate: REPCandidate, slice: SliceBasis,
                    t: float) -> np.ndarray:
    """1/2 S^T Hess(h_xi) S at (t, z_e)."""
    xi = _xi_at(h, action, candidate, t)
    H = hessian_h_xi(h, action, candidate.z_e, t, xi)
    M = 0.5 * slice.basis.T @ H @ slice.basis
    return 0.5 * (M + M.T)


@dataclass
class SpectralScan:
    times: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    c: float
    c_refined: float
    dHdt_max: float
    radius: float
    slice_dim: int
    samples: int
    t0: float
    notes: list = field(default_factory=list)

    @property
    def inf_lambda_min(self) -> float:
        return float(np.min(self.lambda_min))

    @property
    def sup_lambda_max(self) -> float:
        return float(np.max(self.lambda_max))

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("t,lambda_min,lambda_max\n")
        for t, a, b in zip(self.times, self.lambda_min, self.lambda_max):
            buf.write(f"{format(float(t), '.17g')},{format(float(a), '.17g')},{format(float(b), '.17g')}\n")
        return buf.getvalue()


def _ball_samples(m: int, count: int, radius: float, seed: int) -> np.ndarray:
    """Quasi-random points in the m-ball; the first point is the centre."""
    pts = [np.zeros(m)]
    if count > 1 and m > 0:
        u = qmc.Halton(d=m + 1, scramble=True, seed=seed).random(count - 1)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        g = _normal.ppf(u[:, :m])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = radius * u[:, m] ** (1.0 / m)
        pts.extend(g * r[:, None])
    return np.array(pts)


def _derivative_bound(h, action, z_e, t, xi, S, y, step):
    """max |D^alpha h_xi| over 1 <= |alpha| <= 3 along slice directions at z_e + S y."""
    def hess(z):
        return hessian_h_xi(h, action, z, t, xi)

    z = z_e + S @ y
    x = np.concatenate([[t], z])
    grad = h.gradient(x)[1:].copy()
    for c, f in zip(np.atleast_1d(xi), action.J):
        grad -= c * f.gradient(x)[1:]
    best = float(np.max(np.abs(S.T @ grad), initial=0.0))
    best = max(best, float(np.max(np.abs(S.T @ hess(z) @ S), initial=0.0)))
    for k in range(S.shape[1]):
        dz = step * S[:, k]
        third = (S.T @ hess(z + dz) @ S - S.T @ hess(z - dz) @ S) / (2 * step)
        best = max(best, float(np.max(np.abs(third), initial=0.0)))
    dt = h.gradient(x)[0]
    return best, dt


def spectral_scan(h: ScalarField, action: SymmetryAction, candidate: REPCandidate, mu, time_grid,
                  neighborhood_radius: float = 0.1, samples: int = 200, fd_step: float = 1e-3,
                  seed: int = DEFAULT_SEED) -> SpectralScan:
    """Extreme eigenvalues of the reduced Hessian over the grid plus the derivative bound c.

    c is a sampled estimate: the largest derivative of order 1..3 of h_xi along
    slice directions over quasi-random points of the ball, divided by 6. It is
    evaluated with ``samples`` and ``2 * samples`` points so that its stability
    under refinement can be judged.
    """
    grid = np.asarray(time_grid, float)
    if grid.size == 0:
        raise ValueError("empty time grid")
    lmin, lmax = [], []
    per_sample = []
    dhdt = -np.inf
    ys = None
    slice_dim = 0
    for t in grid:
        sl = build_slice(h, action, candidate, mu, t)
        slice_dim = sl.dim
        M = reduced_hessian(h, action, candidate, sl, t)
        if sl.dim:
            w, _ = jacobi_eigh(M)
            lmin.append(w[0])
            lmax.append(w[-1])
        else:
            lmin.append(np.inf)
            lmax.append(-np.inf)
        if ys is None:
            ys = _ball_samples(sl.dim, 2 * samples, neighborhood_radius, seed)
        xi = _xi_at(h, action, candidate, t)
        dt_centre = h.gradient(candidate.point(t))[0]
        row = []
        for y in ys:
            b, dt = _derivative_bound(h, action, candidate.z_e, t, xi, sl.basis, y, fd_step)
            row.append(b)
            dhdt = max(dhdt, dt - dt_centre)
        per_sample.append(row)
    per_sample = np.array(per_sample)
    c = float(per_sample[:, :samples].max()) / 6.0
    c2 = float(per_sample.max()) / 6.0
    return SpectralScan(
        times=grid,
        lambda_min=np.array(lmin),
        lambda_max=np.array(lmax),
        c=c,
        c_refined=c2,
        dHdt_max=float(dhdt),
        radius=float(neighborhood_radius),
        slice_dim=slice_dim,
        samples=samples,
        t0=float(grid[0]),
        notes=["c is a sampled estimate over the slice ball, not a certified supremum"],
    )


@dataclass
class StabilityVerdict:
    kind: str  # stable_from_t0 | uniformly_stable_from_t0 | indeterminate
    t0: float
    lambda_witness: float | None = None
    Lambda_witness: float | None = None
    c: float | None = None
    corollary_bound: float | None = None
    reasons: list = field(default_factory=list)

    def text(self) -> str:
        g = lambda v: "none" if v is None else format(float(v), ".17g")  # noqa: E731
        lines = [
            f"verdict = {self.kind}",
            f"t0 = {g(self.t0)}",
            f"lambda_witness = {g(self.lambda_witness)}",
            f"Lambda_witness = {g(self.Lambda_witness)}",
            f"c_estimate = {g(self.c)}",
            f"corollary_bound = {g(self.corollary_bound)}",
            "reasons = " + ("; ".join(self.reasons) if self.reasons else "none"),
        ]
        return "\n".join(lines) + "\n"


def classify(scan: SpectralScan, tol: float = 1e-12, refinement_tol: float = 0.2) -> StabilityVerdict:
    """Sufficient-condition classifier. Never reports instability."""
    reasons = []
    inf_min = scan.inf_lambda_min
    sup_max = scan.sup_lambda_max
    if not inf_min > tol:
        reasons.append(f"inf lambda_min = {inf_min:.6g} is not positive")
    c_finite = np.isfinite(scan.c) and np.isfinite(scan.c_refined)
    c_stable = c_finite and abs(scan.c_refined - scan.c) <= refinement_tol * max(scan.c_refined, 1e-300)
    if not c_finite:
        reasons.append("derivative bound c is not finite")
    elif not c_stable:
        reasons.append(f"derivative bound c moved from {scan.c:.6g} to {scan.c_refined:.6g} under refinement")
    if not scan.dHdt_max <= tol:
        reasons.append(f"dH/dt reaches {scan.dHdt_max:.6g} > 0 on the sampled neighbourhood")
    if reasons:
        return StabilityVerdict("indeterminate", scan.t0, c=scan.c, reasons=reasons)
    c = max(scan.c, scan.c_refined)
    bound = 6.0 * c * scan.slice_dim**2
    lam = 0.5 * inf_min
    if np.isfinite(sup_max) and sup_max < bound:
        return StabilityVerdict("uniformly_stable_from_t0", scan.t0, lam, 2.0 * sup_max, c, bound)
    why = "sup lambda_max is not finite" if not np.isfinite(sup_max) else \
        f"sup lambda_max = {sup_max:.6g} does not respect the derived bound {bound:.6g}"
    return StabilityVerdict("stable_from_t0", scan.t0, lam, None, c, bound, [why])


# --- Lyapunov-function utilities ----------------------------------------------------

def mdot(Mfun: ScalarField, X: Callable, point) -> float:
    """dM/dt + dM(X) along a time-dependent field X on P."""
    x = np.asarray(point, float)
    g = Mfun.gradient(x)
    v = np.asarray(X(x), float)
    if v.size == x.size:
        v = v[1:]
    return float(g[0] + g[1:] @ v)


def _directions(m: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((count, m))
    if m <= 2 * count:
        # include the coordinate axes so that anisotropic functions are probed
        axes = np.vstack([np.eye(m), -np.eye(m)])
        d = np.vstack([axes, d])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def empirical_lpdf_check(Mfun: ScalarField, x_e, radii, time_grid, directions: int = 64,
                         seed: int = DEFAULT_SEED, rel_tol: float = 1e-9) -> Report:
    """Sampled envelopes alpha(r) = inf M and beta(r) = sup M over spheres and times.

    The positive-definiteness witness needs alpha > 0, nondecreasing in r, and
    the time-wise infimum must not still be falling at the end of the grid
    (otherwise the grid cannot bound it for later times). The decrescent witness
    is the mirror statement for beta.
    """
    x_e = np.asarray(x_e, float)
    radii = np.sort(np.asarray(radii, float))
    grid = np.asarray(time_grid, float)
    dirs = _directions(x_e.size, directions, seed)
    alpha, beta = [], []
    alpha_open, beta_open = False, False
    centre = max(abs(Mfun(np.concatenate([[t], x_e]))) for t in grid)
    for r in radii:
        vals = np.array([[Mfun(np.concatenate([[t], x_e + r * u])) for u in dirs] for t in grid])
        lo_t, hi_t = vals.min(axis=1), vals.max(axis=1)
        alpha.append(lo_t.min())
        beta.append(hi_t.max())
        if len(grid) > 1:
            if lo_t[-1] <= lo_t.min() and lo_t[-1] < lo_t[-2] * (1 - rel_tol):
                alpha_open = True
            if hi_t[-1] >= hi_t.max() and hi_t[-1] > hi_t[-2] * (1 + rel_tol):
                beta_open = True
    alpha, beta = np.array(alpha), np.array(beta)
    reasons = []
    lpdf = True
    if not np.all(alpha > 0):
        lpdf = False
        reasons.append("alpha envelope not positive")
    if np.any(np.diff(alpha) < -rel_tol * np.abs(alpha[1:])):
        lpdf = False
        reasons.append("alpha envelope not monotone")
    if alpha_open:
        lpdf = False
        reasons.append("infimum still decreasing at the end of the time grid")
    decrescent = bool(np.all(np.isfinite(beta)) and not beta_open
                      and not np.any(np.diff(beta) < -rel_tol * np.abs(beta[1:])))
    if not decrescent:
        reasons.append("no decrescent envelope")
    details = {
        "alpha": alpha,
        "beta": beta,
        "lpdf": lpdf,
        "decrescent": decrescent,
        "centre_value": centre,
        "reasons": reasons,
    }
    return Report(lpdf, float(alpha.min()) if alpha.size else 0.0, alpha, details)
