"""Finite-level quantum systems in a real cosymplectic chart.

A state psi in C^n is stored as ``(t, Re psi_1..Re psi_n, Im psi_1..Im psi_n)``,
i.e. ``q_j + i p_j = psi_j`` in the canonical chart layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .core import ScalarField, combine, quadratic_field
from .equilibria import find_rep
from .stability import jacobi_eigh
from .symmetry import LieAlgebraSpec, ReductionChart, SymmetryAction

SIGMA = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# spin operators S_j = sigma_j / 2; index 0 is the identity
SPIN = (SIGMA[0],) + tuple(0.5 * s for s in SIGMA[1:])


@dataclass(frozen=True)
class Envelope:
    """Scalar time profile B(t): constant, 1 + a sin(b t) or 1 + a exp(-b t)."""

    kind: str = "constant"
    a: float = 0.5
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "exp_decay"):
            raise ValueError(f"unknown envelope {self.kind!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("envelope parameters must be finite")

    def __call__(self, t):
        if self.kind == "constant":
            return 1.0
        if self.kind == "sine":
            return 1.0 + self.a * jets.sin(self.b * t)
        return 1.0 + self.a * jets.exp(-self.b * t)


class HermitianPath:
    """t -> sum_k e_k(t) A_k with real envelopes e_k and Hermitian A_k."""

    def __init__(self, terms: Sequence[tuple[Callable, np.ndarray]]):
        terms = [(e, np.asarray(A, dtype=complex)) for e, A in terms]
        if not terms:
            raise ValueError("path needs at least one term")
        n = terms[0][1].shape[0]
        for _, A in terms:
            if A.shape != (n, n):
                raise ValueError("all matrices must be n x n")
            if np.max(np.abs(A - A.conj().T)) > 1e-12:
                raise ValueError("matrix is not Hermitian")
        self.n = n
        self.terms = terms

    def __call__(self, t: float) -> np.ndarray:
        return sum(float(e(float(t))) * A for e, A in self.terms)

    @classmethod
    def two_level(cls, B, envelope: Callable | None = None) -> "HermitianPath":
        """B(t) (B0 I + B1 S1 + B2 S2 + B3 S3)."""
        B = [float(b) for b in B]
        if len(B) != 4:
            raise ValueError("two-level systems take B0..B3")
        A = sum(b * s for b, s in zip(B, SPIN))
        return cls([(envelope or Envelope("constant"), A)])

    @classmethod
    def constant(cls, A, envelope: Callable | None = None) -> "HermitianPath":
        return cls([(envelope or Envelope("constant"), A)])


def to_chart(psi, t: float = 0.0) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.concatenate([[float(t)], psi.real, psi.imag])


def from_chart(x) -> np.ndarray:
    x = np.asarray(x, float)
    n = (x.size - 1) // 2
    return x[1:n + 1] + 1j * x[n + 1:]


def real_form(A) -> np.ndarray:
    """Symmetric Q with 1/2 <psi, A psi> = 1/2 x^T Q x, x = (Re psi, Im psi)."""
    A = np.asarray(A, dtype=complex)
    Ar, Ai = A.real, A.imag
    return np.block([[Ar, -Ai], [Ai, Ar]])


def observable_field(A, name: str = "", envelope: Callable | None = None) -> ScalarField:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.max(np.abs(A - A.conj().T)) > 1e-12:
        raise ValueError("observable must be a Hermitian matrix")
    return quadratic_field(real_form(A), name=name or "f_A", envelope=envelope)


def schrodinger_field(path: HermitianPath) -> ScalarField:
    """h(t, psi) = 1/2 <psi, H(t) psi>."""
    parts = [observable_field(A, f"term{k}", envelope=e) for k, (e, A) in enumerate(path.terms)]
    if len(parts) == 1:
        parts[0].name = "h"
        return parts[0]
    return combine([(1.0, p) for p in parts], name="h")


def pauli_fields() -> list[ScalarField]:
    """h_0..h_3 = 1/2 <psi, S_j psi> on the two-level chart."""
    return [observable_field(S, f"h{j}") for j, S in enumerate(SPIN)]


def u1_action(n: int) -> SymmetryAction:
    """Global phase rotations, J = 1/2 sum (q^2 + p^2)."""
    return SymmetryAction(LieAlgebraSpec.abelian(1), [observable_field(np.eye(n), "J")], name="U(1)")


def su2_action() -> SymmetryAction:
    return SymmetryAction(LieAlgebraSpec.su2(), pauli_fields()[1:], name="SU(2)")


# --- Hopf reduction ----------------------------------------------------------------

def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def hopf_chart(mu: float, degeneracy_tol: float = 1e-8) -> ReductionChart:
    """Level set J = mu of the two-level system over the reduced sphere.

    Level coordinates u = (t, phi, theta1, theta2), reduced w = (t, phi, theta)
    with theta = theta1 - theta2.
    """
    if not mu > 0:
        raise ValueError("mu = 0 is not a regular value of the momentum map")
    a = math.sqrt(2 * mu)

    def sigma(u):
        t, phi, th1, th2 = u
        s, c = jets.sin(phi), jets.cos(phi)
        # canonical layout (t, q1, q2, p1, p2)
        return [t, a * s * jets.cos(th1), a * c * jets.cos(th2), a * s * jets.sin(th1), a * c * jets.sin(th2)]

    def project(u):
        t, phi, th1, th2 = u
        return [t, phi, th1 - th2]

    def lift(w, s=0.0):
        t, phi, th = w
        return [t, phi, th + s, float(s)]

    def omega_reduced(w):
        k = mu * math.sin(2 * float(w[1]))
        return np.array([[0.0, k], [-k, 0.0]])

    def ambient_to_reduced(x):
        z = from_chart(x)
        phi = math.atan2(abs(z[0]), abs(z[1]))
        theta = _wrap(float(np.angle(z[0]) - np.angle(z[1])))
        return np.array([float(x[0]), phi, theta])

    def degenerate(w):
        return abs(math.sin(2 * float(w[1]))) < degeneracy_tol

    return ReductionChart(
        mu=np.array([mu]),
        sigma=sigma,
        project=project,
        lift=lift,
        omega_reduced=omega_reduced,
        ambient_to_reduced=ambient_to_reduced,
        degenerate=degenerate,
        level_dim=4,
        reduced_dim=3,
        fiber_dim=1,
        name="Hopf chart",
    )


def bloch_vector(x) -> np.ndarray:
    """(h1, h2, h3) at a chart point: coordinates of the reduced sphere that never degenerate."""
    return np.array([f(x) for f in pauli_fields()[1:]])


# --- relative equilibria as eigenvectors ---------------------------------------------

def fix_phase(v, tol: float = 1e-12) -> np.ndarray:
    """Normalise and rotate so that the first non-negligible entry is real positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    for c in v:
        if abs(c) > tol:
            return v * (abs(c) / c)
    return v


def hermitian_eig(H):
    """Eigenvalues and phase-fixed eigenvectors of a Hermitian matrix.

    The real embedding [[Re H, -Im H], [Im H, Re H]] is diagonalised by Jacobi
    rotations; every eigenvalue appears twice there (for v and i v), so one
    vector per pair is kept.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    w, V = jacobi_eigh(real_form(H))
    vals, vecs = [], []
    for k in range(n):
        col = V[:, 2 * k]
        vals.append(0.5 * (w[2 * k] + w[2 * k + 1]))
        vecs.append(fix_phase(col[:n] + 1j * col[n:]))
    return np.array(vals), vecs


@dataclass
class RayCertification:
    rays: list
    eigenvalues: list  # per certified ray, eigenvalue at each time
    residuals: list  # per certified ray, max eigen-residual over the grid
    flags: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    crosscheck: list = field(default_factory=list)


def rep_eigenvector_certify(path: HermitianPath, times, tol: float = 1e-10, gap_tol: float = 1e-10,
                            crosscheck: bool = False) -> RayCertification:
    """Rays that are eigenvectors of H(t) at every grid time.

    Candidates come from the spectrum at the first grid time; degenerate
    eigenvalues are flagged and skipped. With ``crosscheck`` each certified ray
    is also located by the Lagrange-multiplier search and compared up to phase.
    """
    times = np.asarray(times, float)
    if times.size == 0:
        raise ValueError("empty time grid")
    vals0, vecs0 = hermitian_eig(path(times[0]))
    out = RayCertification([], [], [])
    for k, v in enumerate(vecs0):
        gaps = np.abs(np.delete(vals0, k) - vals0[k])
        if gaps.size and gaps.min() < gap_tol:
            out.flags.append(f"t={times[0]:.17g}: eigenvalue {vals0[k]:.17g} is degenerate; ray skipped")
            continue
        lam, worst = [], 0.0
        for t in times:
            H = path(t)
            ev = float(np.real(v.conj() @ H @ v))
            lam.append(ev)
            worst = max(worst, float(np.linalg.norm(H @ v - ev * v)))
            vt = hermitian_eig(H)[0]
            if vt.size > 1 and np.min(np.diff(vt)) < gap_tol:
                out.flags.append(f"t={t:.17g}: spectrum degenerate")
        if worst <= tol:
            out.rays.append(v)
            out.eigenvalues.append(np.array(lam))
            out.residuals.append(worst)
            if crosscheck:
                out.crosscheck.append(_crosscheck(path, v, times))
        else:
            out.rejected.append((v, worst))
    return out


def _crosscheck(path: HermitianPath, v, times) -> float:
    h = schrodinger_field(path)
    action = u1_action(path.n)
    x0 = to_chart(v, times[0])
    cand = find_rep(h, action, x0[1:], times=times, tol=1e-8)
    z = fix_phase(from_chart(cand.point(times[0])))
    return float(np.linalg.norm(z - fix_phase(v)))
