"""Circular restricted three-body problem in a frame-free polar chart.

Coordinates are ``(t, r, phi, p_r, p_phi)``. The heavy primary (mass mu) sits
at distance ``r1 = 1 - mu`` from the centre of mass, opposite to the light one
(mass 1 - mu) at distance ``r2 = mu``; both rotate with angular velocity varpi.
The light primary is at angle ``varpi t``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .core import DomainError, Report, ScalarField, evolution_field, gradient_field

MIN_SEPARATION = 1e-6


class BracketNotFound(RuntimeError):
    def __init__(self, message: str, trace: dict):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ThreeBodyParams:
    mu: float
    varpi: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.mu) and 0.5 < self.mu < 1.0):
            raise ValueError("mu must lie in (1/2, 1)")
        if self.varpi not in (1, -1):
            raise ValueError("varpi must be +1 or -1")

    @property
    def r1(self) -> float:
        return 1.0 - self.mu

    @property
    def r2(self) -> float:
        return self.mu


def _distances_sq(params: ThreeBodyParams, r, angle):
    c = jets.cos(angle)
    d1 = r * r + params.r1 ** 2 + 2 * r * params.r1 * c
    d2 = r * r + params.r2 ** 2 - 2 * r * params.r2 * c
    return d1, d2


def hamiltonian(params: ThreeBodyParams, min_separation: float = MIN_SEPARATION) -> ScalarField:
    mu, w = params.mu, params.varpi
    guard = min_separation ** 2

    def fn(x):
        t, r, phi, pr, pphi = x
        if jets.value_of(r) <= 0:
            raise DomainError("polar chart needs r > 0")
        d1, d2 = _distances_sq(params, r, phi - w * t)
        if jets.value_of(d1) <= guard or jets.value_of(d2) <= guard:
            raise DomainError("collision with a primary")
        return pr * pr / 2 + pphi * pphi / (2 * r * r) - mu / jets.sqrt(d1) - (1 - mu) / jets.sqrt(d2)

    return ScalarField(fn, 5, "h")


def separation_guard(params: ThreeBodyParams, min_separation: float = MIN_SEPARATION):
    """Raise DomainError when the test mass comes within ``min_separation`` of a primary."""
    def guard(x):
        t, r, phi = float(x[0]), float(x[1]), float(x[2])
        d1, d2 = _distances_sq(params, r, phi - params.varpi * t)
        if r <= 0 or min(d1, d2) <= min_separation ** 2:
            raise DomainError("collision with a primary", x)
    return guard


def upsilon(params: ThreeBodyParams) -> ScalarField:
    """t + varpi p_phi; its gradient field generates the rotating-frame symmetry."""
    w = params.varpi
    return ScalarField(lambda x: x[0] + w * x[4], 5, "upsilon")


def rotation_generator(params: ThreeBodyParams) -> np.ndarray:
    return np.array([1.0, 0.0, float(params.varpi), 0.0, 0.0])


# --- reduction ---------------------------------------------------------------------

@dataclass
class ReducedSystem:
    """Quotient by the flow of the rotation generator.

    Reduced points are ``(r, phi', p_r, p_phi)`` with ``phi' = phi - varpi t``.
    ``k`` is stored as a field on a 5-dim chart whose time slot is ignored, so the
    generic Hamiltonian field machinery applies to it.
    """

    params: ThreeBodyParams
    k: ScalarField

    def project(self, x) -> np.ndarray:
        t, r, phi, pr, pphi = np.asarray(x, float)
        return np.array([r, phi - self.params.varpi * t, pr, pphi])

    def projection_jacobian(self) -> np.ndarray:
        D = np.zeros((4, 5))
        D[0, 1] = D[2, 3] = D[3, 4] = 1.0
        D[1, 2] = 1.0
        D[1, 0] = -float(self.params.varpi)
        return D

    def pushforward(self, h: ScalarField, x) -> np.ndarray:
        return self.projection_jacobian() @ evolution_field(h, x)

    def pullback(self) -> ScalarField:
        """k composed with the projection, as a field on the full chart."""
        w = self.params.varpi
        return ScalarField(lambda x: self.k.fn([0.0, x[1], x[2] - w * x[0], x[3], x[4]]), 5, "k_reduced")

    def k_value(self, w) -> float:
        return self.k(np.concatenate([[0.0], np.asarray(w, float)]))

    def field(self, w) -> np.ndarray:
        """Hamiltonian field of k for the canonical form dr^dp_r + dphi'^dp_phi."""
        g = self.k.gradient(np.concatenate([[0.0], np.asarray(w, float)]))
        return np.array([g[3], g[4], -g[1], -g[2]])


def reduce(params: ThreeBodyParams, min_separation: float = MIN_SEPARATION) -> ReducedSystem:
    mu, w = params.mu, params.varpi
    guard = min_separation ** 2

    def fn(x):
        _, r, phi, pr, pphi = x
        if jets.value_of(r) <= 0:
            raise DomainError("polar chart needs r > 0")
        d1, d2 = _distances_sq(params, r, phi)
        if jets.value_of(d1) <= guard or jets.value_of(d2) <= guard:
            raise DomainError("collision with a primary")
        return (-w * pphi + pr * pr / 2 + pphi * pphi / (2 * r * r)
                - mu / jets.sqrt(d1) - (1 - mu) / jets.sqrt(d2))

    return ReducedSystem(params, ScalarField(fn, 5, "k"))


def reduction_formula_residual(params: ThreeBodyParams, points, nodes: int = 8) -> Report:
    """Compare k(pi(x)) with h - upsilon/c - int_0^t g(s) ds at each point.

    ``g = (grad upsilon)(h - upsilon/c)`` is evaluated along the line where only
    the time coordinate varies, and integrated by Gauss-Legendre quadrature.
    c is the Reeb derivative of upsilon. The spread of g across spatial
    coordinates at a fixed time is reported too: it must vanish for the
    integral to define a function of t alone.
    """
    h = hamiltonian(params)
    ups = upsilon(params)
    red = reduce(params)
    Y = rotation_generator(params)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    res, spread = [], 0.0

    def g(x, c):
        return float(Y @ (h.gradient(x) - ups.gradient(x) / c))

    for x in points:
        x = np.asarray(x, float)
        c = float(ups.gradient(x)[0])
        t = x[0]
        s = 0.5 * t * (xg + 1)
        integral = 0.0
        for si, wi in zip(s, wg):
            y = x.copy()
            y[0] = si
            integral += 0.5 * t * wi * g(y, c)
        lhs = red.k_value(red.project(x))
        rhs = h(x) - ups(x) / c - integral
        res.append(abs(lhs - rhs))
        ref = g(x, c)
        for dr in (0.1, -0.05):
            y = x.copy()
            y[1] += dr
            y[4] += dr
            spread = max(spread, abs(g(y, c) - ref))
    res = np.asarray(res)
    mx = float(res.max(initial=0.0))
    return Report(mx <= 1e-10, mx, res, {"integrand_spread": spread})


# --- Lagrange points ---------------------------------------------------------------

def _mu_of(params_or_mu) -> float:
    return params_or_mu.mu if isinstance(params_or_mu, ThreeBodyParams) else float(params_or_mu)


def quintic_coefficients(params_or_mu, sign: int) -> np.ndarray:
    """Coefficients (highest degree first) of the collinear quintic for k = 0."""
    mu = _mu_of(params_or_mu)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    s = float(sign)
    return np.array([
        1.0,
        2 - 4 * mu,
        6 * mu ** 2 - 6 * mu + 1,
        -4 * mu ** 3 + 6 * mu ** 2 - (3 + s) * mu + s,
        mu ** 4 - 2 * mu ** 3 + (3 + 2 * s) * mu ** 2 - s * (4 * mu - 2),
        -mu ** 3 + s * (1 - mu) ** 3,
    ])


def l3_coefficients(params_or_mu, sign: int = 1) -> np.ndarray:
    """Cleared form of r = +-mu/(r-1+mu)^2 + (1-mu)/(mu+r)^2 (the k = 1 balance)."""
    mu = _mu_of(params_or_mu)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = np.array([1.0, mu - 1])  # r - 1 + mu
    b = np.array([1.0, mu])  # r + mu
    a2, b2 = np.polymul(a, a), np.polymul(b, b)
    lhs = np.polymul([1.0, 0.0], np.polymul(a2, b2))
    rhs = np.polyadd(sign * mu * b2, (1 - mu) * a2)
    return np.polysub(lhs, rhs)


def positive_roots(coeffs, lo: float = 1e-3, hi: float = 3.0, step: float = 1e-3,
                   width: float = 1e-13, residual_tol: float = 1e-12):
    """All sign-change roots of a polynomial on [lo, hi].

    Uniform scan, bisection to ``width``, then Newton polish kept only if it
    lowers the residual and stays inside the bracket. Returns ``(roots, trace)``.
    """
    coeffs = np.asarray(coeffs, float)
    dcoeffs = np.polyder(coeffs)
    n = int(round((hi - lo) / step))
    grid = lo + step * np.arange(n + 1)
    vals = np.polyval(coeffs, grid)
    roots, brackets = [], []
    for i in range(n):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
            brackets.append((grid[i], grid[i]))
            continue
        if vals[i] * vals[i + 1] < 0:
            a, b, fa = float(grid[i]), float(grid[i + 1]), vals[i]
            while b - a > width:
                m = 0.5 * (a + b)
                fm = np.polyval(coeffs, m)
                if fm == 0.0:
                    a = b = m
                    break
                if fa * fm < 0:
                    b = m
                else:
                    a, fa = m, fm
            r = 0.5 * (a + b)
            for _ in range(3):
                d = np.polyval(dcoeffs, r)
                if d == 0.0:
                    break
                r_new = r - np.polyval(coeffs, r) / d
                if not (a - width <= r_new <= b + width) or abs(np.polyval(coeffs, r_new)) >= abs(np.polyval(coeffs, r)):
                    break
                r = r_new
            roots.append(float(r))
            brackets.append((a, b))
    if vals[n] == 0.0:
        roots.append(float(grid[n]))
        brackets.append((grid[n], grid[n]))
    residuals = [abs(float(np.polyval(coeffs, r))) for r in roots]
    trace = {"interval": (lo, hi), "step": step, "sign_changes": len(roots), "brackets": brackets,
             "residuals": residuals, "within_tol": all(x <= residual_tol for x in residuals)}
    return roots, trace


@dataclass
class LagrangePoint:
    label: str
    r: float
    mode: str  # "k0", "k1" or "triangular"
    offset: float  # phi - varpi t
    varpi: int
    residual_quintic: float = 0.0
    residual_field: float = float("nan")
    branch: int = 0  # sign of the polynomial branch the root came from

    @property
    def p_r(self) -> float:
        return 0.0

    @property
    def p_phi(self) -> float:
        return self.varpi * self.r ** 2

    @property
    def delta_or_k(self) -> float:
        if self.mode == "k0":
            return 0.0
        if self.mode == "k1":
            return 1.0
        return self.offset

    def state(self, t: float) -> np.ndarray:
        return np.array([float(t), self.r, self.varpi * t + self.offset, 0.0, self.p_phi])


def hill_approximations(mu: float) -> dict:
    d = 1.0 - mu
    off = (d / 3) ** (1 / 3)
    return {"L1": 1 - off, "L2": 1 + off, "L3": 1 + 5 * d / 12, "hill_offset": off}


def solve_collinear(params: ThreeBodyParams, with_field_residual: bool = True) -> dict:
    approx = hill_approximations(params.mu)
    found, traces = [], {}
    for sign in (1, -1):
        coeffs = quintic_coefficients(params, sign)
        roots, trace = positive_roots(coeffs)
        traces[f"quintic{sign:+d}"] = trace
        found += [(r, sign, res) for r, res in zip(roots, trace["residuals"])]
    if not found:
        raise BracketNotFound("no sign change for either collinear quintic", traces)
    out = {}
    for label in ("L1", "L2"):
        r, sign, res = min(found, key=lambda f: abs(f[0] - approx[label]))
        out[label] = LagrangePoint(label, r, "k0", 0.0, params.varpi, res, branch=sign)
    coeffs = l3_coefficients(params, 1)
    roots, trace = positive_roots(coeffs)
    traces["l3"] = trace
    if not roots:
        raise BracketNotFound("no sign change for the L3 polynomial", traces)
    r = min(roots, key=lambda x: abs(x - approx["L3"]))
    res = abs(float(np.polyval(coeffs, r)))
    out["L3"] = LagrangePoint("L3", r, "k1", math.pi, params.varpi, res, branch=1)
    if with_field_residual:
        for p in out.values():
            p.residual_field = gradient_rep_residual(params, p).max_residual
    return out


def radial_balance(params: ThreeBodyParams, r: float, angle: float) -> float:
    """Radial force row of the gradient-equilibrium equations with p_phi = varpi r^2."""
    mu = params.mu
    c = math.cos(angle)
    d1, d2 = _distances_sq(params, r, angle)
    return (r - mu * (r + params.r1 * c) / d1 ** 1.5 - (1 - mu) * (r - params.r2 * c) / d2 ** 1.5)


def solve_triangular(params: ThreeBodyParams, with_field_residual: bool = True, tol: float = 1e-10) -> dict:
    mu = params.mu
    r = math.sqrt(1 - mu * (1 - mu))
    delta = math.acos((mu - 0.5) / r)
    out = {}
    for label, off in (("L4", delta), ("L5", -delta)):
        bal = abs(radial_balance(params, r, off))
        if bal > tol:
            raise ArithmeticError(f"{label}: radial balance residual {bal:.3e}")
        out[label] = LagrangePoint(label, r, "triangular", off, params.varpi, bal)
    if with_field_residual:
        for p in out.values():
            p.residual_field = gradient_rep_residual(params, p).max_residual
    return out


def lagrange_points(params: ThreeBodyParams) -> list[LagrangePoint]:
    pts = {**solve_collinear(params), **solve_triangular(params)}
    return [pts[k] for k in ("L1", "L2", "L3", "L4", "L5")]


def gradient_rep_residual(params: ThreeBodyParams, point: LagrangePoint, times=(0.0, 1.0, 2.5)) -> Report:
    """max over times of |R + X_h - grad upsilon| at the embedded point.

    ``details['literal']`` holds max |grad h - grad upsilon| for comparison;
    it is nonzero wherever the Reeb derivative of h differs from 1.
    """
    h = hamiltonian(params)
    ups = upsilon(params)
    res, lit = [], []
    for t in times:
        x = point.state(t)
        target = gradient_field(ups, x)
        res.append(float(np.linalg.norm(evolution_field(h, x) - target)))
        lit.append(float(np.linalg.norm(gradient_field(h, x) - target)))
    res = np.asarray(res)
    mx = float(res.max(initial=0.0))
    return Report(mx <= 1e-8, mx, res, {"literal": float(max(lit, default=0.0)), "literal_series": lit})


def reduced_equilibrium_residual(params: ThreeBodyParams, point: LagrangePoint) -> float:
    red = reduce(params)
    return float(np.linalg.norm(red.field(red.project(point.state(0.0)))))


def lagrange_csv(points) -> str:
    buf = io.StringIO()
    buf.write("label,r,delta_or_k,p_phi,residual_field,residual_quintic\n")
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    for p in points:
        buf.write(",".join([p.label, g(p.r), g(p.delta_or_k), g(p.p_phi), g(p.residual_field),
                            g(p.residual_quintic)]) + "\n")
    return buf.getvalue()


@dataclass
class HillReport:
    mu: float
    approximations: dict
    deltas: list = field(default_factory=list)
    l1_ratio: list = field(default_factory=list)
    l2_ratio: list = field(default_factory=list)
    l3_error: list = field(default_factory=list)


def hill_and_l3_approx(mu: float, deltas=(1e-2, 1e-3, 1e-4)) -> HillReport:
    ThreeBodyParams(mu)
    rep = HillReport(mu, hill_approximations(mu))
    for d in deltas:
        p = ThreeBodyParams(1.0 - d)
        pts = solve_collinear(p, with_field_residual=False)
        a = hill_approximations(p.mu)
        rep.deltas.append(d)
        rep.l1_ratio.append(abs(pts["L1"].r - a["L1"]) / d ** (2 / 3))
        rep.l2_ratio.append(abs(pts["L2"].r - a["L2"]) / d ** (2 / 3))
        rep.l3_error.append(abs(pts["L3"].r - a["L3"]))
    return rep
