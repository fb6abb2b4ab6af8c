"""Cosymplectic Darboux charts, scalar fields and their distinguished vector fields.

Points live in ``R x R^{2n}`` with the fixed layout ``(t, q1..qn, p1..pn)``.
The structure is ``omega = sum dq^i ^ dp_i`` and ``eta = dt``.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .jets import Jet2


class DomainError(ValueError):
    """A field evaluation produced a non-finite number (or left its domain)."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = None if point is None else np.array(point, dtype=float)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class DarbouxChart:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def labels(self) -> tuple[str, ...]:
        n = self.n
        return ("t",) + tuple(f"q{i}" for i in range(1, n + 1)) + tuple(f"p{i}" for i in range(1, n + 1))

    @property
    def q(self) -> slice:
        return slice(1, self.n + 1)

    @property
    def p(self) -> slice:
        return slice(self.n + 1, 2 * self.n + 1)

    def check(self, point) -> np.ndarray:
        x = np.asarray(point, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        return x

    @classmethod
    def for_dim(cls, dim: int) -> "DarbouxChart":
        if dim < 3 or dim % 2 == 0:
            raise DimensionError(f"dimension {dim} is not of the form 2n+1")
        return cls((dim - 1) // 2)


@dataclass
class Report:
    """Outcome of a numerical verification."""

    passed: bool
    max_residual: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)


# --- scalar fields --------------------------------------------------------------

def _finite_jet(j: Jet2, point) -> Jet2:
    ok = math.isfinite(j.value) and np.all(np.isfinite(j.gradient))
    if ok and j.hessian is not None:
        ok = bool(np.all(np.isfinite(j.hessian)))
    if not ok:
        raise DomainError("non-finite field evaluation", point)
    return j


class ScalarField:
    """A smooth function of ``(t, q, p)`` with exact first and second derivatives.

    ``fn`` receives a sequence of coordinates (plain floats or jets) and must be
    written with the elementary functions of :mod:`cosymplectic.jets` so that it
    works on both. Alternatively ``jet_fn(x, order)`` may supply jets directly.
    """

    def __init__(self, fn: Callable | None, dim: int, name: str = "", jet_fn: Callable | None = None,
                 value_fn: Callable | None = None):
        if fn is None and jet_fn is None:
            raise ValueError("need fn or jet_fn")
        self.fn = fn
        self.dim = int(dim)
        self.name = name
        self._jet_fn = jet_fn
        self._value_fn = value_fn

    def __repr__(self):
        return f"ScalarField({self.name or '?'}, dim={self.dim})"

    @property
    def chart(self) -> DarbouxChart:
        return DarbouxChart.for_dim(self.dim)

    def _point(self, point) -> np.ndarray:
        x = np.asarray(point, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"{self!r} expects dimension {self.dim}, got shape {x.shape}")
        return x

    def __call__(self, point) -> float:
        x = self._point(point)
        if self.fn is None and self._value_fn is None:
            return self.jet(x, 1).value
        try:
            if self._value_fn is not None:
                v = float(self._value_fn(x))
            else:
                v = jets.value_of(self.fn([float(c) for c in x]))
        except DomainError:
            raise
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"evaluation failed: {exc}", x) from exc
        if not math.isfinite(v):
            raise DomainError("non-finite field value", x)
        return v

    def jet(self, point, order: int = 2) -> Jet2:
        x = self._point(point)
        try:
            if self._jet_fn is not None:
                j = self._jet_fn(x, order)
            else:
                j = self.fn(jets.variables(x, order))
                if not isinstance(j, Jet2):
                    m = x.shape[0]
                    j = Jet2(float(j), np.zeros(m), np.zeros((m, m)) if order >= 2 else None)
        except DomainError:
            raise
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"evaluation failed: {exc}", x) from exc
        return _finite_jet(j, x)

    def gradient(self, point) -> np.ndarray:
        return self.jet(point, 1).gradient

    def hessian(self, point) -> np.ndarray:
        return self.jet(point, 2).hessian

    # --- linear combinations ---------------------------------------------------
    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return combine([(1.0, self), (-1.0, other)])

    def __neg__(self):
        return combine([(-1.0, self)])

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            return NotImplemented
        return combine([(float(c), self)])

    __rmul__ = __mul__

    # --- alternative constructors ------------------------------------------------
    @classmethod
    def quadratic(cls, matrix, name: str = "", envelope: Callable | None = None) -> "ScalarField":
        """``envelope(t) * 1/2 x^T Q x`` with ``x`` the spatial coordinates."""
        return quadratic_field(matrix, name=name, envelope=envelope)

    @classmethod
    def from_blackbox(cls, fn: Callable, dim: int, name: str = "") -> "ScalarField":
        """Wrap a float-only function; derivatives come from central differences."""
        return blackbox_field(fn, dim, name)


def combine(terms: Sequence[tuple[float, "ScalarField | float"]], name: str = "") -> ScalarField:
    """Linear combination ``sum c_k f_k``; numbers are treated as constant fields."""
    fields = [(c, f) for c, f in terms if isinstance(f, ScalarField)]
    const = sum(c * float(f) for c, f in terms if not isinstance(f, ScalarField))
    if not fields:
        raise ValueError("need at least one field")
    dim = fields[0][1].dim
    if any(f.dim != dim for _, f in fields):
        raise DimensionError("cannot combine fields of different dimension")

    def value(x):
        return const + sum(c * f(x) for c, f in fields)

    generic = None
    if all(f.fn is not None for _, f in fields):
        def generic(xs):
            return const + sum(c * f.fn(xs) for c, f in fields)

    def jet_fn(x, order):
        js = [(c, f.jet(x, order)) for c, f in fields]
        v = const + sum(c * j.value for c, j in js)
        g = sum(c * j.gradient for c, j in js)
        h = sum(c * j.hessian for c, j in js) if order >= 2 else None
        return Jet2(v, g, h)

    label = name or " + ".join(f"{c:g}*{f.name}" for c, f in fields)
    return ScalarField(generic, dim, label, jet_fn=jet_fn, value_fn=value)


def quadratic_field(matrix, name: str = "", envelope: Callable | None = None) -> ScalarField:
    Q = np.array(matrix, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
        raise DimensionError("quadratic form must be a square matrix of even size")
    Q = 0.5 * (Q + Q.T)
    m = Q.shape[0]
    dim = m + 1

    def env_jet(t, order):
        if envelope is None:
            return 1.0, 0.0, 0.0
        e = envelope(jets.variables([t], 2)[0])
        if not isinstance(e, Jet2):
            return float(e), 0.0, 0.0
        return e.value, float(e.gradient[0]), float(e.hessian[0, 0])

    def jet_fn(x, order):
        z = x[1:]
        Qz = Q @ z
        v = 0.5 * float(z @ Qz)
        e0, e1, e2 = env_jet(float(x[0]), order)
        g = np.empty(dim)
        g[0] = e1 * v
        g[1:] = e0 * Qz
        h = None
        if order >= 2:
            h = np.empty((dim, dim))
            h[0, 0] = e2 * v
            h[0, 1:] = h[1:, 0] = e1 * Qz
            h[1:, 1:] = e0 * Q
        return Jet2(e0 * v, g, h)

    pairs = [(i, j, Q[i, j]) for i in range(m) for j in range(m) if Q[i, j] != 0.0]

    def fn(xs):
        # jet-generic path, used when the field is composed with other maps
        z = xs[1:]
        s = 0.0
        for i, j, c in pairs:
            s = s + c * z[i] * z[j]
        e = 1.0 if envelope is None else envelope(xs[0])
        return e * (0.5 * s)

    def value_fn(x):
        e = 1.0 if envelope is None else envelope(float(x[0]))
        z = x[1:]
        return e * 0.5 * float(z @ Q @ z)

    sf = ScalarField(fn, dim, name, jet_fn=jet_fn, value_fn=value_fn)
    sf.matrix = Q
    sf.envelope = envelope
    return sf


def blackbox_field(fn: Callable, dim: int, name: str = "") -> ScalarField:
    eps3 = np.finfo(float).eps ** (1.0 / 3.0)

    def f(x):
        v = float(fn(np.asarray(x, dtype=float)))
        if not math.isfinite(v):
            raise DomainError("non-finite field value", x)
        return v

    def jet_fn(x, order):
        m = x.shape[0]
        steps = eps3 * np.maximum(1.0, np.abs(x))
        f0 = f(x)
        g = np.empty(m)
        fp = np.empty(m)
        fm = np.empty(m)
        for i in range(m):
            e = np.zeros(m)
            e[i] = steps[i]
            fp[i], fm[i] = f(x + e), f(x - e)
            g[i] = (fp[i] - fm[i]) / (2 * steps[i])
        h = None
        if order >= 2:
            h = np.empty((m, m))
            for i in range(m):
                h[i, i] = (fp[i] - 2 * f0 + fm[i]) / steps[i] ** 2
                for j in range(i + 1, m):
                    ei = np.zeros(m)
                    ej = np.zeros(m)
                    ei[i], ej[j] = steps[i], steps[j]
                    val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej))
                    h[i, j] = h[j, i] = val / (4 * steps[i] * steps[j])
        return Jet2(f0, g, h)

    return ScalarField(None, dim, name, jet_fn=jet_fn, value_fn=f)


# --- vector fields ----------------------------------------------------------------

def reeb(chart: DarbouxChart, point) -> np.ndarray:
    chart.check(point)
    out = np.zeros(chart.dim)
    out[0] = 1.0
    return out


def _symplectic_gradient(grad: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(2 * n + 1)
    out[1:n + 1] = grad[n + 1:]
    out[n + 1:] = -grad[1:n + 1]
    return out


def hamiltonian_field(f: ScalarField, point) -> np.ndarray:
    """X_f: dq/ds = df/dp, dp/ds = -df/dq, zero time component."""
    chart = f.chart
    return _symplectic_gradient(f.gradient(chart.check(point)), chart.n)


def gradient_field(f: ScalarField, point) -> np.ndarray:
    """X_f + (Rf) R."""
    chart = f.chart
    g = f.gradient(chart.check(point))
    out = _symplectic_gradient(g, chart.n)
    out[0] = g[0]
    return out


def evolution_field(f: ScalarField, point) -> np.ndarray:
    """R + X_f."""
    out = hamiltonian_field(f, point)
    out[0] = 1.0
    return out


FIELD_KINDS = {
    "hamiltonian": hamiltonian_field,
    "gradient": gradient_field,
    "evolution": evolution_field,
}


def poisson_matrix(chart: DarbouxChart) -> np.ndarray:
    """Matrix P with {f, g} = grad f . P grad g."""
    n = chart.n
    P = np.zeros((chart.dim, chart.dim))
    for i in range(n):
        P[1 + i, 1 + n + i] = 1.0
        P[1 + n + i, 1 + i] = -1.0
    return P


def omega_matrix(chart: DarbouxChart) -> np.ndarray:
    """Matrix W with omega(u, v) = u . W v (degenerate along t)."""
    return poisson_matrix(chart)


def poisson_bracket(f: ScalarField, g: ScalarField, point) -> float:
    chart = f.chart
    x = chart.check(point)
    df, dg = f.gradient(x), g.gradient(x)
    q, p = chart.q, chart.p
    return float(df[q] @ dg[p] - df[p] @ dg[q])


def bivector_apply(df, point=None) -> np.ndarray:
    """Contract the Poisson bivector with a covector: Lambda(., df)."""
    a = np.asarray(df, dtype=float)
    chart = DarbouxChart.for_dim(a.shape[0])
    if point is not None:
        chart.check(point)
    return _symplectic_gradient(a, chart.n)


def bracket_field(f: ScalarField, g: ScalarField) -> ScalarField:
    """{f, g} as a field. Only first-order jets are available (needs Hessians of f, g)."""
    if f.dim != g.dim:
        raise DimensionError("fields live on different charts")
    P = poisson_matrix(f.chart)

    def jet_fn(x, order):
        if order >= 2:
            raise NotImplementedError("bracket fields provide first-order jets only")
        jf, jg = f.jet(x, 2), g.jet(x, 2)
        v = float(jf.gradient @ P @ jg.gradient)
        grad = jf.hessian @ P @ jg.gradient - jg.hessian @ P @ jf.gradient
        return Jet2(v, grad, None)

    return ScalarField(None, f.dim, f"{{{f.name},{g.name}}}", jet_fn=jet_fn)


def lie_bracket(X: Callable, Y: Callable, point, step: float = 1e-5) -> np.ndarray:
    """[X, Y] = DY.X - DX.Y with directional central differences."""
    x = np.asarray(point, dtype=float)
    vx, vy = np.asarray(X(x)), np.asarray(Y(x))
    dyx = (np.asarray(Y(x + step * vx)) - np.asarray(Y(x - step * vx))) / (2 * step)
    dxy = (np.asarray(X(x + step * vy)) - np.asarray(X(x - step * vy))) / (2 * step)
    return dyx - dxy


def lie_derivative_bivector(Y: Callable, point, step: float = 1e-5) -> np.ndarray:
    """Lie derivative of the (constant) Poisson bivector along Y, by central differences."""
    x = np.asarray(point, dtype=float)
    m = x.size
    P = poisson_matrix(DarbouxChart.for_dim(m))
    DY = np.empty((m, m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = step
        DY[:, k] = (np.asarray(Y(x + e)) - np.asarray(Y(x - e))) / (2 * step)
    return -(DY @ P + P @ DY.T)


def symplectization_check(f: ScalarField, g: ScalarField, sample_points, tol: float = 1e-10) -> Report:
    """Compare {f, g} with the bracket of the pullbacks to R x M.

    On R x M with coordinates (s, t, q, p) the two-form pr*omega + ds ^ pr*eta is
    symplectic; its bracket is computed by inverting the full matrix, independently
    of the Darboux formula.
    """
    chart = f.chart
    m = chart.dim + 1
    W = np.zeros((m, m))
    W[1:, 1:] = omega_matrix(chart)
    W[0, 1], W[1, 0] = 1.0, -1.0
    det = float(np.linalg.det(W))
    WinvT = np.linalg.inv(W.T)
    res, dets = [], []
    for x in sample_points:
        x = chart.check(x)
        dF = np.concatenate([[0.0], f.gradient(x)])
        dG = np.concatenate([[0.0], g.gradient(x)])
        lifted = float(dF @ WinvT @ dG)
        res.append(abs(lifted - poisson_bracket(f, g, x)))
        dets.append(det)
    res = np.asarray(res)
    mx = float(res.max()) if res.size else 0.0
    return Report(mx <= tol and abs(det) > 0, mx, res, {"determinants": np.asarray(dets)})


# --- expression parsing -------------------------------------------------------------

_FUNCS = {"sin": jets.sin, "cos": jets.cos, "exp": jets.exp, "sqrt": jets.sqrt, "log": jets.log}
_CONSTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    pass


def parse_field(expr: str, n: int, name: str | None = None) -> ScalarField:
    """Build a field from an arithmetic expression in t, q1..qn, p1..pn.

    Only numbers, the coordinate names, + - * / ** (or ^) and the functions
    sin, cos, exp, sqrt, log are accepted. For n = 1 the names q and p also work.
    """
    chart = DarbouxChart(n)
    index = {lab: i for i, lab in enumerate(chart.labels)}
    if n == 1:
        index["q"], index["p"] = 1, 2
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {expr!r}") from exc

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name):
            if node.id not in index and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r}")
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{node.func.id} takes one argument")
            check(node.args[0])
        else:
            raise ExpressionError(f"unsupported syntax in {expr!r}")

    check(tree)

    def ev(node, xs):
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left, xs), ev(node.right, xs)
            op = node.op
            if isinstance(op, ast.Add):
                return a + b
            if isinstance(op, ast.Sub):
                return a - b
            if isinstance(op, ast.Mult):
                return a * b
            if isinstance(op, ast.Div):
                return a / b
            return a ** b
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand, xs)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in index:
                return xs[index[node.id]]
            return _CONSTS[node.id]
        return _FUNCS[node.func.id](ev(node.args[0], xs))

    body = tree.body
    return ScalarField(lambda xs: ev(body, xs), chart.dim, name or expr)
