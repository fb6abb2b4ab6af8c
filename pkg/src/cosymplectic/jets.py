"""Second-order truncated Taylor arithmetic.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar with
respect to a fixed set of seed variables. Arithmetic propagates all three
exactly (up to rounding), so fields written with the functions below get
machine-precision derivatives for free. When ``hessian`` is ``None`` the jet
is first order and the second-order bookkeeping is skipped.
"""
from __future__ import annotations

import math
from numbers import Real

import numpy as np


class Jet2:
    __slots__ = ("value", "gradient", "hessian")
    __array_priority__ = 1000  # make numpy defer to our reflected operators

    def __init__(self, value, gradient, hessian=None):
        self.value = float(value)
        self.gradient = gradient
        self.hessian = hessian

    @property
    def order(self) -> int:
        return 1 if self.hessian is None else 2

    def __repr__(self):
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r})"

    # --- construction helpers -------------------------------------------------
    def _const(self, c: float) -> "Jet2":
        m = self.gradient.shape[0]
        h = None if self.hessian is None else np.zeros((m, m))
        return Jet2(c, np.zeros(m), h)

    def _chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Compose with a scalar function given its value and two derivatives."""
        g = f1 * self.gradient
        h = None
        if self.hessian is not None:
            h = f1 * self.hessian + f2 * np.outer(self.gradient, self.gradient)
        return Jet2(f0, g, h)

    # --- arithmetic -------------------------------------------------------------
    def __neg__(self):
        h = None if self.hessian is None else -self.hessian
        return Jet2(-self.value, -self.gradient, h)

    def __pos__(self):
        return self

    def __add__(self, other):
        if not isinstance(other, Jet2):
            if isinstance(other, (Real, np.floating, np.integer)):
                return Jet2(self.value + float(other), self.gradient, self.hessian)
            return NotImplemented
        h = None
        if self.hessian is not None and other.hessian is not None:
            h = self.hessian + other.hessian
        return Jet2(self.value + other.value, self.gradient + other.gradient, h)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            if isinstance(other, (Real, np.floating, np.integer)):
                return Jet2(self.value - float(other), self.gradient, self.hessian)
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            if isinstance(other, (Real, np.floating, np.integer)):
                c = float(other)
                h = None if self.hessian is None else c * self.hessian
                return Jet2(c * self.value, c * self.gradient, h)
            return NotImplemented
        a, b = self, other
        g = a.value * b.gradient + b.value * a.gradient
        h = None
        if a.hessian is not None and b.hessian is not None:
            cross = np.outer(a.gradient, b.gradient)
            h = a.value * b.hessian + b.value * a.hessian + cross + cross.T
        return Jet2(a.value * b.value, g, h)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        v = self.value
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return self * other.reciprocal()
        if isinstance(other, (Real, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (Real, np.floating, np.integer)):
            return self.reciprocal() * float(other)
        return NotImplemented

    def __pow__(self, k):
        if isinstance(k, Jet2):
            return exp(k * log(self))
        k = float(k)
        if k == 0.0:
            return self._const(1.0)
        if k == 1.0:
            return self
        if k == 2.0:
            return self * self
        v = self.value
        return self._chain(v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def __rpow__(self, base):
        return exp(self * math.log(float(base)))

    # comparisons act on the value so that guards in user code keep working
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    def __float__(self):
        return self.value

    def __abs__(self):
        return -self if self.value < 0 else self


def _val(x) -> float:
    return x.value if isinstance(x, Jet2) else float(x)


def value_of(x) -> float:
    """Plain float value of a jet or number."""
    return _val(x)


def variables(point, order: int = 2) -> list[Jet2]:
    """Seed one jet per coordinate of ``point`` (identity gradient)."""
    x = np.asarray(point, dtype=float)
    m = x.shape[0]
    eye = np.eye(m)
    out = []
    for i in range(m):
        h = np.zeros((m, m)) if order >= 2 else None
        out.append(Jet2(x[i], eye[i].copy(), h))
    return out


def lift(x, like: Jet2) -> Jet2:
    """Promote a number to a constant jet compatible with ``like``."""
    if isinstance(x, Jet2):
        return x
    return like._const(float(x))


# --- elementary functions usable on floats and jets ---------------------------

def sin(x):
    if isinstance(x, Jet2):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._chain(s, c, -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._chain(c, -s, -c)
    return math.cos(x)


def exp(x):
    if isinstance(x, Jet2):
        e = math.exp(x.value)
        return x._chain(e, e, e)
    return math.exp(x)


def log(x):
    if isinstance(x, Jet2):
        v = x.value
        return x._chain(math.log(v), 1.0 / v, -1.0 / v**2)
    return math.log(x)


def sqrt(x):
    if isinstance(x, Jet2):
        v = x.value
        s = math.sqrt(v)
        return x._chain(s, 0.5 / s, -0.25 / (s * v))
    return math.sqrt(x)


def atan2(y, x):
    if isinstance(y, Jet2) or isinstance(x, Jet2):
        like = y if isinstance(y, Jet2) else x
        return _atan2_jet(lift(y, like), lift(x, like))
    return math.atan2(y, x)


def _atan2_jet(y: Jet2, x: Jet2) -> Jet2:
    base = math.atan2(y.value, x.value)
    r2 = x.value**2 + y.value**2
    g = (x.value * y.gradient - y.value * x.gradient) / r2
    h = None
    if x.hessian is not None and y.hessian is not None:
        # differentiate (x gy - y gx)/r2 once more
        num = x.value * y.gradient - y.value * x.gradient
        dnum = (np.outer(x.gradient, y.gradient) + x.value * y.hessian
                - np.outer(y.gradient, x.gradient) - y.value * x.hessian)
        dr2 = 2.0 * (x.value * x.gradient + y.value * y.gradient)
        h = dnum / r2 - np.outer(num, dr2) / r2**2
        h = 0.5 * (h + h.T)
    return Jet2(base, g, h)
