import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cosymplectic import jets
from cosymplectic.jets import Jet2


def composite(x):
    a, b, c = x
    return (jets.sin(a * b) + jets.exp(0.3 * c) / jets.sqrt(1 + b * b)
            + jets.log(2 + jets.cos(a)) + jets.atan2(b, a + 3) + (1 + c * c) ** 1.5 - 2 / (3 + a * a))


def fd_gradient_hessian(f, x, h=1e-4):
    m = len(x)
    g = np.zeros(m)
    H = np.zeros((m, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
        for j in range(m):
            d = np.zeros(m)
            d[j] = h
            H[i, j] = (f(x + e + d) - f(x + e - d) - f(x - e + d) + f(x - e - d)) / (4 * h * h)
    return g, H


coords = st.floats(-1.5, 1.5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(coords, coords, coords)
def test_jet_derivatives_match_central_differences(a, b, c):
    x = np.array([a, b, c])
    j = composite(jets.variables(x, 2))
    g, H = fd_gradient_hessian(lambda y: composite(list(y)), x)
    assert abs(j.value - composite(list(x))) <= 1e-14 * max(1.0, abs(j.value))
    assert np.allclose(j.gradient, g, rtol=1e-6, atol=1e-7)
    assert np.allclose(j.hessian, H, rtol=1e-6, atol=1e-6)


def test_hessian_is_symmetric():
    x = np.array([0.3, -0.7, 1.1])
    H = composite(jets.variables(x, 2)).hessian
    assert np.max(np.abs(H - H.T)) <= 1e-12 * max(1.0, np.max(np.abs(H)))


def test_first_order_jets_skip_hessian():
    x = jets.variables([0.5, 2.0], 1)
    j = jets.sin(x[0]) * x[1] ** 2
    assert j.hessian is None
    assert np.allclose(j.gradient, [math.cos(0.5) * 4, 2 * 2 * math.sin(0.5)])


def test_power_with_jet_exponent():
    x, y = jets.variables([1.3, 0.7], 2)
    j = x ** y
    assert math.isclose(j.value, 1.3 ** 0.7)
    assert np.allclose(j.gradient, [0.7 * 1.3 ** -0.3, math.log(1.3) * 1.3 ** 0.7])


def test_functions_accept_plain_floats():
    assert jets.sin(0.0) == 0.0
    assert jets.exp(0.0) == 1.0
    assert jets.atan2(1.0, 1.0) == math.atan2(1.0, 1.0)


def test_numpy_scalars_defer_to_jets():
    x = jets.variables([2.0], 2)[0]
    j = np.float64(3.0) * x
    assert isinstance(j, Jet2) and j.value == 6.0


def test_comparisons_use_values():
    x, y = jets.variables([1.0, 2.0], 1)
    assert x < y and y >= 2.0 and float(x) == 1.0
    assert abs(-x).value == 1.0
