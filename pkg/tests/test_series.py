import math

import numpy as np
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from affsurf.series import Series

t = sp.symbols("t")
ORDER = 4


def taylor(expr, t0):
    """Taylor coefficients of ``expr`` about ``t0`` from sympy, as floats."""
    return [float(sp.diff(expr, t, k).subs(t, t0) / math.factorial(k)) for k in range(ORDER + 1)]


def jet(fn, t0):
    return fn(Series.variable(np.array([t0]), ORDER)).c[:, 0]


CASES = [
    (lambda u: u.exp() * u.sin(), lambda x: sp.exp(x) * sp.sin(x)),
    (lambda u: (u * u + 1.0).log(), lambda x: sp.log(x ** 2 + 1)),
    (lambda u: 1.0 / (u * u + 2.0), lambda x: 1 / (x ** 2 + 2)),
    (lambda u: u.arctan() * u.cos(), lambda x: sp.atan(x) * sp.cos(x)),
    (lambda u: (u ** 3 - 2.0 * u) / (u.exp() + 1.0), lambda x: (x ** 3 - 2 * x) / (sp.exp(x) + 1)),
]


@settings(max_examples=25, deadline=None)
@given(st.floats(-2.0, 2.0), st.integers(0, len(CASES) - 1))
def test_jets_match_symbolic_taylor(t0, which):
    fn, expr = CASES[which]
    np.testing.assert_allclose(jet(fn, t0), taylor(expr(t), t0), rtol=1e-10, atol=1e-12)


def test_compose_is_chain_rule():
    # sin(exp(t)) two ways
    t0 = 0.3
    inner = Series.variable(np.array([t0]), ORDER).exp()
    outer = Series.variable(inner.value, ORDER).sin()
    np.testing.assert_allclose(outer.compose(inner).c[:, 0], taylor(sp.sin(sp.exp(t)), t0), rtol=1e-12)


def test_reverse_inverts_series():
    t0 = 0.7
    f = Series.variable(np.array([t0]), ORDER).exp()
    g = f.reverse(t0)  # series of log about e^{t0}
    np.testing.assert_allclose(g.c[:, 0], taylor(sp.log(t), math.exp(t0)), rtol=1e-11)


def test_derivs_and_from_derivs_round_trip():
    s = Series.variable(np.array([0.2]), ORDER).exp()
    back = Series.from_derivs(s.derivs())
    np.testing.assert_allclose(back.c, s.c)
    np.testing.assert_allclose(s.derivs()[:, 0], np.full(ORDER + 1, math.exp(0.2)))
