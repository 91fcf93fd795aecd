import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affsurf import smoothfn as sf
from affsurf.errors import DomainError, NotPositive, RangeError, UnsupportedOrder
from affsurf.lemma1 import build_bump, build_conjugator
from affsurf.plane import build_phi_flat


@pytest.fixture(scope="module")
def conj1():
    return build_conjugator(build_bump(1), 1)


def fd_check(f, pts, h=1e-5):
    """Central differences of values against the first two jet derivatives."""
    pts = np.asarray(pts, dtype=float)
    d1 = (f(pts + h) - f(pts - h)) / (2 * h)
    d2 = (f(pts + 1e-4) - 2 * f(pts) + f(pts - 1e-4)) / 1e-8
    jet = f.taylor(pts, 2).derivs()
    assert np.allclose(d1, jet[1], rtol=1e-5, atol=1e-7)
    assert np.allclose(d2, jet[2], rtol=1e-3, atol=1e-4)


# -- eval_jet ----------------------------------------------------------------------


def test_sine_jet_at_zero():
    j = sf.eval_jet(sf.sin_map(), 0.0, 1)
    assert j.value == 0.0 and j.derivs == [1.0]


def test_flat_branch_value(frozen):
    assert sf.eval_jet(sf.Flattener(side=+1), 0.5, 0).value == pytest.approx(frozen["flat_at_half"], rel=1e-14)


def test_flattener_vanishes_with_all_jets():
    j = sf.eval_jet(sf.Flattener(), 0.0, 4)
    assert j.value == 0.0 and j.derivs == [0.0, 0.0, 0.0, 0.0]
    t = np.linspace(0.0, 5.0, 50)
    assert np.all(sf.Flattener().taylor(t, 4).c == 0.0)
    assert np.all(sf.Flattener()(-np.linspace(0.01, 5.0, 50)) > 0)


def test_jet_errors():
    with pytest.raises(UnsupportedOrder):
        sf.eval_jet(sf.sin_map(), 0.0, 5)
    with pytest.raises(DomainError):
        sf.eval_jet(sf.log_map(), -1.0, 1)


def test_jet_entries_count_and_finite():
    j = sf.eval_jet(sf.log_map(), 2.0, 4)
    assert len(j.derivs) == 4 and all(math.isfinite(d) for d in j.derivs)
    assert j.derivs == pytest.approx([0.5, -0.25, 0.25, -0.375])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_flat_function_dominated_by_powers(k):
    # find the largest grid point up to which e^{-1/t} <= t^k, then check the whole interval below it
    t = np.linspace(1e-3, 1.0, 20000)
    holds = np.exp(-1.0 / t) <= t ** k
    t_k = t[np.argmin(holds) - 1] if not holds.all() else t[-1]
    assert t_k > 0
    sub = t[t <= t_k]
    assert np.all(np.exp(-1.0 / sub) <= sub ** k)


# -- antiderivatives and inversion ------------------------------------------------------


def test_antiderivative_of_one_is_identity():
    F = sf.antiderivative_map(sf.constant(1.0), 0.0)
    x = np.linspace(-20, 20, 9)
    np.testing.assert_allclose(F(x), x, atol=1e-12)


def test_antiderivative_of_identity_is_log():
    F = sf.antiderivative_map(sf.ExprMap(lambda u: u, (0.0, math.inf)), 1.0)
    assert F(math.e) == pytest.approx(1.0, abs=1e-12)
    assert F.deriv(3.0) == pytest.approx(1 / 3, rel=1e-14)


def test_antiderivative_rejects_sign_change():
    with pytest.raises(NotPositive):
        sf.antiderivative_map(sf.sin_map(), 1.0, domain=(-1.0, 3.0))


def test_conjugator_matches_high_precision_quadrature(conj1, frozen):
    assert conj1(-math.pi) == 0.0
    for x, v in frozen["conjugator_k1"].items():
        assert conj1(float(x)) == pytest.approx(v, abs=1e-10)


def test_conjugator_strictly_increasing(conj1):
    x = np.linspace(-2 * math.pi + 0.3, 2 * math.pi - 0.3, 400)
    y = conj1(x)
    assert np.all(np.diff(y) > 0)
    assert conj1(0.0) > 0 > conj1(-1.5 * math.pi)


def test_invert_examples(conj1):
    assert sf.invert(sf.identity(), 3.0) == 3.0
    assert sf.invert(sf.log_map(), 1.0) == pytest.approx(math.e, rel=1e-15)
    assert sf.invert(conj1, 0.0) == pytest.approx(-math.pi, abs=1e-10)
    with pytest.raises(RangeError):
        sf.invert(sf.ExprMap(lambda u: u.arctan(), monotone="increasing"), 2.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-30.0, 30.0), min_size=1, max_size=100))
def test_invert_round_trip(conj1, ys):
    y = np.array(ys)
    assert np.allclose(conj1(conj1.invert(y)), y, atol=1e-9)


# -- pushforward ---------------------------------------------------------------------


def test_pushforward_examples(conj1):
    y = np.linspace(-3, 3, 13)
    euler = sf.pushforward_1d(sf.affine(2.0, 0.0), sf.identity())
    np.testing.assert_allclose(euler(y), y, atol=1e-14)
    log_push = sf.pushforward_1d(sf.log_map(), sf.identity((0.0, math.inf)))
    np.testing.assert_allclose(log_push(y), 1.0, atol=1e-14)
    pushed = sf.pushforward_1d(conj1, sf.ExprMap(lambda u: -u.sin()))
    ys = np.linspace(-5.0, 0.0, 21)
    np.testing.assert_allclose(pushed(ys), ys, atol=1e-9)


def test_pushforward_preserves_zeros(conj1):
    pushed = sf.pushforward_1d(conj1, sf.ExprMap(lambda u: -u.sin()))
    for z in (-math.pi, 0.0, math.pi):
        assert abs(pushed(conj1(z))) < 1e-12


def test_pushforward_is_functorial():
    F = sf.ExprMap(lambda u: u.exp(), monotone="increasing", image=(0.0, math.inf), inverse=np.log)
    G = sf.affine(3.0, -1.0)
    coeff = sf.ExprMap(lambda u: u.sin() + 2.0)
    once = sf.pushforward_1d(G, sf.pushforward_1d(F, coeff))
    both = sf.pushforward_1d(sf.compose(G, F), coeff)
    y = np.linspace(0.5, 20.0, 30)
    np.testing.assert_allclose(once(y), both(y), rtol=1e-8)


def test_pushforward_needs_monotone_map():
    with pytest.raises(RangeError):
        sf.pushforward_1d(sf.sin_map(), sf.identity())


# -- jet consistency --------------------------------------------------------------------


def test_jets_agree_with_finite_differences(conj1):
    fd_check(sf.ExprMap(lambda u: u.exp() * u.cos()), np.linspace(-2, 2, 11))
    fd_check(conj1, np.linspace(-5.5, 5.5, 12))
    fd_check(build_phi_flat(), np.array([-1.1, -0.6, -0.4, -0.2, -0.1]))


def test_piecewise_junctions_are_smooth():
    assert build_phi_flat().junction_mismatch() < 1e-9


def test_monotone_maps_have_positive_slope(conj1):
    x = np.random.default_rng(3).uniform(-6.0, 6.0, 1000)
    assert np.all(conj1.deriv(x) > 0)
