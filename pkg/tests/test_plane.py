import math

import numpy as np
import pytest

from affsurf import smoothfn as sf
from affsurf.errors import InvalidN, UpstreamInconsistent, ZeroParameter
from affsurf.plane import (EPS_FLAT, build_phi_flat, build_plane_fields, certify_transversality, infinity_chart,
                           lemma2_twist, puncture_chart, radial_conjugator, radial_profile)
from affsurf.series import Series
from helpers import census


@pytest.fixture(scope="module")
def pf1():
    return build_plane_fields(1)


# -- plane fields ------------------------------------------------------------------


def test_linear_plane(frozen):
    PF = build_plane_fields(0)
    X, Y = PF.values(np.array([1.0, 1.0]))
    assert X.tolist() == [1.0, 1.0] and Y.tolist() == [1.0, 0.0]
    assert PF.common_zeros == [] and census(PF, 61) == []
    assert frozen["brackets"]["linear_plane_bracket"] == ["-1", "0"]


@pytest.mark.parametrize("n", [1, 2])
def test_common_zero_census(n):
    PF = build_plane_fields(n)
    want = [(0.5, j / (n + 1)) for j in range(1, n + 1)]
    assert PF.common_zeros == pytest.approx(want)
    got = census(PF)
    assert len(got) == n
    for w in want:
        assert min(np.hypot(g[0] - w[0], g[1] - w[1]) for g in got) < 1e-4


@pytest.mark.parametrize("n", [-1, 1.5])
def test_plane_rejects_bad_n(n):
    with pytest.raises(InvalidN):
        build_plane_fields(n)


def test_plane_flows_are_flows(pf1):
    x = np.array([[0.3, -0.2], [1.7, 0.4], [-2.0, 2.5]])
    for flow in (pf1.flow_X, pf1.flow_Y):
        np.testing.assert_allclose(flow(flow(x, 0.4), 0.5), flow(x, 0.9), atol=1e-10)
    s, u = 0.7, -0.3
    np.testing.assert_allclose(pf1.flow_X(pf1.flow_Y(x, u), s), pf1.flow_Y(pf1.flow_X(x, s), math.exp(s) * u),
                               atol=1e-10)


# -- radial profile ------------------------------------------------------------------


def test_flat_profile(frozen):
    phi = build_phi_flat()
    e = EPS_FLAT
    assert phi(-1.0) == 0.0
    assert phi(-1.0 + e / 2) == pytest.approx(e / 2, abs=1e-15)
    assert phi(-e / 2) == pytest.approx(e * e / 4 * math.exp(-2 / e), rel=1e-14)
    for t, v in frozen["phi_flat"].items():
        assert phi(float(t)) == pytest.approx(v, rel=1e-12, abs=1e-300)
    j = sf.eval_jet(phi, 0.3, 4)
    assert j.value == 0.0 and j.derivs == [0.0] * 4
    with pytest.raises(ValueError):
        build_phi_flat(0.5)


def test_radial_time_and_map(frozen):
    rad = radial_profile()
    for t, v in frozen["radial_time"].items():
        assert rad.T(float(t)) == pytest.approx(v, rel=1e-10)
    f = radial_conjugator(build_phi_flat())
    assert f(1.0) == pytest.approx(-0.5, abs=1e-14)
    assert -1 < f(1e-6) < f(1.0) < f(1e6) < 0
    for r, v in frozen["radial_map"].items():
        assert f(float(r)) == pytest.approx(v, abs=1e-10)
    assert abs(f.deriv(2.0) * 2.0 - build_phi_flat()(f(2.0))) < 1e-8


# -- hole charts ---------------------------------------------------------------------


@pytest.mark.parametrize("c", [1.0, -2.0])
def test_puncture_chart_fields(pf1, c):
    h = puncture_chart(pf1, 0, c)
    X, Y = h.values(np.array([[-0.2, 1.0]]))
    assert X[0, 0] == pytest.approx(0.04 * math.exp(-5.0), rel=1e-13)
    assert X[0, 1] == c
    t = np.linspace(0.0, 3.0, 20)
    th = np.linspace(0, 2 * math.pi, 20)
    X, Y = h.values(np.stack([t, th], -1))
    assert np.all(Y == 0.0) and np.all(X[:, 0] == 0.0) and np.all(X[:, 1] == c)
    X, Y = h.values(np.array([[-0.05, 1.0]]))
    assert np.all(Y == 0.0)


def test_puncture_polar_form(pf1):
    h = puncture_chart(pf1, 0, 1.0)
    rng = np.random.default_rng(0)
    r = rng.uniform(1.0 / (0.9 * h.rho), 40.0, 50)
    th = rng.uniform(0, 2 * math.pi, 50)
    X, _ = h.polar_fields(r, th)
    np.testing.assert_allclose(X[:, 0], r, rtol=1e-12)
    np.testing.assert_allclose(X[:, 1], 0.0, atol=1e-12)


def test_twist_shift(pf1, frozen):
    h = puncture_chart(pf1, 0, 1.0)
    assert h.twist_angle(np.array(-0.3), np.array(0.0)) == pytest.approx(frozen["twist_minus_0p3"], abs=1e-12)
    p = np.array([[-0.38, 0.0], [-0.35, 2.0], [-0.32, 5.0]])
    back = h.from_plane(h.to_plane(p))
    np.testing.assert_allclose(back[:, 0], p[:, 0], atol=1e-10)
    dth = np.angle(np.exp(1j * (back[:, 1] - p[:, 1])))
    np.testing.assert_allclose(dth, 0.0, atol=1e-8)


def test_zero_parameter_rejected(pf1):
    with pytest.raises(ZeroParameter):
        puncture_chart(pf1, 0, 0.0)


def _twist_input():
    phi, T = radial_profile().phi, radial_profile().T

    def y_field(t, th):
        E = (-sf.apply(T, t)).exp()
        return sf.apply(phi, t) * E * th.cos(), E * th.sin()
    return y_field


def _jet_bracket(h, p):
    """``DY.X - DX.Y`` from first-order jets of the chart fields along each axis."""
    n = len(p)
    cols = []
    for d in ((1.0, 0.0), (0.0, 1.0)):
        a = Series(np.stack([p[:, 0], np.full(n, d[0])]))
        b = Series(np.stack([p[:, 1], np.full(n, d[1])]))
        cols.append(h.fields(a, b))
    X = np.stack([cols[0][0].value, cols[0][1].value], -1)
    Y = np.stack([cols[0][2].value, cols[0][3].value], -1)
    DX = np.stack([np.stack([cols[k][0].c[1], cols[k][1].c[1]], -1) for k in (0, 1)], -1)
    DY = np.stack([np.stack([cols[k][2].c[1], cols[k][3].c[1]], -1) for k in (0, 1)], -1)
    B = np.einsum("nij,nj->ni", DY, X) - np.einsum("nij,nj->ni", DX, Y)
    return X, Y, B


def test_generic_twist_keeps_bracket():
    h = lemma2_twist(1.5, _twist_input())
    t = np.linspace(-0.2, 0.4, 13)
    th = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    T, TH = (v.ravel() for v in np.meshgrid(t, th, indexing="ij"))
    X, Y, B = _jet_bracket(h, np.stack([T, TH], -1))
    assert np.all(X[:, 1] == 1.5)
    assert np.max(np.linalg.norm(B + Y, axis=-1) / (1 + np.linalg.norm(Y, axis=-1))) < 1e-6
    assert np.all(Y[T >= 0] == 0.0)


def test_twist_rejects_inconsistent_input():
    with pytest.raises(UpstreamInconsistent):
        # a constant d/dt commutes with X up to phi', nowhere near -Y
        lemma2_twist(1.0, lambda t, th: (t * 0.0 + 1.0, t * 0.0))


# -- infinity ------------------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2])
def test_transversality_certificate(n):
    cert = certify_transversality(build_plane_fields(n))
    assert cert.rho <= 16 and cert.margin >= 1.0
    if n == 0:
        assert cert.rho == 2.0


def test_flow_time_coordinates(frozen):
    inf0 = infinity_chart(build_plane_fields(0), 1.0)
    assert inf0.flow_time(np.array([[math.e * inf0.rho, 0.0]]))[0] == pytest.approx(1.0, abs=1e-12)
    inf1 = infinity_chart(build_plane_fields(1), 1.0)
    for case in frozen["escape_times"]:
        assert case["rho"] == inf1.rho
        assert inf1.flow_time(np.array([case["p"]]))[0] == pytest.approx(case["time"], abs=1e-9)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_x_is_unit_radial_in_flow_time(n):
    inf = infinity_chart(build_plane_fields(n), 1.0)
    rng = np.random.default_rng(n)
    rt = rng.uniform(0.05, 3.0, 50)
    th = rng.uniform(0, 2 * math.pi, 50)
    x1, x2, j12, j22 = inf.foot_map(Series.variable(rt, 1), Series.constant(th, 1))
    X, _ = inf.PF.values(np.stack([x1.value, x2.value], -1))
    # d(foot)/d(rt) equals X, and theta-derivatives complete a frame: X = (1, 0) in (rt, theta)
    J = np.array([[x1.c[1], j12.value], [x2.c[1], j22.value]]).transpose(2, 0, 1)
    comp = np.linalg.solve(J, X[..., None])[..., 0]
    np.testing.assert_allclose(comp[:, 0], 1.0, atol=1e-7)
    np.testing.assert_allclose(comp[:, 1], 0.0, atol=1e-7)
