import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affsurf.action import (IDENTITY, AffElement, SurfacePoints, act, canon_coords, displacement_floor, distance,
                            flow, from_canon, verify_homomorphism)
from affsurf.atlas import SurfaceSpec, build_surface

finite = st.floats(-5, 5, allow_nan=False)
positive = st.floats(0.05, 20, allow_nan=False)


@pytest.fixture(scope="module")
def disk():
    return build_surface(SurfaceSpec(True, 0, 1))


@pytest.fixture(scope="module")
def torus():
    return build_surface(SurfaceSpec(True, 1, 0))


def at(atlas, pts, chart, coords):
    return distance(atlas, pts, SurfacePoints.single(chart, coords))[0]


# -- group algebra -------------------------------------------------------------------


def test_affine_products():
    g = AffElement(2, 3) * AffElement(4, 5)
    assert (g.a, g.b) == (8, 13)
    h = AffElement(2, 3).inverse()
    assert (h.a, h.b) == (0.5, -1.5)
    assert AffElement(2, 3) * h == IDENTITY
    with pytest.raises(ValueError):
        AffElement(0, 1)
    with pytest.raises(ValueError):
        AffElement(-1, 1)


def test_canonical_coordinates():
    cc = canon_coords(AffElement(math.e, 0))
    assert (cc.s, cc.u) == pytest.approx((1, 0))
    cc = canon_coords(AffElement(math.e, math.e))
    assert (cc.s, cc.u) == pytest.approx((1, 1))


@given(positive, finite, positive, finite, finite)
@settings(max_examples=60, deadline=None)
def test_algebra_properties(a1, b1, a2, b2, x):
    g1, g2 = AffElement(a1, b1), AffElement(a2, b2)
    assert (g1 * g2)(x) == pytest.approx(g1(g2(x)), rel=1e-12, abs=1e-10)
    back = from_canon(canon_coords(g1))
    assert back.a == pytest.approx(a1, rel=1e-14) and back.b == pytest.approx(b1, rel=1e-12, abs=1e-12)


# -- flows and the action on the linear plane -----------------------------------------


def test_unit_flows_on_linear_plane(disk):
    p = SurfacePoints.single("plane", [1.0, 0.0])
    assert at(disk, flow(disk, "X", p, 1.0), "plane", [math.e, 0.0]) < 1e-12
    o = SurfacePoints.single("plane", [0.0, 0.0])
    assert at(disk, flow(disk, "Y", o, 1.0), "plane", [1.0, 0.0]) < 1e-12


@pytest.mark.parametrize("a,b,x", [(2.0, 0.5, (0.3, -0.2)), (0.5, -1.0, (1.0, 1.5)), (1.3, 0.0, (-1.2, 0.4))])
def test_action_is_affine_on_linear_plane(disk, a, b, x):
    q = act(disk, AffElement(a, b), SurfacePoints.single("plane", x))
    assert at(disk, q, "plane", [a * x[0] + b, a * x[1]]) < 1e-11


@pytest.mark.parametrize("c", [1.0, -2.0])
def test_action_rotates_deep_hole(c):
    atlas = build_surface(SurfaceSpec(True, 1, 0), {"inf": c})
    a = 2.0
    q = act(atlas, AffElement(a, 0.7), SurfacePoints.single("p0", [0.5, 1.0]))
    assert at(atlas, q, "p0", [0.5, 1.0 + c * math.log(a)]) < 1e-12


def test_action_matches_integrated_flows(torus, frozen):
    for case in frozen["plane1_actions"]:
        q = act(torus, AffElement(case["a"], case["b"]), SurfacePoints.single("plane", case["p"]))
        assert at(torus, q, "plane", case["q"]) < 1e-9


def test_exact_and_runge_kutta_agree(torus):
    # away from the steep onsets of the cut-offs, where adaptive stepping crawls
    xy = np.array([[-1.24, -0.79], [-1.22, -0.2], [-0.06, -1.02]])
    pts = SurfacePoints(np.array(["plane"] * 3, dtype=object), xy)
    for field in ("X", "Y"):
        sel = pts if field == "X" else SurfacePoints(pts.charts[:1], pts.coords[:1])
        ex = flow(torus, field, sel, 0.5)
        rk = flow(torus, field, sel, 0.5, tol=1e-9, method="rk")
        assert distance(torus, ex, rk).max() < 1e-7


def test_flow_argument_checks(torus):
    p = SurfacePoints.single("plane", [0.0, 0.0])
    with pytest.raises(ValueError):
        flow(torus, "Z", p, 1.0)
    with pytest.raises(ValueError):
        flow(torus, "X", p, 1.0, method="euler")
    with pytest.raises(ValueError):
        flow(torus, "X", SurfacePoints.single("nowhere", [0.0, 0.0]), 1.0)


# -- laws on compact surfaces ---------------------------------------------------------


@pytest.mark.parametrize("key", [(True, 1, 0), (False, 2, 0)])
def test_homomorphism_laws(key):
    atlas = build_surface(SurfaceSpec(*key))
    recs = verify_homomorphism(atlas, trials=10, seeds=10, seed=1)
    for r in recs:
        assert r["status"] == "pass", r


def test_no_fixed_points_on_torus(torus):
    rng = np.random.default_rng(0)
    from affsurf.action import sample_points

    floor = displacement_floor(torus, sample_points(torus, 64, rng))
    assert floor.min() > 1e-3
