import json
import math

import numpy as np
import pytest

from affsurf.atlas import (Atlas, SurfaceSpec, build_surface, chart_cover_check, chart_distance, glue_pair,
                           load_atlas, overlap_samples, plan_surgery, reflection, rotation, truncate)
from affsurf.errors import HoleUnavailable, InvalidSpec, ParamIncompatible

PLANS = {
    # (orientable, genus, boundary): (n, holes, gluings, truncations, caps, chi)
    (True, 1, 0): (1, 2, 1, 0, [], 0),
    (True, 0, 1): (0, 1, 0, 1, [], 1),
    (False, 1, 0): (0, 1, 0, 0, ["mobius"], 1),
    (True, 2, 1): (4, 5, 2, 1, [], -3),
    (False, 2, 0): (1, 2, 0, 0, ["mobius", "mobius"], 0),
    (True, 0, 0): (0, 1, 0, 0, ["disk"], 2),
}


@pytest.mark.parametrize("key", list(PLANS))
def test_plan_shapes(key):
    n, holes, glues, truncs, caps, chi = PLANS[key]
    plan = plan_surgery(SurfaceSpec(*key))
    assert plan.n == n and len(plan.holes) == holes
    assert len(plan.gluings) == glues and len(plan.truncations) == truncs
    assert [c["kind"] for c in plan.caps] == caps
    assert plan.chi == chi == SurfaceSpec(*key).chi


@pytest.mark.parametrize("bad", [(True, -1, 0), (True, 1, 1.5), (False, 0, 0), ("yes", 1, 0)])
def test_bad_spec(bad):
    with pytest.raises(InvalidSpec):
        SurfaceSpec(*bad)


def test_hole_params_checked():
    with pytest.raises(InvalidSpec):
        plan_surgery(SurfaceSpec(True, 1, 0), {"p7": 1.0})
    with pytest.raises(InvalidSpec):
        plan_surgery(SurfaceSpec(True, 1, 0), {"inf": 0})
    with pytest.raises(ParamIncompatible):
        plan_surgery(SurfaceSpec(True, 1, 0), {"inf": 2.0, "p0": -2.0})
    # the torus pair is glued by a rotation, so the partner inherits the same parameter
    assert plan_surgery(SurfaceSpec(True, 1, 0), {"inf": 2.0}).params["p0"] == 2.0


def bare_plane(params):
    atlas = Atlas()
    atlas.add_plane("", 1, params)
    return atlas


def test_gluing_parameter_rule():
    glue_pair(bare_plane({"inf": 1.0, "p0": 1.0}), "inf", "p0", rotation(math.pi / 3))
    with pytest.raises(ParamIncompatible):
        glue_pair(bare_plane({"inf": 1.0, "p0": 1.0}), "inf", "p0", reflection())
    glue_pair(bare_plane({"inf": 1.0, "p0": -1.0}), "inf", "p0", reflection())
    with pytest.raises(HoleUnavailable):
        glue_pair(bare_plane({"inf": 1.0, "p0": 1.0}), "inf", "inf", rotation())


def test_gluing_round_trip():
    atlas = glue_pair(bare_plane({"inf": 1.0, "p0": 1.0}), "inf", "p0", rotation(math.pi / 3))
    tr = atlas.transitions[-1]
    p = np.array([[3.0, 1.0]])
    q = tr.fwd(p)
    np.testing.assert_allclose(q, [[1 / 3, 1.0 + math.pi / 3]], rtol=1e-15)
    np.testing.assert_allclose(tr.inv(q), p, rtol=1e-15)
    assert tr.sign == -1 and np.linalg.det(tr.jac(p)[0]) < 0


def test_truncation_collar():
    atlas = truncate(bare_plane({"inf": 1.0, "p0": 1.0}), "inf", 1.0)
    assert atlas.boundary == [{"chart": "inf", "t": 1.0}]
    inf = atlas.charts["inf"]
    assert inf.core(np.array([[0.9, 0.0]]))[0] and not inf.in_domain(np.array([[1.01, 0.0]]))[0]
    with pytest.raises(HoleUnavailable):
        truncate(atlas, "inf")


def test_mobius_identifications():
    atlas = build_surface(SurfaceSpec(False, 1, 0))
    edge, plus, minus = atlas.transitions[1:4]
    np.testing.assert_allclose(edge.inv(np.array([[0.0, 5.0]])), [[math.pi, -5.0]])
    np.testing.assert_allclose(plus.fwd(np.array([[1.0, 2.0]])), [[2.0, 1.0]])
    np.testing.assert_allclose(minus.fwd(np.array([[1.0, -2.0]])), [[2.0, 1.0 + math.pi]])
    assert not atlas.orientation_coloring()[0]


def test_sphere_charts_and_signs():
    atlas = build_surface(SurfaceSpec(True, 0, 0))
    assert list(atlas.charts) == ["plane", "inf", "cap0.plane", "cap0.inf"]
    assert [t.sign for t in atlas.transitions] == [1, 1, -1]
    assert atlas.orientation_coloring()[0] and atlas.chi() == 2
    for tr in atlas.transitions:
        p = overlap_samples(atlas, tr, 20)
        assert len(p) > 0
        assert np.all(np.sign(np.linalg.det(tr.jac(p))) == tr.sign)


@pytest.mark.parametrize("key", [(True, 1, 0), (False, 2, 0), (True, 0, 2)])
def test_chart_round_trips(key):
    atlas = build_surface(SurfaceSpec(*key))
    out = chart_cover_check(atlas, 50)
    assert out["round_trip_max"] < 1e-7 and out["pass"]
    assert atlas.orientation_coloring()[0] == key[0]
    assert atlas.chi() == SurfaceSpec(*key).chi


def test_express_reaches_hole_chart():
    atlas = build_surface(SurfaceSpec(True, 1, 0))
    hole = atlas.charts["p0"].hole
    p = np.array([[-0.35, 1.0]])
    x = hole.to_plane(p)
    q, ok = atlas.express("plane", x, "p0")
    assert ok[0] and chart_distance(atlas.charts["p0"], q, p)[0] < 1e-9


def test_serialization_round_trip():
    atlas = build_surface(SurfaceSpec(True, 2, 1), {"inf": -1.5})
    text = atlas.to_json()
    again = load_atlas(text)
    assert again.to_json() == text
    assert json.loads(text)["plan"]["params"]["inf"] == -1.5
    with pytest.raises(InvalidSpec):
        load_atlas({"format": "something-else"})
    with pytest.raises(InvalidSpec):
        load_atlas({**json.loads(text), "version": 99})
