import json

import numpy as np
import pytest

from affsurf import verify
from affsurf.atlas import SurfaceSpec, build_surface, default_fault, with_faults


@pytest.fixture(scope="module")
def disk():
    return build_surface(SurfaceSpec(True, 0, 1))


@pytest.fixture(scope="module")
def torus():
    return build_surface(SurfaceSpec(True, 1, 0))


@pytest.fixture(scope="module")
def sphere():
    return build_surface(SurfaceSpec(True, 0, 0))


def test_bracket_on_linear_plane(disk):
    X, Y, B = verify.bracket_at(disk.charts["plane"], np.array([[1.0, 1.0], [-2.0, 0.5]]))
    np.testing.assert_allclose(B, -Y, atol=1e-15)
    rec = verify.bracket_residual(disk, 60)
    assert rec["status"] == "pass" and rec["worst_residual"] < 1e-8
    assert set(rec["per_chart"]) == {"plane", "inf"}


def test_bracket_on_torus(torus):
    rec = verify.bracket_residual(torus, 80)
    assert rec["status"] == "pass" and rec["samples"] > 0


def test_common_zero_scan_certifies(torus):
    rec = verify.common_zero_scan(torus, 80)
    assert rec["status"] == "pass" and rec["uncertified_charts"] == []
    assert rec["delta_atlas"] > 0
    for cid, floor in rec["floor_per_chart"].items():
        assert floor > rec["lipschitz_pad_per_chart"][cid]


def test_boundary_is_tangent(disk):
    rec = verify.boundary_tangency(disk)
    assert rec["status"] == "pass" and rec["circles"] == 1
    assert rec["worst_residual"] == 0.0 and rec["flow_t_drift"] <= 1e-9


def test_seam_profile_decays(torus):
    prof = verify.seam_profile(torus.charts["p0"])
    assert prof.shape == (4, 4)
    assert np.all(np.diff(prof, axis=0) <= 0) and prof[-1].max() < 1e-8
    assert verify.seam_smoothness(torus)["status"] == "pass"


def test_topology_records(torus, disk):
    for atlas in (torus, disk):
        for rec in (verify.orientability(atlas), verify.euler_characteristic(atlas), verify.hole_ledger(atlas),
                    verify.chart_cover(atlas), verify.transition_compat(atlas, 40)):
            assert rec["status"] == "pass", rec["name"]
    assert verify.euler_characteristic(torus)["census"] == 0


def test_record_shape(disk):
    rec = verify.transition_compat(disk, 30)
    assert {"name", "status", "worst_residual", "worst_location", "samples", "tolerance"} <= set(rec)
    assert rec["worst_location"]["chart"] in disk.charts


@pytest.mark.parametrize("kind", ["scale_y", "skip_twist", "flip_param"])
def test_faults_break_transitions(torus, kind):
    bad = with_faults(torus, default_fault(torus, kind))
    rec = verify.transition_compat(bad, 60)
    assert rec["status"] == "fail" and rec["worst_residual"] > 1e-3


def test_skip_twist_leaves_common_zeros(torus):
    bad = with_faults(torus, default_fault(torus, "skip_twist"))
    assert verify.common_zero_scan(bad, 80)["status"] == "fail"


def test_disk_has_no_gluing_to_flip(disk):
    with pytest.raises(ValueError):
        default_fault(disk, "flip_param")


def test_full_report_is_deterministic(sphere):
    cfg = verify.VerifyConfig(grid=60, seed=5)
    a = json.dumps(verify.full_report(sphere, cfg), sort_keys=True)
    b = json.dumps(verify.full_report(sphere, cfg), sort_keys=True)
    assert a == b
    rep = json.loads(a)
    assert rep["pass"] and rep["runtime_ms"] is None and rep["seed"] == 5
    assert verify.failing(rep) == []


def test_finer_grid_keeps_passing(disk):
    coarse = verify.bracket_residual(disk, 200)
    fine = verify.bracket_residual(disk, 400)
    assert fine["samples"] >= coarse["samples"] and fine["status"] == "pass"
    c0 = verify.common_zero_scan(disk, 200)
    c1 = verify.common_zero_scan(disk, 400)
    assert c1["samples"] >= c0["samples"] and c1["status"] == "pass"


def test_thread_count_does_not_change_results(sphere, monkeypatch):
    monkeypatch.setenv("AFFSURF_THREADS", "1")
    one = verify.bracket_residual(sphere, 60)
    monkeypatch.setenv("AFFSURF_THREADS", "4")
    four = verify.bracket_residual(sphere, 60)
    assert one == four
