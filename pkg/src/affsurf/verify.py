"""Numerical certification of a built atlas.

Every check returns a record ``{name, status, worst_residual, worst_location,
samples, tolerance, ...}``; ``full_report`` gathers them into a JSON-ready
dictionary.  All sampling is on fixed grids or a seeded generator, so two runs
with the same configuration produce identical reports.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import action
from .atlas import Atlas, Chart, NeatHoleChart, chart_cover_check, overlap_samples
from .series import Series

REPORT_VERSION = 1

# tolerance schedule
TOL_JET = 1e-8
TOL_TRANSITION = 1e-7
TOL_FLOW = 1e-5
SEAM_DELTAS = (0.3, 0.2, 0.1, 0.05)
SEAM_DIRECTIONS = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0))
TOL_SEAM = 1e-8


@dataclass
class VerifyConfig:
    grid: int = 200
    seed: int = 0
    refine_rounds: int = 3
    trials: int = 10
    seeds_per_trial: int = 10
    flow_tol: float = TOL_FLOW
    timing: bool = False


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AFFSURF_THREADS", "1")))
    except ValueError:
        return 1


def _map_charts(fn, charts):
    """Apply ``fn`` to each chart, in parallel when allowed; results keep chart order."""
    charts = list(charts)
    n = min(_threads(), len(charts)) or 1
    if n == 1:
        return [fn(c) for c in charts]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, charts))


def _record(name, worst, where, samples, tol, passed=None, **extra):
    worst = float(worst)
    ok = (worst < tol) if passed is None else bool(passed)
    rec = {"name": name, "status": "pass" if ok else "fail", "worst_residual": worst,
           "worst_location": where, "samples": int(samples), "tolerance": tol}
    rec.update(extra)
    return rec


def _loc(cid, p):
    return {"chart": cid, "coords": [float(v) for v in p]}


def _grid_shape(chart: Chart, grid: int):
    if chart.kind == "plane":
        return grid, grid
    return max(8, grid // 2), max(8, int(0.3 * grid))


def _touches_core(chart: Chart, p: np.ndarray, h1: float, h2: float) -> np.ndarray:
    keep = chart.core(p)
    for s1 in (-0.5, 0.5):
        for s2 in (-0.5, 0.5):
            keep |= chart.core(p + np.array([s1 * h1, s2 * h2]))
    return keep


def _base_grid(chart: Chart, n1: int, n2: int):
    """Centres of grid cells meeting the chart core, plus the cell size.

    Cores cover the surface, so certifying every cell that meets a core
    certifies the whole surface.
    """
    (a0, a1), (b0, b1) = chart.box()
    h1 = (a1 - a0) / n1
    h2 = (b1 - b0) / n2
    u = a0 + h1 * (np.arange(n1) + 0.5)
    v = b0 + h2 * (np.arange(n2) + 0.5)
    U, V = np.meshgrid(u, v, indexing="ij")
    p = np.stack([U.ravel(), V.ravel()], -1)
    return p[_touches_core(chart, p, h1, h2)], h1, h2


# ---------------------------------------------------------------------------
# bracket


def bracket_at(chart: Chart, p: np.ndarray):
    """``(X, Y, [X, Y])`` at points ``p`` using first-order jets along ``X`` and ``Y``."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    X1, X2, Y1, Y2 = chart.series_fields(Series(p[:, 0][None]), Series(p[:, 1][None]))
    X = np.stack([X1.value, X2.value], -1)
    Y = np.stack([Y1.value, Y2.value], -1)
    along = lambda V: (Series(np.stack([p[:, 0], V[:, 0]])), Series(np.stack([p[:, 1], V[:, 1]])))
    _, _, dY1, dY2 = chart.series_fields(*along(X))  # DY . X
    dX1, dX2, _, _ = chart.series_fields(*along(Y))  # DX . Y
    B = np.stack([dY1.c[1] - dX1.c[1], dY2.c[1] - dX2.c[1]], -1)
    return X, Y, B


def bracket_residual(atlas: Atlas, grid_density: int = 200) -> dict:
    def one(chart):
        n1, n2 = _grid_shape(chart, grid_density)
        p = chart.sample(n1, n2)
        _, Y, B = bracket_at(chart, p)
        res = np.linalg.norm(B + Y, axis=-1) / (1.0 + np.linalg.norm(Y, axis=-1))
        res = np.where(np.isfinite(res), res, np.inf)
        k = int(np.argmax(res)) if len(res) else 0
        return chart.id, (float(res[k]) if len(res) else 0.0), (p[k] if len(res) else None), len(p)

    rows = _map_charts(one, atlas.charts.values())
    worst = max(rows, key=lambda r: r[1])
    return _record("bracket_residual", worst[1], _loc(worst[0], worst[2]) if worst[2] is not None else None,
                   sum(r[3] for r in rows), TOL_JET, per_chart={r[0]: r[1] for r in rows})


# ---------------------------------------------------------------------------
# common zeros


def _mu_and_lipschitz(chart: Chart, p: np.ndarray):
    """``mu = max(|X|, |Y|)`` and a local Lipschitz constant from coordinate jets."""
    cols = []
    for k in range(2):
        a = Series(np.stack([p[:, 0], np.full(len(p), 1.0 if k == 0 else 0.0)]))
        b = Series(np.stack([p[:, 1], np.full(len(p), 1.0 if k == 1 else 0.0)]))
        cols.append(chart.series_fields(a, b))
    X = np.stack([cols[0][0].value, cols[0][1].value], -1)
    Y = np.stack([cols[0][2].value, cols[0][3].value], -1)
    mu = np.maximum(np.linalg.norm(X, axis=-1), np.linalg.norm(Y, axis=-1))
    dX = np.sqrt(sum(cols[k][i].c[1] ** 2 for k in range(2) for i in (0, 1)))
    dY = np.sqrt(sum(cols[k][i].c[1] ** 2 for k in range(2) for i in (2, 3)))
    return mu, np.maximum(dX, dY)


def common_zero_scan(atlas: Atlas, grid_density: int = 200, refine_rounds: int = 3,
                     basins: int = 8, extra_rounds: int = 5) -> dict:
    """Floor of ``mu = max(|X|, |Y|)`` per chart with a Lipschitz-padded margin.

    The grid minimum is refined ``refine_rounds`` times by 4x subdivision around
    each of the ``basins`` lowest cells.  A chart passes when its refined floor
    exceeds ten times the local Lipschitz constant times the final resolution.
    Shallow floors keep refining, at most ``extra_rounds`` more times.
    """

    def one(chart):
        n1, n2 = _grid_shape(chart, grid_density)
        p, h1, h2 = _base_grid(chart, n1, n2)
        mu, _ = _mu_and_lipschitz(chart, p)
        samples = len(p)
        order = np.argsort(np.where(np.isfinite(mu), mu, -np.inf))[:basins]
        centres = p[order]
        off = np.arange(-4, 5) / 4.0
        O1, O2 = np.meshgrid(off, off, indexing="ij")
        rounds = 0
        while True:
            if rounds >= refine_rounds:
                mu_c, L_c = _mu_and_lipschitz(chart, centres)
                k = int(np.argmin(np.where(np.isnan(mu_c), -np.inf, mu_c)))
                bound = 10.0 * L_c[k] * 0.5 * math.hypot(h1, h2)
                if mu_c[k] > bound or rounds >= refine_rounds + extra_rounds:
                    break
            offs = np.stack([O1.ravel() * h1, O2.ravel() * h2], -1)
            cand = (centres[:, None, :] + offs[None]).reshape(len(centres), -1, 2)
            flat = cand.reshape(-1, 2)
            ok = chart.inside(flat)
            m, _ = _mu_and_lipschitz(chart, flat)
            m = np.where(ok, m, np.inf).reshape(len(centres), -1)
            m = np.where(np.isnan(m), -np.inf, m)
            samples += int(ok.sum())
            centres = cand[np.arange(len(centres)), np.argmin(m, axis=1)]
            h1, h2 = h1 / 4.0, h2 / 4.0
            rounds += 1
        return chart.id, float(mu_c[k]), centres[k], samples, float(bound), rounds

    rows = _map_charts(one, atlas.charts.values())
    floors = {r[0]: r[1] for r in rows}
    bounds = {r[0]: r[4] for r in rows}
    failing = [r[0] for r in rows if not r[1] > r[4]]
    low = min(rows, key=lambda row: row[1] - row[4])
    delta = min(floors.values())
    return _record("common_zero_scan", delta, _loc(low[0], low[2]), sum(r[3] for r in rows), 0.0,
                   passed=not failing, delta_atlas=delta, floor_per_chart=floors,
                   lipschitz_pad_per_chart=bounds, rounds_per_chart={r[0]: r[5] for r in rows},
                   uncertified_charts=failing)


# ---------------------------------------------------------------------------
# boundary, seams, transitions


def boundary_tangency(atlas: Atlas, n_angles: int = 360) -> dict:
    """Transverse components on every boundary circle (exactly zero) and t-conservation of flows."""
    worst, where, samples = 0.0, None, 0
    drift = 0.0
    theta = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    for b in atlas.boundary:
        chart = atlas.charts[b["chart"]]
        p = np.stack([np.full(n_angles, b["t"]), theta], -1)
        X, Y = chart.values(p)
        trans = np.maximum(np.abs(X[:, 0]), np.abs(Y[:, 0]))
        samples += n_angles
        k = int(np.argmax(trans))
        if trans[k] > worst or where is None:
            worst, where = max(worst, float(trans[k])), _loc(chart.id, p[k])
        pts = action.SurfacePoints(np.full(n_angles, chart.id, dtype=object), p)
        for field in ("X", "Y"):
            q = action.flow(atlas, field, pts, 1.0)
            same = q.charts == chart.id
            d = np.where(same, np.abs(q.coords[:, 0] - b["t"]), np.inf)
            drift = max(drift, float(d.max()))
    passed = worst == 0.0 and drift <= 1e-9
    return _record("boundary_tangency", worst, where, samples, 0.0, passed=passed,
                   circles=len(atlas.boundary), flow_t_drift=drift)


def seam_profile(chart: NeatHoleChart, deltas=SEAM_DELTAS, n_angles: int = 64):
    """``sup_theta |d^m Y|`` at ``t = -delta`` for orders ``m = 0..3`` over the test directions."""
    theta = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    out = np.zeros((len(deltas), 4))
    for i, d in enumerate(deltas):
        t = np.full(n_angles, -d)
        for u1, u2 in SEAM_DIRECTIONS:
            zeros = np.zeros(n_angles)
            a = Series(np.stack([t, np.full(n_angles, u1), zeros, zeros]))
            b = Series(np.stack([theta, np.full(n_angles, u2), zeros, zeros]))
            _, _, Y1, Y2 = chart.series_fields(a, b)
            for m in range(4):
                fact = math.factorial(m)
                v = np.max(np.hypot(Y1.c[m], Y2.c[m])) * fact
                out[i, m] = max(out[i, m], float(v))
    return out


def seam_smoothness(atlas: Atlas) -> dict:
    worst, where, samples = 0.0, None, 0
    monotone = True
    profiles = {}
    for chart in atlas.charts.values():
        if not isinstance(chart, NeatHoleChart):
            continue
        prof = seam_profile(chart)
        samples += prof.size
        profiles[chart.id] = prof.tolist()
        # non-increasing as the seam is approached, for every order
        monotone &= bool(np.all(np.diff(prof, axis=0) <= 0))
        last = float(prof[-1].max())
        if last >= worst:
            worst, where = last, _loc(chart.id, [-SEAM_DELTAS[-1], 0.0])
    passed = worst < TOL_SEAM and monotone
    return _record("seam_smoothness", worst, where, samples, TOL_SEAM, passed=passed,
                   deltas=list(SEAM_DELTAS), non_increasing=monotone, profiles=profiles)


def transition_compat(atlas: Atlas, n: int = 100) -> dict:
    """Push both fields through every transition and compare with the target chart."""
    worst, where, samples = 0.0, None, 0
    per = {}
    for tr in atlas.transitions:
        src, dst = atlas.charts[tr.source], atlas.charts[tr.target]
        p = overlap_samples(atlas, tr, n)
        if not len(p):
            per[tr.id] = None
            continue
        q, _ = atlas.apply(tr, 1, p)
        J = tr.jac(p)
        Xs, Ys = src.values(p)
        Xd, Yd = dst.values(q)
        push = lambda V: np.einsum("nij,nj->ni", J, V)
        res = np.maximum(np.abs(push(Xs) - Xd) / (1.0 + np.abs(Xd)), np.abs(push(Ys) - Yd) / (1.0 + np.abs(Yd)))
        res = np.where(np.isfinite(res), res, np.inf).max(-1)
        k = int(np.argmax(res))
        per[tr.id] = float(res[k])
        samples += len(p)
        if res[k] >= worst:
            worst, where = float(res[k]), _loc(src.id, p[k])
    return _record("transition_compat", worst, where, samples, TOL_TRANSITION, per_transition=per)


# ---------------------------------------------------------------------------
# topology


def orientability(atlas: Atlas, cover: dict | None = None) -> dict:
    cover = cover or chart_cover_check(atlas)
    expected = bool(atlas.spec.orientable)
    ok = cover["orientable"] == expected and cover["signs_constant"]
    return _record("orientability", 0.0 if ok else 1.0, None, len(atlas.transitions), 0.5, passed=ok,
                   orientable=cover["orientable"], expected=expected, signs_constant=cover["signs_constant"])


def euler_characteristic(atlas: Atlas) -> dict:
    spec_chi = atlas.spec.chi
    plan_chi = atlas.plan.chi
    census = atlas.chi()
    ok = spec_chi == plan_chi == census
    return _record("euler_characteristic", abs(census - spec_chi), None, 1, 0.5, passed=ok,
                   spec=spec_chi, plan=plan_chi, census=census)


def hole_ledger(atlas: Atlas) -> dict:
    problems = []
    counts = {"open": 0, "truncated": 0, "glued": 0, "capped": 0}
    for h in atlas.holes.values():
        counts[h.status] = counts.get(h.status, 0) + 1
        if h.status == "open":
            problems.append(f"{h.id} open")
        if h.status == "glued":
            other = atlas.holes.get(h.partner)
            if other is None or other.partner != h.id:
                problems.append(f"{h.id} glued asymmetrically")
        if h.status == "truncated" and not (h.b_cut and h.b_cut > 0):
            problems.append(f"{h.id} has no cut")
    plan = atlas.plan
    expect_trunc = len(plan.truncations)
    if counts["truncated"] != expect_trunc or len(atlas.boundary) != atlas.spec.boundary:
        problems.append("boundary count mismatch")
    return _record("hole_ledger", float(len(problems)), None, len(atlas.holes), 0.5,
                   passed=not problems, counts=counts, problems=problems)


def chart_cover(atlas: Atlas, cover: dict | None = None) -> dict:
    cover = cover or chart_cover_check(atlas)
    worst = max((t["round_trip"] for t in cover["transitions"]), default=0.0)
    return _record("chart_cover", worst, None, sum(t["samples"] for t in cover["transitions"]), 1e-7,
                   passed=worst < 1e-7 and cover["ledger_closed"])


def no_fixed_point(atlas: Atlas, m: int, seed: int) -> dict:
    """Displacement after unit time along ``X`` or ``Y`` is bounded away from zero on samples."""
    rng = np.random.default_rng(seed + 1)
    pts = action.sample_points(atlas, m, rng)
    disp = action.displacement_floor(atlas, pts)
    k = int(np.argmin(disp))
    return _record("no_fixed_point", float(disp[k]), _loc(str(pts.charts[k]), pts.coords[k]), m, 0.0,
                   passed=bool(disp[k] > 0), delta=float(disp[k]))


# ---------------------------------------------------------------------------


def full_report(atlas: Atlas, config: VerifyConfig | None = None) -> dict:
    cfg = config or VerifyConfig()
    start = time.perf_counter()
    cover = chart_cover_check(atlas)
    records = [
        bracket_residual(atlas, cfg.grid),
        common_zero_scan(atlas, cfg.grid, cfg.refine_rounds),
        boundary_tangency(atlas),
        seam_smoothness(atlas),
        transition_compat(atlas),
        chart_cover(atlas, cover),
        orientability(atlas, cover),
        euler_characteristic(atlas),
        hole_ledger(atlas),
    ]
    records += action.verify_homomorphism(atlas, cfg.trials, cfg.seeds_per_trial,
                                          threshold=cfg.flow_tol, seed=cfg.seed)
    records.append(no_fixed_point(atlas, 64, cfg.seed))
    runtime = round(1000 * (time.perf_counter() - start)) if cfg.timing else None
    return {
        "version": REPORT_VERSION,
        "spec": atlas.spec.to_dict(),
        "plan": atlas.plan.summary(),
        "faults": atlas.faults,
        "config": asdict(cfg),
        "records": records,
        "pass": all(r["status"] == "pass" for r in records),
        "seed": cfg.seed,
        "runtime_ms": runtime,
    }


def failing(report: dict) -> list[str]:
    return [r["name"] for r in report["records"] if r["status"] != "pass"]
