"""The affine group of the line and its action on a built surface.

``rho(a, b) = Phi^X_{ln a} o Phi^Y_{b/a}``: flow along ``Y`` for ``b/a``,
then along ``X`` for ``ln a``.  On the line model ``X = x d/dx``,
``Y = d/dx`` this is exactly ``x -> a x + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atlas import TWO_PI, Atlas, MobiusHoleChart, NeatHoleChart, PlaneChart, StripChart, chart_distance
from .errors import StiffnessError
from .ode import dp5_step, step_factor


@dataclass(frozen=True)
class AffElement:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)) or not math.isfinite(self.b):
            raise ValueError("an orientation-preserving affine map needs a > 0")

    def __mul__(self, other: "AffElement") -> "AffElement":
        return aff_mul(self, other)

    def inverse(self) -> "AffElement":
        return AffElement(1.0 / self.a, -self.b / self.a)

    def __call__(self, x):
        return self.a * x + self.b


IDENTITY = AffElement(1.0, 0.0)


def aff_mul(g1: AffElement, g2: AffElement) -> AffElement:
    return AffElement(g1.a * g2.a, g1.a * g2.b + g1.b)


@dataclass(frozen=True)
class CanonCoords:
    s: float
    u: float


def canon_coords(g: AffElement) -> CanonCoords:
    return CanonCoords(math.log(g.a), g.b / g.a)


def from_canon(cc: CanonCoords) -> AffElement:
    a = math.exp(cc.s)
    return AffElement(a, a * cc.u)


# ---------------------------------------------------------------------------
# flows across charts


@dataclass
class SurfacePoints:
    """A batch of surface points, each given in its own chart."""

    charts: np.ndarray  # object array of chart ids
    coords: np.ndarray  # (N, 2)

    @staticmethod
    def single(chart: str, coords) -> "SurfacePoints":
        return SurfacePoints(np.array([chart], dtype=object), np.asarray(coords, dtype=float).reshape(1, 2))

    def __len__(self):
        return len(self.coords)

    def copy(self) -> "SurfacePoints":
        return SurfacePoints(self.charts.copy(), self.coords.copy())


_FIELD = {"X": 0, "Y": 1}


def _settle(atlas: Atlas, pts: SurfacePoints, idx: np.ndarray):
    """Re-home points of ``idx`` that are outside their chart's inside region."""
    for cid in sorted(set(pts.charts[idx])):
        sel = idx[pts.charts[idx] == cid]
        chart = atlas.charts[cid]
        out = sel[~chart.inside(pts.coords[sel])]
        if len(out):
            new_ids, q = atlas.relocate(cid, pts.coords[out])
            pts.charts[out] = new_ids
            pts.coords[out] = q


def _check_points(atlas: Atlas, pts: SurfacePoints):
    for cid in set(pts.charts):
        if cid not in atlas.charts:
            raise ValueError(f"unknown chart {cid!r}")
        sel = pts.charts == cid
        if not np.all(atlas.charts[cid].in_domain(pts.coords[sel])):
            raise ValueError(f"point outside the domain of chart {cid}")


def flow(atlas: Atlas, field: str, pts: SurfacePoints, time, tol: float = 1e-9,
         method: str = "exact") -> SurfacePoints:
    """Time-``time`` map of ``field`` ('X' or 'Y'), per point.

    ``method="exact"`` composes closed-form flows chart by chart;
    ``method="rk"`` integrates the coefficient functions with an embedded
    Runge-Kutta pair to tolerance ``tol``, switching charts at the margins.
    """
    if field not in _FIELD:
        raise ValueError("field must be 'X' or 'Y'")
    if method == "rk":
        return flow_rk(atlas, field, pts, time, tol)
    if method != "exact":
        raise ValueError(f"unknown flow method {method!r}")
    return flow_exact(atlas, field, pts, time)


def flow_rk(atlas: Atlas, field: str, pts: SurfacePoints, time, tol: float = 1e-9,
            max_steps: int = 20_000) -> SurfacePoints:
    comp = _FIELD[field]
    pts = pts.copy()
    n = len(pts)
    time = np.broadcast_to(np.asarray(time, dtype=float), (n,))
    _check_points(atlas, pts)
    _settle(atlas, pts, np.arange(n))
    direction = np.sign(time)
    remaining = np.abs(time)
    h = np.minimum(0.05, remaining)
    rtol = atol = tol / 10.0
    for _ in range(max_steps):
        active = np.nonzero(remaining > 0)[0]
        if not len(active):
            return pts
        for cid in sorted(set(pts.charts[active])):
            idx = active[pts.charts[active] == cid]
            chart = atlas.charts[cid]
            f = lambda z, chart=chart: chart.values(z)[comp]
            with np.errstate(all="ignore"):
                st = dp5_step(f, pts.coords[idx], h[idx] * direction[idx], rtol, atol)
            err = np.where(np.isfinite(st.err), st.err, np.inf)
            ok = err <= 1.0
            acc = idx[ok]
            pts.coords[acc] = chart.wrap(st.y_new[ok])
            remaining[acc] -= h[acc]
            h[idx] *= np.where(np.isfinite(st.err), step_factor(np.nan_to_num(st.err)), 0.2)
            if np.any(h[idx] < 1e-13):
                raise StiffnessError(f"step size underflow in chart {cid}")
            _settle(atlas, pts, acc)
        remaining = np.where(remaining < 1e-14 * np.maximum(1.0, np.abs(time)), 0.0, remaining)
        h = np.minimum(h, np.where(remaining > 0, remaining, h))
    raise StiffnessError("step budget exhausted")


# ---------------------------------------------------------------------------
# closed-form flows
#
# On a base plane the product fields have exact flows (conjugated 1D flows).
# A hole chart below t = 0 is the same plane seen in other coordinates, and
# on the neat parts, strips and Moebius holes the fields are constant.


def _plane_home(atlas: Atlas, plane_id: str, x: np.ndarray):
    """Chart ids and coordinates for points given in the coordinates of ``plane_id``."""
    chart = atlas.charts[plane_id]
    ids = np.full(len(x), plane_id, dtype=object)
    q = np.array(x, dtype=float, copy=True)
    out = ~chart.inside(x)
    if out.any():
        ids[out], q[out] = atlas.relocate(plane_id, x[out])
    return ids, q


def _hole_x_flow(ch: NeatHoleChart, p: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Exact ``X`` flow inside a twisted hole chart (points stay in the chart)."""
    hole = ch.hole
    T = hole.radial.T
    eps = hole.eps
    t, th = p[:, 0].copy(), p[:, 1].copy()
    neat = t >= 0
    if hole.twist:
        th[neat] += hole.c * s[neat]
    neg = ~neat
    if neg.any():
        tn, sn = t[neg], s[neg]
        T0 = T(tn)
        T1 = T0 + sn
        t1 = T.invert(T1)
        if hole.twist:
            # d theta / ds = c g'(t) phi(t) with g = e^{-1/t}; equal to c once t >= -eps
            Te = T(-eps)
            lo, hi = np.minimum(T0, T1), np.maximum(T0, T1)
            below_hi = np.minimum(hi, Te)
            t_a, t_b = T.invert(np.minimum(lo, Te)), T.invert(below_hi)
            with np.errstate(over="ignore"):
                part = np.where(lo < Te, np.exp(-1.0 / t_b) - np.exp(-1.0 / t_a), 0.0)
            # time spent above -eps, from moderate numbers only (T itself may be huge)
            part += np.abs(sn) - (below_hi - np.minimum(lo, Te))
            th[neg] += hole.c * np.sign(sn) * part
        t[neg] = t1
    return np.stack([t, np.mod(th, TWO_PI)], -1)


def _puncture_y_flow(ch: NeatHoleChart, p: np.ndarray, s: np.ndarray):
    """``Y`` flow near a puncture in scaled form ``u = R e``, where ``Y = (u1^2, u2^2)``.

    Returns the new points and a mask of those whose orbit stayed in the
    normal-form box (the others must be redone in planar coordinates).
    """
    hole = ch.hole
    T = hole.radial.T
    t, th = p[:, 0], p[:, 1]
    theta0 = hole.untwist_angle(t, th)
    R = np.exp(-T(t))
    e1, e2 = np.cos(theta0), np.sin(theta0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f1, f2 = e1 / (1.0 - s * R * e1), e2 / (1.0 - s * R * e2)
    pf = hole.PF
    ok = ((1.0 - s * R * e1 > 0) & (1.0 - s * R * e2 > 0)
          & (R * np.abs(f1) <= pf.pair1.near_radius) & (R * np.abs(f2) <= pf.pair2.near_radius))
    out = p.copy()
    if ok.any():
        f1, f2 = f1[ok], f2[ok]
        t_new = T.invert(T(t[ok]) - np.log(np.hypot(f1, f2)))
        out[ok] = np.stack([t_new, hole.twist_angle(t_new, np.arctan2(f2, f1))], -1)
    return out, ok


# beyond this flow time planar coordinates no longer resolve the angle at infinity
_INF_PLANAR_LIMIT = 12.0


def _exact_move(atlas: Atlas, field: str, cid: str, p: np.ndarray, s: np.ndarray):
    chart = atlas.charts[cid]
    if field == "Y":
        s = s * chart.y_scale
    if isinstance(chart, PlaneChart):
        PF = chart.PF
        x = PF.flow_X(p, s) if field == "X" else PF.flow_Y(p, s)
        return _plane_home(atlas, cid, x)
    if isinstance(chart, StripChart):
        q = p.copy()
        if field == "X":
            y1 = q[:, 0] + chart.c * s
            k = np.floor(y1 / math.pi)
            q[:, 0] = y1 - k * math.pi
            q[:, 1] *= np.where(np.mod(k, 2) == 0, 1.0, -1.0)
        return np.full(len(q), cid, dtype=object), q
    if isinstance(chart, MobiusHoleChart):
        q = p.copy()
        if field == "X":
            q[:, 1] = np.mod(q[:, 1] + chart.c * s, TWO_PI)
        return np.full(len(q), cid, dtype=object), q
    if not isinstance(chart, NeatHoleChart):
        raise TypeError(f"no closed-form flow on chart kind {chart.kind}")

    hole = chart.hole
    T = hole.radial.T
    t = p[:, 0]
    ids = np.full(len(p), cid, dtype=object)
    q = p.copy()
    via_plane = np.zeros(len(p), dtype=bool)
    if field == "X":
        stays = t >= 0
        neg = ~stays
        if neg.any():
            # stay in the chart when the whole orbit segment does
            stays[neg] = T(t[neg]) + s[neg] > T(chart.t_dom_lo + 1e-9)
        if stays.any():
            q[stays] = _hole_x_flow(chart, p[stays], s[stays])
        via_plane = ~stays
    else:
        live = t < hole.radial.t_cut
        if hole.kind == "puncture":
            # the local normal form is exact and keeps full precision near the zero
            idx = np.nonzero(live)[0]
            if len(idx):
                q[idx], ok = _puncture_y_flow(chart, p[idx], s[idx])
                live[idx[ok]] = False
        else:
            deep = live.copy()
            deep[live] = T(t[live]) > _INF_PLANAR_LIMIT
            if deep.any():
                # Y is of size e^{-T} here; integrate it in the chart itself
                sub = flow_rk(atlas, "Y", SurfacePoints(ids[deep], p[deep]), s[deep] / chart.y_scale)
                ids[deep], q[deep] = sub.charts, sub.coords
                live &= ~deep
        via_plane = live
    if via_plane.any():
        x = hole.to_plane(p[via_plane])
        PF = hole.PF
        x = PF.flow_X(x, s[via_plane]) if field == "X" else PF.flow_Y(x, s[via_plane])
        ids[via_plane], q[via_plane] = _plane_home(atlas, chart.plane_id, x)
    same = ids == cid
    q[same] = chart.wrap(q[same])
    out = same & ~chart.inside(q)
    if out.any():
        ids[out], q[out] = atlas.relocate(cid, q[out])
    return ids, q


def flow_exact(atlas: Atlas, field: str, pts: SurfacePoints, time) -> SurfacePoints:
    pts = pts.copy()
    n = len(pts)
    time = np.broadcast_to(np.asarray(time, dtype=float), (n,)).copy()
    _check_points(atlas, pts)
    _settle(atlas, pts, np.arange(n))
    groups = [(cid, np.nonzero(pts.charts == cid)[0]) for cid in sorted(set(pts.charts))]
    for cid, sel in groups:
        moving = sel[time[sel] != 0]
        if len(moving):
            pts.charts[moving], pts.coords[moving] = _exact_move(atlas, field, cid, pts.coords[moving], time[moving])
    return pts


def act(atlas: Atlas, g, pts: SurfacePoints, tol: float = 1e-9, method: str = "exact") -> SurfacePoints:
    """``rho(g)`` applied to ``pts``; ``g`` is an AffElement or arrays ``(a, b)`` per point."""
    if isinstance(g, AffElement):
        s, u = math.log(g.a), g.b / g.a
    else:
        a, b = (np.asarray(v, dtype=float) for v in g)
        if np.any(a <= 0):
            raise ValueError("an orientation-preserving affine map needs a > 0")
        s, u = np.log(a), b / a
    return flow(atlas, "X", flow(atlas, "Y", pts, u, tol, method), s, tol, method)


def distance(atlas: Atlas, p: SurfacePoints, q: SurfacePoints) -> np.ndarray:
    """Coordinate distance, measured in the chart of ``p`` (``inf`` if no common chart is found)."""
    out = np.full(len(p), np.inf)
    for cid in sorted(set(p.charts)):
        sel = np.nonzero(p.charts == cid)[0]
        for qc in sorted(set(q.charts[sel])):
            sub = sel[q.charts[sel] == qc]
            qq, ok = atlas.express(qc, q.coords[sub], cid)
            d = chart_distance(atlas.charts[cid], p.coords[sub], qq)
            out[sub] = np.where(ok, d, np.inf)
    return out


def sample_points(atlas: Atlas, m: int, rng: np.random.Generator) -> SurfacePoints:
    """``m`` seed points spread over the charts' core regions."""
    ids = list(atlas.charts)
    pools = {}
    for cid in ids:
        ch = atlas.charts[cid]
        grid = ch.sample(41, 41)
        pools[cid] = grid[ch.core(grid)]
    ids = [c for c in ids if len(pools[c])]
    which = rng.integers(0, len(ids), m)
    charts = np.array([ids[k] for k in which], dtype=object)
    coords = np.array([pools[ids[k]][rng.integers(0, len(pools[ids[k]]))] for k in which]).reshape(-1, 2)
    return SurfacePoints(charts, coords)


def _record(name, worst, where, samples, tol, **extra):
    rec = {"name": name, "status": "pass" if worst < tol else "fail", "worst_residual": float(worst),
           "worst_location": where, "samples": int(samples), "tolerance": tol}
    rec.update(extra)
    return rec


def _where(pts: SurfacePoints, d: np.ndarray):
    if not len(d):
        return None
    k = int(np.argmax(d))
    return {"chart": str(pts.charts[k]), "coords": [float(v) for v in pts.coords[k]]}


def verify_homomorphism(atlas: Atlas, trials: int = 50, seeds: int = 20, tol: float = 1e-9,
                        threshold: float = 1e-5, seed: int = 0) -> list[dict]:
    """Group law ``rho(g1 g2) = rho(g1) rho(g2)`` and the flow commutation law."""
    rng = np.random.default_rng(seed)
    s1, u1, s2, u2 = rng.uniform(-1, 1, (4, trials))
    pts = sample_points(atlas, trials * seeds, rng)
    rep = lambda v: np.repeat(v, seeds)
    a1, b1 = np.exp(rep(s1)), np.exp(rep(s1)) * rep(u1)
    a2, b2 = np.exp(rep(s2)), np.exp(rep(s2)) * rep(u2)
    lhs = act(atlas, (a1 * a2, a1 * b2 + b1), pts, tol)
    rhs = act(atlas, (a1, b1), act(atlas, (a2, b2), pts, tol), tol)
    d_law = distance(atlas, lhs, rhs)

    s, u = rep(s1), rep(u1)
    left = flow(atlas, "X", flow(atlas, "Y", pts, u, tol), s, tol)
    right = flow(atlas, "Y", flow(atlas, "X", pts, s, tol), np.exp(s) * u, tol)
    d_comm = distance(atlas, left, right)
    return [
        _record("action_law", d_law.max(), _where(lhs, d_law), len(pts), threshold, trials=trials, seed=seed),
        _record("flow_commutation", d_comm.max(), _where(left, d_comm), len(pts), threshold, seed=seed),
    ]


def displacement_floor(atlas: Atlas, pts: SurfacePoints, tol: float = 1e-9) -> np.ndarray:
    """Per point, the larger displacement after unit time along ``X`` and along ``Y``."""
    dx = distance(atlas, pts, flow(atlas, "X", pts, 1.0, tol))
    dy = distance(atlas, pts, flow(atlas, "Y", pts, 1.0, tol))
    return np.maximum(dx, dy)
