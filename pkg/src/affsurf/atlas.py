"""Surface assembly: charts, transitions, hole bookkeeping and surgery plans.

A surface is built from a base plane with ``n`` punctures.  Its ``n + 1``
cylindrical ends (one per puncture plus the end at infinity) are then glued
in pairs, cut off into boundary collars, or capped by a disk or a Moebius
strip.  Every chart carries the pair ``(X, Y)`` in its own coordinates.

Each chart has three nested regions used when integrating across charts:
``core`` (where a switched trajectory lands), ``inside`` (where it may stay)
and ``domain`` (where the fields may be evaluated).  The cores cover the
surface, and leaving ``inside`` always lands in some neighbour's core.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import plane as pl
from .errors import AtlasGap, HoleUnavailable, InvalidSpec, ParamIncompatible
from .series import Series

TWO_PI = 2.0 * math.pi
FORMAT = "affsurf-atlas"
VERSION = 1

# relative radii of the planar chart around infinity and around punctures
_R_DOMAIN, _R_INSIDE, _R_CORE = 1.5, 1.45, 1.25
_E_DOMAIN, _E_INSIDE, _E_CORE = 0.5, 0.55, 0.75
# neat-hole t-ranges once a hole is glued
_GLUE_CORE_HI, _GLUE_INSIDE_HI = 2.5, 3.0


# ---------------------------------------------------------------------------
# specs and circle maps


@dataclass(frozen=True)
class SurfaceSpec:
    orientable: bool
    genus: int
    boundary: int

    def __post_init__(self):
        for name in ("genus", "boundary"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise InvalidSpec(f"{name} must be a non-negative integer, got {v!r}")
        if not isinstance(self.orientable, (bool, np.bool_)):
            raise InvalidSpec("orientable must be a boolean")
        if not self.orientable and self.genus < 1:
            raise InvalidSpec("a nonorientable surface needs at least one cross-cap")

    @property
    def chi(self) -> int:
        return (2 - 2 * self.genus if self.orientable else 2 - self.genus) - self.boundary

    def to_dict(self) -> dict:
        return {"orientable": bool(self.orientable), "genus": int(self.genus), "boundary": int(self.boundary)}


@dataclass(frozen=True)
class CircleMap:
    """Element of O(2) acting on angles: ``theta -> +-theta + angle``."""

    reflect: bool = False
    angle: float = 0.0

    @property
    def deriv(self) -> int:
        return -1 if self.reflect else 1

    def __call__(self, theta):
        return np.mod(self.deriv * np.asarray(theta, dtype=float) + self.angle, TWO_PI)

    def inverse(self) -> "CircleMap":
        return self if self.reflect else CircleMap(False, -self.angle)

    def to_dict(self) -> dict:
        return {"kind": "reflection" if self.reflect else "rotation", "angle": float(self.angle)}

    @staticmethod
    def from_dict(d: dict) -> "CircleMap":
        return CircleMap(d.get("kind") == "reflection", float(d.get("angle", 0.0)))


def rotation(angle: float = 0.0) -> CircleMap:
    return CircleMap(False, angle)


def reflection(angle: float = 0.0) -> CircleMap:
    return CircleMap(True, angle)


# ---------------------------------------------------------------------------
# charts


def _norm(v):
    return np.hypot(v[..., 0], v[..., 1])


class Chart:
    kind = "chart"
    periodic = False

    def __init__(self, cid: str):
        self.id = cid
        self.y_scale = 1.0

    # subclasses: raw_fields, in_domain, inside, core, box
    def raw_fields(self, a: Series, b: Series):
        raise NotImplementedError

    def series_fields(self, a: Series, b: Series):
        X1, X2, Y1, Y2 = self.raw_fields(a, b)
        if self.y_scale != 1.0:
            Y1, Y2 = Y1 * self.y_scale, Y2 * self.y_scale
        return X1, X2, Y1, Y2

    def values(self, p: np.ndarray):
        """Fields at points of shape (N, 2); NaN outside the chart domain."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        X = np.full(p.shape, np.nan)
        Y = np.full(p.shape, np.nan)
        ok = self.in_domain(p) & np.all(np.isfinite(p), -1)
        if ok.any():
            q = p[ok]
            X1, X2, Y1, Y2 = self.series_fields(Series(q[:, 0][None]), Series(q[:, 1][None]))
            X[ok] = np.stack([X1.value, X2.value], -1)
            Y[ok] = np.stack([Y1.value, Y2.value], -1)
        return X, Y

    def wrap(self, p: np.ndarray) -> np.ndarray:
        if self.periodic:
            p = np.array(p, dtype=float, copy=True)
            p[..., 1] = np.mod(p[..., 1], TWO_PI)
        return p

    def sample(self, n1: int, n2: int) -> np.ndarray:
        """Regular grid of ``n1 x n2`` intervals over the bounding box, restricted to ``inside``.

        Grids are nested: doubling both counts keeps every previous point.
        """
        (a0, a1), (b0, b1) = self.box()
        u = np.linspace(a0, a1, n1 + 1)
        if self.periodic:
            v = np.linspace(b0, b1, n2, endpoint=False)
        else:
            v = np.linspace(b0, b1, n2 + 1)
        U, V = np.meshgrid(u, v, indexing="ij")
        p = np.stack([U.ravel(), V.ravel()], -1)
        return p[self.inside(p)]

    def describe(self) -> dict:
        (a0, a1), (b0, b1) = self.box()
        return {"id": self.id, "kind": self.kind, "ranges": [[a0, a1], [b0, b1]], "y_scale": self.y_scale}


class PlaneChart(Chart):
    """Planar chart of radius ``1.5 rho_inf`` with small disks cut out around the zeros."""

    kind = "plane"

    def __init__(self, cid: str, PF: pl.PlaneFields, rho_inf: float):
        super().__init__(cid)
        self.PF = PF
        self.rho_inf = float(rho_inf)
        self.zeros = np.array(PF.common_zeros, dtype=float).reshape(-1, 2)
        self.rho = PF.near_radius if PF.n else 0.0

    def raw_fields(self, a, b):
        return self.PF.fields(a, b)

    def _region(self, p, R, e):
        p = np.asarray(p, dtype=float)
        ok = _norm(p) < R * self.rho_inf
        for z in self.zeros:
            ok &= _norm(p - z) > e * self.rho
        return ok

    def in_domain(self, p):
        return self._region(p, _R_DOMAIN, _E_DOMAIN)

    def inside(self, p):
        return self._region(p, _R_INSIDE, _E_INSIDE)

    def core(self, p):
        p = np.asarray(p, dtype=float)
        ok = _norm(p) <= _R_CORE * self.rho_inf
        for z in self.zeros:
            ok &= _norm(p - z) >= _E_CORE * self.rho
        return ok

    def box(self):
        R = _R_INSIDE * self.rho_inf
        return (-R, R), (-R, R)

    def sample(self, n1, n2):
        pts = [super().sample(n1, n2)]
        # the annuli around the cut-outs are thin; sample them in polar form
        if len(self.zeros):
            r = self.rho * np.linspace(_E_INSIDE, 1.2, max(4, n1 // 8) + 1)
            a = np.linspace(0, TWO_PI, max(8, n2 // 2), endpoint=False)
            R, A = np.meshgrid(r, a, indexing="ij")
            for z in self.zeros:
                q = z + np.stack([R.ravel() * np.cos(A.ravel()), R.ravel() * np.sin(A.ravel())], -1)
                pts.append(q[self.inside(q)])
        return np.concatenate(pts)

    def describe(self):
        d = super().describe()
        d.update(n=self.PF.n, rho_inf=self.rho_inf, cutout_radius=_E_DOMAIN * self.rho,
                 zeros=self.zeros.tolist())
        return d


class NeatHoleChart(Chart):
    """Cylinder chart ``(t, theta)`` of a hole; ``t >= 0`` is the neat part."""

    periodic = True

    def __init__(self, cid: str, hole, lo: tuple[float, float, float]):
        super().__init__(cid)
        self.hole = hole
        self.plane_id: str | None = None
        self.kind = hole.kind
        self.c = hole.c
        self.t_dom_lo, self.t_in_lo, self.t_core_lo = lo
        self.set_upper(_GLUE_CORE_HI, _GLUE_INSIDE_HI, math.inf)

    def set_upper(self, core_hi, inside_hi, dom_hi):
        self.t_core_hi, self.t_in_hi, self.t_dom_hi = float(core_hi), float(inside_hi), float(dom_hi)

    def raw_fields(self, a, b):
        return self.hole.fields(a, b)

    def in_domain(self, p):
        t = np.asarray(p)[..., 0]
        return (t > self.t_dom_lo) & (t < self.t_dom_hi)

    def inside(self, p):
        t = np.asarray(p)[..., 0]
        return (t > self.t_in_lo) & (t < self.t_in_hi)

    def core(self, p):
        t = np.asarray(p)[..., 0]
        return (t >= self.t_core_lo) & (t <= self.t_core_hi)

    def box(self):
        hi = min(self.t_in_hi, self.t_core_hi)
        return (self.t_in_lo, hi), (0.0, TWO_PI)

    def describe(self):
        d = super().describe()
        d.update(c=self.c, twist=bool(getattr(self.hole, "twist", True)),
                 t_domain=[self.t_dom_lo, self.t_dom_hi if math.isfinite(self.t_dom_hi) else None])
        return d


class StripChart(Chart):
    """``[0, pi] x R`` with ``X = c d/dy1`` and ``Y = 0``; ends identified by ``(0, y) ~ (pi, -y)``."""

    kind = "strip"

    def __init__(self, cid: str, c: float):
        super().__init__(cid)
        self.c = float(c)

    def raw_fields(self, a, b):
        X1 = Series(np.zeros_like(a.c))
        X1.c[0] = self.c
        z = lambda: Series(np.zeros_like(a.c))
        return X1, z(), z(), z()

    def in_domain(self, p):
        p = np.asarray(p)
        return (p[..., 0] > -0.5) & (p[..., 0] < math.pi + 0.5) & (np.abs(p[..., 1]) < 3.5)

    def inside(self, p):
        p = np.asarray(p)
        return (p[..., 0] > -0.3) & (p[..., 0] < math.pi + 0.3) & (np.abs(p[..., 1]) < 2.4)

    def core(self, p):
        p = np.asarray(p)
        return (p[..., 0] >= 0) & (p[..., 0] <= math.pi) & (np.abs(p[..., 1]) <= 2.0)

    def box(self):
        return (-0.3, math.pi + 0.3), (-2.4, 2.4)

    def describe(self):
        d = super().describe()
        d["c"] = self.c
        return d


class MobiusHoleChart(Chart):
    """Complement of the centre circle of the strip: ``t = |y2|``; ``X = c d/dtheta``, ``Y = 0``."""

    kind = "mobius_hole"
    periodic = True

    def __init__(self, cid: str, c: float):
        super().__init__(cid)
        self.c = float(c)

    def raw_fields(self, a, b):
        z = lambda: Series(np.zeros_like(a.c))
        X2 = z()
        X2.c[0] = self.c
        return z(), X2, z(), z()

    def in_domain(self, p):
        return np.asarray(p)[..., 0] > 0

    def inside(self, p):
        t = np.asarray(p)[..., 0]
        return (t > 0.2) & (t < 3.0)

    def core(self, p):
        t = np.asarray(p)[..., 0]
        return (t >= 0.25) & (t <= 2.5)

    def box(self):
        return (0.2, 2.5), (0.0, TWO_PI)

    def describe(self):
        d = super().describe()
        d["c"] = self.c
        return d


# ---------------------------------------------------------------------------
# transitions


@dataclass
class Transition:
    id: str
    source: str
    target: str
    kind: str
    sign: int
    fwd: Callable
    inv: Callable
    jac: Callable
    src_valid: Callable
    dst_valid: Callable
    params: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {"id": self.id, "source": self.source, "target": self.target, "kind": self.kind,
                "sign": self.sign, "params": self.params}


def _series_jacobian(fn, q):
    """2x2 Jacobian of a Series-capable map of two variables at points ``q``."""
    q = np.asarray(q, dtype=float)
    cols = []
    for k in range(2):
        a = Series.variable(q[:, 0], 1) if k == 0 else Series.constant(q[:, 0], 1)
        b = Series.variable(q[:, 1], 1) if k == 1 else Series.constant(q[:, 1], 1)
        u, v = fn(a, b)
        cols.append(np.stack([u.c[1], v.c[1]], -1))
    return np.stack(cols, -1)


def _plane_hole(plane: PlaneChart, hc: NeatHoleChart) -> Transition:
    hole = hc.hole
    if hole.kind == "puncture":
        z, rho = hole.zero, hole.rho
        src_valid = lambda p: (_norm(p - z) < rho) & (_norm(p - z) > 0)
        sign = -1
    else:
        rho = hole.rho
        src_valid = lambda p: _norm(p) > rho
        sign = 1
    t_top = min(0.0, hole.radial.t_cut)

    def jac(p):
        q = hole.from_plane(p)
        return np.linalg.inv(_series_jacobian(hole.to_plane_series, q))

    return Transition(f"{plane.id}->{hc.id}", plane.id, hc.id, "radial" if sign < 0 else "flow_time", sign,
                      hole.from_plane, hole.to_plane, jac, src_valid,
                      lambda q: (q[..., 0] > hole.t_lo) & (q[..., 0] < t_top))


def _glue(ca: NeatHoleChart, cb: NeatHoleChart, h: CircleMap) -> Transition:
    hinv = h.inverse()

    def fwd(p):
        return np.stack([1.0 / p[..., 0], h(p[..., 1])], -1)

    def inv(q):
        return np.stack([1.0 / q[..., 0], hinv(q[..., 1])], -1)

    def jac(p):
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = -1.0 / p[..., 0] ** 2
        J[..., 1, 1] = h.deriv
        return J

    pos = lambda p: p[..., 0] > 0
    return Transition(f"{ca.id}->{cb.id}", ca.id, cb.id, "glue", -h.deriv, fwd, inv, jac, pos, pos,
                      {"h": h.to_dict()})


def _mobius_edge(strip: StripChart) -> Transition:
    flip = np.array([1.0, -1.0])
    fwd = lambda p: (p - [math.pi, 0.0]) * flip
    inv = lambda q: q * flip + [math.pi, 0.0]
    jac = lambda p: np.broadcast_to(np.diag(flip), p.shape[:-1] + (2, 2)).copy()
    return Transition(f"{strip.id}->{strip.id}", strip.id, strip.id, "mobius_edge", -1, fwd, inv, jac,
                      lambda p: p[..., 0] > math.pi - 0.5, lambda q: q[..., 0] < 0.5)


def _mobius_hole(strip: StripChart, mh: MobiusHoleChart, branch: int) -> Transition:
    shift = 0.0 if branch > 0 else math.pi

    def fwd(p):
        return np.stack([branch * p[..., 1], np.mod(p[..., 0] + shift, TWO_PI)], -1)

    def y1_of(theta):
        return np.mod(theta - shift + 0.5, TWO_PI) - 0.5

    def inv(q):
        return np.stack([y1_of(q[..., 1]), branch * q[..., 0]], -1)

    def jac(p):
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 1] = branch
        J[..., 1, 0] = 1.0
        return J

    tag = "+" if branch > 0 else "-"
    return Transition(f"{strip.id}->{mh.id}{tag}", strip.id, mh.id, "mobius_hole", -branch, fwd, inv, jac,
                      lambda p: branch * p[..., 1] > 0,
                      lambda q: (q[..., 0] > 0) & (y1_of(q[..., 1]) < math.pi + 0.5),
                      {"branch": branch})


# ---------------------------------------------------------------------------
# holes, plans, atlas


@dataclass
class NeatHole:
    id: str
    chart: str
    c: float
    status: str = "open"  # open | truncated | glued | capped
    partner: str | None = None
    h: dict | None = None
    b_cut: float | None = None
    cap: str | None = None


@dataclass
class SurgeryPlan:
    spec: SurfaceSpec
    n: int
    holes: list
    params: dict
    gluings: list
    truncations: list
    caps: list
    chi: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spec"] = self.spec.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "SurgeryPlan":
        d = dict(d)
        d["spec"] = SurfaceSpec(**d["spec"])
        return SurgeryPlan(**d)

    def summary(self) -> str:
        kinds = [c["kind"] for c in self.caps]
        parts = [f"n={self.n}", f"holes={len(self.holes)}", f"gluings={len(self.gluings)}"]
        if kinds:
            counts = {k: kinds.count(k) for k in sorted(set(kinds))}
            parts.append("caps=" + "+".join(f"{v}({k})" for k, v in counts.items()))
        parts.append(f"truncations={len(self.truncations)}")
        parts.append(f"χ={self.chi}")
        return ", ".join(parts)


def _base_orientation(hole: str) -> int:
    # planar chart taken positive: the end at infinity keeps orientation, punctures reverse it
    return 1 if hole == "inf" else -1


def plan_surgery(spec: SurfaceSpec, hole_params: dict | None = None) -> SurgeryPlan:
    """Recipe turning the punctured plane into the requested compact surface."""
    if not isinstance(spec, SurfaceSpec):
        raise InvalidSpec("expected a SurfaceSpec")
    g, b = spec.genus, spec.boundary
    gluings, truncations, caps = [], [], []
    if spec.orientable:
        if 2 * g + b == 0:
            n = 0
        else:
            n = 2 * g + b - 1
    else:
        n = g + b - 1
    holes = ["inf"] + [f"p{j}" for j in range(n)]
    user = dict(hole_params or {})
    unknown = set(user) - set(holes)
    if unknown:
        raise InvalidSpec(f"hole_params names unknown holes: {sorted(unknown)}")
    for k, v in user.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v == 0 or not math.isfinite(v):
            raise InvalidSpec(f"hole parameter for {k} must be a nonzero real")
    params = {hname: float(user.get(hname, 1.0)) for hname in holes}

    if spec.orientable and 2 * g + b == 0:
        caps.append({"hole": "inf", "kind": "disk", "c": params["inf"], "h": rotation().to_dict()})
    elif spec.orientable:
        for i in range(g):
            a, bb = holes[2 * i], holes[2 * i + 1]
            reflect = _base_orientation(a) * _base_orientation(bb) == 1
            h = CircleMap(reflect, 0.0)
            want = h.deriv * params[a]
            if bb in user and user[bb] != want:
                raise ParamIncompatible(f"hole {bb} must have parameter {want} to glue with {a}")
            params[bb] = want
            gluings.append({"a": a, "b": bb, "h": h.to_dict()})
        truncations = [{"hole": hname, "b_cut": 1.0} for hname in holes[2 * g:]]
    else:
        for hname in holes[:g]:
            caps.append({"hole": hname, "kind": "mobius", "c": params[hname], "h": rotation().to_dict()})
        truncations = [{"hole": hname, "b_cut": 1.0} for hname in holes[g:]]

    chi = 2 - (n + 1) + sum(1 for c in caps if c["kind"] == "disk")
    if chi != spec.chi:
        raise AssertionError(f"Euler characteristic bookkeeping failed: {chi} != {spec.chi}")
    return SurgeryPlan(spec, n, holes, params, gluings, truncations, caps, chi)


class Atlas:
    def __init__(self, spec: SurfaceSpec | None = None, plan: SurgeryPlan | None = None,
                 faults: dict | None = None):
        self.spec = spec
        self.plan = plan
        self.faults = dict(faults or {})
        self.charts: dict[str, Chart] = {}
        self.transitions: list[Transition] = []
        self.holes: dict[str, NeatHole] = {}
        self.boundary: list[dict] = []
        self._cap_count = 0

    # -- construction -------------------------------------------------------------
    def add_chart(self, chart: Chart) -> Chart:
        if chart.id in self.charts:
            raise ValueError(f"duplicate chart id {chart.id}")
        scale = self.faults.get("scale_y")
        if scale and scale.get("chart") == chart.id:
            chart.y_scale = float(scale.get("factor", 2.0))
        self.charts[chart.id] = chart
        return chart

    def _twist_for(self, cid: str) -> bool:
        skip = self.faults.get("skip_twist")
        return not (skip and skip.get("chart") == cid)

    def _param_for(self, hid: str, c: float) -> float:
        flip = self.faults.get("flip_param")
        return -c if flip and flip.get("hole") == hid else c

    def add_plane(self, prefix: str, n: int, params: dict) -> list[str]:
        """Planar chart plus its open hole charts; returns the new hole ids."""
        PF = pl.build_plane_fields(n)
        name = lambda s: f"{prefix}{s}"
        c_inf = self._param_for(name("inf"), params.get("inf", 1.0))
        inf = pl.InfinityHole(PF, c_inf, twist=self._twist_for(name("inf")))
        plane = self.add_chart(PlaneChart(name("plane"), PF, inf.rho))
        T = inf.radial.T
        circle = np.linspace(0, TWO_PI, 720, endpoint=False)
        s_core = float(inf.flow_time(_R_CORE * inf.rho * np.stack([np.cos(circle), np.sin(circle)], -1)).min())
        lo = (inf.t_lo, T.invert(0.5 * s_core), T.invert(0.9 * s_core))
        new = []
        hc = self.add_chart(NeatHoleChart(name("inf"), inf, lo))
        hc.plane_id = plane.id
        self.transitions.append(_plane_hole(plane, hc))
        self.holes[name("inf")] = NeatHole(name("inf"), hc.id, inf.c)
        new.append(name("inf"))
        for j in range(n):
            hid = name(f"p{j}")
            hole = pl.PunctureHole(PF, j, self._param_for(hid, params.get(f"p{j}", 1.0)),
                                   twist=self._twist_for(hid))
            lo = (hole.t_lo, T.invert(math.log(1.0 / (0.95 * hole.rho))),
                  T.invert(math.log(1.0 / (0.8 * hole.rho))))
            hc = self.add_chart(NeatHoleChart(hid, hole, lo))
            hc.plane_id = plane.id
            self.transitions.append(_plane_hole(plane, hc))
            self.holes[hid] = NeatHole(hid, hc.id, hole.c)
            new.append(hid)
        return new

    def open_holes(self) -> list[str]:
        return [h.id for h in self.holes.values() if h.status == "open"]

    # -- navigation ---------------------------------------------------------------
    def neighbours(self, cid: str):
        """``(transition, direction)`` pairs leaving chart ``cid`` (+1 forward, -1 inverse)."""
        out = []
        for tr in self.transitions:
            if tr.source == cid:
                out.append((tr, 1))
            if tr.target == cid:
                out.append((tr, -1))
        return out

    @staticmethod
    def apply(tr: Transition, direction: int, p: np.ndarray):
        """Map points through a transition; returns ``(q, valid)``."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        valid = (tr.src_valid if direction > 0 else tr.dst_valid)(p) & np.all(np.isfinite(p), -1)
        q = np.full(p.shape, np.nan)
        if valid.any():
            with np.errstate(all="ignore"):
                q[valid] = (tr.fwd if direction > 0 else tr.inv)(p[valid])
        valid &= np.all(np.isfinite(q), -1)
        return q, valid

    def relocate(self, cid: str, p: np.ndarray):
        """Move points that left ``cid``'s inside into the core of a neighbouring chart."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        new_ids = np.empty(len(p), dtype=object)
        q_out = np.full(p.shape, np.nan)
        todo = np.ones(len(p), dtype=bool)
        for tr, d in self.neighbours(cid):
            if not todo.any():
                break
            dst = self.charts[tr.target if d > 0 else tr.source]
            idx = np.nonzero(todo)[0]
            q, ok = self.apply(tr, d, p[idx])
            ok &= dst.core(np.nan_to_num(q))
            hit = idx[ok]
            q_out[hit] = dst.wrap(q[ok])
            new_ids[hit] = dst.id
            todo[hit] = False
        if todo.any():
            raise AtlasGap(f"no chart covers {p[todo][0].tolist()} leaving {cid}")
        return new_ids, q_out

    def express(self, cid: str, p: np.ndarray, target: str):
        """Coordinates of points of ``cid`` in chart ``target`` (breadth-first over transitions)."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        if cid == target:
            return p.copy(), np.ones(len(p), dtype=bool)
        out = np.full(p.shape, np.nan)
        done = np.zeros(len(p), dtype=bool)
        frontier = [(cid, p, np.arange(len(p)))]
        seen = {cid}
        while frontier and not done.all():
            nxt = []
            for c, pts, idx in frontier:
                for tr, d in self.neighbours(c):
                    other = tr.target if d > 0 else tr.source
                    if other in seen and other != target:
                        continue
                    q, ok = self.apply(tr, d, pts)
                    ok &= self.charts[other].in_domain(np.nan_to_num(q)) & ~done[idx]
                    if not ok.any():
                        continue
                    q = self.charts[other].wrap(q)
                    if other == target:
                        out[idx[ok]] = q[ok]
                        done[idx[ok]] = True
                    else:
                        nxt.append((other, q[ok], idx[ok]))
            seen.update(c for c, _, _ in nxt)
            frontier = nxt
        return out, done

    # -- reporting ---------------------------------------------------------------------
    def chi(self) -> int:
        """Euler characteristic from the chart census."""
        planes = sum(1 for c in self.charts.values() if c.kind == "plane")
        base_holes = sum(1 for h in self.holes.values() if h.chart in self.charts
                         and self.charts[h.chart].kind in ("puncture", "infinity"))
        # each plane is a sphere minus its holes; disks and collars/cylinders add 0 beyond that
        return 2 * planes - base_holes

    def orientation_coloring(self):
        """Two-colour charts by transition signs; returns ``(consistent, colours)``."""
        colour = {}
        consistent = True
        for start in self.charts:
            if start in colour:
                continue
            colour[start] = 1
            stack = [start]
            while stack:
                c = stack.pop()
                for tr, d in self.neighbours(c):
                    other = tr.target if d > 0 else tr.source
                    want = colour[c] * tr.sign
                    if other not in colour:
                        colour[other] = want
                        stack.append(other)
                    elif colour[other] != want:
                        consistent = False
        return consistent, colour

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "spec": self.spec.to_dict() if self.spec else None,
            "plan": self.plan.to_dict() if self.plan else None,
            "faults": self.faults,
            "charts": [c.describe() for c in self.charts.values()],
            "transitions": [t.describe() for t in self.transitions],
            "holes": [asdict(h) for h in self.holes.values()],
            "boundary": self.boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# surgery operations


def _take_open(atlas: Atlas, hid: str) -> NeatHole:
    hole = atlas.holes.get(hid)
    if hole is None or hole.status != "open":
        raise HoleUnavailable(f"hole {hid} is not open")
    return hole


def glue_pair(atlas: Atlas, a: str, b: str, h: CircleMap, force: bool = False) -> Atlas:
    """Identify two ends through ``(t, theta) -> (1/t, h(theta))``."""
    ha, hb = _take_open(atlas, a), _take_open(atlas, b)
    if a == b:
        raise HoleUnavailable("cannot glue a hole to itself")
    if not force and not math.isclose(hb.c, h.deriv * ha.c, rel_tol=1e-12, abs_tol=0.0):
        raise ParamIncompatible(f"gluing {a} to {b} needs c_b = {h.deriv * ha.c}, got {hb.c}")
    ca, cb = atlas.charts[ha.chart], atlas.charts[hb.chart]
    atlas.transitions.append(_glue(ca, cb, h))
    ha.status, ha.partner, ha.h = "glued", b, h.to_dict()
    hb.status, hb.partner, hb.h = "glued", a, h.inverse().to_dict()
    return atlas


def truncate(atlas: Atlas, hid: str, b_cut: float = 1.0) -> Atlas:
    """Cut the end off at ``t = b_cut``; the circle there becomes boundary."""
    if not b_cut > 0:
        raise ValueError("b_cut must be positive")
    hole = _take_open(atlas, hid)
    chart = atlas.charts[hole.chart]
    edge = b_cut * (1 + 1e-12) + 1e-12
    chart.set_upper(b_cut, edge, edge)
    hole.status, hole.b_cut = "truncated", float(b_cut)
    atlas.boundary.append({"chart": chart.id, "t": float(b_cut)})
    return atlas


def cap_mobius(atlas: Atlas, hid: str, c: float, h: CircleMap = rotation(), force: bool = False) -> Atlas:
    """Close an end with a Moebius strip whose fields are ``c d/dy1`` and ``0``."""
    hole = _take_open(atlas, hid)
    if not force and not math.isclose(c, h.deriv * hole.c, rel_tol=1e-12, abs_tol=0.0):
        raise ParamIncompatible(f"Moebius cap on {hid} needs c = {h.deriv * hole.c}, got {c}")
    k = atlas._cap_count
    atlas._cap_count += 1
    strip = atlas.add_chart(StripChart(f"mob{k}.strip", c))
    mh = atlas.add_chart(MobiusHoleChart(f"mob{k}.hole", c))
    atlas.transitions.append(_mobius_edge(strip))
    atlas.transitions.append(_mobius_hole(strip, mh, 1))
    atlas.transitions.append(_mobius_hole(strip, mh, -1))
    # the strip's end (t -> infinity) meets the small-t side of the target hole
    atlas.transitions.append(_glue(mh, atlas.charts[hole.chart], h))
    hole.status, hole.cap, hole.partner, hole.h = "capped", "mobius", mh.id, h.inverse().to_dict()
    return atlas


def cap_disk(atlas: Atlas, hid: str, h: CircleMap = rotation(), force: bool = False) -> Atlas:
    """Close an end with a disk: a fresh plane without punctures glued along its end at infinity."""
    hole = _take_open(atlas, hid)
    k = atlas._cap_count
    atlas._cap_count += 1
    prefix = f"cap{k}."
    atlas.add_plane(prefix, 0, {"inf": h.deriv * hole.c})
    glue_pair(atlas, prefix + "inf", hid, h, force=force)
    atlas.holes[prefix + "inf"].status = "capped"
    hole.status, hole.cap = "capped", "disk"
    return atlas


def execute_plan(plan: SurgeryPlan, faults: dict | None = None) -> Atlas:
    atlas = Atlas(plan.spec, plan, faults)
    forced = bool(atlas.faults.get("flip_param"))
    steps = [("base plane", lambda: atlas.add_plane("", plan.n, plan.params))]
    for g in plan.gluings:
        steps.append((f"glue {g['a']}-{g['b']}",
                      lambda g=g: glue_pair(atlas, g["a"], g["b"], CircleMap.from_dict(g["h"]), force=forced)))
    for t in plan.truncations:
        steps.append((f"truncate {t['hole']}", lambda t=t: truncate(atlas, t["hole"], t["b_cut"])))
    for c in plan.caps:
        if c["kind"] == "disk":
            fn = lambda c=c: cap_disk(atlas, c["hole"], CircleMap.from_dict(c["h"]), force=forced)
        else:
            fn = lambda c=c: cap_mobius(atlas, c["hole"], c["c"], CircleMap.from_dict(c["h"]), force=forced)
        steps.append((f"{c['kind']} cap on {c['hole']}", fn))
    for name, fn in steps:
        try:
            fn()
        except Exception as exc:
            raise type(exc)(f"{name}: {exc}") from exc
    return atlas


def build_surface(spec: SurfaceSpec, hole_params: dict | None = None, faults: dict | None = None) -> Atlas:
    return execute_plan(plan_surgery(spec, hole_params), faults)


def default_fault(atlas: Atlas, kind: str) -> dict:
    """A standard target for each documented fault on a built atlas."""
    if kind == "scale_y":
        return {"scale_y": {"chart": "plane", "factor": 2.0}}
    if kind == "skip_twist":
        return {"skip_twist": {"chart": "inf"}}
    if kind == "flip_param":
        plan = atlas.plan
        if plan.gluings:
            return {"flip_param": {"hole": plan.gluings[0]["b"]}}
        if plan.caps:
            cap = plan.caps[0]
            # a disk cap inherits its parameter from the capped hole, so corrupt the cap side
            hole = "cap0.inf" if cap["kind"] == "disk" else cap["hole"]
            return {"flip_param": {"hole": hole}}
        raise ValueError("no gluing to corrupt on this surface")
    raise ValueError(f"unknown fault {kind!r}")


def with_faults(atlas: Atlas, faults: dict) -> Atlas:
    return execute_plan(atlas.plan, {**atlas.faults, **faults})


def load_atlas(data: dict | str) -> Atlas:
    """Rebuild an atlas from its serialized recipe."""
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise InvalidSpec("not a serialized atlas")
    if data.get("version") != VERSION:
        raise InvalidSpec(f"unsupported atlas version {data.get('version')!r}")
    plan = SurgeryPlan.from_dict(data["plan"])
    return execute_plan(plan, data.get("faults") or {})


# ---------------------------------------------------------------------------
# consistency checks


def overlap_samples(atlas: Atlas, tr: Transition, n: int = 100, grid: int = 60) -> np.ndarray:
    """Up to ``n`` source-chart points whose image lies inside the target chart."""
    src, dst = atlas.charts[tr.source], atlas.charts[tr.target]
    cands = [src.sample(grid, grid)]
    back, ok = atlas.apply(tr, -1, dst.sample(grid, grid))
    cands.append(back[ok])
    p = np.concatenate(cands)
    p = p[src.inside(p)]
    q, ok = atlas.apply(tr, 1, p)
    ok &= dst.inside(np.nan_to_num(q))
    p = p[ok]
    if len(p) > n:
        p = p[np.linspace(0, len(p) - 1, n).round().astype(int)]
    return p


def _angle_gap(a, b):
    return np.abs(np.mod(a - b + math.pi, TWO_PI) - math.pi)


def chart_distance(chart: Chart, p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d0 = np.abs(p[..., 0] - q[..., 0])
    d1 = _angle_gap(p[..., 1], q[..., 1]) if chart.periodic else np.abs(p[..., 1] - q[..., 1])
    return np.hypot(d0, d1)


def chart_cover_check(atlas: Atlas, n: int = 100) -> dict:
    """Round trips of every transition, hole ledger closure and orientability."""
    trips = []
    worst = 0.0
    signs_ok = True
    for tr in atlas.transitions:
        p = overlap_samples(atlas, tr, n)
        q, _ = atlas.apply(tr, 1, p)
        back, _ = atlas.apply(tr, -1, q)
        err = float(np.max(chart_distance(atlas.charts[tr.source], p, back))) if len(p) else 0.0
        det = np.linalg.det(tr.jac(p)) if len(p) else np.array([tr.sign])
        constant = bool(np.all(np.sign(det) == tr.sign))
        signs_ok &= constant
        worst = max(worst, err)
        trips.append({"transition": tr.id, "samples": int(len(p)), "round_trip": err, "sign": tr.sign,
                      "sign_constant": constant})
    open_holes = atlas.open_holes()
    consistent, _ = atlas.orientation_coloring()
    expected = atlas.spec.orientable if atlas.spec else None
    return {
        "transitions": trips,
        "round_trip_max": worst,
        "round_trips_pass": worst < 1e-7,
        "signs_constant": signs_ok,
        "open_holes": open_holes,
        "ledger_closed": not open_holes,
        "orientable": consistent,
        "orientability_matches": expected is None or consistent == bool(expected),
        "pass": worst < 1e-7 and signs_ok and not open_holes and (expected is None or consistent == bool(expected)),
    }
