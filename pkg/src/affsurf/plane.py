"""Planar product fields and their cylindrical ends.

``X = (phi1(x1), phi2(x2))`` and ``Y = (psi1(x1), psi2(x2))`` on the plane,
built from two line pairs.  Around each common zero, and around infinity, a
hole chart ``(t, theta)`` turns the pair into ``X = c d/dtheta``, ``Y = 0`` for
``t >= 0``.

All field evaluators take ``Series`` coordinates so bracket and decay checks
get exact directional derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import smoothfn as sf
from .errors import BallTooSmall, InvalidN, TransversalityNotCertified, UpstreamInconsistent, ZeroParameter
from .lemma1 import Pair1D, build_pair, linear_pair
from .series import Series

INF = math.inf
TWO_PI = 2.0 * math.pi
EPS_FLAT = 0.25
# beyond this flow time the second field is below 1e-80 with all derivatives
Y_CUTOFF = 200.0


def _zeros_like(s: Series) -> Series:
    return Series(np.zeros_like(s.c))


def _const_like(s: Series, v: float) -> Series:
    out = np.zeros_like(s.c)
    out[0] = v
    return Series(out)


def _wrap_angle(theta: Series) -> Series:
    c = theta.c.copy()
    c[0] = np.mod(c[0], TWO_PI)
    return Series(c)


# ---------------------------------------------------------------------------
# planar product fields


@dataclass
class PlaneFields:
    n: int
    pair1: Pair1D
    pair2: Pair1D
    common_zeros: list

    @property
    def near_radius(self) -> float:
        return min(self.pair1.near_radius, self.pair2.near_radius)

    def fields(self, x1: Series, x2: Series):
        """``(X1, X2, Y1, Y2)`` as series."""
        return (sf.apply(self.pair1.phi, x1), sf.apply(self.pair2.phi, x2),
                sf.apply(self.pair1.psi, x1), sf.apply(self.pair2.psi, x2))

    def values(self, x: np.ndarray):
        """``X(x), Y(x)`` for points of shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        s1 = Series(x[..., 0][None])
        s2 = Series(x[..., 1][None])
        X1, X2, Y1, Y2 = self.fields(s1, s2)
        return np.stack([X1.value, X2.value], -1), np.stack([Y1.value, Y2.value], -1)

    def flow_X(self, x, s):
        x = np.asarray(x, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), x.shape[:-1])
        return np.stack([self.pair1.flow_phi(x[..., 0], s), self.pair2.flow_phi(x[..., 1], s)], -1)

    def flow_Y(self, x, s):
        x = np.asarray(x, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), x.shape[:-1])
        return np.stack([self.pair1.flow_psi(x[..., 0], s), self.pair2.flow_psi(x[..., 1], s)], -1)


def build_plane_fields(n: int) -> PlaneFields:
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise InvalidN(f"n must be a non-negative integer, got {n!r}")
    if n == 0:
        return PlaneFields(0, linear_pair(1.0), linear_pair(0.0), [])
    p1 = build_pair(1)
    p2 = build_pair(int(n))
    zeros = [(p1.zeros[0], b) for b in p2.zeros]
    return PlaneFields(int(n), p1, p2, zeros)


# ---------------------------------------------------------------------------
# radial profile


def _bridge_series(u: Series, eps: float) -> Series:
    w = sf.step_series((u + 1.0 - eps) / (1.0 - 2.0 * eps))
    left = (u + 1.0).log()
    right = (-u).log() * 2.0 + 1.0 / u
    return ((1.0 - w) * left + w * right).exp()


def _flat_tail_series(u: Series) -> Series:
    """``t^2 e^{1/t}`` for ``t < 0`` and 0 for ``t >= 0``."""
    return u * u * sf.flat_series(u, -1)


def build_phi_flat(epsilon: float = EPS_FLAT) -> sf.PiecewiseMap:
    """Profile ``phi``: ``t + 1`` near ``-1``, ``t^2 e^{1/t}`` on ``(-eps, 0)``, zero on ``[0, inf)``."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    eps = float(epsilon)
    pieces = [
        (-1.0 - eps, -1.0 + eps, sf.affine(1.0, 1.0)),
        (-1.0 + eps, -eps, sf.ExprMap(lambda u: _bridge_series(u, eps), (-1.0 + eps, -eps), closed=(True, True))),
        (-eps, INF, sf.ExprMap(_flat_tail_series, (-eps, INF), closed=(True, False))),
    ]
    phi = sf.PiecewiseMap(pieces, domain=(-1.0 - eps, INF), name="phi_flat")
    phi.eps = eps
    return phi


class RadialTime(sf.PiecewiseMap):
    """``T(t) = int_{-1/2}^t dtau / phi(tau)`` on ``(-1, 0)``.

    Closed forms on both mandated branches (``log(t + 1)`` and ``e^{-1/t}``),
    quadrature on the bridge.
    """

    def __init__(self, phi: sf.PiecewiseMap, base: float = -0.5):
        eps = phi.eps
        density = sf.ExprMap(lambda u: sf._recip(phi, u), (-1.0 + eps, -eps), closed=(True, True))
        mid = sf.IntegralMap(density, base, 0.0, (-1.0 + eps, -eps), closed=(True, True), name="T-bridge")
        t_left = mid(-1.0 + eps)
        t_right = mid(-eps)
        self.left_const = t_left - math.log(eps)
        self.right_const = t_right - math.exp(1.0 / eps)
        lc, rc = self.left_const, self.right_const
        left = sf.ExprMap(lambda u: (u + 1.0).log() + lc, (-1.0, -1.0 + eps), "increasing",
                          closed=(False, True), inverse=lambda y: np.exp(y - lc) - 1.0)
        right = sf.ExprMap(lambda u: (-1.0 / u).exp() + rc,
                           (-eps, 0.0), "increasing", closed=(True, False),
                           inverse=lambda y: -1.0 / np.log(y - rc))
        super().__init__([(-1.0, -1.0 + eps, left), (-1.0 + eps, -eps, mid), (-eps, 0.0, right)],
                         domain=(-1.0, 0.0), monotone="increasing", name="T", image=(-INF, INF))
        self.base = base
        self.eps = eps


def radial_conjugator(phi: sf.PiecewiseMap) -> sf.SmoothMap1D:
    """``f(r) = T^{-1}(ln r)``: carries ``r d/dr`` to ``phi d/dt``."""
    T = RadialTime(phi)
    f = sf.compose(sf.InverseMap(T), sf.log_map(), name="radial")
    f._image = (-1.0, 0.0)
    f.T = T
    return f


@dataclass
class Radial:
    phi: sf.PiecewiseMap
    T: RadialTime
    t_cut: float  # T(t_cut) = Y_CUTOFF


_RADIAL = None


def radial_profile() -> Radial:
    global _RADIAL
    if _RADIAL is None:
        phi = build_phi_flat(EPS_FLAT)
        T = RadialTime(phi)
        _RADIAL = Radial(phi, T, T.invert(Y_CUTOFF))
    return _RADIAL


# ---------------------------------------------------------------------------
# hole charts


class HoleChart:
    """Cylinder ``(t, theta)`` with twisted fields prolonged across ``t = 0``.

    Subclasses supply ``pre_twist_Y(t, theta)``: the second field in
    ``(t, theta)`` coordinates before the twist, where the first field is
    ``phi(t) d/dt``.
    """

    kind = "hole"

    def __init__(self, c: float, t_lo: float, twist: bool = True):
        if c == 0:
            raise ZeroParameter("hole parameter c must be nonzero")
        self.c = float(c)
        self.radial = radial_profile()
        self.t_lo = float(t_lo)
        self.eps = self.radial.phi.eps
        self.twist = twist

    def pre_twist_Y(self, t: Series, theta: Series):
        raise NotImplementedError

    def fields(self, t: Series, th: Series):
        """``(Xt, Xtheta, Yt, Ytheta)`` as series at points ``(t, th)``."""
        tv = t.value
        Xt, Xth, Yt, Yth = (_zeros_like(t) for _ in range(4))
        if self.twist:
            Xth.c[0] = self.c
        neg = tv < 0
        if neg.any():
            tn, thn = t[neg], th[neg]
            phi = sf.apply(self.radial.phi, tn)
            Xt[neg] = phi
            if self.twist:
                g = (-1.0 / tn).exp() / (tn * tn)  # d/dt of e^{-1/t}
                exact = tn.value >= -self.eps
                xth = phi * g * self.c
                xth.c[:, exact] = 0.0
                xth.c[0, exact] = self.c
                Xth[neg] = xth
            live = tn.value < self.radial.t_cut
            if live.any():
                tl, thl = tn[live], thn[live]
                if self.twist:
                    theta0 = _wrap_angle(thl - self.shift_series(tl))
                else:
                    theta0 = thl
                yt, yth = self.pre_twist_Y(tl, theta0)
                if self.twist:
                    yth = yth + (-1.0 / tl).exp() / (tl * tl) * yt * self.c
                sub_t, sub_th = _zeros_like(tn), _zeros_like(tn)
                sub_t[live] = yt
                sub_th[live] = yth
                Yt[neg] = sub_t
                Yth[neg] = sub_th
        return Xt, Xth, Yt, Yth

    def shift_series(self, t: Series) -> Series:
        return (-1.0 / t).exp() * self.c

    def values(self, p: np.ndarray):
        p = np.asarray(p, dtype=float)
        Xt, Xth, Yt, Yth = self.fields(Series(p[..., 0][None]), Series(p[..., 1][None]))
        return np.stack([Xt.value, Xth.value], -1), np.stack([Yt.value, Yth.value], -1)

    # -- coordinates ----------------------------------------------------------------
    def twist_angle(self, t: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if not self.twist:
            return np.mod(theta, TWO_PI)
        with np.errstate(over="ignore"):
            return np.mod(theta + self.c * np.exp(-1.0 / t), TWO_PI)

    def untwist_angle(self, t: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if not self.twist:
            return np.mod(theta, TWO_PI)
        return np.mod(theta - self.c * np.exp(-1.0 / t), TWO_PI)

    def decomposition(self, t, theta):
        """Diagnostic ``(f1, f2)`` with ``Y = lam f1 X + lam f2 d/dtheta``, ``lam = exp(-e^{-1/t})``."""
        t = np.asarray(t, dtype=float)
        theta = np.asarray(theta, dtype=float)
        yt, yth = self.pre_twist_Y(Series(t[None]), Series(theta[None]))
        lam = np.exp(-np.exp(-1.0 / t))
        phi = self.radial.phi(t)
        return yt.value / (lam * phi), yth.value / lam


def lemma2_twist(c: float, y_field, t_lo: float = -EPS_FLAT, check: bool = True,
                 samples: tuple[int, int] = (24, 16)) -> HoleChart:
    """Twist a field pair with ``X = t^2 e^{1/t} d/dt`` into a neat hole of parameter ``c``.

    ``y_field(t, theta)`` returns the second field's components as series.
    """
    hole = _GenericHole(c, t_lo, y_field)
    if check:
        eps = hole.eps
        lo = max(t_lo, -eps) + 1e-3
        ts = np.linspace(lo, -0.02, samples[0])
        ths = np.linspace(0, TWO_PI, samples[1], endpoint=False)
        T, TH = np.meshgrid(ts, ths, indexing="ij")
        t = Series.variable(T.ravel(), 1)
        th = Series.constant(TH.ravel(), 1)
        yt, yth = y_field(t, th)
        t0 = Series(T.ravel()[None])
        yt0, yth0 = y_field(t0, Series(TH.ravel()[None]))
        # Y in the theta direction
        tc = Series.constant(T.ravel(), 1)
        thv = Series.variable(TH.ravel(), 1)
        yt_th, yth_th = y_field(tc, thv)
        phi = hole.radial.phi.taylor(T.ravel(), 1)
        # [X, Y] with X = phi d/dt: (phi dYt/dt - Yt phi', phi dYth/dt)
        bt = phi.c[0] * yt.c[1] - yt0.value * phi.c[1]
        bth = phi.c[0] * yth.c[1]
        res = np.hypot(bt + yt0.value, bth + yth0.value) / (1.0 + np.hypot(yt0.value, yth0.value))
        if np.nanmax(res) > 1e-4:
            raise UpstreamInconsistent(f"incoming bracket residual {np.nanmax(res):.3g} exceeds 1e-4")
    return hole


class _GenericHole(HoleChart):
    def __init__(self, c, t_lo, y_field):
        super().__init__(c, t_lo)
        self._y = y_field

    def pre_twist_Y(self, t, theta):
        return self._y(t, theta)


class PunctureHole(HoleChart):
    """Hole around a common zero: ``u = x - zero = r^{-1}(cos, sin)``, ``t = f(r)``."""

    kind = "puncture"

    def __init__(self, PF: PlaneFields, zero_index: int, c: float, twist: bool = True):
        if c == 0:
            raise ZeroParameter("hole parameter c must be nonzero")
        if not 0 <= zero_index < len(PF.common_zeros):
            raise IndexError(f"no common zero with index {zero_index}")
        self.PF = PF
        self.zero_index = zero_index
        self.zero = np.array(PF.common_zeros[zero_index], dtype=float)
        self.rho = PF.near_radius
        others = [np.hypot(*(np.array(z) - self.zero)) for i, z in enumerate(PF.common_zeros) if i != zero_index]
        if self.rho <= 0 or any(d <= 2 * self.rho for d in others):
            raise BallTooSmall("ball around the zero meets another zero")
        rad = radial_profile()
        super().__init__(c, rad.T.invert(math.log(1.0 / self.rho)), twist)
        # inner boundary of the planar chart sits at half the ball radius
        self.t_overlap_hi = rad.T.invert(math.log(2.0 / self.rho))

    def pre_twist_Y(self, t, theta):
        phi = sf.apply(self.radial.phi, t)
        E = (-sf.apply(self.radial.T, t)).exp()
        s, c = theta.sincos()
        yt = -(phi * E) * (c * c * c + s * s * s)
        yth = E * (c * s * s - s * c * c)
        return yt, yth

    def polar_fields(self, r, theta):
        """Fields in ``(r, theta)`` (before the radial change): ``X = (r, 0)``."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        u = np.stack([np.cos(theta) / r, np.sin(theta) / r], -1)
        X, Y = self.PF.values(self.zero + u)
        # d(r, theta)/du
        uu = np.sum(u * u, -1)
        nrm = np.sqrt(uu)
        dr = -u / (nrm[..., None] * uu[..., None])
        dth = np.stack([-u[..., 1], u[..., 0]], -1) / uu[..., None]
        to = lambda V: np.stack([np.sum(dr * V, -1), np.sum(dth * V, -1)], -1)
        return to(X), to(Y)

    def to_plane(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        t, th = p[..., 0], p[..., 1]
        theta = self.untwist_angle(t, th)
        r = np.exp(self.radial.T(t))
        return self.zero + np.stack([np.cos(theta), np.sin(theta)], -1) / r[..., None]

    def to_plane_series(self, t: Series, th: Series):
        theta = th - self.shift_series(t) if self.twist else th
        inv_r = (-sf.apply(self.radial.T, t)).exp()
        s, c = theta.sincos()
        return c * inv_r + self.zero[0], s * inv_r + self.zero[1]

    def from_plane(self, x: np.ndarray) -> np.ndarray:
        u = np.asarray(x, dtype=float) - self.zero
        r = 1.0 / np.hypot(u[..., 0], u[..., 1])
        theta = np.arctan2(u[..., 1], u[..., 0])
        t = self.radial.T.invert(np.log(r))
        return np.stack([t, self.twist_angle(t, theta)], -1)


def puncture_chart(PF: PlaneFields, zero_index: int, c: float) -> PunctureHole:
    return PunctureHole(PF, zero_index, c)


# ---------------------------------------------------------------------------
# infinity


@dataclass
class TransversalityCertificate:
    rho: float
    margin: float
    sampled_min: float
    lipschitz_pad: float
    outer_radius: float


def certify_transversality(PF: PlaneFields, candidates=range(2, 17), n_angles: int = 720) -> TransversalityCertificate:
    """Find ``rho`` with ``x . X(x) >= 1`` on every circle of radius ``>= rho``.

    Each coordinate contributes ``x_i phi_i(x_i)``, which equals ``x_i^2`` for
    ``|x_i| >= 1``; with ``m = min_{|s|<1} s phi_i(s)`` any point of norm
    ``R >= sqrt(2 (1 - m))`` already satisfies the bound, so only the band
    ``rho <= |x| <= R`` is sampled (Lipschitz-padded).
    """
    s = np.linspace(-1.0, 1.0, 4001)
    m = min(float(np.min(s * PF.pair1.phi(s))), float(np.min(s * PF.pair2.phi(s))), 0.0)
    # Lipschitz bound of x . X on the band: |X| + |x| |DX|
    def lip(R):
        xs = np.linspace(-R, R, 4001)
        d1 = np.abs(PF.pair1.phi.deriv(xs)).max()
        d2 = np.abs(PF.pair2.phi.deriv(xs)).max()
        v1 = np.abs(PF.pair1.phi(xs)).max()
        v2 = np.abs(PF.pair2.phi(xs)).max()
        return math.hypot(v1, v2) + R * max(d1, d2)
    R_safe = math.sqrt(2.0 * (1.0 - m))
    ang = np.linspace(0, TWO_PI, n_angles, endpoint=False)
    for rho in candidates:
        R = max(float(rho), R_safe)
        radii = np.linspace(rho, R, max(2, int(math.ceil((R - rho) / 0.05)) + 1))
        Rg, Ag = np.meshgrid(radii, ang, indexing="ij")
        x = np.stack([Rg * np.cos(Ag), Rg * np.sin(Ag)], -1)
        X, _ = PF.values(x)
        vals = np.sum(x * X, -1)
        h_ang = R * (TWO_PI / n_angles)
        h_rad = radii[1] - radii[0] if radii.size > 1 else 0.0
        pad = lip(R) * 0.5 * math.hypot(h_ang, h_rad)
        margin = float(vals.min()) - pad
        if margin >= 1.0:
            return TransversalityCertificate(float(rho), margin, float(vals.min()), pad, R)
    raise TransversalityNotCertified("no admissible radius up to 16")


class InfinityHole(HoleChart):
    """Hole at infinity: flow-time coordinate ``r~`` off the circle ``|x| = rho``."""

    kind = "infinity"

    def __init__(self, PF: PlaneFields, c: float, twist: bool = True):
        self.PF = PF
        self.cert = certify_transversality(PF)
        self.rho = self.cert.rho
        super().__init__(c, -0.5, twist)

    def foot_map(self, rt: Series, theta: Series):
        """``P^{-1}(r~, theta) = Phi_{r~}(rho cos, rho sin)`` and its theta-derivative."""
        s, c = theta.sincos()
        x1, d1 = self.PF.pair1.flow_phi_jac(c * self.rho, rt)
        x2, d2 = self.PF.pair2.flow_phi_jac(s * self.rho, rt)
        return x1, x2, d1 * (-s * self.rho), d2 * (c * self.rho)

    def chart_fields_rt(self, rt: Series, theta: Series):
        """``Y`` in ``(r~, theta)`` coordinates (``X = d/dr~``)."""
        x1, x2, j12, j22 = self.foot_map(rt, theta)
        X1, X2, Y1, Y2 = self.PF.fields(x1, x2)
        det = X1 * j22 - j12 * X2
        yr = (j22 * Y1 - j12 * Y2) / det
        yth = (X1 * Y2 - X2 * Y1) / det
        return yr, yth

    def pre_twist_Y(self, t, theta):
        rt = sf.apply(self.radial.T, t)
        yr, yth = self.chart_fields_rt(rt, theta)
        phi = sf.apply(self.radial.phi, t)
        return phi * yr, yth

    def to_plane(self, p):
        p = np.asarray(p, dtype=float)
        t, th = p[..., 0], p[..., 1]
        theta = self.untwist_angle(t, th)
        rt = self.radial.T(t)
        x1 = self.PF.pair1.flow_phi(self.rho * np.cos(theta), rt)
        x2 = self.PF.pair2.flow_phi(self.rho * np.sin(theta), rt)
        return np.stack([x1, x2], -1)

    def to_plane_series(self, t: Series, th: Series):
        theta = th - self.shift_series(t) if self.twist else th
        rt = sf.apply(self.radial.T, t)
        s, c = theta.sincos()
        return self.PF.pair1.flow_phi(c * self.rho, rt), self.PF.pair2.flow_phi(s * self.rho, rt)

    def flow_time(self, x: np.ndarray) -> np.ndarray:
        """Backward ``X``-flow time from ``x`` to the circle ``|x| = rho``."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        nrm = np.hypot(x[:, 0], x[:, 1])
        lo = np.zeros(len(x))
        hi = np.maximum(2.0 * np.log(np.maximum(nrm, self.rho) / self.rho) + 1.0, 1.0)
        for _ in range(60):
            g = self._gap(x, hi)
            bad = g > 0
            if not bad.any():
                break
            hi = np.where(bad, 2 * hi, hi)
        s = np.clip(np.log(np.maximum(nrm, self.rho) / self.rho), lo, hi)
        for _ in range(100):
            sv = Series.variable(s, 1)
            y1 = self.PF.pair1.flow_phi(Series.constant(x[:, 0], 1), -sv)
            y2 = self.PF.pair2.flow_phi(Series.constant(x[:, 1], 1), -sv)
            g = y1 * y1 + y2 * y2 - self.rho ** 2
            gv, dg = g.value, g.c[1]
            lo = np.where(gv > 0, s, lo)
            hi = np.where(gv > 0, hi, s)
            with np.errstate(divide="ignore", invalid="ignore"):
                sn = s - gv / dg
            bad = ~np.isfinite(sn) | (sn <= lo) | (sn >= hi)
            sn = np.where(bad, 0.5 * (lo + hi), sn)
            done = np.abs(gv) <= 1e-13 * self.rho ** 2
            if done.all():
                break
            s = np.where(done, s, sn)
        return s

    def _gap(self, x, s):
        y1 = self.PF.pair1.flow_phi(x[:, 0], -s)
        y2 = self.PF.pair2.flow_phi(x[:, 1], -s)
        return y1 * y1 + y2 * y2 - self.rho ** 2

    def from_plane(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        xf = x.reshape(-1, 2)
        s = self.flow_time(xf)
        y1 = self.PF.pair1.flow_phi(xf[:, 0], -s)
        y2 = self.PF.pair2.flow_phi(xf[:, 1], -s)
        theta = np.arctan2(y2, y1)
        t = self.radial.T.invert(s)
        return np.stack([t, self.twist_angle(t, theta)], -1).reshape(shape + (2,))


def infinity_chart(PF: PlaneFields, c: float) -> InfinityHole:
    return InfinityHole(PF, c)
