"""A pair of line fields ``phi d/dt``, ``psi d/dt`` with ``[X, Y] = -Y`` and prescribed zeros.

The construction starts from the trigonometric fields ``(1 + cos t)``, ``-sin t``
and ``(1 - cos t)`` (times ``d/dt``), straightens a positive bump field into the
unit field with a quadrature-defined conjugator ``F``, then reshapes the line
with a monotone map ``G`` so that the zeros land at ``j / (k + 1)`` and the
first field equals ``t`` outside ``(-1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import smoothfn as sf
from .errors import InfeasibleSlack, InvalidK
from .series import Series

PI = math.pi
TWO_PI = 2.0 * math.pi
INF = math.inf


@dataclass(frozen=True)
class BaseFields:
    a: sf.SmoothMap1D
    b: sf.SmoothMap1D
    c: sf.SmoothMap1D


def build_base_fields() -> BaseFields:
    # half-angle forms keep full relative accuracy near the zeros
    a = sf.ExprMap(lambda u: 2.0 * (u * 0.5).cos() ** 2, name="1+cos")
    b = sf.ExprMap(lambda u: -u.sin(), name="-sin")
    c = sf.ExprMap(lambda u: 2.0 * (u * 0.5).sin() ** 2, name="1-cos")
    return BaseFields(a, b, c)


def _bump_series(u: Series, k: int) -> Series:
    # plateaus equal to 1 within pi/4 of 2*l*pi and 0 beyond 3*pi/4
    P = Series(np.zeros_like(u.c))
    for ell in range(k):
        P = P + sf.plateau_series(u - TWO_PI * ell, -PI / 4, PI / 4, PI / 2)
    rise = sf.step_series((u + 4 * k * PI) / (4 * k * PI - 2.5 * PI))
    fall = sf.step_series((4 * k * PI - u) / (4 * k * PI - (2 * k * PI + PI / 2)))
    sn, cs = (u * 0.5).sincos()
    return rise * fall * 2.0 * (P * cs * cs + (1.0 - P) * sn * sn)


def build_bump(k: int) -> sf.SmoothMap1D:
    """Positive on ``(-2pi, 2k pi)``, ``1 + cos`` near ``2l pi`` (l < k), ``1 - cos`` on the end arcs."""
    if not isinstance(k, (int, np.integer)) or k <= 0:
        raise InvalidK(f"k must be a positive integer, got {k!r}")
    return sf.ExprMap(lambda u: _bump_series(u, k), name=f"bump[k={k}]")


def build_conjugator(f: sf.SmoothMap1D, k: int) -> sf.IntegralMap:
    return sf.antiderivative_map(f, -PI, domain=(-TWO_PI, TWO_PI * k), name=f"F[k={k}]")


def _gap_density(length: float, target: float) -> tuple[sf.SmoothMap1D, float]:
    """Density on ``[0, length]`` equal to 1 near both ends with integral ``target``."""
    tau = min(target / 2.0, length / 4.0)
    kappa = (target - tau) / (length - tau)
    # plateau of height 1 on [tau, length - tau] with ramps of width tau
    expr = lambda u: 1.0 - (1.0 - kappa) * sf.plateau_series(u, tau, length - tau, tau)
    return sf.ExprMap(expr, (0.0, length), closed=(True, True), name="gap-density"), kappa


class _Shifted(sf.SmoothMap1D):
    """``t -> m(t - shift) + offset``."""

    def __init__(self, m: sf.SmoothMap1D, shift: float, offset: float, domain, monotone, name=""):
        super().__init__(domain, monotone, name, closed=(True, True))
        self.m, self.shift, self.offset = m, shift, offset

    def _taylor(self, t, order):
        return self.m._taylor(t - self.shift, order) + self.offset

    def _invert(self, y, tol):
        return self.m._invert(y - self.offset, tol) + self.shift


def _gap_map(y0: float, y1: float, x0: float, x1: float, name: str) -> sf.SmoothMap1D:
    dens, _ = _gap_density(y1 - y0, x1 - x0)
    integral = sf.IntegralMap(dens, 0.0, 0.0, (0.0, y1 - y0), closed=(True, True), name=name)
    return _Shifted(integral, y0, x0, (y0, y1), "increasing", name)


@dataclass
class FinalDiffeo:
    G: sf.PiecewiseMap
    a: float
    p: list
    targets: list
    r0: float


def build_final_diffeo(F: sf.SmoothMap1D, k: int, r0: float | None = None) -> FinalDiffeo:
    """Monotone ``G``: identity on ``(-inf, 0]``, ``y - a`` beyond ``a + 1``, translations near ``F(2(j-1)pi)``."""
    p = [F(TWO_PI * (j - 1)) for j in range(1, k + 1)]
    a = F((2 * k - 1) * PI)
    targets = [j / (k + 1) for j in range(1, k + 1)]
    if r0 is None:
        r0 = min(1.0 / (4 * (k + 1)), 0.9 * math.tan(PI / 8))
    # y-intervals that must be carried rigidly, and their x-images
    ys = [(-INF, 0.0)] + [(pj - r0, pj + r0) for pj in p] + [(a + 1.0, INF)]
    xs = [(-INF, 0.0)] + [(tj - r0, tj + r0) for tj in targets] + [(1.0, INF)]
    for (y_lo, y_hi), (y_next, _), (x_lo, x_hi), (x_next, _) in zip(ys, ys[1:], xs, xs[1:]):
        if not (y_next > y_hi and x_next > x_hi):
            raise InfeasibleSlack(f"constrained zones overlap for r0={r0}")
    pieces = [(-INF, 0.0, sf.identity())]
    for j in range(k):
        y0, y1 = ys[j][1], ys[j + 1][0]
        x0, x1 = xs[j][1], xs[j + 1][0]
        pieces.append((y0, y1, _gap_map(y0, y1, x0, x1, f"G-gap{j}")))
        shift = p[j] - targets[j]
        pieces.append((ys[j + 1][0], ys[j + 1][1], sf.affine(1.0, -shift)))
    y0, y1 = ys[k][1], ys[k + 1][0]
    pieces.append((y0, y1, _gap_map(y0, y1, xs[k][1], 1.0, f"G-gap{k}")))
    pieces.append((a + 1.0, INF, sf.affine(1.0, -a)))
    G = sf.PiecewiseMap(pieces, monotone="increasing", name=f"G[k={k}]", image=(-INF, INF))
    return FinalDiffeo(G, a, p, targets, r0)


class _Restricted(sf.SmoothMap1D):
    """Evaluate ``m`` on a sub-interval (used for pushforward pieces)."""

    def __init__(self, m, lo, hi, name=""):
        super().__init__((lo, hi), "none", name, closed=(True, True))
        self.m = m

    def _taylor(self, t, order):
        return self.m._taylor(t, order)


@dataclass
class Pair1D:
    k: int
    phi: sf.SmoothMap1D
    psi: sf.SmoothMap1D
    zeros: list
    near_radius: float
    H: sf.SmoothMap1D = None
    F: sf.SmoothMap1D = None
    G: sf.SmoothMap1D = None
    a: float = 0.0
    p: list = field(default_factory=list)
    linear: bool = False

    # ---- exact flows ---------------------------------------------------------------
    # The field phi d/dx is H_*(-sin z d/dz) with H = G o F; in the variable
    # q = tan((z - 2 l pi)/2) its flow is q -> q e^{-s}.  psi d/dx is
    # H_*((1 - cos z) d/dz), whose flow is cot(z/2) -> cot(z/2) - s.

    def flow_phi(self, x, s):
        """Time-``s`` map of ``phi d/dx``; accepts arrays or ``Series``."""
        xs, ss, wrap = _as_pair(x, s)
        out, _ = self._flow_phi(xs, ss, want_jac=False)
        return _unwrap(out, wrap)

    def flow_phi_jac(self, x, s):
        """``(x', dx'/dx)`` for the ``phi`` flow."""
        xs, ss, wrap = _as_pair(x, s)
        out, jac = self._flow_phi(xs, ss, want_jac=True)
        return _unwrap(out, wrap), _unwrap(jac, wrap)

    def flow_psi(self, x, s):
        xs, ss, wrap = _as_pair(x, s)
        out, _ = self._flow_psi(xs, ss, want_jac=False)
        return _unwrap(out, wrap)

    def flow_psi_jac(self, x, s):
        xs, ss, wrap = _as_pair(x, s)
        out, jac = self._flow_psi(xs, ss, want_jac=True)
        return _unwrap(out, wrap), _unwrap(jac, wrap)

    def _hinv(self, x: Series) -> Series:
        return sf.apply(sf.InverseMap(self.H), x)

    def _flow_phi(self, x: Series, s: Series, want_jac: bool):
        out = Series(np.zeros_like(x.c))
        jac = Series(np.zeros_like(x.c))
        xv = x.value
        if self.linear:
            e = s.exp()
            if self.phi_scale:
                return x * e, e
            return x * 1.0, e * 0.0 + 1.0
        left = xv <= 0
        if left.any():
            e = s[left].exp()
            out[left] = x[left] * e
            jac[left] = e
        rest = ~left
        if not rest.any():
            return out, jac
        xr, sr = x[rest], s[rest]
        k = self.k
        n = xr.value.size
        ell = np.zeros(n, dtype=int)
        w_sign = np.zeros(n)
        # coordinates: tan form (|q| <= 1) or cot form p = 1/q
        use_tan = np.zeros(n, dtype=bool)
        coord = Series(np.zeros_like(xr.c))
        dx_dc = Series(np.zeros_like(xr.c))
        right = xr.value >= 1.0
        if right.any():
            # x = -1/q with q in [-1, 0): in cot form p = -x
            ell[right] = k
            w_sign[right] = -1.0
            coord[right] = -xr[right]
            dx_dc[right] = Series(np.zeros_like(xr[right].c)) - 1.0
        mid = ~right
        if mid.any():
            z = self._hinv(xr[mid])
            zv = z.value
            ell_m = np.rint(zv / TWO_PI).astype(int)
            w = z - TWO_PI * ell_m
            wv = w.value
            tan_m = np.abs(wv) <= PI / 2
            c_m = Series(np.zeros_like(w.c))
            dzdc = Series(np.zeros_like(w.c))
            if tan_m.any():
                q = (w[tan_m] * 0.5).sin() / (w[tan_m] * 0.5).cos()
                c_m[tan_m] = q
                dzdc[tan_m] = 2.0 / (1.0 + q * q)
            if (~tan_m).any():
                half = w[~tan_m] * 0.5
                pp = half.cos() / half.sin()
                c_m[~tan_m] = pp
                dzdc[~tan_m] = -2.0 / (1.0 + pp * pp)
            ell[mid] = ell_m
            w_sign[mid] = np.where(wv >= 0, 1.0, -1.0)
            use_tan[mid] = tan_m
            coord[mid] = c_m
            if want_jac:
                dx_dc[mid] = sf.apply_deriv(self.H, z) * dzdc
        # flow the coordinate
        factor = Series(np.where(use_tan, 1.0, -1.0) * sr.c * -1.0).exp()  # e^{-s} (tan) or e^{s} (cot)
        new = coord * factor
        # re-express: choose the representation with magnitude <= 1
        nv = new.value
        big = np.abs(nv) > 1.0
        tan_new = np.where(big, ~use_tan, use_tan)
        new_c = Series(new.c.copy())
        if big.any():
            new_c[big] = 1.0 / new[big]
        res = Series(np.zeros_like(xr.c))
        dres = Series(np.zeros_like(xr.c))
        # exit into x >= 1 when in the last arc with w' >= -pi/2
        last = (ell == k)
        tv = new_c.value
        qprime_le = np.where(tan_new, tv, np.where(tv != 0, 1.0 / np.where(tv != 0, tv, 1.0), -INF))
        exit_lin = last & (qprime_le >= -1.0) & (qprime_le < 0.0)
        if exit_lin.any():
            sub = new_c[exit_lin]
            tn = tan_new[exit_lin]
            val = Series(np.where(tn, (-1.0 / sub).c, (-sub).c))
            res[exit_lin] = val
            dval = Series(np.where(tn, (1.0 / (sub * sub)).c, (Series(np.zeros_like(sub.c)) - 1.0).c))
            dres[exit_lin] = dval
        inner = ~exit_lin
        if inner.any():
            sub = new_c[inner]
            tn = tan_new[inner]
            half = Series(np.zeros_like(sub.c))
            dz = Series(np.zeros_like(sub.c))
            if tn.any():
                half[tn] = sub[tn].arctan()
                dz[tn] = 2.0 / (1.0 + sub[tn] * sub[tn])
            if (~tn).any():
                sg = w_sign[inner][~tn]
                half[~tn] = (-sub[~tn].arctan()) + sg * PI / 2
                dz[~tn] = -2.0 / (1.0 + sub[~tn] * sub[~tn])
            zn = half * 2.0 + TWO_PI * ell[inner]
            res[inner] = sf.apply(self.H, zn)
            if want_jac:
                dres[inner] = sf.apply_deriv(self.H, zn) * dz
        out[rest] = res
        if want_jac:
            # d new / d coord in the representation actually used on output
            inv_flip = big
            dnew = factor * 1.0
            if inv_flip.any():
                dnew[inv_flip] = -(factor[inv_flip]) / (new[inv_flip] * new[inv_flip])
            jac[rest] = dres * dnew / dx_dc
        return out, jac

    def _flow_psi(self, x: Series, s: Series, want_jac: bool):
        out = Series(np.zeros_like(x.c))
        jac = Series(np.zeros_like(x.c))
        if self.linear:
            if self.psi_const == 0.0:
                return x * 1.0, x * 0.0 + 1.0
            return x + s * self.psi_const, x * 0.0 + 1.0
        k = self.k
        xv = x.value
        n = xv.size
        seg = np.zeros(n, dtype=int)
        use_v = np.zeros(n, dtype=bool)
        coord = Series(np.zeros_like(x.c))
        dx_dc = Series(np.zeros_like(x.c))
        left = xv <= 0
        right = xv >= 1
        for mask, m in ((left, -1), (right, k - 1)):
            if mask.any():
                seg[mask] = m
                use_v[mask] = True
                coord[mask] = -x[mask]
                dx_dc[mask] = Series(np.zeros_like(x[mask].c)) - 1.0
        mid = ~(left | right)
        if mid.any():
            z = self._hinv(x[mid])
            zv = z.value
            m = np.floor(zv / TWO_PI).astype(int)
            half = (z - TWO_PI * m) * 0.5
            cs, sn = half.cos(), half.sin()
            vmode = np.abs(cs.value) <= np.abs(sn.value)
            c_m = Series(np.zeros_like(z.c))
            dzdc = Series(np.zeros_like(z.c))
            if vmode.any():
                v = cs[vmode] / sn[vmode]
                c_m[vmode] = v
                dzdc[vmode] = -2.0 / (1.0 + v * v)
            if (~vmode).any():
                q = sn[~vmode] / cs[~vmode]
                c_m[~vmode] = q
                dzdc[~vmode] = 2.0 / (1.0 + q * q)
            seg[mid] = m
            use_v[mid] = vmode
            coord[mid] = c_m
            if want_jac:
                dx_dc[mid] = sf.apply_deriv(self.H, z) * dzdc
        # v' = v - s ; q' = q / (1 - s q)
        new = Series(np.zeros_like(x.c))
        dnew = Series(np.zeros_like(x.c))
        if use_v.any():
            new[use_v] = coord[use_v] - s[use_v]
            dnew[use_v] = Series(np.zeros_like(coord[use_v].c)) + 1.0
        if (~use_v).any():
            q = coord[~use_v]
            den = 1.0 - s[~use_v] * q
            new[~use_v] = q / den
            dnew[~use_v] = 1.0 / (den * den)
        nv = new.value
        # convert everything to v' where safe, else keep q'
        v_out = use_v.copy()
        flip_to_v = ~use_v & (np.abs(nv) >= 1.0)
        flip_to_q = use_v & (np.abs(nv) > 1.0)
        rep = Series(new.c.copy())
        drep = Series(dnew.c.copy())
        for mask in (flip_to_v, flip_to_q):
            if mask.any():
                rep[mask] = 1.0 / new[mask]
                drep[mask] = -dnew[mask] / (new[mask] * new[mask])
        v_out = np.where(flip_to_v, True, np.where(flip_to_q, False, use_v))
        # linear exits: segment -1 with v' >= 0, segment k-1 with v' <= -1
        rv = rep.value
        vprime = np.where(v_out, rv, np.where(rv != 0, 1.0 / np.where(rv != 0, rv, 1.0), INF))
        lin = ((seg == -1) & (vprime >= 0)) | ((seg == k - 1) & (vprime <= -1.0))
        res = Series(np.zeros_like(x.c))
        dres = Series(np.zeros_like(x.c))
        if lin.any():
            sub = rep[lin]
            vm = v_out[lin]
            res[lin] = Series(np.where(vm, (-sub).c, (-1.0 / sub).c))
            dres[lin] = Series(np.where(vm, (sub * 0.0 - 1.0).c, (1.0 / (sub * sub)).c))
        inner = ~lin
        if inner.any():
            sub = rep[inner]
            vm = v_out[inner]
            half = Series(np.zeros_like(sub.c))
            dz = Series(np.zeros_like(sub.c))
            if vm.any():
                half[vm] = PI / 2 - sub[vm].arctan()
                dz[vm] = -2.0 / (1.0 + sub[vm] * sub[vm])
            if (~vm).any():
                qq = sub[~vm]
                off = np.where(qq.value >= 0, 0.0, PI)
                half[~vm] = qq.arctan() + off
                dz[~vm] = 2.0 / (1.0 + qq * qq)
            zn = half * 2.0 + TWO_PI * seg[inner]
            res[inner] = sf.apply(self.H, zn)
            if want_jac:
                dres[inner] = sf.apply_deriv(self.H, zn) * dz
        out = res
        if want_jac:
            jac = dres * drep / dx_dc
        return out, jac

    phi_scale: bool = True
    psi_const: float = 1.0


def _as_pair(x, s):
    if isinstance(x, Series) or isinstance(s, Series):
        order = x.order if isinstance(x, Series) else s.order
        xs = x if isinstance(x, Series) else Series.constant(x, order)
        ss = s if isinstance(s, Series) else Series.constant(s, order)
        shape = np.broadcast_shapes(xs.shape, ss.shape)
        xs = Series(np.broadcast_to(xs.c, (order + 1,) + shape).reshape(order + 1, -1).copy())
        ss = Series(np.broadcast_to(ss.c, (order + 1,) + shape).reshape(order + 1, -1).copy())
        return xs, ss, ("series", shape)
    xa = np.asarray(x, dtype=float)
    sa = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(xa.shape, sa.shape)
    xs = Series(np.broadcast_to(xa, shape).reshape(1, -1).copy())
    ss = Series(np.broadcast_to(sa, shape).reshape(1, -1).copy())
    return xs, ss, ("array", shape, np.ndim(x) == 0 and np.ndim(s) == 0)


def _unwrap(s: Series, wrap):
    if wrap[0] == "series":
        return Series(s.c.reshape((s.order + 1,) + wrap[1]))
    v = s.c[0].reshape(wrap[1])
    return float(v) if wrap[2] else v


def _pushed_piece(H, coeff, lo, hi, name):
    return _Restricted(sf.PushforwardMap(H, coeff, name), lo, hi, name)


@lru_cache(maxsize=None)
def build_pair(k: int) -> Pair1D:
    """Lemma pair for ``k`` zeros at ``j / (k + 1)``; cached per ``k``."""
    if not isinstance(k, (int, np.integer)) or k <= 0:
        raise InvalidK(f"k must be a positive integer, got {k!r}")
    base = build_base_fields()
    f = build_bump(k)
    F = build_conjugator(f, k)
    fd = build_final_diffeo(F, k)
    H = sf.compose(fd.G, F, name=f"H[k={k}]")
    H._image = (-INF, INF)
    r0 = fd.r0
    phi_pieces = [(-INF, 0.0, sf.identity())]
    psi_pieces = [(-INF, 0.0, sf.constant(1.0))]
    edges = [0.0]
    for j, aj in enumerate(fd.targets):
        lo, hi = edges[-1], aj - r0
        phi_pieces.append((lo, hi, _pushed_piece(H, base.b, lo, hi, f"phi-gap{j}")))
        psi_pieces.append((lo, hi, _pushed_piece(H, base.c, lo, hi, f"psi-gap{j}")))
        phi_pieces.append((aj - r0, aj + r0, sf.affine(-1.0, aj)))
        psi_pieces.append((aj - r0, aj + r0, sf.ExprMap(lambda u, aj=aj: (u - aj) * (u - aj))))
        edges.append(aj + r0)
    phi_pieces.append((edges[-1], 1.0, _pushed_piece(H, base.b, edges[-1], 1.0, f"phi-gap{k}")))
    psi_pieces.append((edges[-1], 1.0, _pushed_piece(H, base.c, edges[-1], 1.0, f"psi-gap{k}")))
    phi_pieces.append((1.0, INF, sf.identity()))
    psi_pieces.append((1.0, INF, sf.constant(1.0)))
    phi = sf.PiecewiseMap(phi_pieces, name=f"phi[k={k}]")
    psi = sf.PiecewiseMap(psi_pieces, name=f"psi[k={k}]")
    return Pair1D(k, phi, psi, list(fd.targets), r0, H, F, fd.G, fd.a, fd.p)


def linear_pair(psi_value: float = 1.0) -> Pair1D:
    """``phi = x``, ``psi = psi_value``: the pair used when no zeros are wanted."""
    phi = sf.identity()
    psi = sf.constant(psi_value)
    return Pair1D(0, phi, psi, [], INF, linear=True, psi_const=psi_value)
