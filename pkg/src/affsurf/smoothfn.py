"""One-dimensional smooth maps with derivative jets.

Every map evaluates to a :class:`~affsurf.series.Series` (its Taylor jet) at an
array of points.  Closed-form maps are written against ``Series`` arithmetic so
their jets are exact; integral-defined maps get their value from quadrature and
their higher derivatives from the integrand's jet.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, NotPositive, RangeError, RangeUnknown, UnsupportedOrder
from .quadrature import fixed_gl, integrate_intervals
from .series import Series

MAX_ORDER = 4
# e^{-1/t} and all its derivatives are below 1e-290 once 1/t exceeds this
_FLAT_CUTOFF = 700.0
_CHECKPOINT_STEP = 0.1
_DENSITY_CUTOFF = 1e12

INF = math.inf


@dataclass(frozen=True)
class Jet:
    value: float | np.ndarray
    derivs: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Series helpers for flat functions


def masked(u: Series, mask: np.ndarray, fn: Callable[[Series], Series]) -> Series:
    """Apply ``fn`` only where ``mask`` holds; zero jets elsewhere."""
    out = np.zeros_like(u.c)
    if mask.any():
        sub = Series(u.c[:, mask])
        out[:, mask] = fn(sub).c
    return Series(out)


def flat_series(u: Series, side: int = 1) -> Series:
    """``e^{-1/u}`` for ``u > 0`` (side=+1) or ``e^{1/u}`` for ``u < 0`` (side=-1), else 0."""
    v = u.value * side
    mask = v > 1.0 / _FLAT_CUTOFF
    return masked(u, mask, lambda s: (-(1.0 / (s * side))).exp())


def step_series(u: Series) -> Series:
    """Flat smooth step: 0 for u <= 0, 1 for u >= 1."""
    a = flat_series(u)
    b = flat_series(1.0 - u)
    return a / (a + b)


def plateau_series(u: Series, lo: float, hi: float, ramp: float) -> Series:
    """1 on [lo, hi], 0 outside (lo - ramp, hi + ramp), flat transitions."""
    return step_series((u - (lo - ramp)) / ramp) * step_series(((hi + ramp) - u) / ramp)


# ---------------------------------------------------------------------------
# Maps


class SmoothMap1D:
    """Base class: a smooth function on an interval with jet access.

    ``monotone`` is one of ``"increasing"``, ``"decreasing"`` or ``"none"``;
    ``kind`` tags how values are produced (closed-form, piecewise,
    quadrature-defined, composed).
    """

    kind = "closed-form"

    def __init__(self, domain=(-INF, INF), monotone: str = "none", name: str = "",
                 closed: tuple[bool, bool] = (False, False), image=None):
        lo, hi = domain
        self.domain = (float(lo), float(hi))
        self.closed = closed
        self.monotone = monotone
        self.name = name
        self._image = image

    # -- evaluation -------------------------------------------------------------
    def _taylor(self, t: np.ndarray, order: int) -> Series:
        raise NotImplementedError

    def check_domain(self, t: np.ndarray) -> None:
        lo, hi = self.domain
        bad_lo = (t < lo) | ((t == lo) & (not self.closed[0]))
        bad_hi = (t > hi) | ((t == hi) & (not self.closed[1]))
        bad = bad_lo | bad_hi | ~np.isfinite(t)
        if np.any(bad):
            first = np.asarray(t)[bad].ravel()[0]
            raise DomainError(f"{self.name or type(self).__name__}: {first!r} outside {self.domain}")

    def taylor(self, t, order: int = 1) -> Series:
        t = np.asarray(t, dtype=float)
        self.check_domain(t)
        flat = t.ravel()
        s = self._taylor(flat, order)
        return Series(s.c.reshape((order + 1,) + t.shape))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        v = self.taylor(t_arr, 0).value
        return float(v) if np.ndim(t) == 0 else v

    def deriv(self, t, k: int = 1):
        t_arr = np.asarray(t, dtype=float)
        d = self.taylor(t_arr, k).derivs()[k]
        return float(d) if np.ndim(t) == 0 else d

    # -- inversion ----------------------------------------------------------------
    @property
    def image(self) -> tuple[float, float]:
        if self._image is None:
            self._image = self._compute_image()
        return self._image

    def _compute_image(self) -> tuple[float, float]:
        lo, hi = self.domain
        vals = []
        for end, closed, sign in ((lo, self.closed[0], -1), (hi, self.closed[1], 1)):
            if math.isfinite(end) and closed:
                vals.append(self(end))
            else:
                s = sign if self.monotone == "increasing" else -sign
                vals.append(s * INF)
        return (min(vals), max(vals))

    def _bracket(self, y: np.ndarray):
        lo, hi = self.domain
        a = np.full(y.shape, lo if math.isfinite(lo) else -1.0)
        b = np.full(y.shape, hi if math.isfinite(hi) else 1.0)
        if not self.closed[0] and math.isfinite(lo):
            a = a + 1e-14 * max(1.0, abs(lo))
        if not self.closed[1] and math.isfinite(hi):
            b = b - 1e-14 * max(1.0, abs(hi))
        sgn = 1.0 if self.monotone == "increasing" else -1.0
        for _ in range(200):
            fa = sgn * (self(a) - y)
            need = (fa > 0) & (not math.isfinite(lo))
            if not need.any():
                break
            width = np.maximum(b - a, 1.0)
            b = np.where(need, a, b)
            a = np.where(need, a - 2 * width, a)
        for _ in range(200):
            fb = sgn * (self(b) - y)
            need = (fb < 0) & (not math.isfinite(hi))
            if not need.any():
                break
            width = np.maximum(b - a, 1.0)
            a = np.where(need, b, a)
            b = np.where(need, b + 2 * width, b)
        with np.errstate(invalid="ignore"):
            enclosed = (sgn * (self(a) - y) <= 0) & (sgn * (self(b) - y) >= 0)
        if not np.all(enclosed):
            raise RangeError(f"{self.name or type(self).__name__}: value not attained")
        return a, b, None

    def invert(self, y, tol: float | None = None):
        if self.monotone not in ("increasing", "decreasing"):
            raise RangeError("invert requires a strictly monotone map")
        y_arr = np.asarray(y, dtype=float)
        flat = y_arr.ravel()
        ylo, yhi = self.image
        if np.any((flat < ylo) | (flat > yhi)) or np.any(~np.isfinite(flat)):
            raise RangeError(f"{self.name or type(self).__name__}: value outside range {self.image}")
        out = self._invert(flat, tol).reshape(y_arr.shape)
        return float(out) if np.ndim(y) == 0 else out

    def _invert(self, y: np.ndarray, tol: float | None) -> np.ndarray:
        a, b, x0 = self._bracket(y)
        return newton_bracketed(self, y, a, b, x0, tol)


def newton_bracketed(f: SmoothMap1D, y, a, b, x0=None, tol=None, maxiter: int = 200):
    """Safeguarded Newton on a monotone map; bisection after 3 non-contracting steps."""
    y = np.asarray(y, dtype=float)
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    sgn = 1.0 if f.monotone == "increasing" else -1.0
    tol_arr = np.full(y.shape, 1e-13) * np.maximum(1.0, np.abs(y)) if tol is None else np.full(y.shape, tol)
    x = 0.5 * (a + b) if x0 is None else np.clip(np.asarray(x0, dtype=float), a, b)
    stall = np.zeros(y.shape, dtype=int)
    prev = np.full(y.shape, INF)
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.nonzero(~done)[0]
        if idx.size == 0:
            return x
        xs = x[idx]
        s = f.taylor(xs, 1)
        r = s.value - y[idx]
        conv = np.abs(r) <= tol_arr[idx]
        width = b[idx] - a[idx]
        tiny = width <= 4e-16 * np.maximum(1.0, np.abs(xs))
        done[idx[conv | tiny]] = True
        neg = sgn * r < 0
        a[idx] = np.where(neg, xs, a[idx])
        b[idx] = np.where(neg, b[idx], xs)
        d = s.c[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xs - r / d
        contracting = np.abs(r) < 0.5 * prev[idx]
        stall[idx] = np.where(contracting, 0, stall[idx] + 1)
        prev[idx] = np.abs(r)
        use_bisect = ~np.isfinite(xn) | (xn <= a[idx]) | (xn >= b[idx]) | (stall[idx] >= 3)
        xn = np.where(use_bisect, 0.5 * (a[idx] + b[idx]), xn)
        stall[idx] = np.where(use_bisect, 0, stall[idx])
        keep = conv | tiny
        x[idx] = np.where(keep, xs, xn)
    if not done.all():
        raise ConvergenceError("monotone inversion did not converge")
    return x


class ExprMap(SmoothMap1D):
    """Closed-form map given as a function of a ``Series`` variable."""

    def __init__(self, expr: Callable[[Series], Series], domain=(-INF, INF), monotone="none",
                 name="", closed=(False, False), image=None, inverse: Callable | None = None):
        super().__init__(domain, monotone, name, closed, image)
        self.expr = expr
        self._inverse = inverse

    def _taylor(self, t, order):
        return self.expr(Series.variable(t, order))

    def _invert(self, y, tol):
        if self._inverse is not None:
            return np.asarray(self._inverse(y), dtype=float)
        return super()._invert(y, tol)


class PiecewiseMap(SmoothMap1D):
    """Map glued from pieces ``(lo, hi, map)``; a point uses the first piece covering it."""

    kind = "piecewise"

    def __init__(self, pieces: Sequence[tuple[float, float, SmoothMap1D]], domain=None,
                 monotone="none", name="", closed=(False, False), image=None):
        pieces = list(pieces)
        if domain is None:
            domain = (pieces[0][0], pieces[-1][1])
        super().__init__(domain, monotone, name, closed, image)
        self.pieces = pieces

    def junctions(self) -> list[float]:
        return [p[1] for p in self.pieces[:-1]]

    def junction_mismatch(self, order: int = MAX_ORDER) -> float:
        """Largest relative gap between the one-sided jets (derivatives ``0..order``) at the junctions."""
        worst = 0.0
        for (_, x, left), (_, _, right) in zip(self.pieces, self.pieces[1:]):
            a = left._taylor(np.array([x]), order).derivs()[:, 0]
            b = right._taylor(np.array([x]), order).derivs()[:, 0]
            worst = max(worst, float(np.max(np.abs(a - b) / (1.0 + np.abs(a)))))
        return worst

    def _assign(self, t):
        # at a shared endpoint a closed-form piece wins over a quadrature-backed one
        which = np.full(t.shape, -1)
        order = sorted(range(len(self.pieces)), key=lambda i: not isinstance(self.pieces[i][2], ExprMap))
        for i in order:
            lo, hi, _ = self.pieces[i]
            sel = (which < 0) & (t >= lo) & (t <= hi)
            which[sel] = i
        return which

    def _taylor(self, t, order):
        which = self._assign(t)
        out = np.zeros((order + 1,) + t.shape)
        for i, (_, _, m) in enumerate(self.pieces):
            sel = which == i
            if sel.any():
                out[:, sel] = m._taylor(t[sel], order).c
        if np.any(which < 0):
            raise DomainError(f"{self.name}: point not covered by any piece")
        return Series(out)

    def _piece_ranges(self):
        if getattr(self, "_ranges", None) is None:
            sgn = 1.0 if self.monotone == "increasing" else -1.0
            dlo, dhi = self.domain
            ranges = []
            for lo, hi, m in self.pieces:
                open_lo = not math.isfinite(lo) or (lo == dlo and not self.closed[0])
                open_hi = not math.isfinite(hi) or (hi == dhi and not self.closed[1])
                vlo = -sgn * INF if open_lo else float(m._taylor(np.array([lo]), 0).value[0])
                vhi = sgn * INF if open_hi else float(m._taylor(np.array([hi]), 0).value[0])
                ranges.append((min(vlo, vhi), max(vlo, vhi)))
            self._ranges = ranges
        return self._ranges

    def _invert(self, y, tol):
        out = np.full(y.shape, np.nan)
        for (ymin, ymax), (_, _, m) in zip(self._piece_ranges(), self.pieces):
            sel = np.isnan(out) & (y >= ymin) & (y <= ymax)
            if sel.any():
                out[sel] = m._invert(y[sel], tol)
        if np.isnan(out).any():
            raise RangeError(f"{self.name}: value not attained by any piece")
        return out


class IntegralMap(SmoothMap1D):
    """``t -> base_value + int_base^t density``, with a checkpoint table.

    Checkpoints are spaced so adjacent increments stay below
    ``0.1 * max(1, |value|)`` and steps below 0.1; integration stops where the
    density exceeds 1e12 near a finite endpoint.
    """

    kind = "quadrature-defined"

    def __init__(self, density: SmoothMap1D, base: float, base_value: float = 0.0,
                 domain=None, name="", closed=(False, False), image=None, extent: float = 100.0):
        if domain is None:
            domain = density.domain
        super().__init__(domain, "increasing", name, closed, image)
        self.density = density
        self.base = float(base)
        self.base_value = float(base_value)
        self.cutoff = [None, None]
        self._build_table(extent)

    def _density_values(self, x: np.ndarray) -> np.ndarray:
        return self.density._taylor(np.asarray(x, dtype=float), 0).value

    def _side_points(self, end: float, closed: bool, extent: float) -> np.ndarray:
        """Candidate checkpoints from the base towards ``end`` (excluding the base)."""
        direction = 1.0 if end > self.base else -1.0
        span = abs(end - self.base) if math.isfinite(end) else extent
        if span == 0:
            return np.array([])
        if not math.isfinite(end) or closed:
            n = max(1, int(math.ceil(span / _CHECKPOINT_STEP)))
            return self.base + direction * np.linspace(span / n, span, n)
        # open finite end: uniform up to 0.1 from the end, then geometric
        core = max(span - _CHECKPOINT_STEP, 0.0)
        n = int(math.ceil(core / _CHECKPOINT_STEP))
        pts = list(self.base + direction * np.linspace(core / n, core, n)) if n else []
        d = min(_CHECKPOINT_STEP, span)
        while d > 1e-15 * max(1.0, abs(end)):
            d *= 0.5
            x = end - direction * d
            if self._density_values(np.array([x]))[0] > _DENSITY_CUTOFF:
                self.cutoff[0 if direction < 0 else 1] = x
                break
            pts.append(x)
        return np.array(pts)

    def _build_table(self, extent: float):
        lo, hi = self.domain
        left = self._side_points(lo, self.closed[0], extent)[::-1]
        right = self._side_points(hi, self.closed[1], extent)
        ts = np.concatenate([left, [self.base], right])
        dens = self._density_values(ts)
        if np.any(dens <= 0) or np.any(~np.isfinite(dens)):
            bad = ts[(dens <= 0) | ~np.isfinite(dens)][0]
            raise NotPositive(f"{self.name}: density not positive at {bad}")
        inc = integrate_intervals(self._density_values, ts[:-1], ts[1:])
        ib = int(np.searchsorted(ts, self.base))
        for _ in range(40):
            vals = self._accumulate(inc, ib)
            scale = np.maximum(1.0, np.minimum(np.abs(vals[:-1]), np.abs(vals[1:])))
            bad = np.abs(inc) > _CHECKPOINT_STEP * scale
            if not bad.any():
                break
            # split offending intervals, integrating only the new halves
            lo_t, hi_t = ts[:-1][bad], ts[1:][bad]
            mids = 0.5 * (lo_t + hi_t)
            halves = integrate_intervals(self._density_values, np.concatenate([lo_t, mids]),
                                         np.concatenate([mids, hi_t]))
            nb = lo_t.size
            ts = np.sort(np.concatenate([ts, mids]))
            new_inc = np.empty(ts.size - 1)
            pos = np.nonzero(bad)[0] + np.arange(nb)  # index of each left half in the new list
            keep = np.ones(ts.size - 1, dtype=bool)
            keep[pos] = False
            keep[pos + 1] = False
            new_inc[keep] = inc[~bad]
            new_inc[pos] = halves[:nb]
            new_inc[pos + 1] = halves[nb:]
            inc = new_inc
            ib = int(np.searchsorted(ts, self.base))
        self.t_table = ts
        self.v_table = vals

    def _accumulate(self, inc: np.ndarray, ib: int) -> np.ndarray:
        """Running integral outward from the base so large tail values never cancel."""
        vals = np.empty(inc.size + 1)
        vals[ib] = self.base_value
        vals[ib + 1:] = self.base_value + np.cumsum(inc[ib:])
        vals[:ib] = self.base_value - np.cumsum(inc[:ib][::-1])[::-1]
        return vals

    def _warn_beyond(self, t):
        lo_cut, hi_cut = self.cutoff
        if (lo_cut is not None and np.any(t < lo_cut)) or (hi_cut is not None and np.any(t > hi_cut)):
            warnings.warn(f"{self.name}: evaluation beyond quadrature cutoff", RangeUnknown, stacklevel=3)

    def values(self, t: np.ndarray) -> np.ndarray:
        i = np.clip(np.searchsorted(self.t_table, t) - 1, 0, len(self.t_table) - 1)
        # use the nearer neighbour as the start point
        j = np.clip(i + 1, 0, len(self.t_table) - 1)
        closer = np.abs(self.t_table[j] - t) < np.abs(t - self.t_table[i])
        i = np.where(closer, j, i)
        t0 = self.t_table[i]
        v0 = self.v_table[i]
        far = np.abs(t - t0) > 2 * _CHECKPOINT_STEP
        out = v0 + fixed_gl(self._density_values, t0, t, 20)
        if far.any() or self.cutoff != [None, None]:
            lo_cut, hi_cut = self.cutoff
            beyond = far.copy()
            if lo_cut is not None:
                beyond |= t < lo_cut
            if hi_cut is not None:
                beyond |= t > hi_cut
            if beyond.any():
                self._warn_beyond(t)
                out[beyond] = v0[beyond] + integrate_intervals(self._density_values, t0[beyond], t[beyond])
        return out

    def _taylor(self, t, order):
        v = self.values(t)
        if order == 0:
            return Series(v[None, :])
        d = self.density._taylor(t, order - 1)
        c = np.zeros((order + 1,) + t.shape)
        c[0] = v
        for k in range(1, order + 1):
            c[k] = d.c[k - 1] / k
        return Series(c)

    def _compute_image(self):
        lo, hi = self.domain
        ends = []
        for end, closed, sign in ((lo, self.closed[0], -1), (hi, self.closed[1], 1)):
            ends.append(self(end) if (math.isfinite(end) and closed) else sign * INF)
        return tuple(ends)

    def _invert(self, y, tol):
        vt, tt = self.v_table, self.t_table
        i = np.clip(np.searchsorted(vt, y) - 1, 0, len(tt) - 2)
        a = tt[i].copy()
        b = tt[i + 1].copy()
        lo, hi = self.domain
        below = y < vt[0]
        above = y > vt[-1]
        span_lo = lo if math.isfinite(lo) else tt[0] - 1e6
        span_hi = hi if math.isfinite(hi) else tt[-1] + 1e6
        a = np.where(below, span_lo, a)
        b = np.where(below, tt[0], b)
        a = np.where(above, tt[-1], a)
        b = np.where(above, span_hi, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(below | above, 0.5, (y - vt[i]) / (vt[i + 1] - vt[i]))
        x0 = a + np.clip(frac, 0.0, 1.0) * (b - a)
        if not self.closed[0] and math.isfinite(lo):
            a = np.maximum(a, lo)
        if not self.closed[1] and math.isfinite(hi):
            b = np.minimum(b, hi)
        return _newton_interior(self, y, a, b, x0, tol)


def _newton_interior(f: SmoothMap1D, y, a, b, x0, tol):
    """Bracketed Newton where the bracket ends may sit on open domain endpoints."""
    lo, hi = f.domain
    eps_lo = np.where(a <= lo, 1e-300, 0.0)
    eps_hi = np.where(b >= hi, 1e-300, 0.0)
    a = np.where(a <= lo, np.nextafter(lo, INF) + eps_lo, a)
    b = np.where(b >= hi, np.nextafter(hi, -INF) - eps_hi, b)
    return newton_bracketed(f, y, a, b, x0, tol)


class ComposedMap(SmoothMap1D):
    """``outer o inner``."""

    kind = "composed"

    def __init__(self, outer: SmoothMap1D, inner: SmoothMap1D, name=""):
        mono = "none"
        if outer.monotone != "none" and inner.monotone != "none":
            mono = "increasing" if outer.monotone == inner.monotone else "decreasing"
        super().__init__(inner.domain, mono, name, inner.closed)
        self.outer = outer
        self.inner = inner

    def _taylor(self, t, order):
        s = self.inner._taylor(t, order)
        self.outer.check_domain(s.value)
        return self.outer._taylor(s.value, order).compose(s)

    def _compute_image(self):
        ilo, ihi = self.inner.image
        vals = []
        for v in (ilo, ihi):
            if math.isfinite(v):
                vals.append(self.outer(v))
            else:
                olo, ohi = self.outer.image
                inc = self.outer.monotone == "increasing"
                vals.append((ohi if inc else olo) if v > 0 else (olo if inc else ohi))
        return (min(vals), max(vals))

    def _invert(self, y, tol):
        return self.inner._invert(self.outer._invert(y, None), tol)


class InverseMap(SmoothMap1D):
    """Inverse of a strictly monotone map."""

    kind = "composed"

    def __init__(self, f: SmoothMap1D, name=""):
        super().__init__(f.image, f.monotone, name or f"inverse({f.name})")
        self.f = f
        self._image = f.domain

    def _taylor(self, y, order):
        z = self.f._invert(y, None)
        return self.f._taylor(z, order).reverse(z)

    def _invert(self, y, tol):
        return self.f._taylor(y, 0).value


class PushforwardMap(SmoothMap1D):
    """Coefficient of ``F_*(coeff d/dt)`` in the target coordinate."""

    kind = "composed"

    def __init__(self, F: SmoothMap1D, coeff: SmoothMap1D, name=""):
        super().__init__(F.image, "none", name)
        self.F = F
        self.coeff = coeff

    def _taylor(self, y, order):
        z = self.F._invert(y, None)
        Fs = self.F._taylor(z, order + 1)
        prod = Fs.deriv() * self.coeff._taylor(z, order)
        zs = Fs.truncate(order).reverse(z)
        return prod.compose(zs)


# ---------------------------------------------------------------------------
# Public operations


def eval_jet(f: SmoothMap1D, t, order: int = 1) -> Jet:
    if order > MAX_ORDER:
        raise UnsupportedOrder(f"order {order} > {MAX_ORDER}")
    if order < 0:
        raise UnsupportedOrder("order must be non-negative")
    d = f.taylor(np.asarray(t, dtype=float), order).derivs()
    if np.ndim(t) == 0:
        return Jet(float(d[0]), [float(x) for x in d[1:]])
    return Jet(d[0], [x for x in d[1:]])


def antiderivative_map(integrand: SmoothMap1D, base_point: float, domain=None, name="") -> IntegralMap:
    """``F(z) = int_base^z dtau / integrand(tau)``: the flow-time coordinate of integrand*d/dt."""
    dom = integrand.domain if domain is None else domain
    lo, hi = dom
    probe = np.linspace(lo if math.isfinite(lo) else base_point - 50, hi if math.isfinite(hi) else base_point + 50, 203)[1:-1]
    vals = integrand(probe)
    if np.any(vals <= 0):
        raise NotPositive(f"integrand not positive at {probe[vals <= 0][0]}")
    density = ExprMap(lambda u: _recip(integrand, u), dom, name=f"1/{integrand.name}")
    return IntegralMap(density, base_point, 0.0, dom, name=name or f"antiderivative({integrand.name})")


def _recip(f: SmoothMap1D, u: Series) -> Series:
    return f._taylor(u.value, u.order).reciprocal().compose(u)


def apply(f: SmoothMap1D, s: Series) -> Series:
    """Series of ``f(s(lambda))``: ``f`` composed with a series argument."""
    v = s.value
    inner = f._taylor(v.ravel(), s.order)
    return Series(inner.c.reshape((s.order + 1,) + v.shape)).compose(s)


def apply_deriv(f: SmoothMap1D, s: Series) -> Series:
    """Series of ``f'(s(lambda))``."""
    v = s.value
    inner = f._taylor(v.ravel(), s.order + 1).deriv()
    return Series(inner.c.reshape((s.order + 1,) + v.shape)).compose(s)


def invert(f: SmoothMap1D, y, tol: float = 1e-12):
    return f.invert(y, tol)


def pushforward_1d(F: SmoothMap1D, coeff: SmoothMap1D, name="") -> PushforwardMap:
    if F.monotone not in ("increasing", "decreasing"):
        raise RangeError("pushforward requires a monotone diffeomorphism")
    return PushforwardMap(F, coeff, name)


def compose(outer: SmoothMap1D, inner: SmoothMap1D, name="") -> ComposedMap:
    return ComposedMap(outer, inner, name)


# ---------------------------------------------------------------------------
# Common maps

def identity(domain=(-INF, INF)) -> ExprMap:
    return ExprMap(lambda u: u, domain, "increasing", "id", inverse=lambda y: y, image=domain)


def affine(slope: float, offset: float, domain=(-INF, INF), name="affine") -> ExprMap:
    mono = "increasing" if slope > 0 else ("decreasing" if slope < 0 else "none")
    return ExprMap(lambda u: u * slope + offset, domain, mono, name,
                   inverse=(lambda y: (y - offset) / slope) if slope else None)


def constant(value: float, domain=(-INF, INF), name="const") -> ExprMap:
    return ExprMap(lambda u: u * 0.0 + value, domain, "none", name)


def log_map() -> ExprMap:
    return ExprMap(lambda u: u.log(), (0.0, INF), "increasing", "log", image=(-INF, INF), inverse=np.exp)


def sin_map() -> ExprMap:
    return ExprMap(lambda u: u.sin(), name="sin")


class Flattener(ExprMap):
    """The flat function ``e^{1/t}`` for ``t < 0`` (0 for ``t >= 0``), or its mirror.

    ``side=-1`` gives the canonical form vanishing with all derivatives on
    ``[0, inf)``; ``side=+1`` gives ``e^{-1/t}`` on ``t > 0``.  ``prefactor``
    evaluates ``exp(-e^{-1/t})`` for ``t < 0`` (0 for ``t >= 0``), the factor that
    makes fields prolong by zero across a seam.
    """

    def __init__(self, side: int = -1):
        self.side = side
        super().__init__(lambda u: flat_series(u, side), name=f"flat{side:+d}")

    @staticmethod
    def prefactor(t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        neg = t < 0
        with np.errstate(over="ignore"):
            out[neg] = np.exp(-np.exp(-1.0 / t[neg]))
        return out
