"""Truncated Taylor series with vectorised coefficients.

A :class:`Series` holds normalised Taylor coefficients ``c[k] = f^(k)(t0) / k!``
for ``k = 0..m`` in an array of shape ``(m + 1, *shape)``, so one object carries
the jets of a function at many expansion points at once.  Arithmetic follows the
usual Taylor-mode recurrences; :meth:`Series.compose` is the chain rule and
:meth:`Series.reverse` the inverse-function rule.
"""

from __future__ import annotations

import math

import numpy as np


def _as_coeffs(value, order: int, shape) -> np.ndarray:
    out = np.zeros((order + 1,) + tuple(shape))
    out[0] = value
    return out


class Series:
    __slots__ = ("c",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    # construction -----------------------------------------------------------
    @classmethod
    def variable(cls, t, order: int) -> "Series":
        t = np.asarray(t, dtype=float)
        c = _as_coeffs(t, order, t.shape)
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order: int) -> "Series":
        value = np.asarray(value, dtype=float)
        return cls(_as_coeffs(value, order, value.shape))

    @classmethod
    def from_derivs(cls, derivs) -> "Series":
        """Build from ``[f, f', f'', ...]`` (derivatives, not Taylor coefficients)."""
        derivs = np.asarray(derivs, dtype=float)
        fact = np.array([math.factorial(k) for k in range(derivs.shape[0])], dtype=float)
        return cls(derivs / fact.reshape((-1,) + (1,) * (derivs.ndim - 1)))

    # basic properties ---------------------------------------------------------
    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def derivs(self) -> np.ndarray:
        """Derivatives ``f^(k)`` for ``k = 0..m`` (rescaled coefficients)."""
        fact = np.array([math.factorial(k) for k in range(self.order + 1)], dtype=float)
        return self.c * fact.reshape((-1,) + (1,) * len(self.shape))

    def truncate(self, order: int) -> "Series":
        return Series(self.c[: order + 1])

    def _coerce(self, other) -> "Series":
        if isinstance(other, Series):
            if other.order != self.order:
                m = min(other.order, self.order)
                return other.truncate(m)
            return other
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(other.shape, self.shape)
        c = np.zeros((self.order + 1,) + shape)
        c[0] = other
        return Series(c)

    def _pair(self, other):
        o = self._coerce(other)
        s = self if o.order == self.order else self.truncate(o.order)
        return s, o

    # arithmetic -------------------------------------------------------------
    def __neg__(self):
        return Series(-self.c)

    def __add__(self, other):
        if not isinstance(other, Series):
            o = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(self.shape, o.shape)
            c = np.broadcast_to(self.c, (self.order + 1,) + shape).copy()
            c[0] = c[0] + o
            return Series(c)
        s, o = self._pair(other)
        return Series(s.c + o.c)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Series) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.c * np.asarray(other, dtype=float))
        a, b = self._pair(other)
        m = a.order
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros((m + 1,) + shape)
        for k in range(m + 1):
            acc = 0.0
            for j in range(k + 1):
                acc = acc + a.c[j] * b.c[k - j]
            out[k] = acc
        return Series(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Series":
        m = self.order
        out = np.zeros_like(self.c)
        b0 = self.c[0]
        # zero divisors give inf/nan entries that callers mask out
        with np.errstate(divide="ignore", invalid="ignore"):
            out[0] = 1.0 / b0
            for k in range(1, m + 1):
                acc = 0.0
                for j in range(1, k + 1):
                    acc = acc + self.c[j] * out[k - j]
                out[k] = -acc / b0
        return Series(out)

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series(self.c / np.asarray(other, dtype=float))
        a, b = self._pair(other)
        m = a.order
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros((m + 1,) + shape)
        b0 = b.c[0]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for k in range(m + 1):
                acc = a.c[k]
                for j in range(1, k + 1):
                    acc = acc - b.c[j] * out[k - j]
                out[k] = acc / b0
        return Series(out)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            return (self.log() * n).exp()
        result = Series.constant(np.ones(self.shape), self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # elementary functions ------------------------------------------------------
    def exp(self) -> "Series":
        m = self.order
        out = np.zeros_like(self.c)
        out[0] = np.exp(self.c[0])
        for k in range(1, m + 1):
            acc = 0.0
            for j in range(1, k + 1):
                acc = acc + j * self.c[j] * out[k - j]
            out[k] = acc / k
        return Series(out)

    def log(self) -> "Series":
        m = self.order
        out = np.zeros_like(self.c)
        a0 = self.c[0]
        out[0] = np.log(a0)
        for k in range(1, m + 1):
            acc = 0.0
            for j in range(1, k):
                acc = acc + j * out[j] * self.c[k - j]
            out[k] = (self.c[k] - acc / k) / a0
        return Series(out)

    def sincos(self) -> tuple["Series", "Series"]:
        m = self.order
        s = np.zeros_like(self.c)
        c = np.zeros_like(self.c)
        s[0] = np.sin(self.c[0])
        c[0] = np.cos(self.c[0])
        for k in range(1, m + 1):
            acc_s = 0.0
            acc_c = 0.0
            for j in range(1, k + 1):
                acc_s = acc_s + j * self.c[j] * c[k - j]
                acc_c = acc_c + j * self.c[j] * s[k - j]
            s[k] = acc_s / k
            c[k] = -acc_c / k
        return Series(s), Series(c)

    def sin(self) -> "Series":
        return self.sincos()[0]

    def cos(self) -> "Series":
        return self.sincos()[1]

    def arctan(self) -> "Series":
        d = (self * self + 1.0).reciprocal() * self.deriv_full()
        return d.integ(np.arctan(self.c[0]))

    # calculus -----------------------------------------------------------------
    def deriv(self) -> "Series":
        """Series of the derivative; the order drops by one."""
        m = self.order
        k = np.arange(1, m + 1, dtype=float).reshape((-1,) + (1,) * len(self.shape))
        return Series(self.c[1:] * k)

    def deriv_full(self) -> "Series":
        """Derivative padded back to the original order with a zero top coefficient."""
        d = self.deriv()
        return Series(np.concatenate([d.c, np.zeros((1,) + self.shape)], axis=0))

    def integ(self, c0) -> "Series":
        """Antiderivative series with constant term ``c0``; order stays the same."""
        m = self.order
        out = np.zeros_like(self.c)
        out[0] = c0
        for k in range(1, m + 1):
            out[k] = self.c[k - 1] / k
        return Series(out)

    def compose(self, inner: "Series") -> "Series":
        """Chain rule: ``self`` expanded at ``inner.value``, evaluated along ``inner``.

        Returns the series of ``g(u(t))`` where ``self`` is the series of ``g`` about
        ``u(t0)`` and ``inner`` the series of ``u`` about ``t0``.
        """
        m = min(self.order, inner.order)
        d = Series(inner.c[: m + 1].copy())
        d.c[0] = 0.0
        shape = np.broadcast_shapes(self.shape, inner.shape)
        out = np.zeros((m + 1,) + shape)
        out[0] = self.c[m]
        result = Series(out)
        for k in range(m - 1, -1, -1):
            result = result * d
            result.c[0] = result.c[0] + self.c[k]
        return result

    def reverse(self, base) -> "Series":
        """Series of the inverse function about ``self.value``, with value ``base``."""
        m = self.order
        if m == 0:
            return Series(np.broadcast_to(np.asarray(base, dtype=float), self.shape)[None].copy())
        b1 = self.c[1]
        shape = self.shape
        a = np.zeros((m + 1,) + shape)
        a[0] = 0.0
        if m >= 1:
            a[1] = 1.0 / b1
        for k in range(2, m + 1):
            probe = Series(a[: k + 1].copy())
            lifted = Series(self.c[: k + 1].copy())
            lifted.c[0] = 0.0
            comp = lifted.compose(probe)
            a[k] = -comp.c[k] / b1
        a[0] = base
        return Series(a)

    def __getitem__(self, idx) -> "Series":
        return Series(self.c[(slice(None),) + (idx if isinstance(idx, tuple) else (idx,))])

    def __setitem__(self, idx, other: "Series") -> None:
        self.c[(slice(None),) + (idx if isinstance(idx, tuple) else (idx,))] = other.c

    def where(self, mask, other: "Series") -> "Series":
        return Series(np.where(mask, self.c, other.c))

    def __repr__(self) -> str:
        return f"Series(order={self.order}, shape={self.shape})"


def zeros(shape, order: int) -> Series:
    return Series(np.zeros((order + 1,) + tuple(np.shape(np.empty(shape)))))


def as_series(x, order: int) -> Series:
    return x if isinstance(x, Series) else Series.constant(x, order)
