"""Batched Dormand-Prince 5(4) integration with per-trajectory step control."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StiffnessError

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# dense-output weights (Shampine), polynomial in the step fraction
_DENSE = np.array([
    [1.0, -183 / 64, 37 / 12, -145 / 128],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 1500 / 371, -1000 / 159, 1000 / 371],
    [0.0, -125 / 32, 125 / 12, -375 / 64],
    [0.0, 9477 / 3392, -729 / 106, 25515 / 6784],
    [0.0, -11 / 7, 11 / 3, -55 / 28],
    [0.0, 3 / 2, -4.0, 5 / 2],
])


@dataclass
class Step:
    y_new: np.ndarray
    err: np.ndarray  # scaled error norm per trajectory
    k: np.ndarray    # stages, shape (7, N, d)
    y0: np.ndarray
    h: np.ndarray

    def dense(self, frac: np.ndarray) -> np.ndarray:
        """State at ``t0 + frac * h`` (``frac`` in [0, 1], per trajectory)."""
        frac = np.asarray(frac, dtype=float)
        powers = np.stack([frac, frac ** 2, frac ** 3, frac ** 4], -1)  # (N, 4)
        w = powers @ _DENSE.T  # (N, 7)
        return self.y0 + self.h[:, None] * np.einsum("ns,snd->nd", w, self.k)


def dp5_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: np.ndarray,
             rtol: float, atol: float, k1: np.ndarray | None = None) -> Step:
    """One embedded step for every row of ``y`` with its own ``h``."""
    n, d = y.shape
    k = np.empty((7, n, d))
    k[0] = f(y) if k1 is None else k1
    hh = h[:, None]
    for i in range(1, 7):
        acc = y.copy()
        for j, a in enumerate(_A[i]):
            if a:
                acc += hh * a * k[j]
        k[i] = f(acc)
    y_new = y + hh * np.einsum("s,snd->nd", _B5[:6], k[:6])
    err_vec = hh * np.einsum("s,snd->nd", _E, k)
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
    return Step(y_new, err, k, y, h)


def integrate(f: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, t_end: np.ndarray,
              rtol: float = 1e-10, atol: float = 1e-12, h0: float = 0.05, max_steps: int = 100_000):
    """Integrate ``y' = f(y)`` from 0 to ``t_end`` (per row, sign allowed)."""
    y = np.array(y0, dtype=float, copy=True)
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), y.shape[:1]).copy()
    direction = np.sign(t_end)
    remaining = np.abs(t_end)
    h = np.minimum(np.full(len(y), h0), remaining)
    active = remaining > 0
    steps = 0
    while active.any():
        steps += 1
        if steps > max_steps:
            raise StiffnessError("step budget exhausted")
        idx = np.nonzero(active)[0]
        hs = h[idx] * direction[idx]
        st = dp5_step(f, y[idx], hs, rtol, atol)
        ok = st.err <= 1.0
        acc = idx[ok]
        y[acc] = st.y_new[ok]
        remaining[acc] -= h[acc]
        h[idx] = h[idx] * step_factor(st.err)
        if np.any(h[idx] < 1e-14):
            raise StiffnessError("step size underflow")
        remaining = np.where(remaining < 1e-15 * np.maximum(1.0, np.abs(t_end)), 0.0, remaining)
        h = np.minimum(h, remaining)
        active = remaining > 0
    return y


def step_factor(err: np.ndarray) -> np.ndarray:
    """Standard fifth-order controller with safety 0.9, clipped to [0.2, 5]."""
    return np.clip(0.9 * np.where(err > 0, err, 1e-10) ** -0.2, 0.2, 5.0)
