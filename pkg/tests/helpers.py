"""Shared reference routines for the test modules."""

import numpy as np
from scipy.optimize import minimize, minimize_scalar


def bracket_residual(pair, t):
    phi = pair.phi.taylor(t, 1).c
    psi = pair.psi.taylor(t, 1).c
    return np.abs(phi[0] * psi[1] - psi[0] * phi[1] + psi[0])


def isolated_zeros(f, lo=-3.0, hi=3.0, n=20001, floor=1e-12):
    """Local minima of a non-negative function that reach zero, refined by a bounded scalar search."""
    t = np.linspace(lo, hi, n)
    v = f(t)
    idx = [i for i in range(1, n - 1) if v[i] <= v[i - 1] and v[i] <= v[i + 1] and v[i] < 1e-4]
    found = []
    for i in idx:
        r = minimize_scalar(lambda x: float(f(x)), bounds=(t[i - 1], t[i + 1]), method="bounded",
                            options={"xatol": 1e-12})
        if r.fun < floor and not any(abs(r.x - z) < 1e-6 for z in found):
            found.append(r.x)
    return sorted(found)


def mu(PF, x):
    X, Y = PF.values(np.asarray(x, dtype=float))
    return np.maximum(np.linalg.norm(X, axis=-1), np.linalg.norm(Y, axis=-1))


def census(PF, n=121):
    """Common zeros on [-3, 3]^2: grid minima of max(|X|, |Y|) refined by Nelder-Mead."""
    g = np.linspace(-3, 3, n)
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    M = mu(PF, np.stack([G1, G2], -1))
    found = []
    seeds = []
    for i, j in sorted(zip(*np.nonzero(M < 0.02)), key=lambda ij: M[ij]):
        if all(np.hypot(g[i] - a, g[j] - b) > 0.1 for a, b in seeds):
            seeds.append((g[i], g[j]))
    for s1, s2 in seeds:
        r = minimize(lambda p: float(mu(PF, p)), [s1, s2], method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
        if r.fun < 1e-8 and not any(np.hypot(*(r.x - f)) < 1e-4 for f in found):
            found.append(r.x)
    return sorted(tuple(v) for v in found)
