"""Hot loops of the space-time solver.

Each kernel exists twice: a loop version compiled with numba and a
vectorized numpy version. Both are importable by name (``*_numba`` /
``*_numpy``); the unsuffixed names point at the active backend.

Set ``STIMEMIT_NO_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import cmath
import os

import numpy as np

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

USE_NUMBA = HAVE_NUMBA and os.environ.get("STIMEMIT_NO_NUMBA", "").lower() not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"


@njit(cache=True)
def phi1(z):
    """(exp(z) - 1) / z, accurate near z = 0."""
    if abs(z) < 1e-3:
        return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0
    return (cmath.exp(z) - 1.0) / z


@njit(cache=True)
def phi2(z):
    """(exp(z) - 1 - z) / z**2, accurate near z = 0."""
    if abs(z) < 1e-2:
        return (0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
                + z * z * z * z / 720.0 + z ** 5 / 5040.0)
    return (cmath.exp(z) - 1.0 - z) / (z * z)


def step_coefficients(decay, feedback, detuning, h):
    """Integrating factor and source weights for one cell of transport.

    Along a characteristic the local decay is integrated exactly and the
    delayed source is interpolated linearly between the two end nodes,
    with its carrier phase exp(-i detuning r) integrated exactly.
    """
    damp = np.exp(-0.5 * decay * h)
    a = complex(0.5 * decay * h, -detuning * h)
    p1, p2 = phi1(a), phi2(a)
    c0 = -feedback * h * damp * p2
    c1 = -feedback * h * damp * (p1 - p2)
    return damp, c0, c1


@njit(cache=True, nogil=True)
def _evolve_loop(psi, origin, damp, c0, c1, detuning, h):
    n_steps = psi.shape[0] - 1
    n_cells = psi.shape[1]
    for n in range(n_steps):
        psi[n + 1, 0] = 0.0
        for j in range(1, n_cells):
            val = damp * psi[n, j - 1]
            k = j - origin
            if 1 <= k <= n + 1:
                km = k - 1
                g0 = 0.0j
                if km <= n and origin - km >= 0:
                    g0 = psi[n - km, origin - km]
                g1 = 0.0j
                if origin - k >= 0:
                    g1 = psi[n + 1 - k, origin - k]
                val += cmath.exp(-1j * detuning * km * h) * (c0 * g0 + c1 * g1)
            psi[n + 1, j] = val


def evolve_numba(psi, origin, decay, feedback, detuning, h):
    """Fill rows 1.. of ``psi`` in place (row 0 holds the initial pulse)."""
    damp, c0, c1 = step_coefficients(decay, feedback, detuning, h)
    _evolve_loop(psi, origin, damp, complex(c0), complex(c1), float(detuning), float(h))
    return psi


def evolve_numpy(psi, origin, decay, feedback, detuning, h):
    damp, c0, c1 = step_coefficients(decay, feedback, detuning, h)
    n_steps, n_cells = psi.shape[0] - 1, psi.shape[1]
    k_top = n_cells - 1 - origin
    for n in range(n_steps):
        old, new = psi[n], psi[n + 1]
        new[0] = 0.0
        new[1:] = damp * old[:-1]
        k = np.arange(1, min(n + 1, k_top) + 1)
        if k.size == 0 or feedback == 0:
            continue
        km = k - 1
        col0 = origin - km
        g0 = np.zeros(k.size, dtype=complex)
        ok = col0 >= 0
        g0[ok] = psi[n - km[ok], col0[ok]]
        col1 = origin - k
        g1 = np.zeros(k.size, dtype=complex)
        ok = col1 >= 0
        g1[ok] = psi[n + 1 - k[ok], col1[ok]]
        new[origin + k] += np.exp(-1j * detuning * km * h) * (c0 * g0 + c1 * g1)
    return psi


@njit(cache=True, nogil=True)
def _cross_loop(psi, origin, n, detuning, h):
    acc = 0.0
    for k1 in range(n + 1):
        w1 = 0.5 if (k1 == 0 or k1 == n) else 1.0
        for k2 in range(n + 1):
            c1 = origin + k1 - k2
            c2 = origin + k2 - k1
            if c1 < 0 or c2 < 0:
                continue
            w = w1 * (0.5 if (k2 == 0 or k2 == n) else 1.0)
            z = (psi[n - k2, c1].conjugate() * psi[n - k1, c2]
                 * cmath.exp(-1j * detuning * (k1 - k2) * h))
            acc += w * z.real
    return acc * h * h


def pair_cross_numba(psi, origin, n, detuning, h):
    """Interference integral between the two retarded terms of the pair field.

    Returns Re of  int_0^t int_0^t T1*(r1, r2) T2(r1, r2) dr1 dr2  by the
    product trapezoid rule, where T1 is the term with photon 2 emitted.
    """
    if n == 0:
        return 0.0
    return _cross_loop(psi, origin, n, float(detuning), float(h))


def pair_cross_numpy(psi, origin, n, detuning, h):
    if n == 0:
        return 0.0
    k = np.arange(n + 1)
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    acc = 0.0
    for k1 in range(n + 1):
        c1 = origin + k1 - k
        c2 = origin + k - k1
        ok = (c1 >= 0) & (c2 >= 0)
        if not ok.any():
            continue
        kk = k[ok]
        z = (np.conj(psi[n - kk, c1[ok]]) * psi[n - k1, c2[ok]]
             * np.exp(-1j * detuning * (k1 - kk) * h))
        acc += w[k1] * np.dot(w[ok], z.real)
    return acc * h * h


if USE_NUMBA:
    evolve_kernel = evolve_numba
    pair_cross = pair_cross_numba
else:
    evolve_kernel = evolve_numpy
    pair_cross = pair_cross_numpy


def set_threads(n: int) -> None:
    """Cap numba's worker pool (no-op on the numpy backend)."""
    if USE_NUMBA and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
