"""Closed-form dynamics of an inverted atom hit by one exponential photon.

All functions accept numpy arrays for their time arguments and return
arrays of matching shape (plain floats for scalar input).

The coupling factor Q = 2 f / (g - delta - 2 i detuning) has a pole at
delta = g, detuning = 0 where every observable stays finite. Correlation
functions are written in a form without the pole; populations switch to
quadrature of a pole-free integrand inside a small band around it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import PhysParams, SingularPointError

__all__ = [
    "QFactor",
    "q_factor",
    "q_factor_two_channel",
    "rho_ee",
    "rho_ee_singular",
    "rho_ee_optimal",
    "rho_ee_full",
    "rho_ee_lambda",
    "tau_eff",
    "tau_eff_full",
    "g2",
    "g2_aa",
    "p2_integrated",
    "einstein_rate",
    "rate_equation_residual",
]

SINGULAR_TOL = 1e-12
# relative size of |kappa| below which populations use the pole-free quadrature
STABLE_BAND = 1e-2


@dataclass(frozen=True)
class QFactor:
    value: complex
    variant: str  # "semi" or "two-channel"

    def __complex__(self):
        return complex(self.value)


def _kappa(decay, delta, detuning):
    return 0.5 * (decay - delta) - 1j * detuning


def _is_singular(decay, delta, detuning):
    return abs(decay - delta) < SINGULAR_TOL * decay and abs(detuning) < SINGULAR_TOL * decay


def _coupling(feedback, decay, delta, detuning):
    if math.isinf(detuning):
        return 0j
    return 2.0 * feedback / (decay - delta - 2j * detuning)


def q_factor(params: PhysParams) -> QFactor:
    """Q = 2 gamma / (gamma - delta - 2 i detuning) for the closed waveguide.

    Raises:
        SingularPointError: at delta = gamma, detuning = 0.
    """
    g = params.gamma
    if _is_singular(g, params.delta, params.detuning):
        raise SingularPointError("Q diverges at delta = gamma, detuning = 0")
    return QFactor(_coupling(g, g, params.delta, params.detuning), "semi")


def q_factor_two_channel(params: PhysParams) -> QFactor:
    """Q_f = gamma' / (gamma' - delta - 2 i detuning) = Q(gamma -> gamma') / 2."""
    gp = params.gamma_prime
    if _is_singular(gp, params.delta, params.detuning):
        raise SingularPointError("Q_f diverges at delta = gamma', detuning = 0")
    return QFactor(_coupling(0.5 * gp, gp, params.delta, params.detuning), "two-channel")


def _phi1(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    series = 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0 + z ** 4 / 120.0
    return np.where(small, series, np.expm1(safe) / safe)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


# -- populations -------------------------------------------------------------

def _rho_closed(t, decay, feedback, delta, detuning):
    if math.isinf(detuning):
        return np.exp(-decay * t)
    q = _coupling(feedback, decay, delta, detuning)
    z = decay + delta + 2j * detuning
    e_all = np.exp(-(decay + delta) * t)
    val = (e_all
           + abs(1 + q) ** 2 * (np.exp(-decay * t) - e_all)
           + abs(q) ** 2 * delta / decay * (np.exp(-delta * t) - e_all)
           - 2.0 * np.real((np.conj(q) + abs(q) ** 2) * 2.0 * delta / z
                           * (np.exp(-0.5 * (decay + delta) * t + 1j * detuning * t) - e_all)))
    return val


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _rho_quadrature(t, decay, feedback, delta, detuning):
    """Population from the pole-free integrand, composite Gauss-Legendre."""
    kappa = _kappa(decay, delta, detuning)
    out = np.empty(np.shape(t))
    flat = np.ravel(np.asarray(t, dtype=float))
    res = out.reshape(-1)
    rate = max(decay, delta)
    for i, ti in enumerate(flat):
        if ti == 0:
            res[i] = 1.0
            continue
        panels = max(1, math.ceil(rate * ti / 2.0))
        edges = np.linspace(0.0, ti, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        r = (mid + half * _GL_X[None, :]).ravel()
        w = (half * _GL_W[None, :]).ravel()
        amp = 1.0 - feedback * r * _phi1(kappa * r)
        integrand = np.exp(-delta * (ti - r)) * np.abs(amp) ** 2
        res[i] = (math.exp(-(decay + delta) * ti)
                  + delta * math.exp(-decay * ti) * np.dot(w, integrand))
    return out


def _rho_general(t, decay, feedback, delta, detuning):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    if not math.isinf(detuning) and abs(_kappa(decay, delta, detuning)) < STABLE_BAND * decay:
        return _rho_quadrature(t, decay, feedback, delta, detuning)
    return _rho_closed(t, decay, feedback, delta, detuning)


def rho_ee(t, params: PhysParams):
    """Excited-state population of the atom closed by a mirror."""
    g = params.gamma
    return _scalar_or_array(_rho_general(t, g, g, params.delta, params.detuning))


def rho_ee_singular(t, gamma: float):
    """Population at delta = gamma, detuning = 0 (limit of the closed form)."""
    gt = gamma * np.asarray(t, dtype=float)
    return _scalar_or_array(np.exp(-gt) * (gt * gt - 4 * gt + 5) - 4 * np.exp(-2 * gt))


def rho_ee_optimal(t, gamma: float):
    """Population for the optimal pulse width delta = 3 gamma on resonance."""
    gt = gamma * np.asarray(t, dtype=float)
    return _scalar_or_array(-2.0 * np.exp(-4.0 * gt) + 3.0 * np.exp(-3.0 * gt))


def rho_ee_full(t, params: PhysParams):
    """Transmitting waveguide: half the closed-guide result at gamma', half free decay."""
    gp = params.gamma_prime
    t = np.asarray(t, dtype=float)
    semi = _rho_general(t, gp, gp, params.delta, params.detuning)
    return _scalar_or_array(0.5 * semi + 0.5 * np.exp(-gp * t))


def rho_ee_lambda(t, params: PhysParams):
    """Lambda atom: total decay gamma', reabsorption only through channel a."""
    gp = params.gamma_prime
    return _scalar_or_array(_rho_general(t, gp, 0.5 * gp, params.delta, params.detuning))


def tau_eff(gamma: float, delta: float) -> float:
    """gamma * integral of rho_ee over t, resonant pulse."""
    s = gamma + delta
    return 1.0 - 4.0 * gamma / s + 8.0 * gamma ** 2 / s ** 2


def tau_eff_full(gamma_prime: float, delta: float) -> float:
    """Same quantity for the transmitting guide, measured in units of 1/gamma'."""
    return 0.5 * tau_eff(gamma_prime, delta) + 0.5


# -- photon correlations -----------------------------------------------------

def _pair_weight_sq(tau, decay, feedback, delta, detuning):
    """|(1+Q) e^{-decay tau/2} + (1-Q) e^{-(delta/2 + i detuning) tau}|^2."""
    tau = np.asarray(tau, dtype=float)
    if math.isinf(detuning):
        # carrier beats average out
        return np.exp(-decay * tau) + np.exp(-delta * tau)
    kappa = _kappa(decay, delta, detuning)
    z = kappa * tau
    # (1+Q) + (1-Q) e^z with Q = f/kappa, rewritten without the pole
    w = 2.0 + np.expm1(z) - feedback * tau * _phi1(z)
    return np.exp(-decay * tau) * np.abs(w) ** 2


def g2(t, tau, params: PhysParams):
    """Joint density of clicks at t and t + tau (tau >= 0) at the detector.

    Normalized so that its integral over t >= 0, tau >= 0 is 1. For an
    infinite detuning the carrier beat term is averaged out.
    """
    g, d = params.gamma, params.delta
    t = np.asarray(t, dtype=float)
    val = d * g * np.exp(-(g + d) * t) * _pair_weight_sq(tau, g, g, d, params.detuning)
    return _scalar_or_array(val)


def g2_aa(t, tau, params: PhysParams):
    """Clicks at t and t + tau both in the stimulated channel a.

    Uses the prefactor delta * gamma'; with it the integral over the ordered
    half plane equals twice the probability of two photons in a.
    """
    gp, d = params.gamma_prime, params.delta
    t = np.asarray(t, dtype=float)
    val = d * gp * np.exp(-(gp + d) * t) * _pair_weight_sq(tau, gp, 0.5 * gp, d, params.detuning)
    return _scalar_or_array(val)


def _p2_closed(tf, g, d, detuning):
    a_sq_int = (1 - np.exp(-g * tf)) / g
    b_sq_int = (1 - np.exp(-d * tf)) / d
    if math.isinf(detuning):
        inner = a_sq_int + b_sq_int
    else:
        q = _coupling(g, g, d, detuning)
        zeta = 0.5 * (g + d) + 1j * detuning
        inner = (abs(1 + q) ** 2 * a_sq_int + abs(1 - q) ** 2 * b_sq_int
                 + 2 * np.real(np.conj(1 + q) * (1 - q) * (-np.expm1(-zeta * tf)) / zeta))
    return d * g / (g + d) * inner


def p2_integrated(tau_final, params: PhysParams):
    """Probability that both photons are detected within tau_final of each other.

    Integrates g2 over t in [0, inf) and tau in [0, tau_final].
    """
    g, d, det = params.gamma, params.delta, params.detuning
    tf = np.asarray(tau_final, dtype=float)
    if np.any(tf < 0):
        raise ValueError("tau_final must be >= 0")
    if math.isinf(det) or abs(_kappa(g, d, det)) >= STABLE_BAND * g:
        return _scalar_or_array(_p2_closed(tf, g, d, det))
    # near the pole: adaptive Gauss-Kronrod on the pole-free integrand
    pref = d * g / (g + d)

    def f(tau):
        return float(_pair_weight_sq(tau, g, g, d, det))

    out = np.empty(tf.shape)
    flat = out.reshape(-1)
    for i, x in enumerate(tf.reshape(-1)):
        flat[i] = pref * integrate.quad(f, 0.0, x, epsabs=1e-10, epsrel=1e-10, limit=200)[0]
    return _scalar_or_array(out)


# -- rate-equation comparators -----------------------------------------------

def einstein_rate(beta: float, n_k: int, n_l: int, gamma: float) -> float:
    """Total decay coefficient of the Einstein rate equation."""
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if n_k < 0 or n_l < 0:
        raise ValueError("photon numbers must be >= 0")
    return gamma * (1 - beta) * (1 + n_l) + gamma * beta * (1 + n_k)


def rate_equation_residual(t, gamma: float):
    """d(rho)/dt + 2 gamma rho for the optimal-pulse population.

    Zero only if the optimal dynamics obeyed the rate equation with one
    stimulating photon; it does not.
    """
    gt = gamma * np.asarray(t, dtype=float)
    return _scalar_or_array(gamma * (4.0 * np.exp(-4.0 * gt) - 3.0 * np.exp(-3.0 * gt)))
