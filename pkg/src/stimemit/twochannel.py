"""Two-channel systems: an atom in a transmitting waveguide and a lambda atom.

Channel a carries the incident photon; channel b is the other output
(backward direction, or the orthogonal polarization). Asymptotic
two-photon amplitudes are functions of the two passage times (s1, s2) at
the atom and are built from solver histories:

* transmitting guide: only the even mode e = (a + b)/sqrt(2) couples,
  with rate gamma' = 2 gamma. The input photon is half even, half odd.
  The even half is a mirror problem at rate gamma'; the odd half rides
  along while the atom decays spontaneously into e.
* lambda atom: total decay gamma', half of it into a (the only channel
  that stimulates), half into b, after which the atom is transparent.

Every amplitude also has a closed form; ``channel_probabilities_exact``
evaluates the resulting probabilities directly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import numeric
from .core import (Grid1D, InconsistencyError, InvalidParameterError, PhysParams, Pulse,
                   make_exponential_pulse)

__all__ = [
    "ChannelProbabilities",
    "ChannelFields",
    "FiguresOfMerit",
    "FidelityCurve",
    "even_odd_split",
    "recombine",
    "final_fields_transmitting",
    "final_fields_lambda",
    "channel_probabilities",
    "channel_probabilities_exact",
    "excited_population_transmitting",
    "cloning_fidelity",
    "transmission_fidelity",
    "transmission_fidelity_curve",
    "amplification_ratio",
    "trust_factor",
    "figures_of_merit",
    "BASELINE_FIDELITY",
    "CLONING_BOUND",
]

SYSTEMS = ("transmitting", "lambda")
CLONING_BOUND = 5.0 / 6.0
# F^T with the stimulation switched off (pulse far detuned)
BASELINE_FIDELITY = 0.75
# largest norm deficit that channel_probabilities silently renormalizes
DEFICIT_TOLERANCE = 1e-4
TRUST_REGIME = 0.3


@dataclass(frozen=True)
class ChannelProbabilities:
    """Probabilities of finding both photons in a, one in each, or both in b."""

    p_aa: float
    p_ab: float
    p_bb: float
    system: str

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise InvalidParameterError(f"system must be one of {SYSTEMS}")
        if self.system == "lambda" and self.p_bb != 0.0:
            raise InvalidParameterError("a lambda atom cannot emit two photons into b")

    @property
    def total(self) -> float:
        return self.p_aa + self.p_ab + self.p_bb

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_aa, self.p_ab, self.p_bb)


@dataclass(frozen=True)
class ChannelFields:
    """Asymptotic pair amplitudes keyed by channel pair ("aa", "ab", "bb").

    Each amplitude is normalized so that its squared norm over the full
    (s1, s2) square is the probability of that channel pair. ``aa`` and
    ``bb`` are symmetric; ``ab`` is indexed [s_a, s_b].
    """

    fields: dict
    system: str
    params: PhysParams

    def __getitem__(self, key: str) -> numeric.TwoPhotonField:
        return self.fields[key]

    def __contains__(self, key: str) -> bool:
        return key in self.fields


@dataclass(frozen=True)
class FiguresOfMerit:
    fidelity: float
    transmission_fidelity: float
    amplification: float
    trust: float


@dataclass(frozen=True)
class FidelityCurve:
    """F^T over a sweep of pulse widths (in units of gamma')."""

    delta_ratio: np.ndarray
    values: np.ndarray
    optimum_ratio: float
    optimum_value: float
    candidates: dict


# -- basis change ---------------------------------------------------------------

def even_odd_split(pulse: Pulse) -> tuple[np.ndarray, np.ndarray]:
    """Even and odd components of a photon in channel a.

    a = (e + o)/sqrt(2), so each component is the pulse over sqrt(2) and
    carries half of the norm.
    """
    half = np.asarray(pulse.amplitude) / math.sqrt(2.0)
    return half.copy(), half.copy()


def recombine(even: np.ndarray, odd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Back to the channel basis: a = (e + o)/sqrt(2), b = (e - o)/sqrt(2)."""
    s = math.sqrt(0.5)
    return s * (even + odd), s * (even - odd)


# -- numerical final states -----------------------------------------------------

def _default_grid(params: PhysParams, dr: Optional[float], t_inf: Optional[float]) -> Grid1D:
    gp = params.gamma_prime
    # resolve both the decay and the pulse rise
    dr = min(0.01 / gp, 0.05 / params.delta) if dr is None else dr
    if t_inf is None:
        # excited population ~ poly(t) e^{-min(gamma', delta) t}; 20 e-folds clear 1e-6
        t_inf = 20.0 / min(gp, params.delta)
    n = int(math.ceil(t_inf / dr - 1e-9))
    return Grid1D.for_run(params.delta, n * dr, dr=dr)


def _plane_field(plane: np.ndarray, s: np.ndarray, label: str, symmetric: bool) -> numeric.TwoPhotonField:
    spacing = float(s[1] - s[0]) if s.size > 1 else 0.0
    return numeric.TwoPhotonField(phi=plane, coords=s, spacing=spacing,
                                  symmetric=symmetric, label=label)


def _histories(params: PhysParams, grid: Grid1D, feedback: float, with_free: bool,
               max_bytes: Optional[int]):
    pulse = make_exponential_pulse(params, grid)
    gp = params.gamma_prime
    coupled = numeric.evolve(pulse, params, grid, decay=gp, feedback=feedback, max_bytes=max_bytes)
    free = None
    if with_free:
        free = numeric.evolve(pulse, params, grid, decay=gp, feedback=0.0, max_bytes=max_bytes)
    return coupled, free


def final_fields_transmitting(params: PhysParams, dr: Optional[float] = None,
                              t_inf: Optional[float] = None,
                              max_bytes: Optional[int] = None) -> ChannelFields:
    """Channel-resolved asymptotic state of an atom in a transmitting guide.

    The state is (|photon pair from the even branch> + |odd pulse> x
    |even spontaneous photon>)/sqrt(2); both branches are added coherently
    before rotating (e, o) into (a, b).

    Raises:
        PrematureReadoutError: if the atom is still excited at ``t_inf``.
    """
    grid = _default_grid(params, dr, t_inf)
    gp = params.gamma_prime
    even, odd = _histories(params, grid, gp, True, max_bytes)
    n = grid.n_steps
    numeric.check_relaxed(even, n)
    numeric.check_relaxed(odd, n)
    s, t_even = numeric.retarded_plane(even, grid.t_max)
    _, t_odd = numeric.retarded_plane(odd, grid.t_max)
    # even pair, unit norm on the square
    pair = math.sqrt(gp / 2.0) * (t_even + t_even.T)
    # chi[s_o, s_e]: odd photon passes at s_o, even photon emitted at s_e
    chi = math.sqrt(gp) * t_odd
    base = pair / (2.0 * math.sqrt(2.0))
    f_aa = base + 0.25 * (chi + chi.T)
    f_bb = base - 0.25 * (chi + chi.T)
    f_ab = base + 0.25 * (chi - chi.T)
    fields = {
        "aa": _plane_field(f_aa, s, "aa", True),
        "ab": _plane_field(math.sqrt(2.0) * f_ab, s, "ab", False),
        "bb": _plane_field(f_bb, s, "bb", True),
    }
    return ChannelFields(fields=fields, system="transmitting", params=params)


def final_fields_lambda(params: PhysParams, dr: Optional[float] = None,
                        t_inf: Optional[float] = None,
                        max_bytes: Optional[int] = None) -> ChannelFields:
    """Channel-resolved asymptotic state of a lambda atom.

    The atom decays at gamma', half into a and half into b. Emission into a
    builds a pair in a (atom left in g_a); emission into b leaves the atom
    transparent, so the incident photon continues as it was at that moment.
    There is no bb amplitude.
    """
    grid = _default_grid(params, dr, t_inf)
    gp = params.gamma_prime
    hist, _ = _histories(params, grid, 0.5 * gp, False, max_bytes)
    numeric.check_relaxed(hist, grid.n_steps)
    s, plane = numeric.retarded_plane(hist, grid.t_max)
    f_aa = math.sqrt(gp / 4.0) * (plane + plane.T)
    # chi[s_a, s_b]
    chi = math.sqrt(gp / 2.0) * plane
    fields = {
        "aa": _plane_field(f_aa, s, "aa", True),
        "ab": _plane_field(chi, s, "ab", False),
    }
    return ChannelFields(fields=fields, system="lambda", params=params)


def excited_population_transmitting(params: PhysParams, t: np.ndarray, dr: Optional[float] = None) -> np.ndarray:
    """Excited population of the transmitting system from the two branch histories."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    grid = _default_grid(params, dr, float(t.max()) if t.size else 0.0)
    even, odd = _histories(params, grid, params.gamma_prime, True, None)
    rows = [grid.time_index(x) for x in t]
    return 0.5 * even.norms[rows] / even.norms[0] + 0.5 * odd.norms[rows] / odd.norms[0]


def channel_probabilities(fields: ChannelFields) -> ChannelProbabilities:
    """Squared norms of the channel-pair amplitudes.

    The quadrature deficit is removed by rescaling so the probabilities sum
    to one.

    Raises:
        InconsistencyError: if the raw norms miss unity by more than 1e-4.
    """
    raw = {k: fields[k].sample_norm() for k in ("aa", "ab", "bb") if k in fields}
    total = sum(raw.values())
    if abs(1.0 - total) > DEFICIT_TOLERANCE:
        raise InconsistencyError(
            f"channel norms sum to {total:.6f}; refine the grid or extend t_inf")
    p = {k: v / total for k, v in raw.items()}
    return ChannelProbabilities(p_aa=p["aa"], p_ab=p["ab"], p_bb=p.get("bb", 0.0),
                                system=fields.system)


# -- closed forms ---------------------------------------------------------------

def _overlap(alpha: complex, beta: complex, gp: float, delta: float, detuning: float) -> float:
    """Square norm of sqrt(delta gp) e^{-(gp+delta)u/2}(alpha e^{-gp tau/2} + beta e^{-(delta/2+i det)tau}).

    Integrated over u >= 0 and tau >= 0.
    """
    pref = delta * gp / (gp + delta)
    val = abs(alpha) ** 2 / gp + abs(beta) ** 2 / delta
    if not math.isinf(detuning):
        val += 2.0 * (np.conj(alpha) * beta / (0.5 * (gp + delta) + 1j * detuning)).real
    return float(pref * val)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _overlap_near_pole(a0, a1, b0, gp, delta, detuning) -> float:
    """Same norm for alpha = a0 + a1 Q_f, beta = b0 - a1 Q_f, without the pole.

    alpha + beta e^z = a0 (1 - e^z) + (a0 + b0) e^z - a1 f tau phi1(z) with
    z = kappa tau, Q_f = f / kappa, f = gp / 2.
    """
    kappa = 0.5 * (gp - delta) - 1j * detuning
    f = 0.5 * gp
    edges = np.linspace(0.0, 40.0 / gp, 41)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    tau = (mid + half * _GL_X[None, :]).ravel()
    w = (half * _GL_W[None, :]).ravel()
    z = kappa * tau
    em1 = np.expm1(z)
    small = np.abs(z) < 1e-8
    phi1 = np.where(small, 1.0 + 0.5 * z, em1 / np.where(small, 1.0, z))
    amp = -a0 * em1 + (a0 + b0) * (1.0 + em1) - a1 * f * tau * phi1
    integral = np.dot(w, np.exp(-gp * tau) * np.abs(amp) ** 2)
    return float(delta * gp / (gp + delta) * integral)


# (a0, a1, b0): alpha = a0 + a1 Q_f, beta = b0 - a1 Q_f; each list is summed with its weight
_TERMS = {
    "aa": (2.0, [(0.5, 0.5, 0.5)]),
    "bb": (2.0, [(0.0, 0.5, 0.0)]),
    "ab": (2.0, [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5)]),
    "ab_lambda": (0.5, [(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)]),
}
# relative |kappa| / gamma' below which the pole-free quadrature is used
POLE_BAND = 1e-2


def _probability(key: str, gp: float, delta: float, detuning: float) -> float:
    weight, terms = _TERMS[key]
    near = (not math.isinf(detuning)
            and abs(complex(0.5 * (gp - delta), -detuning)) < POLE_BAND * gp)
    if near:
        return weight * sum(_overlap_near_pole(a0, a1, b0, gp, delta, detuning) for a0, a1, b0 in terms)
    qf = 0j if math.isinf(detuning) else gp / (gp - delta - 2j * detuning)
    return weight * sum(_overlap(a0 + a1 * qf, b0 - a1 * qf, gp, delta, detuning) for a0, a1, b0 in terms)


def channel_probabilities_exact(params: PhysParams, system: str) -> ChannelProbabilities:
    """Closed-form channel probabilities.

    Within 1% of the removable singularity delta = gamma', detuning = 0 the
    overlaps are integrated by Gauss-Legendre quadrature in a form free of
    the pole.
    """
    if system not in SYSTEMS:
        raise InvalidParameterError(f"system must be one of {SYSTEMS}")
    gp, d, det = params.gamma_prime, params.delta, params.detuning
    p_aa = _probability("aa", gp, d, det)
    if system == "lambda":
        return ChannelProbabilities(p_aa=p_aa, p_ab=_probability("ab_lambda", gp, d, det),
                                    p_bb=0.0, system=system)
    return ChannelProbabilities(p_aa=p_aa, p_ab=_probability("ab", gp, d, det),
                                p_bb=_probability("bb", gp, d, det), system=system)


# -- figures of merit -----------------------------------------------------------

def cloning_fidelity(p: ChannelProbabilities) -> float:
    """F = p_aa + p_ab / 2."""
    return float(min(max(p.p_aa + 0.5 * p.p_ab, 0.0), 1.0))


def transmission_fidelity(params: PhysParams) -> float:
    """F^T of the transmitting guide, same formula as the cloning fidelity."""
    return cloning_fidelity(channel_probabilities_exact(params, "transmitting"))


def transmission_fidelity_curve(params: PhysParams, lo: float = 0.1, hi: float = 100.0,
                                points: int = 60, xtol: float = 1e-3) -> FidelityCurve:
    """F^T(delta / gamma') on a log grid, with the maximum refined by bounded search.

    ``candidates`` reports F^T at delta = 2 gamma' and 3 gamma' next to the
    located maximum.
    """
    if not 0 < lo < hi:
        raise InvalidParameterError("need 0 < lo < hi")
    gp = params.gamma_prime
    base = params.with_(detuning=0.0)
    ratios = np.geomspace(lo, hi, points)

    def ft(ratio):
        return transmission_fidelity(base.with_(delta=ratio * gp))

    values = np.array([ft(x) for x in ratios])
    i = int(np.argmax(values))
    left, right = ratios[max(i - 1, 0)], ratios[min(i + 1, points - 1)]
    res = minimize_scalar(lambda x: -ft(x), bounds=(left, right), method="bounded",
                          options={"xatol": xtol * ratios[i]})
    best_x, best_v = (float(res.x), -float(res.fun)) if -res.fun >= values[i] else (float(ratios[i]), float(values[i]))
    candidates = {"2": ft(2.0), "3": ft(3.0), "max": best_v}
    return FidelityCurve(delta_ratio=ratios, values=values, optimum_ratio=best_x,
                         optimum_value=best_v, candidates=candidates)


def amplification_ratio(f_opt: float, f_base: float) -> float:
    """(F_opt - F_base) / F_base.

    Raises:
        ZeroDivisionError: if ``f_base`` is 0.
    """
    if f_base == 0:
        raise ZeroDivisionError("baseline fidelity is zero")
    return (f_opt - f_base) / f_base


def trust_factor(beta: float, gamma_star: float, gamma: float) -> float:
    """beta (1 - gamma*/gamma), clamped to [0, 1].

    Warns when gamma*/gamma > 0.3, where the linear estimate is unreliable.
    """
    if not 0 <= beta <= 1:
        raise InvalidParameterError("beta must lie in [0, 1]")
    if gamma_star < 0 or gamma <= 0:
        raise InvalidParameterError("need gamma_star >= 0 and gamma > 0")
    if gamma_star / gamma > TRUST_REGIME:
        warnings.warn(f"gamma*/gamma = {gamma_star / gamma:.2f} is outside the weak-dephasing regime",
                      RuntimeWarning, stacklevel=2)
    return float(min(max(beta * (1.0 - gamma_star / gamma), 0.0), 1.0))


def figures_of_merit(params: PhysParams) -> FiguresOfMerit:
    """Lambda-atom fidelity and transmitting-guide F^T at ``params``.

    The amplification is that of the best resonant pulse width relative to
    the far-detuned baseline.
    """
    f_lambda = cloning_fidelity(channel_probabilities_exact(params, "lambda"))
    f_t = transmission_fidelity(params)
    curve = transmission_fidelity_curve(params)
    amp = amplification_ratio(curve.optimum_value, BASELINE_FIDELITY)
    trust = trust_factor(params.beta, params.gamma_star, params.gamma)
    return FiguresOfMerit(fidelity=f_lambda, transmission_fidelity=f_t,
                          amplification=amp, trust=trust)
