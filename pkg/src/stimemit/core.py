"""Shared parameter types, grids and the incident single-photon pulse.

Internal convention: c = 1, so positions and times share a unit. Every
routine accepts dimensional rates; ``nondimensionalize`` rescales a
parameter set to Gamma = 1 when a caller wants the natural units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "StimError",
    "InvalidParameterError",
    "DomainTooSmallError",
    "SingularPointError",
    "ConfigurationError",
    "ResourceError",
    "PrematureReadoutError",
    "InconsistencyError",
    "PhysParams",
    "Grid1D",
    "Pulse",
    "make_exponential_pulse",
    "nondimensionalize",
    "trapezoid_norm",
]

# fraction of pulse norm that may be lost to the grid cutoff
PULSE_TAIL_TOLERANCE = 1e-6
# default cutoff, in units of 1/Delta
PULSE_EXTENT = 30.0


class StimError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(StimError, ValueError):
    pass


class DomainTooSmallError(StimError, ValueError):
    pass


class SingularPointError(StimError, ArithmeticError):
    """Raised when a closed form is asked for on its removable singularity."""


class ConfigurationError(StimError, ValueError):
    pass


class ResourceError(StimError, MemoryError):
    pass


class PrematureReadoutError(StimError, RuntimeError):
    """The field was read out before the atom fully relaxed."""


class InconsistencyError(StimError, RuntimeError):
    pass


@dataclass(frozen=True)
class PhysParams:
    """Atom and pulse constants.

    Attributes:
        gamma: Decay rate into one waveguide channel.
        delta: Linewidth of the incident exponential pulse.
        detuning: Pulse carrier minus atomic frequency. ``math.inf`` selects
            the far-detuned (transparent atom) limit.
        gamma_prime: Total decay rate of a two-channel system. Always
            ``2 * gamma``; passing anything else is an error.
        beta: Fraction of emission into the 1D channel.
        gamma_star: Pure dephasing rate.
    """

    gamma: float = 1.0
    delta: float = 3.0
    detuning: float = 0.0
    gamma_prime: Optional[float] = field(default=None)
    beta: float = 1.0
    gamma_star: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InvalidParameterError(f"delta must be positive, got {self.delta}")
        if math.isnan(self.detuning):
            raise InvalidParameterError("detuning is NaN")
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.gamma_star >= 0:
            raise InvalidParameterError(f"gamma_star must be >= 0, got {self.gamma_star}")
        if self.gamma_prime is None:
            object.__setattr__(self, "gamma_prime", 2.0 * self.gamma)
        elif not math.isclose(self.gamma_prime, 2.0 * self.gamma, rel_tol=1e-12):
            raise InvalidParameterError("gamma_prime must equal 2 * gamma")

    @property
    def far_detuned(self) -> bool:
        return math.isinf(self.detuning)

    def with_(self, **changes) -> "PhysParams":
        """Copy with some fields replaced; gamma_prime follows gamma."""
        if "gamma" in changes and "gamma_prime" not in changes:
            changes["gamma_prime"] = None
        return replace(self, **changes)


def nondimensionalize(params: PhysParams) -> PhysParams:
    """Rescale rates so that gamma = 1 (times in 1/gamma, lengths in c/gamma)."""
    g = params.gamma
    if not g > 0:
        raise InvalidParameterError("gamma must be positive")
    return PhysParams(
        gamma=1.0,
        delta=params.delta / g,
        detuning=params.detuning / g,
        beta=params.beta,
        gamma_star=params.gamma_star / g,
    )


@dataclass(frozen=True)
class Grid1D:
    """Characteristics-aligned space-time grid.

    Position r_j = (j - origin) * dr with the atom at index ``origin``;
    time t_n = n * dt. The solver requires dt == dr (c = 1) so that every
    retarded lookup lands on a grid node.
    """

    r_min: float
    r_max: float
    dr: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dr > 0 and self.dt > 0):
            raise ConfigurationError("dr and dt must be positive")
        if self.r_min > 0 or self.r_max < 0:
            raise ConfigurationError("grid must contain the atom at r = 0")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be >= 0")

    @classmethod
    def for_run(cls, delta: float, t_max: float, dr: float = 0.01,
                extent: float = PULSE_EXTENT) -> "Grid1D":
        """Default grid for a pulse of width ``delta`` followed up to ``t_max``."""
        if not delta > 0:
            raise InvalidParameterError("delta must be positive")
        n_left = math.ceil(extent / delta / dr - 1e-9)
        n_steps = int(round(t_max / dr))
        return cls(r_min=-n_left * dr, r_max=n_steps * dr, dr=dr, dt=dr, n_steps=n_steps)

    @property
    def origin(self) -> int:
        return int(round(-self.r_min / self.dr))

    @property
    def n_cells(self) -> int:
        return self.origin + int(round(self.r_max / self.dr)) + 1

    @property
    def t_max(self) -> float:
        return self.n_steps * self.dt

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_cells) - self.origin) * self.dr

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def check_aligned(self) -> None:
        """Raise ConfigurationError unless dt == dr and r = 0 is a node."""
        if self.dt != self.dr:
            raise ConfigurationError(
                f"grid must satisfy c*dt == dr exactly (dt={self.dt!r}, dr={self.dr!r})")
        if abs(self.origin * self.dr + self.r_min) > 1e-9 * self.dr:
            raise ConfigurationError("r_min must be an integer multiple of dr")
        if abs(round(self.r_max / self.dr) * self.dr - self.r_max) > 1e-9 * self.dr:
            raise ConfigurationError("r_max must be an integer multiple of dr")

    def time_index(self, t: float) -> int:
        n = t / self.dt
        k = int(round(n))
        if abs(n - k) > 1e-6 or not 0 <= k <= self.n_steps:
            raise InvalidParameterError(
                f"t={t} is not a recorded time of this grid (0..{self.t_max}, step {self.dt})")
        return k


def trapezoid_norm(psi: np.ndarray, dr: float, front: Optional[int] = None) -> float:
    """Squared L2 norm of a sampled amplitude.

    The field is zero on both grid ends, so the trapezoid rule is the plain
    sum except at ``front``: the pulse edge, where the stored sample is the
    left limit of a jump to zero and carries half weight.
    """
    w = np.abs(psi) ** 2
    total = w.sum()
    if front is not None and 0 <= front < w.shape[-1]:
        total -= 0.5 * w[front]
    return float(total * dr)


@dataclass(frozen=True)
class Pulse:
    """Normalized single-photon wavepacket at t = 0, rotating frame.

    ``amplitude`` is sampled on ``grid``; it is real and nonzero only for
    r <= 0. The node r = 0 holds the left limit of the edge.
    """

    amplitude: np.ndarray
    grid: Grid1D
    width: float
    detuning: float
    scale: float = 1.0

    def shape(self, r):
        """Continuous profile matching the sampled amplitude."""
        r = np.asarray(r, dtype=float)
        return np.where(r <= 0, self.scale * np.exp(0.5 * self.width * np.minimum(r, 0.0)), 0.0)

    @property
    def norm(self) -> float:
        return trapezoid_norm(self.amplitude, self.grid.dr, front=self.grid.origin)


def make_exponential_pulse(params: PhysParams, grid: Grid1D) -> Pulse:
    """Exponential photon exp(delta * r / 2) for r <= 0, unit discrete norm.

    Raises:
        DomainTooSmallError: if the grid cuts off more than 1e-6 of the norm.
    """
    grid.check_aligned()
    lost = math.exp(params.delta * grid.r_min)
    if lost > PULSE_TAIL_TOLERANCE:
        raise DomainTooSmallError(
            f"grid starts at r={grid.r_min:g}; a pulse of width {params.delta:g} "
            f"needs r_min <= {math.log(PULSE_TAIL_TOLERANCE) / params.delta:g}")
    r = grid.r
    amp = np.where(r <= 0, np.exp(0.5 * params.delta * np.minimum(r, 0.0)), 0.0)
    n2 = trapezoid_norm(amp, grid.dr, front=grid.origin)
    scale = 1.0 / math.sqrt(n2)
    amp = amp * scale
    amp.setflags(write=False)
    return Pulse(amplitude=amp, grid=grid, width=params.delta,
                 detuning=params.detuning, scale=scale)
