"""Space-time solver for the single-excitation amplitude and the photon pair.

The amplitude psi(r, t) (atom excited, one photon at r) obeys a transport
equation with local decay and a retarded source that reinjects the photon
arriving at the atom now, weighted by the field emitted earlier. On a grid
with dt == dr each characteristic moves one cell per step and every
retarded value sits on a stored node, so the whole history is kept and the
two-photon amplitude is assembled from it afterwards.

Nothing here evaluates a closed-form solution; ``analytic`` is only used by
the tests as an oracle.
"""
from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .core import (ConfigurationError, Grid1D, InvalidParameterError, PhysParams,
                   PrematureReadoutError, Pulse, ResourceError, trapezoid_norm)

__all__ = [
    "FieldHistory",
    "TwoPhotonField",
    "CorrelationMap",
    "AuditResult",
    "evolve",
    "rho_ee_numeric",
    "two_photon_norm",
    "assemble_two_photon",
    "retarded_plane",
    "g2_numeric",
    "norm_audit",
    "dump_history",
    "load_history",
    "DEFAULT_MAX_BYTES",
    "READOUT_TOLERANCE",
    "richardson",
    "check_relaxed",
]

DEFAULT_MAX_BYTES = int(os.environ.get("STIMEMIT_MAX_HISTORY_BYTES", 1 << 30))
# residual excited population allowed when reading the asymptotic field
READOUT_TOLERANCE = 1e-6

DUMP_MAGIC = b"STIMHIST"
DUMP_VERSION = 1


@dataclass(frozen=True)
class FieldHistory:
    """psi[n, j] = amplitude at r_j, t_n, plus the rates it was evolved with.

    ``decay`` is the total emission rate of the excited atom and ``feedback``
    the rate of the channel carrying the incident photon (both equal gamma
    for an atom in front of a mirror).
    """

    psi: np.ndarray
    grid: Grid1D
    params: PhysParams
    decay: float
    feedback: float

    @property
    def origin(self) -> int:
        return self.grid.origin

    @property
    def n_steps(self) -> int:
        return self.psi.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.grid.dt

    @cached_property
    def norms(self) -> np.ndarray:
        """Squared norm of psi at every step (front node at half weight)."""
        w = np.abs(self.psi) ** 2
        total = w.sum(axis=1)
        n = np.arange(self.n_steps + 1)
        front = self.origin + n
        ok = front < self.psi.shape[1]
        total[ok] -= 0.5 * w[n[ok], front[ok]]
        return total * self.grid.dr

    def index(self, t: float) -> int:
        n = self.grid.time_index(t)
        if n > self.n_steps:
            raise InvalidParameterError(f"t={t} beyond the evolved range {self.n_steps * self.grid.dt}")
        return n


@dataclass(frozen=True)
class TwoPhotonField:
    """Two-photon amplitude on a square grid of coordinates ``coords``.

    For fields in the lab frame the coordinates are positions at a fixed
    time; for asymptotic fields they are the times at which each photon
    passed the atom. ``norm`` is the squared norm of the full-resolution
    field when known, else it is computed from the samples.
    """

    phi: np.ndarray
    coords: np.ndarray
    spacing: float
    symmetric: bool
    label: str = ""
    exact_norm: Optional[float] = field(default=None, compare=False)

    def sample_norm(self) -> float:
        """Product-trapezoid quadrature of |phi|^2 over the sampled square."""
        w = np.ones(self.coords.size)
        w[0] = w[-1] = 0.5
        return float(w @ (np.abs(self.phi) ** 2) @ w * self.spacing ** 2)

    @property
    def norm(self) -> float:
        return self.exact_norm if self.exact_norm is not None else self.sample_norm()

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.phi - self.phi.T))) if self.phi.size else 0.0


def evolve(pulse: Pulse, params: PhysParams, grid: Grid1D, t_max: Optional[float] = None, *,
           decay: Optional[float] = None, feedback: Optional[float] = None,
           max_bytes: Optional[int] = None) -> FieldHistory:
    """Integrate the amplitude from t = 0 to ``t_max`` and keep every step.

    Args:
        pulse: Initial photon on ``grid``.
        params: Supplies the detuning and, by default, the rates.
        grid: Characteristics-aligned grid (dt == dr).
        t_max: Final time; defaults to the grid's.
        decay: Total decay rate of the excited atom. Defaults to gamma.
        feedback: Coupling rate of the pulse channel. 0 decouples the photon
            (it only rides along while the atom decays).
        max_bytes: Memory cap for the stored history.

    Raises:
        ConfigurationError: if dt != dr or the pulse lives on another grid.
        ResourceError: if the history would exceed ``max_bytes``.
    """
    grid.check_aligned()
    if pulse.grid != grid:
        raise ConfigurationError("pulse was sampled on a different grid")
    if not math.isfinite(params.detuning):
        raise InvalidParameterError("the solver needs a finite detuning")
    decay = params.gamma if decay is None else float(decay)
    feedback = decay if feedback is None else float(feedback)
    n_steps = grid.n_steps if t_max is None else int(round(t_max / grid.dt))
    if n_steps < 0 or n_steps > grid.n_steps:
        raise InvalidParameterError(f"t_max must lie in [0, {grid.t_max}]")
    cap = DEFAULT_MAX_BYTES if max_bytes is None else max_bytes
    need = (n_steps + 1) * grid.n_cells * 16
    if need > cap:
        factor = math.sqrt(need / cap)
        raise ResourceError(
            f"history needs {need / 2**20:.0f} MiB (cap {cap / 2**20:.0f} MiB); "
            f"use dr >= {grid.dr * factor:.3g} or a shorter t_max")
    psi = np.zeros((n_steps + 1, grid.n_cells), dtype=np.complex128)
    psi[0] = pulse.amplitude
    kernels.evolve_kernel(psi, grid.origin, decay, feedback, params.detuning, grid.dr)
    return FieldHistory(psi=psi, grid=grid, params=params, decay=decay, feedback=feedback)


def rho_ee_numeric(history: FieldHistory, t: float) -> float:
    """Excited population at ``t``, relative to its initial value."""
    n = history.index(t)
    return float(history.norms[n] / history.norms[0])


def _trap_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    if n == 0:
        w[0] = 0.0
    return w


def _pair_norm_at(history: FieldHistory, n: int) -> float:
    if n == 0 or history.feedback == 0:
        return 0.0
    h = history.grid.dr
    norms = history.norms
    direct = h * np.dot(_trap_weights(n), norms[n - np.arange(n + 1)])
    cross = kernels.pair_cross(history.psi, history.origin, n, history.params.detuning, h)
    return float(history.feedback * (direct + cross))


def two_photon_norm(history: FieldHistory, t: float) -> float:
    """Probability that both excitations are photons at time ``t``."""
    return _pair_norm_at(history, history.index(t))


def assemble_two_photon(history: FieldHistory, t: float, stride: int = 1,
                        r_lo: Optional[float] = None,
                        normalization: str = "completeness") -> TwoPhotonField:
    """Pair amplitude phi(r1, r2, t) in the lab frame.

    phi = C [T(r1, r2) + T(r2, r1)] with
    T(r1, r2) = theta(r2) theta(t - r2) e^{i detuning r1} psi(r1 - r2, t - r2):
    photon 2 was emitted at t - r2 while photon 1 sat at r1 - r2.
    Samples lie on every ``stride``-th node of [r_lo, t]; ``r_lo`` defaults
    to the left end of the grid, where the incident pulse still lives.

    Args:
        normalization: "completeness" scales C so that the pair norm equals
            the excitation lost by the atom; "coupling" uses C = sqrt(f/2),
            which follows from the equations of motion alone.
    """
    if normalization not in ("completeness", "coupling"):
        raise InvalidParameterError(f"unknown normalization {normalization!r}")
    n = history.index(t)
    grid, psi, o = history.grid, history.psi, history.origin
    h = grid.dr
    lo = -o if r_lo is None else max(int(math.floor(r_lo / h)), -o)
    k = np.arange(lo, n + 1, stride)
    coords = k * h
    k1, k2 = k[:, None], k[None, :]
    row = n - k2
    col = o + k1 - k2
    valid = (k2 >= 0) & (row >= 0) & (col >= 0) & (col < psi.shape[1])
    term = np.zeros((k.size, k.size), dtype=complex)
    term[valid] = psi[np.broadcast_to(row, valid.shape)[valid],
                      np.broadcast_to(col, valid.shape)[valid]]
    # theta(0) = 1/2 on the atom line
    term = np.where(k2 == 0, 0.5, 1.0) * term
    if n == 0:
        term[:] = 0.0
    term *= np.exp(1j * history.params.detuning * coords)[:, None]
    norm = _pair_norm_at(history, n)
    scale = math.sqrt(history.feedback / 2.0)
    if normalization == "completeness" and norm > 0:
        target = max(history.norms[0] - history.norms[n], 0.0)
        scale *= math.sqrt(target / norm)
        norm = target
    phi = scale * (term + term.T)
    return TwoPhotonField(phi=phi, coords=coords, spacing=h * stride, symmetric=True,
                          label="lab", exact_norm=norm / history.norms[0])


def retarded_plane(history: FieldHistory, t_inf: float, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """T(s1, s2) = e^{-i detuning s1} psi(s2 - s1, s2) on passage times s in [0, t_inf].

    Photon 2 leaves the atom at s2; photon 1 passed (s1 < s2) or will pass
    (s1 > s2) the atom at s1. Every asymptotic pair amplitude is built
    from this array and its transpose.
    """
    n = history.index(t_inf)
    psi, o, h = history.psi, history.origin, history.grid.dr
    k = np.arange(0, n + 1, stride)
    k1, k2 = k[:, None], k[None, :]
    col = o + k2 - k1
    valid = (col >= 0) & (col < psi.shape[1])
    rows = np.broadcast_to(k2, valid.shape)
    cols = np.broadcast_to(col, valid.shape)
    plane = np.zeros(valid.shape, dtype=complex)
    plane[valid] = psi[rows[valid], cols[valid]]
    plane *= np.exp(-1j * history.params.detuning * k * h)[:, None]
    return k * h, plane


def check_relaxed(history: FieldHistory, n: int) -> None:
    left = history.norms[n] / history.norms[0]
    if left > READOUT_TOLERANCE:
        raise PrematureReadoutError(
            f"excited population {left:.2e} at t={n * history.grid.dt:g} exceeds "
            f"{READOUT_TOLERANCE:g}; evolve longer before reading the output field")


@dataclass(frozen=True)
class CorrelationMap:
    """G2 sampled at first-click times ``t`` and delays ``tau`` (NaN where t + tau > t_inf)."""

    t: np.ndarray
    tau: np.ndarray
    values: np.ndarray

    def __call__(self, t, tau):
        interp = RegularGridInterpolator((self.t, self.tau), self.values,
                                         bounds_error=True)
        pts = np.stack(np.broadcast_arrays(np.asarray(t, float), np.asarray(tau, float)), axis=-1)
        return interp(pts)


def g2_numeric(history: FieldHistory, t_inf: float, stride: int = 1) -> CorrelationMap:
    """Two-click density read from the asymptotic pair field, G2 = 2 |phi_inf|^2.

    Raises:
        PrematureReadoutError: if the atom still holds more than 1e-6 of the
            excitation at ``t_inf``.
    """
    n = history.index(t_inf)
    check_relaxed(history, n)
    psi, o, h = history.psi, history.origin, history.grid.dr
    det = history.params.detuning
    steps = np.arange(0, n + 1, stride)
    vals = np.full((steps.size, steps.size), np.nan)
    for a, m in enumerate(steps):
        i = steps[steps + m <= n]
        first = np.exp(-1j * det * i * h) * psi[i + m, o + m]
        second = np.zeros(i.size, dtype=complex)
        if o - m >= 0:
            second = np.exp(-1j * det * (i + m) * h) * psi[i, o - m]
        vals[: i.size, a] = history.feedback * np.abs(first + second) ** 2
    return CorrelationMap(t=steps * h, tau=steps * h, values=vals)


@dataclass(frozen=True)
class AuditResult:
    times: np.ndarray
    atom: np.ndarray
    pairs: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return self.atom + self.pairs - 1.0

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.deviation)))


def norm_audit(history: FieldHistory, samples: int = 40) -> AuditResult:
    """Total probability (atom excited + two photons) at evenly spaced steps.

    The pair norm uses the field normalization sqrt(f/2) fixed by the
    coupling, not by completeness, so the sum is a genuine check.
    """
    n_max = history.n_steps
    steps = np.unique(np.linspace(0, n_max, min(samples, n_max + 1)).round().astype(int))
    atom = history.norms[steps] / history.norms[0]
    pairs = np.array([_pair_norm_at(history, int(n)) for n in steps]) / history.norms[0]
    return AuditResult(times=steps * history.grid.dt, atom=atom, pairs=pairs)


# -- binary dump ---------------------------------------------------------------
# layout: magic (8 bytes) | u32 version | u32 header length | UTF-8 JSON header
#         | psi as little-endian complex64, row-major, shape (n_steps+1, n_cells)

def dump_history(history: FieldHistory, path) -> Path:
    from . import __version__

    g, p = history.grid, history.params
    header = {
        "version": __version__,
        "shape": list(history.psi.shape),
        "grid": {"r_min": g.r_min, "r_max": g.r_max, "dr": g.dr, "dt": g.dt, "n_steps": g.n_steps},
        "params": {"gamma": p.gamma, "delta": p.delta, "detuning": p.detuning,
                   "beta": p.beta, "gamma_star": p.gamma_star},
        "decay": history.decay,
        "feedback": history.feedback,
        "dtype": "<c8",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<II", DUMP_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(history.psi, dtype="<c8").tobytes())
    return path


def load_history(path) -> FieldHistory:
    with Path(path).open("rb") as fh:
        if fh.read(8) != DUMP_MAGIC:
            raise ValueError(f"{path} is not a field-history dump")
        version, size = struct.unpack("<II", fh.read(8))
        if version != DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        header = json.loads(fh.read(size))
        data = np.frombuffer(fh.read(), dtype="<c8")
    psi = data.reshape(header["shape"]).astype(np.complex128)
    return FieldHistory(psi=psi, grid=Grid1D(**header["grid"]),
                        params=PhysParams(**header["params"]),
                        decay=header["decay"], feedback=header["feedback"])


def richardson(fine, coarse, order: int = 2, ratio: float = 2.0):
    """Extrapolate two results on grids with spacings h and ratio * h."""
    k = ratio ** order
    return (k * np.asarray(fine) - np.asarray(coarse)) / (k - 1.0)
