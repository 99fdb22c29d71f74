"""Self-check suite run by ``stimemit verify``.

Each check compares a computed value with a target at a stated tolerance.
The numerical checks use modest grids so the suite finishes in well under
a minute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import trapezoid

from . import analytic, numeric, twochannel
from .core import Grid1D, PhysParams, make_exponential_pulse


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    target: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.value - self.target) <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name}: {self.value:.10g} (target {self.target:.10g} +- {self.tol:g})"


def fit_decay_rate(tau: np.ndarray, values: np.ndarray) -> float:
    """Slope of -log(values) against tau by least squares."""
    ok = values > 0
    slope = np.polyfit(tau[ok], np.log(values[ok]), 1)[0]
    return float(-slope)


def _numeric_checks() -> Iterator[Check]:
    p = PhysParams(delta=3.0)
    grid = Grid1D.for_run(3.0, 16.0, dr=0.01)
    hist = numeric.evolve(make_exponential_pulse(p, grid), p, grid)
    t = np.arange(0.0, 10.0 + 1e-9, 0.05)
    err = max(abs(numeric.rho_ee_numeric(hist, x) - analytic.rho_ee_optimal(x, 1.0)) for x in t)
    yield Check("numeric rho_ee vs optimal closed form (sup over t<=10)", err, 0.0, 1e-3)
    tau_num = float(trapezoid(hist.norms / hist.norms[0], dx=grid.dr))
    yield Check("numeric tau_eff at delta=3", tau_num, 0.5, 1e-3)
    yield Check("norm audit max deviation", numeric.norm_audit(hist, samples=20).max_deviation, 0.0, 1e-3)
    g2map = numeric.g2_numeric(hist, 16.0)
    tau = np.arange(0.0, 2.0 + 1e-9, 0.01)
    rate = fit_decay_rate(tau, g2map(np.zeros_like(tau), tau))
    yield Check("numeric G2(0, tau) decay rate at delta=3", rate, 3.0, 0.06)
    lam = twochannel.channel_probabilities(twochannel.final_fields_lambda(PhysParams(delta=4.0)))
    yield Check("numeric lambda p_aa at delta=2 gamma'", lam.p_aa, 2.0 / 3.0, 0.01)


def _analytic_checks() -> Iterator[Check]:
    yield Check("tau_eff(delta=3)", analytic.tau_eff(1.0, 3.0), 0.5, 1e-12)
    yield Check("tau_eff(delta=1)", analytic.tau_eff(1.0, 1.0), 1.0, 1e-12)
    yield Check("tau_eff(delta=1e9)", analytic.tau_eff(1.0, 1e9), 1.0, 1e-6)
    yield Check("|1+Q| at delta=3", abs(1 + analytic.q_factor(PhysParams(delta=3.0)).value), 0.0, 0.0)
    yield Check("|1+Q_f| at delta=2 gamma'",
                abs(1 + analytic.q_factor_two_channel(PhysParams(delta=4.0)).value), 0.0, 0.0)
    t = np.linspace(0.0, 10.0, 401)
    diff = np.max(np.abs(analytic.rho_ee(t, PhysParams(delta=3.0)) - analytic.rho_ee_optimal(t, 1.0)))
    yield Check("rho_ee closed form vs optimal form", float(diff), 0.0, 1e-12)
    tau = np.linspace(0.0, 2.0, 201)
    rate = fit_decay_rate(tau, analytic.g2(0.0, tau, PhysParams(delta=3.0)))
    yield Check("analytic G2(0, tau) decay rate at delta=3", rate, 3.0, 0.06)
    yield Check("einstein_rate(1, 1, 0)", analytic.einstein_rate(1.0, 1, 0, 1.0), 2.0, 0.0)
    res = np.max(np.abs(analytic.rate_equation_residual(np.linspace(0, 3, 301), 1.0)))
    yield Check("rate-equation residual is not zero (max >= 0.1)", float(res >= 0.1), 1.0, 0.0)


def _twochannel_checks() -> Iterator[Check]:
    opt = twochannel.channel_probabilities_exact(PhysParams(delta=4.0), "lambda")
    yield Check("lambda p_aa at optimum", opt.p_aa, 2.0 / 3.0, 0.01)
    yield Check("lambda fidelity at optimum", twochannel.cloning_fidelity(opt), 5.0 / 6.0, 0.005)
    yield Check("lambda p_bb", opt.p_bb, 0.0, 0.0)
    base = twochannel.transmission_fidelity(PhysParams(detuning=math.inf))
    yield Check("F^T far detuned", base, 0.75, 0.005)
    curve = twochannel.transmission_fidelity_curve(PhysParams())
    yield Check("max F^T", curve.optimum_value, 0.975 * 5.0 / 6.0, 0.005)
    yield Check("amplification ratio", twochannel.amplification_ratio(curve.optimum_value, base),
                1.0 / 12.0, 0.005)
    yield Check("maximal amplification", twochannel.amplification_ratio(5.0 / 6.0, 0.75), 1.0 / 9.0, 1e-15)


SUITES: dict[str, Callable[[], Iterator[Check]]] = {
    "analytic": _analytic_checks,
    "twochannel": _twochannel_checks,
    "numeric": _numeric_checks,
}


def run_checks(suites=None) -> list[Check]:
    names = list(SUITES) if suites is None else suites
    out: list[Check] = []
    for name in names:
        out.extend(SUITES[name]())
    return out
