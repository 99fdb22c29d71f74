import math

import numpy as np
import pytest
from scipy import integrate, optimize

from stimemit import analytic as an
from stimemit.core import PhysParams, SingularPointError


def literal_rho(t, g, d, det):
    """Population written exactly as the textbook expression with Q (oracle)."""
    q = 2 * g / (g - d - 2j * det)
    z = g + d + 2j * det
    brace = (1 + abs(1 + q) ** 2 * (np.exp(d * t) - 1) + abs(q) ** 2 * d / g * (np.exp(g * t) - 1)
             - 2 * np.real((np.conj(q) + abs(q) ** 2) * 2 * d / z * (np.exp(z * t / 2) - 1)))
    return np.exp(-(g + d) * t) * brace


def literal_g2(t, tau, g, d, det):
    q = 2 * g / (g - d - 2j * det)
    amp = (1 + q) * np.exp(-g * tau / 2) + (1 - q) * np.exp(-(d / 2 + 1j * det) * tau)
    return d * g * np.exp(-(g + d) * t) * np.abs(amp) ** 2


# -- Q factors -------------------------------------------------------------------

def test_q_factor_values():
    assert an.q_factor(PhysParams(delta=3.0)).value == -1
    assert an.q_factor(PhysParams(delta=1.0, detuning=1.0)).value == pytest.approx(1j, abs=1e-15)
    assert abs(an.q_factor(PhysParams(delta=1e12)).value) < 1e-11
    assert an.q_factor(PhysParams()).variant == "semi"


def test_q_factor_two_channel():
    qf = an.q_factor_two_channel(PhysParams(gamma=0.5, delta=2.0))
    assert qf.value == -1 and qf.variant == "two-channel"
    p = PhysParams(delta=2.5, detuning=0.7)
    half = an.q_factor(PhysParams(gamma=p.gamma_prime, delta=p.delta, detuning=p.detuning)).value / 2
    assert an.q_factor_two_channel(p).value == pytest.approx(half, rel=1e-15)


def test_q_factor_singular_point():
    with pytest.raises(SingularPointError):
        an.q_factor(PhysParams(delta=1.0))
    with pytest.raises(SingularPointError):
        an.q_factor_two_channel(PhysParams(delta=2.0))
    # just off the singular set it evaluates
    assert abs(an.q_factor(PhysParams(delta=1.0 + 1e-9)).value) > 1e8


# -- populations -----------------------------------------------------------------

@pytest.mark.parametrize("d, det", [(0.1, 0.0), (0.5, 0.3), (3.0, 0.0), (3.0, 5.0), (10.0, 1.0), (40.0, 0.0)])
def test_rho_matches_literal_formula(d, det):
    t = np.linspace(0.0, 6.0, 61)
    assert np.allclose(an.rho_ee(t, PhysParams(delta=d, detuning=det)), literal_rho(t, 1.0, d, det),
                       atol=1e-12, rtol=1e-9)


def test_rho_known_values():
    p = PhysParams(delta=3.0)
    assert an.rho_ee(0.0, p) == 1.0
    assert an.rho_ee(1.0, p) == pytest.approx(-2 * math.exp(-4) + 3 * math.exp(-3), abs=1e-14)
    assert an.rho_ee(1.0, p) == pytest.approx(0.112730, abs=5e-7)
    t = np.linspace(0, 20, 2001)
    assert np.max(np.abs(an.rho_ee(t, p) - an.rho_ee_optimal(t, 1.0))) < 1e-12


def test_rho_large_times_do_not_overflow():
    p = PhysParams(delta=100.0)
    val = an.rho_ee(np.array([10.0, 50.0, 700.0]), p)
    assert np.all(np.isfinite(val)) and np.all(val >= 0)


def test_rho_far_detuned_limits():
    t = np.linspace(0, 10, 201)
    assert np.max(np.abs(an.rho_ee(t, PhysParams(detuning=1e4)) - np.exp(-t))) < 1e-3
    assert np.allclose(an.rho_ee(t, PhysParams(detuning=math.inf)), np.exp(-t), atol=1e-15)


def test_rho_singular_limit():
    t = np.linspace(0, 15, 301)
    exact = an.rho_ee_singular(t, 1.0)
    assert np.max(np.abs(an.rho_ee(t, PhysParams(delta=1.0)) - exact)) < 1e-12
    # approaching the pole from either side through the closed form
    for eps in (1e-2, -1e-2):
        near = literal_rho(t, 1.0, 1.0 + eps, 0.0)
        assert np.max(np.abs(near - exact)) < 0.05
    assert np.max(np.abs(an.rho_ee(t, PhysParams(delta=1.0 + 2e-2)) - literal_rho(t, 1, 1.02, 0))) < 1e-10


def test_rho_singular_shows_reexcitation():
    t = np.linspace(0, 8, 801)
    rho = an.rho_ee_singular(t, 1.0)
    i = int(np.argmin(rho[:400]))
    assert 0 < i < 400 and rho[i + 100] > rho[i]


def test_rho_full_and_lambda():
    p = PhysParams(delta=6.0)
    t = np.linspace(0, 5, 51)
    semi = an.rho_ee(t, PhysParams(gamma=2.0, delta=6.0))
    assert np.allclose(an.rho_ee_full(t, p), 0.5 * semi + 0.5 * np.exp(-2 * t), atol=1e-14)
    assert an.rho_ee_full(0.0, p) == 1.0
    assert np.allclose(an.rho_ee_full(t, p.with_(detuning=math.inf)), np.exp(-2 * t))
    assert an.rho_ee_lambda(0.0, p) == 1.0


# -- lifetimes ---------------------------------------------------------------------

def test_tau_eff_values():
    assert an.tau_eff(1.0, 3.0) == 0.5
    assert an.tau_eff(1.0, 1.0) == 1.0
    assert an.tau_eff(1.0, 0.0) == 5.0
    assert abs(an.tau_eff(1.0, 1e9) - 1.0) < 1e-6


def _tail_cutoff(g, d):
    # integrand envelope e^{-min(g, d) T} below 1e-12
    return math.log(1e12) / min(g, d) * 1.5


@pytest.mark.parametrize("d", [0.1, 1.0, 3.0, 10.0, 100.0])
def test_tau_eff_matches_quadrature(d):
    p = PhysParams(delta=d)
    T = _tail_cutoff(1.0, d)
    val = integrate.quad(lambda t: an.rho_ee(t, p), 0.0, T, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
    assert val == pytest.approx(an.tau_eff(1.0, d), abs=1e-6)


def test_tau_eff_small_delta_quadrature_near_zero():
    # Delta -> 0 limit 5, checked by quadrature at a small width
    d = 1e-3
    p = PhysParams(delta=d)
    edges = [0.0, 30.0, 3000.0, _tail_cutoff(1.0, d)]
    val = sum(integrate.quad(lambda t: an.rho_ee(t, p), a, b, limit=400, epsabs=1e-12)[0]
              for a, b in zip(edges[:-1], edges[1:]))
    assert val == pytest.approx(an.tau_eff(1.0, d), rel=1e-6)
    assert an.tau_eff(1.0, d) == pytest.approx(5.0, abs=0.02)


def test_tau_eff_unique_minimum_by_golden_section():
    res = optimize.minimize_scalar(lambda d: an.tau_eff(1.0, d), bracket=(0.5, 2.0, 50.0),
                                   method="golden", tol=1e-10)
    assert res.x == pytest.approx(3.0, abs=1e-6)
    assert res.fun == pytest.approx(0.5, abs=1e-12)
    grid = np.geomspace(0.01, 1000, 5001)
    vals = np.array([an.tau_eff(1.0, d) for d in grid])
    i = int(np.argmin(vals))
    assert np.all(np.diff(vals[: i + 1]) < 0) and np.all(np.diff(vals[i:]) > 0)


def test_tau_eff_full_minimum():
    grid = np.geomspace(0.1, 100, 2001) * 2.0
    vals = [an.tau_eff_full(2.0, d) for d in grid]
    assert min(vals) == pytest.approx(0.75, abs=1e-6)
    assert an.tau_eff_full(2.0, 6.0) == 0.75
    T = 40.0
    p = PhysParams(delta=6.0)
    val = 2.0 * integrate.quad(lambda t: an.rho_ee_full(t, p), 0, T, epsabs=1e-12)[0]
    assert val == pytest.approx(0.75, abs=1e-8)


# -- correlations -------------------------------------------------------------------

@pytest.mark.parametrize("d, det", [(0.1, 0.0), (1.3, 0.0), (3.0, 0.0), (3.0, 5.0), (100.0, 2.0)])
def test_g2_matches_literal(d, det):
    t = np.linspace(0, 3, 13)[:, None]
    tau = np.linspace(0, 5, 21)[None, :]
    p = PhysParams(delta=d, detuning=det)
    assert np.allclose(an.g2(t, tau, p), literal_g2(t, tau, 1.0, d, det), rtol=1e-10, atol=1e-14)


def test_g2_known_values():
    p = PhysParams(delta=3.0)
    assert an.g2(0.0, 0.0, p) == pytest.approx(12.0, abs=1e-13)
    tau = np.linspace(0, 6, 61)
    assert np.allclose(an.g2(0.7, tau, p), 12 * math.exp(-2.8) * np.exp(-3 * tau), rtol=1e-12)
    for d, det in [(0.4, 0.0), (2.0, 3.0), (50.0, -1.0)]:
        t = np.linspace(0, 4, 9)
        q = PhysParams(delta=d, detuning=det)
        assert np.allclose(an.g2(t, 0.0, q), 4 * d * np.exp(-(1 + d) * t), rtol=1e-12)
    assert an.g2(0.0, 60.0, PhysParams(delta=0.5)) < 1e-10


def test_g2_singular_point_is_finite_and_continuous():
    tau = np.linspace(0, 10, 101)
    at = an.g2(0.0, tau, PhysParams(delta=1.0))
    near = literal_g2(0.0, tau, 1.0, 1.0 + 1e-4, 0.0)
    assert np.all(np.isfinite(at))
    assert np.max(np.abs(at - near)) < 1e-3


def test_g2_aa_structure():
    p = PhysParams(gamma=0.5, delta=2.0)
    tau = np.linspace(0, 5, 51)
    # Q_f = -1 kills the e^{-gamma' tau / 2} component
    assert np.allclose(an.g2_aa(0.0, tau, p), 2.0 * 4.0 * np.exp(-2.0 * tau), rtol=1e-12)
    t = np.linspace(0, 3, 7)
    q = PhysParams(delta=5.0, detuning=0.3)
    assert np.allclose(an.g2_aa(t, 0.0, q), 4 * 5.0 * 2.0 * np.exp(-7.0 * t), rtol=1e-12)
    far = an.g2_aa(0.0, tau, PhysParams(delta=3.0, detuning=math.inf))
    assert np.allclose(far, 3.0 * 2.0 * (np.exp(-2.0 * tau) + np.exp(-3.0 * tau)))


def test_g2_aa_reduces_to_g2_with_same_coupling():
    # g2_aa with gamma' and Q_f has the same functional form as g2 with (gamma, Q).
    # Q_f(gamma') = Q(gamma') / 2, so only the feedback differs; with Q_f -> Q both match.
    tau = np.linspace(0, 4, 41)
    for d, det in [(2.0, 0.0), (5.0, 1.0)]:
        p = PhysParams(gamma=0.5, delta=d, detuning=det)
        gp = p.gamma_prime
        qf = gp / (gp - d - 2j * det)
        amp = (1 + qf) * np.exp(-gp * tau / 2) + (1 - qf) * np.exp(-(d / 2 + 1j * det) * tau)
        assert np.allclose(an.g2_aa(0.0, tau, p), d * gp * np.abs(amp) ** 2, rtol=1e-12)


def test_p2_integrated_limits():
    p = PhysParams(delta=3.0)
    assert an.p2_integrated(0.0, p) == 0.0
    taus = np.linspace(0, 10, 201)
    vals = an.p2_integrated(taus, p)
    assert np.all(np.diff(vals) >= -1e-15)
    with pytest.raises(ValueError):
        an.p2_integrated(-1.0, p)


@pytest.mark.parametrize("d, det", [(0.1, 0.0), (1.0, 0.0), (3.0, 0.0), (100.0, 0.0), (3.0, 5.0), (1.0 + 1e-3, 0.0)])
def test_p2_asymptote_matches_2d_quadrature(d, det):
    p = PhysParams(delta=d, detuning=det)
    T = _tail_cutoff(1.0, d)
    def density(t, tau):
        if abs(d - 1.0) < 1e-9 and det == 0:
            # step around the removable pole
            return 0.5 * float(literal_g2(t, tau, 1.0, d * (1 + 1e-4), 0.0)
                               + literal_g2(t, tau, 1.0, d * (1 - 1e-4), 0.0))
        return float(literal_g2(t, tau, 1.0, d, det))

    inner = lambda tau: integrate.quad(lambda t: density(t, tau), 0, np.inf)[0]
    oracle = integrate.quad(inner, 0, T, limit=400, epsabs=1e-10)[0]
    assert an.p2_integrated(T, p) == pytest.approx(oracle, abs=1e-7)
    assert an.p2_integrated(T, p) == pytest.approx(1.0, abs=1e-6)


def test_p2_asymptote_matches_solver_pair_norm(optimal_history):
    from stimemit import numeric
    pair = numeric.two_photon_norm(optimal_history, 30.0)
    assert an.p2_integrated(40.0, PhysParams(delta=3.0)) == pytest.approx(pair, abs=1e-4)


# -- rate equations -------------------------------------------------------------------

def test_einstein_rate():
    assert an.einstein_rate(1.0, 1, 0, 1.0) == 2.0
    assert an.einstein_rate(1.0, 0, 0, 1.0) == 1.0
    assert an.einstein_rate(0.01, 100, 0, 1.0) == pytest.approx(0.99 + 1.01)
    with pytest.raises(ValueError):
        an.einstein_rate(1.5, 1, 0, 1.0)
    with pytest.raises(ValueError):
        an.einstein_rate(0.5, -1, 0, 1.0)


def test_rate_equation_residual():
    assert an.rate_equation_residual(0.0, 1.0) == 1.0
    assert abs(an.rate_equation_residual(60.0, 1.0)) < 1e-20
    root = optimize.brentq(lambda t: an.rate_equation_residual(t, 1.0), 0.01, 5)
    assert root == pytest.approx(math.log(4 / 3), abs=1e-12)
    # residual is the derivative of the optimal population plus 2 rho
    t = np.linspace(0, 3, 31)
    h = 1e-6
    deriv = (an.rho_ee_optimal(t + h, 1.0) - an.rho_ee_optimal(np.maximum(t - h, 0), 1.0)) / (
        (t + h) - np.maximum(t - h, 0))
    assert np.allclose(an.rate_equation_residual(t, 1.0), deriv + 2 * an.rho_ee_optimal(t, 1.0), atol=1e-6)
