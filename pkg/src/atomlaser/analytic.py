"""Closed-form results for the atom-laser phase dynamics.

These serve as oracles for the numerical modules. Unless stated otherwise
they are the large-``mu`` forms (``mu`` rather than ``mu + 1``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import ConvergenceError, ParameterError
from .liouvillian import FeedbackParams, LaserParams


@dataclass(frozen=True)
class PhaseMoments:
    """Moments of the relative phase (and of the Q-function number variable)."""

    t: np.ndarray
    mean_phase: np.ndarray
    phase_variance: np.ndarray
    number_phase_covariance: np.ndarray
    mean_number: np.ndarray
    number_variance: np.ndarray


def _detuned_collision(p: LaserParams, f: FeedbackParams | None) -> tuple[float, float]:
    """Residual nonlinearity ``C - F`` and added phase diffusion ``M + F^2/(eta M)``."""
    if f is None or not f.enabled:
        return p.C, 0.0
    return p.C - f.F, f.M + f.feedback_noise


def _shifted_ramp(x):
    """``exp(-x) + x - 1`` without cancellation at small ``x``."""
    return np.expm1(-x) + x


def ou_phase_moments(p: LaserParams, f: FeedbackParams | None, t) -> PhaseMoments:
    if p.mu < 10:
        warnings.warn(f"closed-form phase moments assume mu >> 1 (mu={p.mu})", stacklevel=2)
    t = np.asarray(t, dtype=float)
    k, mu = p.kappa, p.mu
    dc, extra = _detuned_collision(p, f)
    mean = -2.0 * mu * dc * t
    var = 8.0 * mu * dc ** 2 / k ** 2 * _shifted_ramp(k * t) + (k / (2 * mu) + extra) * t
    cov = 2.0 * mu * dc / k * np.expm1(-k * t)
    ones = np.ones_like(t)
    return PhaseMoments(t, mean, var, cov, (mu + 1) * ones, (2 * mu + 1) * ones)


def ou_moment_integrator(
    p: LaserParams,
    f: FeedbackParams | None,
    t_grid,
    *,
    linearization: str = "exact",
    rtol: float = 1e-12,
) -> PhaseMoments:
    """Integrate the Ornstein-Uhlenbeck moment equations of the Q-function FPE.

    Drift ``A = (kappa(mu + 1 - n), (3 - 2n)(C - F))`` and diffusion
    ``B = [[2 kappa (mu + n), 2n(C - F)], [., kappa/2n + M + F^2/(eta M)]]``
    with ``n`` in ``B`` frozen at the linearization point. ``"exact"`` keeps
    the ``mu + 1`` point and the constant 3 in the phase drift;
    ``"asymptotic"`` drops the O(1) offsets the same way the closed forms do.
    The initial state is the coherent state with the matching Q-function
    number statistics and zero relative phase.
    """
    k, mu = p.kappa, p.mu
    dc, extra = _detuned_collision(p, f)
    if linearization == "exact":
        n0, offset = mu + 1.0, 3.0
    elif linearization == "asymptotic":
        n0, offset = mu, 0.0
    else:
        raise ParameterError(f"unknown linearization {linearization!r}")
    b11 = 2.0 * k * (mu + n0) if linearization == "exact" else 4.0 * k * mu
    b12 = 2.0 * n0 * dc
    b22 = k / (2.0 * n0) + extra

    def rhs(_, y):
        n, phi, vn, cnp, vphi = y
        return [
            k * (n0 - n),
            (offset - 2.0 * n) * dc,
            -2.0 * k * vn + b11,
            -k * cnp - 2.0 * dc * vn + b12,
            -4.0 * dc * cnp + b22,
        ]

    t_grid = np.asarray(t_grid, dtype=float)
    vn0 = 2.0 * mu + 1.0 if linearization == "exact" else 2.0 * mu
    sol = solve_ivp(rhs, (0.0, float(t_grid.max())), [n0, 0.0, vn0, 0.0, 0.0],
                    method="DOP853", t_eval=t_grid, rtol=rtol, atol=1e-15)
    if not sol.success:
        raise ConvergenceError(f"moment integration failed: {sol.message}")
    n, phi, vn, cnp, vphi = sol.y
    return PhaseMoments(t_grid, phi, vphi, cnp, n, vn)


def g1_magnitude(p: LaserParams, t):
    """``|g1(t)|`` from Gaussian phase statistics, no feedback."""
    kt = p.kappa * np.asarray(t, dtype=float)
    return np.exp(-p.chi ** 2 * _shifted_ramp(kt) / (4 * p.mu) - kt / (4 * p.mu))


class Regime(str, Enum):
    STANDARD = "standard"
    QUADRATIC = "quadratic"
    LINEAR = "linear"
    REVIVAL = "revival"


@dataclass(frozen=True)
class RegimeReport:
    chi: float
    regime: Regime
    linewidth: float
    crossover: float
    revival_onset: float


def linewidth_regimes(p: LaserParams) -> RegimeReport:
    if not p.mu > 1:
        raise ParameterError("regime analysis needs mu > 1")
    k, mu, chi = p.kappa, p.mu, p.chi
    crossover = math.sqrt(8 * mu / math.pi)
    onset = p.revival_threshold
    if chi >= onset:
        regime, ell = Regime.REVIVAL, linewidth_revival(p)
    elif chi >= crossover:
        regime, ell = Regime.LINEAR, 2 * k * chi / math.sqrt(2 * math.pi * mu)
    else:
        regime = Regime.QUADRATIC if chi >= 1 else Regime.STANDARD
        ell = k * (1 + chi ** 2) / (2 * mu)
    return RegimeReport(chi, regime, ell, crossover, onset)


def g1_collisions_only(mu: float, C: float, t):
    """Collisions alone, from a coherent state of mean number ``mu``."""
    return np.exp(-mu * (1 - np.exp(2j * C * np.asarray(t, dtype=float))))


def g1_revival_full(p: LaserParams, t):
    """Anharmonic oscillator with damping, adapted to saturated gain.

    Returns ``(g1, |g1|)``, each from its own closed form. Valid for
    ``C >> kappa mu``.
    """
    k, mu, C = p.kappa, p.mu, p.C
    if not C > 0:
        raise ParameterError("revival form needs C > 0")
    if C < k * mu:
        warnings.warn("revival form is only valid for C >> kappa mu", stacklevel=2)
    t = np.asarray(t, dtype=float)
    r = k / C
    amp = mu / (1 + r * r)
    damp = np.exp(-2 * k * t)
    g1 = (np.exp(1j * C * t - k * t / (4 * mu))
          * np.exp(-amp * (1 - 1j * r) * (1 - np.exp(2j * C * t) * damp)))
    mag = np.exp(-k * t / (4 * mu)) * np.exp(
        -amp * (1 - damp * np.cos(2 * C * t) - r * damp * np.sin(2 * C * t)))
    return g1, mag


def linewidth_revival(p: LaserParams) -> float:
    return 4 * p.kappa * math.sqrt(2 * math.pi) * p.mu ** 1.5


@dataclass(frozen=True)
class RevivalSeries:
    linewidth: float
    significant_revivals: float
    revival_time: float
    dissipation_time: float


def revival_series(p: LaserParams) -> RevivalSeries:
    """Geometric sum over revival peaks, before the ``t_r << t_Q`` limit."""
    if not p.C > 0:
        raise ParameterError("revival series needs C > 0")
    t_r = math.pi / p.C
    t_q = 1.0 / (p.kappa * p.mu)
    peak = math.sqrt(2 * math.pi * p.mu) / (p.kappa * p.chi)
    two_tau = 2 * peak * (1.0 / (-math.expm1(-2 * t_r / t_q)) - 0.5)
    return RevivalSeries(2.0 / two_tau, t_q / t_r, t_r, t_q)


def linewidth_feedback(p: LaserParams, eta: float = 1.0) -> float:
    """Optimal feedback ``F = sqrt(eta) M = C``; valid for all ``chi``."""
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    return p.kappa / (2 * p.mu) * (1 + p.chi / math.sqrt(eta))


def linewidth_estimate(p: LaserParams, f: FeedbackParams | None = None) -> float:
    """Rough analytic linewidth for any parameter point (used to size grids)."""
    dc, extra = _detuned_collision(p, f)
    eff = LaserParams(mu=p.mu, C=abs(dc), kappa=p.kappa) if p.mu > 1 else None
    base = linewidth_regimes(eff).linewidth if eff is not None else p.kappa / (2 * p.mu)
    return base + 2 * extra


def _quad(fn, a, b):
    out = quad(fn, a, b, epsabs=1e-12, epsrel=1e-9, limit=500, full_output=1)
    if len(out) > 3:
        raise ConvergenceError(f"quadrature failed: {out[3]}")
    return out[0]


def collapse_tau(mu: float, C: float, omega: float) -> complex:
    """``1/2 int g1(t) exp(-i omega t) dt`` for collisions alone over one collapse
    ``0 <= t <= pi/(2C)``."""
    if not (mu > 0 and C > 0):
        raise ParameterError("need mu > 0 and C > 0")
    t_end = math.pi / (2 * C)

    def integrand(t):
        return np.exp(-mu * (1 - np.exp(2j * C * t)) - 1j * omega * t)

    re = 0.5 * _quad(lambda t: integrand(t).real, 0.0, t_end)
    im = 0.5 * _quad(lambda t: integrand(t).imag, 0.0, t_end)
    return complex(re, im)


def collapse_frequency(mu: float, C: float, corrections: int = 50, tol: float = 1e-6) -> tuple[float, int]:
    """Frequency iteration ``omega -> omega - Im(1/(2 tau))`` on the
    collisions-only collapse, from ``2 mu C``. Stops when ``|Im tau| < tol Re tau``."""
    omega = 2 * mu * C
    for k in range(corrections + 1):
        tau = collapse_tau(mu, C, omega)
        if abs(tau.imag) < tol * tau.real or k == corrections:
            return omega, k
        omega -= (1.0 / (2.0 * tau)).imag
    return omega, corrections


def collapse_error(mu: float, C: float) -> tuple[float, complex, float]:
    """Single-exponential approximation error for the collisions-only ``g1``.

    Integrates over one collapse ``0 <= t <= pi/(2C)`` with the corrected
    frequency ``omega_1 = 2 mu C - 2C/3``. Returns ``(tau_exact, tau_approx,
    relative_error)`` with the error taken on the real part.
    """
    if not (mu > 0 and C > 0):
        raise ParameterError("need mu > 0 and C > 0")
    t_end = math.pi / (2 * C)
    exact = 0.5 * _quad(lambda t: math.exp(-mu * (1 - math.cos(2 * C * t))), 0.0, t_end)
    tau_approx = collapse_tau(mu, C, 2 * mu * C - 2 * C / 3)
    return exact, tau_approx, (tau_approx.real - exact) / exact
