"""Invariant suite run by ``atomlaser check``.

Each check is small (seconds) and returns a ``CheckResult``; failures are
reported, never raised, so a single run shows every broken invariant.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analytic
from .coherence import (
    coherence_time_quadrature,
    compute_g1,
    g2_zero,
    linewidth,
)
from .fock import DensityMatrix, FockSpace, gain_integral_identity_check, saturated_gain
from .liouvillian import FeedbackParams, LaserParams, build_model
from .phase_space import q_function, ring_variation
from .propagate import evolve_density
from .spectrum import power_spectrum


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _gain_identity():
    err = gain_integral_identity_check(FockSpace(12))
    return err < 1e-6, f"relative Frobenius error {err:.2e}"


def _trace_preservation():
    m = build_model(LaserParams(mu=15, chi=20.0), FeedbackParams(M=0.5, F=0.2, eta=0.7))
    gain = saturated_gain(m.space).trace_residual()
    total = m.L.trace_residual()
    return max(gain, total) < 1e-12, f"gain {gain:.1e}, full generator {total:.1e}"


def _stationary():
    m = build_model(LaserParams(mu=20, chi=3.0))
    res = np.linalg.norm(m.L.apply(m.rho_ss.rho)) / m.L.norm()
    return res < 1e-12, f"|L rho_ss| / |L| = {res:.1e}"


def _evolution():
    p = LaserParams(mu=15, C=1 / math.sqrt(2 * math.pi * 15))
    m = build_model(p)
    rho0 = DensityMatrix.coherent(m.space, math.sqrt(15)).rho
    _, report = evolve_density(m.L, rho0, np.linspace(0.0, 0.8, 9))
    bad = report.failures()
    return not bad, "; ".join(bad) or (
        f"trace {report.trace_drift:.1e}, hermiticity {report.hermiticity_drift:.1e}, "
        f"min eig {report.min_eigenvalue:.1e}, tail {report.tail_population:.1e}"
    )


def _g1_trace():
    p = LaserParams(mu=30, chi=5.0)
    trace = compute_g1(build_model(p))
    bad = trace.violations()
    return not bad, "; ".join(bad) or (
        f"g1(0)-1 = {abs(trace.values[0] - 1):.1e}, tail weight {trace.tail_weight:.1e}"
    )


def _g2():
    m = build_model(LaserParams(mu=15))
    g2 = g2_zero(m.rho_ss)
    return abs(g2 - 1) < 1e-9, f"g2(0) = {g2:.12f}"


def _methods_agree():
    p = LaserParams(mu=30, chi=5.0)
    res = linewidth(p).tau_coh
    quad = coherence_time_quadrature(compute_g1(build_model(p)))
    rel = abs(quad - res) / res
    return rel < 0.02, f"resolvent {res:.6g}, quadrature {quad:.6g}, rel {rel:.1e}"


def _spectrum():
    p = LaserParams(mu=15, chi=15 ** 1.5)
    f = FeedbackParams.optimal(p.C)
    spec = power_spectrum(compute_g1(build_model(p, f)), p, omega_bar=0.0)
    bad = spec.violations()
    return not bad, "; ".join(bad) or f"flux residual {spec.normalization_residual:.1e}"


def _q_function():
    m = build_model(LaserParams(mu=15))
    qf = q_function(m.rho_ss)
    ring = ring_variation(m.rho_ss, math.sqrt(15))
    ok = abs(qf.normalization - 1) < 0.01 and qf.meta["clipped"] == 0 and ring < 1e-6
    return ok, f"normalization {qf.normalization:.6f}, ring variation {ring:.1e}"


def _moments():
    p = LaserParams(mu=60, chi=10.0)
    t = np.geomspace(0.01, 20, 40)
    worst = 0.0
    for f in (None, FeedbackParams.optimal(p.C)):
        closed = analytic.ou_phase_moments(p, f, t)
        num = analytic.ou_moment_integrator(p, f, t, linearization="asymptotic")
        worst = max(worst, float(np.max(np.abs(num.phase_variance / closed.phase_variance - 1))))
    return worst < 1e-6, f"max relative deviation {worst:.1e}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "gain_integral_identity": _gain_identity,
    "trace_preservation": _trace_preservation,
    "stationary_state": _stationary,
    "density_evolution": _evolution,
    "g1_trace": _g1_trace,
    "g2_zero": _g2,
    "resolvent_vs_quadrature": _methods_agree,
    "spectrum_normalization": _spectrum,
    "q_function": _q_function,
    "phase_moments": _moments,
}


def run_checks(names: list[str] | None = None) -> list[CheckResult]:
    results = []
    for name in names or list(CHECKS):
        start = time.perf_counter()
        try:
            passed, detail = CHECKS[name]()
        except Exception as exc:  # report, keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
