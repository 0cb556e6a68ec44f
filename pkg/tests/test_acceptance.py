"""Acceptance criteria, one test and one PASS/FAIL line each.

Tolerances are fixed targets; nothing here is loosened to make a
criterion pass.
"""
import math
import time

import numpy as np
from scipy.signal import argrelmax

from atomlaser import analytic as an
from atomlaser.coherence import (
    Method,
    compute_g1,
    default_time_grid,
    g1_trace,
    linewidth,
)
from atomlaser.fock import DensityMatrix, FockSpace, gain_integral_identity_check
from atomlaser.liouvillian import FeedbackParams, LaserParams, build_collision, build_model
from atomlaser.phase_space import gain_correspondence_check
from atomlaser.propagate import evolve_density
from atomlaser.spectrum import fit_gaussian, fit_lorentzian, peak_intensity, power_spectrum


def rel(x, ref):
    return abs(x - ref) / abs(ref)


def test_01_standard_linewidth(report_criterion):
    start = time.perf_counter()
    ell = linewidth(LaserParams(mu=30)).linewidth
    seconds = time.perf_counter() - start
    err = rel(ell, 1 / 60)
    ok = err < 0.02 and seconds < 30
    report_criterion(1, ok, f"mu=30 linewidth {ell:.6f} vs 1/60, rel {err:.2%} (tol 2%), {seconds:.1f}s")
    assert ok


def test_02_four_regimes(report_criterion):
    parts, ok = [], True
    for chi in (0.3, 3.0, 30.0, 300.0):
        p = LaserParams(mu=60, chi=chi)
        err = rel(linewidth(p).linewidth, an.linewidth_regimes(p).linewidth)
        ok &= err < 0.15
        parts.append(f"chi={chi:g} {err:.1%}")
    plateau = LaserParams(mu=60, C=100 * math.pi * 60)
    res = linewidth(plateau)
    err = rel(res.linewidth, 4660)
    ok &= err < 0.05 and res.revival
    parts.append(f"plateau {res.linewidth:.0f} vs 4660 {err:.2%}")
    report_criterion(2, ok, "; ".join(parts) + " (tol 15% / 5%)")
    assert ok


def test_03_feedback_linewidth(report_criterion):
    parts, ok = [], True
    for chi in (1.0, 10.0, 100.0):
        p = LaserParams(mu=60, chi=chi)
        res = linewidth(p, FeedbackParams.optimal(p.C, 1.0))
        err = rel(res.linewidth, an.linewidth_feedback(p, 1.0))
        ok &= err < 0.10 and abs(res.omega_bar) <= 1e-4
        parts.append(f"chi={chi:g} {err:.2%} omega_bar={res.omega_bar:.1e}")
    report_criterion(3, ok, "; ".join(parts) + " (tol 10%, 1e-4)")
    assert ok


def test_04_spectrum(report_criterion):
    parts, ok = [], True

    p = LaserParams(mu=15, chi=15 ** 1.5)
    f = FeedbackParams.optimal(p.C)
    spec = power_spectrum(compute_g1(build_model(p, f)), p, omega_bar=0.0)
    tau = linewidth(p, f).tau_coh
    flux = rel(spec.total_flux, p.flux)
    peak = rel(spec.value_at(0.0), peak_intensity(tau, p))
    lor = fit_lorentzian(spec).residual
    ok &= flux < 0.01 and peak < 0.05 and lor < 0.02
    parts.append(f"feedback flux {flux:.1e} peak {peak:.2%} lorentzian {lor:.1e}")

    p = LaserParams(mu=60, chi=300.0)
    res = linewidth(p)
    spec = power_spectrum(compute_g1(build_model(p)), p, omega_bar=res.omega_bar)
    flux = rel(spec.total_flux, p.flux)
    peak = rel(spec.value_at(res.omega_bar), peak_intensity(res.tau_coh, p))
    gau = fit_gaussian(spec).residual
    ok &= flux < 0.01 and peak < 0.05 and gau < 0.03
    parts.append(f"chi=300 flux {flux:.1e} peak {peak:.2%} gaussian {gau:.2%}")

    p = LaserParams(mu=15, C=100 * math.pi * 15)
    spec = power_spectrum(compute_g1(build_model(p)), p)
    flux = rel(spec.total_flux, p.flux)
    top = spec.value_at(spec.omega_bar)
    err = rel(top, 1 / math.sqrt(2 * math.pi * 15))
    peak = rel(top, peak_intensity(linewidth(p).tau_coh, p))
    ok &= flux < 0.01 and err < 0.10 and peak < 0.05
    parts.append(f"revival flux {flux:.1e} peak {top:.4f} vs 0.1030 {err:.1%}, vs 4 kappa mu tau {peak:.2%}")

    report_criterion(4, ok, "; ".join(parts))
    assert ok


def test_05_collapse_error_scaling(report_criterion):
    mus = [10, 20, 40, 80]
    errs = [abs(an.collapse_error(mu, 1.0)[2]) for mu in mus]
    slope = np.polyfit(np.log(mus), np.log(errs), 1)[0]
    ok = abs(slope + 1) <= 0.15
    report_criterion(5, ok, f"log-log slope {slope:.3f} (target -1 +/- 0.15)")
    assert ok


def test_06_gain_integral_identity(report_criterion):
    err = gain_integral_identity_check(FockSpace(20))
    ok = err < 1e-6
    report_criterion(6, ok, f"dim=20 relative Frobenius error {err:.2e} (tol 1e-6)")
    assert ok


def test_07_gain_correspondence(report_criterion):
    rho = DensityMatrix.coherent(FockSpace(80), math.sqrt(15))
    res = gain_correspondence_check(rho, max_k=3)
    ok = res.decreasing and res.mismatch[1] < 0.05
    shown = ", ".join(f"{m:.2%}" for m in res.mismatch)
    report_criterion(7, ok, f"mismatch k=1..3: {shown} (k=2 tol 5%, decreasing={res.decreasing})")
    assert ok


def test_08_moment_oracle(report_criterion):
    t = np.geomspace(0.01, 20, 200)
    worst = 0.0
    for chi in (0.0, 1.0, 10.0, 100.0):
        p = LaserParams(mu=60, chi=chi)
        for f in (None, FeedbackParams.optimal(p.C) if chi else None, FeedbackParams.optimal(p.C, 0.3) if chi else None):
            closed = an.ou_phase_moments(p, f, t)
            num = an.ou_moment_integrator(p, f, t, linearization="asymptotic")
            worst = max(worst, float(np.max(np.abs(num.phase_variance / closed.phase_variance - 1))))
            for a, b in ((num.mean_phase, closed.mean_phase),
                         (num.number_phase_covariance, closed.number_phase_covariance)):
                scale = np.abs(b).max()
                if scale > 0:
                    worst = max(worst, float(np.max(np.abs(a - b)) / scale))
    ok = worst < 1e-6
    report_criterion(8, ok, f"max relative deviation {worst:.1e} on kappa t in [0.01, 20] (tol 1e-6)")
    assert ok


def test_09_property_suite(report_criterion):
    problems = []
    p = LaserParams(mu=15, C=1 / math.sqrt(2 * math.pi * 15))
    m = build_model(p)
    _, report = evolve_density(m.L, DensityMatrix.coherent(m.space, math.sqrt(15)).rho,
                               np.linspace(0, 0.8, 9))
    problems += report.failures()
    runs = [(LaserParams(mu=30), None), (LaserParams(mu=30, chi=5.0), None),
            (LaserParams(mu=30, chi=30.0), "fb"), (LaserParams(mu=15, C=100 * math.pi * 15), None)]
    worst_g0, worst_max, worst_tail = 0.0, 0.0, 0.0
    for q, fb in runs:
        f = FeedbackParams.optimal(q.C) if fb else None
        trace = compute_g1(build_model(q, f))
        problems += trace.violations()
        worst_g0 = max(worst_g0, abs(trace.values[0] - 1))
        worst_max = max(worst_max, float(np.abs(trace.values).max()))
        worst_tail = max(worst_tail, trace.tail_weight)
    ok = not problems
    report_criterion(9, ok, (
        f"trace drift {report.trace_drift:.1e}, hermiticity {report.hermiticity_drift:.1e}, "
        f"min eig {report.min_eigenvalue:.1e}, |g1(0)-1| {worst_g0:.1e}, max|g1| {worst_max:.12f}, "
        f"tail {max(report.tail_population, worst_tail):.1e}"
    ) + ("" if ok else " -> " + "; ".join(problems)))
    assert ok


def test_10_revival_times(report_criterion):
    mu, C = 15, 1.0
    rho = build_model(LaserParams(mu=mu)).rho_ss
    L = build_collision(LaserParams(mu=mu, C=C), FockSpace(55))
    step = math.pi / C / 64
    t = np.arange(0, 5.5 * math.pi / C, step)
    mag = np.abs(g1_trace(L, rho, t).values)
    peaks = t[argrelmax(np.concatenate([mag, [0.0]]))[0]]
    found = [peaks[np.argmin(np.abs(peaks - m * math.pi / C))] for m in range(1, 6)]
    offsets = [abs(x - m * math.pi / C) for m, x in zip(range(1, 6), found)]
    ok = max(offsets) <= step
    report_criterion(10, ok, f"max offset of revival maxima {max(offsets):.2e} (one step {step:.3e})")
    assert ok
