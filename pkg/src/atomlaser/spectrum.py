"""Output power spectrum from a coherence trace.

``P(omega) = kappa mu int g1(t) exp(-i omega t) dt`` over the whole real line,
using ``g1(-t) = conj(g1(t))``. Frequencies are angular and in units of kappa.
With this convention ``int P d omega = 2 pi kappa mu``, so the reported
``total_flux`` is ``int P d omega / (2 pi)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft, fftfreq, fftshift, next_fast_len
from scipy.interpolate import CubicSpline
from scipy.optimize import OptimizeWarning, curve_fit

from .coherence import CoherenceTrace, check_coverage, coherence_time_quadrature
from .errors import AliasingError, ConvergenceError, ParameterError
from .liouvillian import LaserParams

EDGE_BINS = 5
ALIAS_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class Spectrum:
    frequencies: np.ndarray
    values: np.ndarray
    total_flux: float
    omega_bar: float
    resolution: float
    normalization_residual: float
    params: LaserParams | None = None
    meta: dict = field(default_factory=dict)

    def value_at(self, omega: float) -> float:
        return float(np.interp(omega, self.frequencies, self.values))

    @property
    def peak(self) -> float:
        return float(self.values.max())

    def violations(self, *, flux_tol: float = 0.01, neg_tol: float = 1e-9) -> list[str]:
        bad = []
        if self.normalization_residual > flux_tol:
            bad.append(f"flux normalization residual {self.normalization_residual:.2e}")
        lo = float(self.values.min())
        if lo < -neg_tol * self.peak:
            bad.append(f"negative spectral density {lo:.3e} (peak {self.peak:.3e})")
        return bad

    def crop(self, lo: float, hi: float) -> "Spectrum":
        if not lo < hi:
            raise ParameterError("empty frequency range")
        keep = (self.frequencies >= lo) & (self.frequencies <= hi)
        return Spectrum(self.frequencies[keep], self.values[keep], self.total_flux,
                        self.omega_bar, self.resolution, self.normalization_residual,
                        self.params, dict(self.meta, cropped=[lo, hi]))


def _uniform_samples(t: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    d = np.diff(t)
    if np.allclose(d, d[0], rtol=1e-9, atol=0):
        return h
    grid = np.arange(0.0, t[-1] + 0.5 * dt, dt)
    return CubicSpline(t, h)(grid)


def power_spectrum(
    trace: CoherenceTrace,
    p: LaserParams,
    *,
    omega_bar: float | None = None,
    resolution_fraction: float = 20.0,
) -> Spectrum:
    """Discrete transform of the demodulated trace, zero padded so that the
    bin spacing is at most ``linewidth / resolution_fraction``.

    Raises ``AliasingError`` when more than 1e-4 of the spectral mass sits
    within five bins of either Nyquist edge.
    """
    check_coverage(trace)
    t = trace.times
    w0 = float(omega_bar if omega_bar is not None else (trace.omega_bar or 0.0))
    h = trace.values * np.exp(-1j * w0 * t)
    dt = float(np.diff(t).min())
    samples = _uniform_samples(t, h, dt)
    ell = 1.0 / coherence_time_quadrature(trace)
    n = next_fast_len(max(len(samples), int(math.ceil(2 * math.pi * resolution_fraction / (ell * dt)))))
    padded = np.zeros(n, dtype=complex)
    padded[: len(samples)] = samples
    one_sided = dt * (fft(padded) - 0.5 * samples[0])
    vals = fftshift(2.0 * p.flux * one_sided.real)
    nu = fftshift(fftfreq(n, dt)) * 2 * math.pi
    d_omega = 2 * math.pi / (n * dt)

    mass = np.abs(vals)
    edge = mass[:EDGE_BINS].sum() + mass[-EDGE_BINS:].sum()
    if edge > ALIAS_TOL * mass.sum():
        raise AliasingError(f"{edge / mass.sum():.2e} of the spectral mass is at the Nyquist edge")

    total = float(np.trapezoid(vals, dx=d_omega)) / (2 * math.pi)
    expected = p.flux * trace.values[0].real
    return Spectrum(
        w0 + nu, vals, total, w0, d_omega, abs(total - expected) / expected, p,
        {"samples": len(samples), "fft_length": n, "time_step": dt, "linewidth_estimate": ell},
    )


def peak_intensity(tau_coh: float, p: LaserParams) -> float:
    """Spectral density at the line center, ``4 kappa mu tau``."""
    if not tau_coh > 0:
        raise ParameterError("coherence time must be positive")
    return 4.0 * p.flux * tau_coh


def centroid(spec: Spectrum) -> float:
    return float(np.trapezoid(spec.frequencies * spec.values, spec.frequencies)
                 / np.trapezoid(spec.values, spec.frequencies))


def asymmetry(spec: Spectrum) -> float:
    """Largest bin-wise mismatch between ``P(omega_bar + x)`` and ``P(omega_bar - x)``,
    relative to the peak."""
    mirrored = np.interp(2 * spec.omega_bar - spec.frequencies, spec.frequencies, spec.values)
    inside = np.abs(spec.frequencies - spec.omega_bar) <= np.abs(
        spec.frequencies[[0, -1]] - spec.omega_bar).min()
    return float(np.abs(spec.values - mirrored)[inside].max() / spec.peak)


def _lorentzian(w, amp, center, half_width):
    return amp / (1.0 + ((w - center) / half_width) ** 2)


def _gaussian(w, amp, center, sigma):
    return amp * np.exp(-0.5 * ((w - center) / sigma) ** 2)


@dataclass(frozen=True)
class LineFit:
    shape: str
    amplitude: float
    center: float
    width: float
    residual: float


def _fit(spec: Spectrum, shape: str, window: float) -> LineFit:
    ell = spec.meta.get("linewidth_estimate")
    if ell is None:
        raise ParameterError("spectrum carries no linewidth estimate")
    sel = np.abs(spec.frequencies - spec.omega_bar) <= window * ell
    w, y = spec.frequencies[sel], spec.values[sel]
    model = _lorentzian if shape == "lorentzian" else _gaussian
    start = [y.max(), w[np.argmax(y)], 0.5 * ell]
    try:
        with warnings.catch_warnings():
            # near-perfect fits leave the covariance undefined; only the residual is used
            warnings.simplefilter("ignore", OptimizeWarning)
            (amp, center, width), _ = curve_fit(model, w, y, p0=start, maxfev=20000)
    except RuntimeError as exc:
        raise ConvergenceError(f"{shape} fit failed: {exc}") from exc
    resid = float(np.abs(y - model(w, amp, center, width)).max() / y.max())
    return LineFit(shape, float(amp), float(center), abs(float(width)), resid)


def fit_lorentzian(spec: Spectrum, window: float = 10.0) -> LineFit:
    """Least-squares Lorentzian over ``|omega - omega_bar| <= window * linewidth``;
    the residual is the largest absolute misfit relative to the peak."""
    return _fit(spec, "lorentzian", window)


def fit_gaussian(spec: Spectrum, window: float = 10.0) -> LineFit:
    return _fit(spec, "gaussian", window)
