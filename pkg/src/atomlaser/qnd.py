"""Dispersive-probe QND measurement and feedback design calculator (SI units)."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np
from scipy.constants import c as LIGHT_SPEED
from scipy.constants import h as PLANCK
from scipy.constants import hbar as HBAR

from .errors import ParameterError
from .liouvillian import LaserParams

VALIDITY_LIMIT = 0.1


@dataclass(frozen=True)
class ProbeParams:
    """Far-detuned probe on a trapped condensate.

    ``gamma`` and ``detuning`` are angular rates; give either ``probe_power``
    or ``intensity`` (they are related through ``beam_area``).
    """

    wavelength: float
    beam_area: float
    gamma: float
    detuning: float
    saturation_intensity: float
    probe_power: float | None = None
    intensity: float | None = None

    def __post_init__(self):
        for name in ("wavelength", "beam_area", "gamma", "detuning", "saturation_intensity"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.probe_power is not None and self.intensity is not None:
            if not math.isclose(self.probe_power, self.intensity * self.beam_area, rel_tol=1e-9):
                raise ParameterError("probe_power and intensity disagree for this beam area")
        for name in ("probe_power", "intensity"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParameterError(f"{name} must be >= 0, got {v}")
        if self.detuning < 100 * self.gamma:
            warnings.warn(
                f"detuning {self.detuning:.3g} is below 100 gamma; the far-detuned "
                "approximation is doubtful",
                stacklevel=2,
            )

    @property
    def power(self) -> float:
        if self.probe_power is not None:
            return self.probe_power
        if self.intensity is not None:
            return self.intensity * self.beam_area
        raise ParameterError("probe power or intensity required")

    @property
    def angular_frequency(self) -> float:
        return 2 * math.pi * LIGHT_SPEED / self.wavelength

    @property
    def photon_energy(self) -> float:
        return HBAR * self.angular_frequency

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ProbeParams":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ParameterError(f"unknown probe fields: {sorted(extra)}")
        return cls(**dict(data))


# Order-of-magnitude 87Rb D2 probe used as the reference design point.
RB87_PROBE = dict(
    wavelength=780e-9, beam_area=1e-11, gamma=5e6, detuning=2e9, saturation_intensity=10.0
)


@dataclass(frozen=True)
class PhaseShift:
    theta: float
    sqrt_mu_theta: float | None
    valid: bool | None


def probe_phase_shift(pp: ProbeParams, mu: float | None = None) -> PhaseShift:
    """Single-atom probe phase shift ``hbar omega_p gamma^2 / (8 A Delta I_sat)``.

    With ``mu`` given, also reports whether ``sqrt(mu) theta < 0.1``.
    """
    theta = pp.photon_energy * pp.gamma ** 2 / (
        8 * pp.beam_area * pp.detuning * pp.saturation_intensity
    )
    if mu is None:
        return PhaseShift(theta, None, None)
    if not mu > 0:
        raise ParameterError("mu must be positive")
    s = math.sqrt(mu) * theta
    return PhaseShift(theta, s, s < VALIDITY_LIMIT)


@dataclass(frozen=True)
class MeasurementStrength:
    M: float
    per_intensity: float


def measurement_strength(pp: ProbeParams, theta: float | None = None) -> MeasurementStrength:
    """``M = P theta^2 / (hbar omega_p)`` in 1/s, and ``M / I`` in 1/s per W/m^2."""
    theta = probe_phase_shift(pp).theta if theta is None else theta
    return MeasurementStrength(pp.power * theta ** 2 / pp.photon_energy,
                               strength_per_intensity(pp, theta))


def strength_per_intensity(pp: ProbeParams, theta: float | None = None) -> float:
    theta = probe_phase_shift(pp).theta if theta is None else theta
    return pp.beam_area * theta ** 2 / pp.photon_energy


def required_intensity(pp: ProbeParams, M: float, theta: float | None = None) -> float:
    """Probe intensity (W/m^2) that gives measurement strength ``M``."""
    if not M >= 0:
        raise ParameterError("measurement strength must be >= 0")
    return M / strength_per_intensity(pp, theta)


def optimal_feedback(C: float, eta: float = 1.0) -> tuple[float, float]:
    """``(F, M)`` with ``F = sqrt(eta) M = C``."""
    if not C > 0:
        raise ParameterError("C must be positive")
    if not 0 < eta <= 1:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    return C, C / math.sqrt(eta)


def spontaneous_loss_ratio(p: LaserParams, pp: ProbeParams, M: float) -> float:
    """Probe-induced spontaneous loss rate over the output rate ``kappa mu``.

    ``(4 mu M / kappa) * 2 A I_sat / (hbar omega_p gamma mu)``; with ``M = C``
    this is ``chi * 2 A I_sat / (hbar omega_p gamma mu)``. ``p.kappa`` must be
    in 1/s.
    """
    return (4 * p.mu * M / p.kappa) * (
        2 * pp.beam_area * pp.saturation_intensity / (pp.photon_energy * pp.gamma * p.mu)
    )


def saturation_intensity_from_linewidth(wavelength: float, gamma: float) -> float:
    return 2 * math.pi * PLANCK * LIGHT_SPEED * gamma / wavelength ** 3


def saturation_intensity_ratio(pp: ProbeParams, *, factor: float = 3.0) -> float:
    """Supplied ``I_sat`` over ``2 pi h c gamma / lambda^3``; warns outside ``factor``."""
    ratio = pp.saturation_intensity / saturation_intensity_from_linewidth(pp.wavelength, pp.gamma)
    if not 1 / factor <= ratio <= factor:
        warnings.warn(
            f"saturation intensity differs from 2 pi h c gamma / lambda^3 by {ratio:.3g}x",
            stacklevel=2,
        )
    return ratio


# Exponents of (kg, m, s).
_UNITS = {
    "hbar": (1, 2, -1),
    "rate": (0, 0, -1),
    "area": (0, 2, 0),
    "intensity": (1, 0, -3),
    "power": (1, 2, -3),
}


def _dims(*factors: tuple[str, int]) -> tuple[int, ...]:
    total = np.zeros(3, dtype=int)
    for name, power in factors:
        total += power * np.array(_UNITS[name])
    return tuple(int(x) for x in total)


def dimensional_audit() -> dict[str, tuple[int, ...]]:
    """Unit exponents (kg, m, s) of the calculator's outputs."""
    theta = _dims(("hbar", 1), ("rate", 1), ("rate", 2), ("area", -1), ("rate", -1),
                  ("intensity", -1))
    strength = tuple(np.add(_dims(("power", 1), ("hbar", -1), ("rate", -1)), np.multiply(2, theta)))
    ratio = _dims(("area", 1), ("intensity", 1), ("hbar", -1), ("rate", -1), ("rate", -1))
    return {"theta": theta, "M": tuple(int(x) for x in strength), "loss_ratio": ratio}


def design_report(pp: ProbeParams, p: LaserParams, eta: float = 1.0) -> dict:
    """Probe phase shift, measurement and feedback settings, and checks.

    Rates in ``p`` are taken to be in 1/s.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        shift = probe_phase_shift(pp, p.mu)
        has_power = pp.probe_power is not None or pp.intensity is not None
        report: dict = {
            "probe": asdict(pp),
            "laser": p.as_dict(),
            "eta": eta,
            "theta": shift.theta,
            "sqrt_mu_theta": shift.sqrt_mu_theta,
            "measurement_valid": shift.valid,
            "M_per_intensity": strength_per_intensity(pp, shift.theta),
            "M_probe": measurement_strength(pp, shift.theta).M if has_power else None,
            "saturation_intensity_ratio": saturation_intensity_ratio(pp),
            "units": {k: list(v) for k, v in dimensional_audit().items()},
        }
        if p.C > 0:
            F, M = optimal_feedback(p.C, eta)
            report.update(
                F_optimal=F,
                M_optimal=M,
                intensity_for_M_optimal=required_intensity(pp, M, shift.theta),
                loss_ratio=spontaneous_loss_ratio(p, pp, M),
            )
    report["warnings"] = [str(w.message) for w in caught]
    return report
