"""Husimi Q function on amplitude grids and the gain-term correspondence check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, ParameterError
from .fock import DensityMatrix, FockSpace, coherent_amplitudes, number, saturated_gain


@dataclass(frozen=True, eq=False)
class AmplitudeGrid:
    """Rectangular grid over ``(Re alpha, Im alpha)``."""

    re: np.ndarray
    im: np.ndarray

    @classmethod
    def square(cls, radius: float, points: int = 201) -> "AmplitudeGrid":
        axis = np.linspace(-radius, radius, points)
        return cls(axis, axis.copy())

    @classmethod
    def for_space(cls, space: FockSpace, points: int = 201) -> "AmplitudeGrid":
        return cls.square(math.sqrt(space.dim), points)

    @property
    def cell_area(self) -> float:
        return float((self.re[1] - self.re[0]) * (self.im[1] - self.im[0]))

    def alphas(self) -> np.ndarray:
        """Complex amplitudes with shape ``(len(im), len(re))``."""
        return self.re[None, :] + 1j * self.im[:, None]

    @property
    def covered_intensity(self) -> float:
        """Largest ``|alpha|^2`` whose full circle lies inside the grid."""
        return min(abs(self.re[0]), abs(self.re[-1]), abs(self.im[0]), abs(self.im[-1])) ** 2


@dataclass(frozen=True, eq=False)
class QField:
    grid: AmplitudeGrid
    values: np.ndarray
    normalization: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        """``(re_alpha, im_alpha, q)`` triples in row-major grid order."""
        for j, y in enumerate(self.grid.im):
            for i, x in enumerate(self.grid.re):
                yield float(x), float(y), float(self.values[j, i])


def husimi(rho: np.ndarray, alphas) -> np.ndarray:
    """``<alpha|rho|alpha> / pi`` at arbitrary amplitudes, without checks."""
    rho = np.asarray(rho, dtype=complex)
    space = FockSpace(rho.shape[0])
    alphas = np.asarray(alphas, dtype=complex)
    flat = alphas.ravel()
    amps = np.stack([coherent_amplitudes(space, a) for a in flat])
    q = np.einsum("pm,mn,pn->p", amps.conj(), rho, amps, optimize=True).real / math.pi
    return q.reshape(alphas.shape)


def q_function(
    rho: DensityMatrix, grid: AmplitudeGrid | None = None, *, norm_tol: float = 0.01
) -> QField:
    """Q function on ``grid`` (default: 201 x 201 over radius ``sqrt(dim)``).

    Raises ``CoverageError`` when the grid misses part of the populated
    region or the field integrates to more than ``norm_tol`` away from one.
    Values between -1e-12 and 0 are roundoff; more negative values are
    clipped and counted in ``meta["clipped"]``.
    """
    space = rho.space
    grid = grid or AmplitudeGrid.for_space(space)
    need = space.dim - 5 * math.sqrt(space.dim)
    if grid.covered_intensity < need:
        raise CoverageError(
            f"grid covers |alpha|^2 <= {grid.covered_intensity:.3g}, need {need:.3g}"
        )
    q = husimi(rho.rho, grid.alphas())
    clipped = int(np.count_nonzero(q < -1e-12))
    q = np.where(q < 0, 0.0, q)
    total = float(q.sum() * grid.cell_area)
    if abs(total - 1.0) > norm_tol:
        raise CoverageError(f"Q normalization {total:.6f} is off by more than {norm_tol}")
    return QField(grid, q, total, {"clipped": clipped, "dim": space.dim})


def mean_phase(qf: QField) -> float:
    alphas = qf.grid.alphas()
    return float(np.angle(np.sum(qf.values * alphas / np.maximum(np.abs(alphas), 1e-300))))


def phase_number_covariance(qf: QField) -> float:
    """Covariance of ``n = |alpha|^2`` and the phase measured from its circular mean."""
    alphas = qf.grid.alphas()
    w = qf.values / qf.values.sum()
    n = np.abs(alphas) ** 2
    phi = np.angle(alphas * np.exp(-1j * mean_phase(qf)))
    return float(np.sum(w * (n - np.sum(w * n)) * (phi - np.sum(w * phi))))


def ring_variation(rho: DensityMatrix, radius: float, samples: int = 64) -> float:
    """Relative spread of Q around the circle ``|alpha| = radius``."""
    ring = husimi(rho.rho, radius * np.exp(2j * math.pi * np.arange(samples) / samples))
    return float((ring.max() - ring.min()) / ring.mean())


# Fourth-order central first-derivative stencil, offsets -2..2.
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _minus_d_dn(field: np.ndarray, h: float) -> np.ndarray:
    """``-d/dn`` along axis 0; the result is two rows shorter at each end."""
    n = field.shape[0]
    out = sum(c * field[k : n - 4 + k] for k, c in enumerate(_D1) if c)
    return -out / h


@dataclass(frozen=True)
class GainCorrespondence:
    mismatch: list[float]
    direct_norm: float
    action_integral: float

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.mismatch, self.mismatch[1:]))


def gain_correspondence_check(
    rho: DensityMatrix,
    max_k: int = 3,
    *,
    points_per_width: int = 16,
    phase_points: int = 48,
) -> GainCorrespondence:
    """Compare the Q function of the saturated-gain action with the partial
    sums ``sum_{j=1..k} (-d/dn)^j Q`` on a polar ``(n, phi)`` grid.

    Derivatives are 4th-order central differences in ``n`` at fixed phase,
    with step ``sqrt(<n>) / points_per_width``. Returns the relative L2
    mismatch for ``k = 1..max_k`` and the integral of the direct field,
    which vanishes for a trace-annihilating map.
    """
    if max_k < 1:
        raise ParameterError("max_k must be >= 1")
    if points_per_width < 8:
        raise ParameterError("need at least 8 radial points per sqrt(<n>)")
    space = rho.space
    mean = rho.expect(number(space)).real
    if mean < 10:
        raise ParameterError(f"correspondence check needs a smooth state with <n> >= 10, got {mean:.3g}")
    width = math.sqrt(mean)
    h = width / points_per_width
    margin = 2 * max_k
    n_hi = mean + 10 * width
    n_lo = max(mean - 10 * width, (margin + 1) * h)
    n = np.arange(n_lo - margin * h, n_hi + margin * h + 0.5 * h, h)
    if n[0] <= 0:
        raise ParameterError("radial grid reaches n <= 0")
    phi = 2 * math.pi * np.arange(phase_points) / phase_points
    alphas = np.sqrt(n)[:, None] * np.exp(1j * phi)[None, :]

    q = husimi(rho.rho, alphas)
    action = saturated_gain(space).apply(rho.rho)
    direct = husimi(action, alphas)
    core = slice(margin, len(n) - margin)
    target = direct[core]
    scale = float(np.linalg.norm(target))
    if scale == 0.0:
        raise ParameterError("gain action vanishes on the grid")

    errs, partial, term = [], np.zeros_like(target), q
    for k in range(1, max_k + 1):
        term = _minus_d_dn(term, h)
        trim = margin - 2 * k
        partial = partial + (term[trim : term.shape[0] - trim] if trim else term)
        errs.append(float(np.linalg.norm(partial - target) / scale))
    # d^2 alpha = dn dphi / 2
    integral = float(np.trapezoid(direct.sum(axis=1), n) * (2 * math.pi / phase_points) / 2)
    return GainCorrespondence(errs, scale, integral)
