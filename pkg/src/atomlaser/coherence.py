"""First-order coherence, coherence time and linewidth.

``g1(t) = Tr[a† exp(L t) (a rho_ss)] / <n>``. The source ``a rho_ss`` of a
phase-invariant stationary state lives on the first off-diagonal of the
density matrix, and every generator built in ``liouvillian`` maps that
diagonal into itself. All propagation and resolvent solves therefore run on
that ``dim - 1`` dimensional block, which also removes the stationary zero
eigenvalue that makes the full ``L - i omega`` singular at ``omega = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import analytic
from .errors import (
    ConvergenceError,
    CoverageError,
    ParameterError,
    SolverError,
    TruncationError,
)
from .fock import DensityMatrix, SuperOperator, annihilation, collision_hamiltonian, number, vec
from .liouvillian import (
    DEFAULT_POLICY,
    FeedbackParams,
    LaserParams,
    Model,
    TruncationPolicy,
    build_model,
)
from .propagate import invariant_support, propagate, restrict

RESIDUAL_TOL = 1e-10
IMAG_TOL = 1e-6
NEAR_SINGULAR = 1e13


class Method(str, Enum):
    RESOLVENT = "resolvent"
    QUADRATURE = "quadrature"
    ANALYTIC = "analytic"


@dataclass(frozen=True, eq=False)
class CoherenceTrace:
    """Sampled complex ``g1(t)`` (times in units of ``1/kappa``)."""

    times: np.ndarray
    values: np.ndarray
    params: LaserParams | None = None
    feedback: FeedbackParams | None = None
    omega_bar: float | None = None
    revival: bool = False
    tail_weight: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.values, dtype=complex)
        if t.shape != g.shape or t.ndim != 1 or len(t) < 2:
            raise ParameterError("times and values must be matching 1-D arrays")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ParameterError("times must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", g)

    def violations(self, tol: float = 1e-9) -> list[str]:
        bad = []
        if abs(self.values[0] - 1.0) > tol:
            bad.append(f"g1(0) = {self.values[0]:.12g}")
        peak = float(np.abs(self.values).max())
        if peak > 1.0 + tol:
            bad.append(f"max |g1| = {peak:.12g}")
        return bad


@dataclass(frozen=True)
class CoherenceResult:
    tau_coh: float
    omega_bar: float
    method: Method
    iterations: int = 0
    revival: bool = False
    imag_residual: float = 0.0

    @property
    def linewidth(self) -> float:
        return 1.0 / self.tau_coh

    def as_dict(self) -> dict:
        return {
            "tau_coh": self.tau_coh,
            "linewidth": self.linewidth,
            "omega_bar": self.omega_bar,
            "method": self.method.value,
            "iterations": self.iterations,
            "revival": self.revival,
            "imag_residual": self.imag_residual,
        }


@dataclass(frozen=True, eq=False)
class CoherenceSector:
    """``L`` restricted to the orbit of ``a rho_ss``, with source and readout."""

    block: object
    source: np.ndarray
    readout: np.ndarray
    mean_number: float
    index: np.ndarray
    tail_mask: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.index)

    def expectation(self, x: np.ndarray) -> np.ndarray:
        """``Tr[a† X] / <n>`` for sector vectors (or stacks of them)."""
        return (np.asarray(x) @ self.readout) / self.mean_number

    def initial_frequency(self) -> float:
        return float(np.imag(self.expectation(self.block @ self.source)))

    def solve(self, omega: float) -> complex:
        """``tau(omega) = -Tr[a† (L - i omega)^{-1} a rho] / (2 <n>)``."""
        b = self.source
        if sp.issparse(self.block):
            shifted = (self.block - 1j * omega * sp.identity(self.size, format="csc")).tocsc()
            try:
                x = splu(shifted).solve(b)
            except RuntimeError as exc:
                raise SolverError(f"singular shifted system at omega={omega}: {exc}") from exc
        else:
            shifted = self.block - 1j * omega * np.eye(self.size)
            cond = np.linalg.cond(shifted)
            if not np.isfinite(cond) or cond > NEAR_SINGULAR:
                raise SolverError(f"near-singular shifted system at omega={omega} (cond {cond:.2e})")
            x = np.linalg.solve(shifted, b)
        res = np.linalg.norm(shifted @ x - b) / np.linalg.norm(b)
        if not res < RESIDUAL_TOL:
            raise SolverError(f"resolvent residual {res:.2e} exceeds {RESIDUAL_TOL:.0e}")
        return complex(-self.expectation(x) / 2.0)


def _mean_number(rho_ss: DensityMatrix) -> float:
    mean = rho_ss.expect(number(rho_ss.space)).real
    if not mean > 0:
        raise ParameterError("state has zero mean intensity")
    return mean


def _require_trace_annihilating(L: SuperOperator, tol: float = 1e-10):
    res = L.trace_residual()
    if res > tol:
        raise ParameterError(f"generator is not trace-annihilating (residual {res:.2e})")


def coherence_sector(
    L: SuperOperator, rho_ss: DensityMatrix, *, tail_levels: int = 5
) -> CoherenceSector:
    space = L.space
    a = annihilation(space)
    src_full = vec(a @ rho_ss.rho)
    idx = invariant_support(L.matrix, src_full)
    readout = vec(a.conj())[idx]
    rows, cols = np.divmod(idx, space.dim)[::-1]
    tail = (rows >= space.dim - tail_levels) | (cols >= space.dim - tail_levels)
    return CoherenceSector(
        restrict(L.matrix, idx), src_full[idx], readout, _mean_number(rho_ss), idx, tail
    )


def g1_trace(
    L: SuperOperator,
    rho_ss: DensityMatrix,
    times,
    *,
    method: str = "expm",
    params: LaserParams | None = None,
    feedback: FeedbackParams | None = None,
    omega_bar: float | None = None,
    revival: bool = False,
    tail_tolerance: float = 1e-10,
) -> CoherenceTrace:
    """Propagate ``a rho_ss`` and read out the normalized field correlation.

    ``method="expm"`` uses exact step propagators; ``"ode"`` integrates with
    an adaptive Runge-Kutta scheme (rtol 1e-8, atol 1e-12). Raises
    ``TruncationError`` when the weight carried by the top Fock levels
    reaches ``tail_tolerance`` relative to the source.
    """
    _require_trace_annihilating(L)
    sector = coherence_sector(L, rho_ss)
    xs = propagate(sector.block, sector.source, np.asarray(times, dtype=float), method=method)
    tail = float(np.abs(xs[:, sector.tail_mask]).sum(axis=1).max() / np.abs(sector.source).sum())
    if tail >= tail_tolerance:
        raise TruncationError(f"coherence orbit reaches the truncation edge (weight {tail:.2e})")
    trace = CoherenceTrace(
        times, sector.expectation(xs), params, feedback, omega_bar, revival, tail
    )
    bad = trace.violations()
    if bad:
        raise ConvergenceError("invalid coherence trace: " + "; ".join(bad))
    return trace


def _iterate_frequency(
    sector: CoherenceSector, max_iters: int, revival: bool
) -> tuple[float, int, complex]:
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    omega = sector.initial_frequency()
    tau = sector.solve(omega)
    if revival:
        return omega, 0, tau
    for k in range(max_iters + 1):
        if abs(tau.imag) < IMAG_TOL * tau.real:
            return omega, k, tau
        if k == max_iters:
            break
        omega -= (1.0 / (2.0 * tau)).imag
        tau = sector.solve(omega)
    raise ConvergenceError(
        f"central frequency not converged after {max_iters} corrections "
        f"(Im tau / Re tau = {tau.imag / tau.real:.2e})"
    )


def central_frequency(
    L: SuperOperator, rho_ss: DensityMatrix, max_iters: int = 50, *, revival: bool = False
) -> tuple[float, int]:
    """Central frequency ``omega_bar`` and the number of corrections applied.

    Starts from ``Im Tr[a† L a rho] / <n>`` and applies
    ``omega -> omega - Im(1/(2 tau(omega)))`` until ``|Im tau| < 1e-6 Re tau``.
    With ``revival=True`` the first guess is returned unchanged.
    """
    omega, iters, _ = _iterate_frequency(coherence_sector(L, rho_ss), max_iters, revival)
    return omega, iters


def coherence_time_resolvent(
    L: SuperOperator, rho_ss: DensityMatrix, omega: float, *, restrict_sector: bool = True
) -> complex:
    if restrict_sector:
        return coherence_sector(L, rho_ss).solve(omega)
    a = annihilation(L.space)
    b = vec(a @ rho_ss.rho)
    shifted = (L.matrix - 1j * omega * sp.identity(L.matrix.shape[0], format="csr")).tocsc()
    try:
        x = splu(shifted).solve(b)
    except RuntimeError as exc:
        raise SolverError(f"singular shifted system at omega={omega}: {exc}") from exc
    res = np.linalg.norm(shifted @ x - b) / np.linalg.norm(b)
    if not res < RESIDUAL_TOL:
        raise SolverError(f"resolvent residual {res:.2e} exceeds {RESIDUAL_TOL:.0e}")
    return complex(-(x @ vec(a.conj())) / (2.0 * _mean_number(rho_ss)))


def _tail_correction(t: np.ndarray, mag: np.ndarray) -> float:
    """Integral of an exponential envelope fitted to the last 10% of the trace."""
    start = np.searchsorted(t, t[-1] - 0.1 * (t[-1] - t[0]))
    t, mag = t[start:], mag[start:]
    half = len(t) // 2
    if half < 1:
        return 0.0
    i1, i2 = int(np.argmax(mag[:half])), half + int(np.argmax(mag[half:]))
    m1, m2 = mag[i1], mag[i2]
    if m2 <= 0 or m1 <= m2 or t[i2] <= t[i1]:
        return 0.0
    rate = math.log(m1 / m2) / (t[i2] - t[i1])
    return float(m2 * math.exp(-rate * (t[-1] - t[i2])) / rate)


def check_coverage(trace: CoherenceTrace, *, decay_floor: float = 1e-6):
    """Raise ``CoverageError`` unless the trace has decayed (or, for revival
    traces, spans at least five dissipation times ``1/(kappa mu)``)."""
    t, mag = trace.times, np.abs(trace.values)
    if trace.revival:
        p = trace.params
        if p is None:
            raise CoverageError("revival traces need parameters to judge coverage")
        if t[-1] < 5.0 / (p.kappa * p.mu):
            raise CoverageError(
                f"revival trace ends at {t[-1]:.3g}, before 5 dissipation times"
            )
    else:
        last = mag[t >= t[0] + 0.95 * (t[-1] - t[0])]
        if last.max() >= decay_floor:
            raise CoverageError(
                f"trace has not decayed: max |g1| = {last.max():.2e} over the last 5%"
            )


def coherence_time_quadrature(trace: CoherenceTrace, *, decay_floor: float = 1e-6) -> float:
    """``tau = 1/2 int_0^inf |g1| dt`` by the trapezoid rule plus an envelope tail."""
    check_coverage(trace, decay_floor=decay_floor)
    t, mag = trace.times, np.abs(trace.values)
    return 0.5 * (float(np.trapezoid(mag, t)) + _tail_correction(t, mag))


def g2_zero(rho: DensityMatrix) -> float:
    mean = rho.expect(number(rho.space)).real
    if not mean > 0:
        raise ParameterError("g2(0) is undefined at zero mean intensity")
    return rho.expect(collision_hamiltonian(rho.space)).real / mean ** 2


@dataclass(frozen=True)
class CoherenceClass:
    degenerate: bool
    ratio: float


def classify_coherence(linewidth: float, p: LaserParams) -> CoherenceClass:
    """Bose degenerate when the linewidth is below the output flux ``kappa mu``."""
    if not linewidth > 0:
        raise ParameterError("linewidth must be positive")
    ratio = linewidth / p.flux
    return CoherenceClass(ratio < 1.0, ratio)


def residual_collision(p: LaserParams, f: FeedbackParams | None) -> float:
    return abs(p.C - f.F) if f is not None and f.enabled else p.C


def uses_revival_treatment(p: LaserParams, f: FeedbackParams | None = None) -> bool:
    """Revival regime for the residual nonlinearity ``|C - F|``."""
    c = residual_collision(p, f)
    return 4.0 * p.mu * c / p.kappa >= p.revival_threshold


def require_integer_mu(p: LaserParams, f: FeedbackParams | None = None):
    if uses_revival_treatment(p, f) and not float(p.mu).is_integer():
        raise ParameterError(
            f"the revival regime (chi >= 4 pi mu^2) needs integer mu so that the "
            f"phase factor exp(i omega0 m pi / C) is 1 at every revival; got mu={p.mu}"
        )


def default_time_grid(
    p: LaserParams,
    f: FeedbackParams | None = None,
    *,
    samples: int = 2048,
    span: float = 60.0,
    refinement: float = 2.0,
    per_revival: int = 64,
    segments: int = 8,
) -> tuple[np.ndarray, bool]:
    """Sampling times for ``g1`` and whether revivals must be resolved.

    Non-revival runs use ``samples`` points out to ``span`` analytic
    coherence times, clustered near ``t = 0``. When revivals recur within 15
    dissipation times the grid is uniform with ``per_revival`` points per
    revival period and extends at least 14 dissipation times.
    """
    ell = analytic.linewidth_estimate(p, f)
    t_end = span / ell
    c = residual_collision(p, f)
    t_q = 1.0 / (p.kappa * p.mu)
    if c > 0 and math.pi / c < 15.0 * t_q:
        t_r = math.pi / c
        t_end = max(t_end, 14.0 * t_q)
        n = max(samples, int(math.ceil(per_revival * t_end / t_r)) + 1)
        return np.linspace(0.0, t_end, n), True
    # Piecewise-uniform segments with geometrically growing steps: dense near
    # t = 0 while needing only ``segments`` distinct step propagators.
    counts = [len(c) for c in np.array_split(np.arange(samples - 1), segments)]
    steps = np.repeat(np.exp(refinement * np.arange(segments) / (segments - 1)), counts)
    t = np.concatenate([[0.0], np.cumsum(steps)])
    return t_end * t / t[-1], False


def compute_g1(
    model: Model, times=None, *, method: str = "expm", max_extend: int = 4
) -> CoherenceTrace:
    """``g1`` for a model on the default grid, extended until it has decayed."""
    p, f = model.params, model.feedback
    require_integer_mu(p, f)
    grid, revival = default_time_grid(p, f) if times is None else (np.asarray(times), False)
    omega0 = coherence_sector(model.L, model.rho_ss).initial_frequency()
    for _ in range(max_extend + 1):
        trace = g1_trace(model.L, model.rho_ss, grid, method=method, params=p,
                         feedback=f, omega_bar=omega0, revival=revival)
        if times is not None or revival:
            return trace
        tail = np.abs(trace.values[grid >= 0.95 * grid[-1]]).max()
        if tail < 1e-6:
            return trace
        grid = 2.0 * grid
    raise CoverageError("g1 did not decay within the extended time window")


def linewidth(
    p: LaserParams,
    f: FeedbackParams | None = None,
    method: Method | str = Method.RESOLVENT,
    policy: TruncationPolicy = DEFAULT_POLICY,
    *,
    max_iters: int = 50,
) -> CoherenceResult:
    """Coherence time and linewidth of one parameter point."""
    method = Method(method)
    revival = uses_revival_treatment(p, f)
    if method is Method.ANALYTIC:
        if f is not None and f.enabled:
            ell = analytic.linewidth_feedback(p, f.eta)
        else:
            ell = analytic.linewidth_regimes(p).linewidth
        return CoherenceResult(1.0 / ell, 2.0 * p.mu * residual_collision(p, f), method,
                               revival=revival)
    require_integer_mu(p, f)
    model = build_model(p, f, policy)
    sector = coherence_sector(model.L, model.rho_ss)
    if method is Method.RESOLVENT:
        omega, iters, tau = _iterate_frequency(sector, max_iters, revival)
        return CoherenceResult(tau.real, omega, method, iters, revival, abs(tau.imag) / tau.real)
    trace = compute_g1(model)
    return CoherenceResult(coherence_time_quadrature(trace), trace.omega_bar, method,
                           revival=revival)
