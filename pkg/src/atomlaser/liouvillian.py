"""Master equations for the single-mode atom laser.

Units: kappa sets the time scale (kappa = 1 by default), hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError, TruncationError
from .fock import (
    DensityMatrix,
    FockSpace,
    SuperOperator,
    annihilation,
    collision_hamiltonian,
    dissipator,
    number,
    saturated_gain,
    spost,
    spre,
)


@dataclass(frozen=True)
class LaserParams:
    """Output coupling ``kappa``, mean atom number ``mu`` and collision strength.

    Give either ``chi`` (dimensionless, ``4 mu C / kappa``) or ``C`` (a rate);
    the other is derived. Neither means no collisions.
    """

    mu: float
    chi: float | None = None
    C: float | None = None
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.mu >= 1:
            raise ParameterError(f"mu must be >= 1, got {self.mu}")
        chi, C = self.chi, self.C
        if chi is None and C is None:
            chi, C = 0.0, 0.0
        elif chi is None:
            chi = 4.0 * self.mu * C / self.kappa
        elif C is None:
            C = chi * self.kappa / (4.0 * self.mu)
        elif not math.isclose(chi, 4.0 * self.mu * C / self.kappa, rel_tol=1e-12, abs_tol=1e-300):
            raise ParameterError("chi and C are both given and inconsistent")
        if C < 0:
            raise ParameterError(f"collision strength must be >= 0, got C={C}")
        object.__setattr__(self, "chi", float(chi))
        object.__setattr__(self, "C", float(C))

    @property
    def flux(self) -> float:
        """Mean output flux ``kappa * mu``."""
        return self.kappa * self.mu

    @property
    def revival_threshold(self) -> float:
        """``chi = 4 pi mu^2``, where collapse-revival structure sets in."""
        return 4.0 * math.pi * self.mu ** 2

    @property
    def in_revival_regime(self) -> bool:
        return self.chi >= self.revival_threshold

    def as_dict(self) -> dict:
        return {"mu": self.mu, "chi": self.chi, "C": self.C, "kappa": self.kappa}


@dataclass(frozen=True)
class FeedbackParams:
    """QND measurement strength ``M``, feedback strength ``F``, efficiency ``eta``."""

    M: float = 0.0
    F: float = 0.0
    eta: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if not self.enabled:
            return
        if not 0 < self.eta <= 1:
            raise ParameterError(f"detection efficiency must lie in (0, 1], got {self.eta}")
        if not self.M > 0:
            raise ParameterError(
                f"measurement strength must be positive when feedback is on, got M={self.M}"
            )

    @classmethod
    def off(cls) -> "FeedbackParams":
        return cls(enabled=False)

    @classmethod
    def optimal(cls, C: float, eta: float = 1.0) -> "FeedbackParams":
        """``F = sqrt(eta) M = C``."""
        if not C > 0:
            raise ParameterError("optimal feedback needs C > 0")
        return cls(M=C / math.sqrt(eta), F=C, eta=eta)

    @property
    def feedback_noise(self) -> float:
        return self.F ** 2 / (self.eta * self.M) if self.enabled else 0.0

    def as_dict(self) -> dict:
        return {"M": self.M, "F": self.F, "eta": self.eta, "enabled": self.enabled}


@dataclass(frozen=True)
class TruncationPolicy:
    pad_coefficient: float = 10.0
    tail_tolerance: float = 1e-10
    tail_levels: int = 5

    def dim_for(self, mu: float) -> int:
        return math.ceil(mu + self.pad_coefficient * math.sqrt(mu)) + 1

    def space_for(self, p: LaserParams) -> FockSpace:
        return FockSpace(self.dim_for(p.mu))

    def tail(self, populations: np.ndarray) -> float:
        return float(np.sum(np.abs(populations[-self.tail_levels:])))


DEFAULT_POLICY = TruncationPolicy()


def _commutator(h: np.ndarray) -> np.ndarray:
    return spre(h) - spost(h)


def build_L0(p: LaserParams, space: FockSpace) -> SuperOperator:
    """Saturated gain plus linear output coupling."""
    a = annihilation(space)
    return p.kappa * p.mu * saturated_gain(space) + p.kappa * dissipator(a)


def build_collision(p: LaserParams, space: FockSpace) -> SuperOperator:
    """``rho -> -i C [a†a†aa, rho]``."""
    return SuperOperator(space, -1j * p.C * _commutator(collision_hamiltonian(space)))


def build_measurement_feedback(
    p: LaserParams, f: FeedbackParams, space: FockSpace
) -> SuperOperator:
    """Back action ``M D[n]``, feedback ``+iF[a†a†aa, .]`` and its noise ``F^2/(eta M) D[n]``.

    Frequency-shift terms are omitted, as in the model being reproduced.
    """
    if not f.enabled:
        raise ParameterError("feedback is disabled")
    dn = dissipator(number(space))
    fb = SuperOperator(space, 1j * f.F * _commutator(collision_hamiltonian(space)))
    return (f.M + f.feedback_noise) * dn + fb


def build_optimal_feedback(p: LaserParams, eta: float, space: FockSpace) -> SuperOperator:
    """The reduced equation for ``F = sqrt(eta) M = C``: ``L0 + (2C/sqrt(eta)) D[n]``."""
    return build_L0(p, space) + (2.0 * p.C / math.sqrt(eta)) * dissipator(number(space))


def build_total(
    p: LaserParams, f: FeedbackParams | None, space: FockSpace
) -> SuperOperator:
    L = build_L0(p, space)
    if p.C:
        L = L + build_collision(p, space)
    if f is not None and f.enabled:
        L = L + build_measurement_feedback(p, f, space)
    return L


def poisson_populations(mu: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    return np.exp(-mu + n * math.log(mu) - gammaln(n + 1))


def steady_state(
    p: LaserParams, space: FockSpace, policy: TruncationPolicy = DEFAULT_POLICY
) -> DensityMatrix:
    """Poissonian mixture of number states, renormalized on the truncated space."""
    pops = poisson_populations(p.mu, space.dim)
    total = pops.sum()
    tail = policy.tail(pops) / total
    if tail >= policy.tail_tolerance:
        raise TruncationError(
            f"steady state puts {tail:.2e} in the top {policy.tail_levels} levels "
            f"(dim={space.dim}, mu={p.mu})"
        )
    return DensityMatrix(space, np.diag(pops / total))


@dataclass
class Model:
    """Generator, stationary state and Fock space for one parameter point."""

    params: LaserParams
    feedback: FeedbackParams | None
    space: FockSpace
    L: SuperOperator
    rho_ss: DensityMatrix
    policy: TruncationPolicy = field(default=DEFAULT_POLICY)


def build_model(
    p: LaserParams,
    f: FeedbackParams | None = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> Model:
    space = policy.space_for(p)
    return Model(p, f, space, build_total(p, f, space), steady_state(p, space, policy), policy)
