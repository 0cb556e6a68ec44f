"""Truncated Fock-space operator algebra and Lindblad superoperators.

Density matrices are vectorized by column stacking throughout the package:
``vec(rho) = rho.reshape(-1, order="F")``. With that convention left
multiplication by ``X`` is ``kron(I, X)`` and right multiplication is
``kron(X.T, I)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as spnorm
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .errors import ConvergenceError, ParameterError


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ParameterError(f"Fock dimension must be an integer >= 2, got {self.dim}")

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.dim)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def annihilation(space: FockSpace) -> np.ndarray:
    """Matrix of ``a``: ``a[n-1, n] = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), 1).astype(complex)


def creation(space: FockSpace) -> np.ndarray:
    return annihilation(space).conj().T


def number(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=float)).astype(complex)


def collision_hamiltonian(space: FockSpace) -> np.ndarray:
    """``a†a†aa``, diagonal with entries ``n(n-1)``."""
    n = np.arange(space.dim, dtype=float)
    return np.diag(n * (n - 1)).astype(complex)


def _space_of(r: np.ndarray) -> FockSpace:
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ParameterError(f"operator must be square, got shape {r.shape}")
    return FockSpace(r.shape[0])


def spre(x: np.ndarray) -> sp.csr_matrix:
    """Superoperator for ``rho -> x @ rho``."""
    d = x.shape[0]
    return sp.kron(sp.identity(d, format="csr"), sp.csr_matrix(x), format="csr")


def spost(x: np.ndarray) -> sp.csr_matrix:
    """Superoperator for ``rho -> rho @ x``."""
    d = x.shape[0]
    return sp.kron(sp.csr_matrix(x.T), sp.identity(d, format="csr"), format="csr")


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Sparse linear map on column-stacked density matrices."""

    space: FockSpace
    matrix: sp.csr_matrix

    def __post_init__(self):
        d2 = self.space.dim ** 2
        if self.matrix.shape != (d2, d2):
            raise ParameterError(
                f"superoperator shape {self.matrix.shape} does not match dim {self.space.dim}"
            )
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix, dtype=complex))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.space.dim)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm(self) -> float:
        return float(spnorm(self.matrix))

    def trace_residual(self) -> float:
        """``||Tr o L|| / ||L||``; zero for a trace-preserving generator."""
        row = vec(np.eye(self.space.dim))
        nrm = self.norm()
        if nrm == 0.0:
            return 0.0
        return float(np.linalg.norm(self.matrix.T @ row) / nrm)

    def _check(self, other: "SuperOperator"):
        if other.space != self.space:
            raise ParameterError("superoperators act on different Fock spaces")

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        self._check(other)
        return SuperOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        self._check(other)
        return SuperOperator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "SuperOperator":
        return SuperOperator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SuperOperator":
        return SuperOperator(self.space, -self.matrix)

    @classmethod
    def zero(cls, space: FockSpace) -> "SuperOperator":
        d2 = space.dim ** 2
        return cls(space, sp.csr_matrix((d2, d2), dtype=complex))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: FockSpace
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.space.dim, self.space.dim):
            raise ParameterError(f"rho shape {rho.shape} does not match dim {self.space.dim}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def validate(self, *, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8) -> "DensityMatrix":
        rho = self.rho
        scale = max(np.linalg.norm(rho), 1e-300)
        if np.linalg.norm(rho - rho.conj().T) > herm_tol * scale:
            raise ParameterError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > trace_tol:
            raise ParameterError(f"density matrix trace is {np.trace(rho)}")
        lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if lo < -eig_tol:
            raise ParameterError(f"density matrix has eigenvalue {lo}")
        return self

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho))

    @classmethod
    def number_state(cls, space: FockSpace, n: int) -> "DensityMatrix":
        rho = np.zeros((space.dim, space.dim), dtype=complex)
        rho[n, n] = 1.0
        return cls(space, rho)

    @classmethod
    def coherent(cls, space: FockSpace, alpha: complex) -> "DensityMatrix":
        psi = coherent_amplitudes(space, alpha)
        psi /= np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()))


def coherent_amplitudes(space: FockSpace, alpha: complex) -> np.ndarray:
    """Number-basis amplitudes of ``|alpha>``, evaluated in log space."""
    from scipy.special import gammaln

    n = space.levels
    if alpha == 0:
        out = np.zeros(space.dim, dtype=complex)
        out[0] = 1.0
        return out
    r, th = abs(alpha), np.angle(alpha)
    logmag = -0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * th)


def dissipator(r: np.ndarray) -> SuperOperator:
    """``D[r] rho = r rho r† - 1/2 {r†r, rho}``."""
    space = _space_of(r)
    r = np.asarray(r, dtype=complex)
    rdr = r.conj().T @ r
    sandwich = sp.kron(sp.csr_matrix(r.conj()), sp.csr_matrix(r), format="csr")
    return SuperOperator(space, sandwich - 0.5 * (spre(rdr) + spost(rdr)))


def anticommutator_super(r: np.ndarray) -> SuperOperator:
    """``A[r] rho = 1/2 {r†r, rho}`` built from the (truncated) matrices."""
    space = _space_of(r)
    r = np.asarray(r, dtype=complex)
    rdr = r.conj().T @ r
    return SuperOperator(space, 0.5 * (spre(rdr) + spost(rdr)))


def gain_anticommutator_eigenvalues(space: FockSpace) -> np.ndarray:
    """Dyad eigenvalues ``(n+m+2)/2`` of ``A[a†]``, column-stacked.

    These are the untruncated values; the truncated matrix ``a a†`` has a
    zero in its last entry, so ``anticommutator_super(creation(space))``
    only agrees with them below the top level.
    """
    n = space.levels
    lam = 0.5 * (n[:, None] + n[None, :] + 2.0)
    return vec(lam).real


def gain_anticommutator(space: FockSpace) -> SuperOperator:
    return SuperOperator(space, sp.diags(gain_anticommutator_eigenvalues(space)).tocsr())


def inverse_gain_anticommutator(space: FockSpace) -> SuperOperator:
    """Exact inverse of ``A[a†]``: element-wise scaling by ``2/(n+m+2)``."""
    return SuperOperator(space, sp.diags(1.0 / gain_anticommutator_eigenvalues(space)).tocsr())


def saturated_gain(space: FockSpace) -> SuperOperator:
    """Saturated pumping ``D[a†] A[a†]^{-1}`` on the truncated space.

    With ``sigma = A[a†]^{-1} rho`` (dyads scaled by ``2/(n+m+2)``) the map is
    ``a† sigma a - 1/2 {P, rho}`` where ``P`` projects out the top level.
    Away from the top level this is exactly ``D[a†] sigma``. The top level has
    nothing to pump into, so it carries no outgoing gain; this keeps the map
    trace-annihilating and equal to the integral over ``D[a† exp(-q a a†/2)]``
    taken with the same truncated operators.
    """
    a = annihilation(space)
    ad = a.conj().T
    keep = (np.real(np.diag(a @ ad)) > 0).astype(float)
    proj = np.diag(keep).astype(complex)
    sandwich = sp.kron(sp.csr_matrix(a.T), sp.csr_matrix(ad), format="csr")
    scale = inverse_gain_anticommutator(space).matrix
    m = sandwich @ scale - 0.5 * (spre(proj) + spost(proj))
    return SuperOperator(space, m)


def _identity_integrand(space: FockSpace):
    a = annihilation(space)
    ad = a.conj().T
    aad = a @ ad

    def f(q):
        r = ad @ expm(-0.5 * q * aad)
        return dissipator(r).dense().ravel()

    return f


def gain_integral_identity_check(
    space: FockSpace, quad_points: int = 4000, *, tol: float = 1e-10
) -> float:
    """Relative Frobenius error between ``saturated_gain`` and the integral
    ``int_0^inf dq D[a† exp(-q a a†/2)]`` evaluated by adaptive quadrature.

    ``quad_points`` bounds the number of integrand evaluations (21 per
    Gauss-Kronrod panel). Raises ``ConvergenceError`` when the quadrature's
    own error estimate exceeds ``tol`` relative to the result.
    """
    if space.dim > 40:
        raise ParameterError("dense quadrature oracle limited to dim <= 40")
    f = _identity_integrand(space)
    q_max = 1.0
    while np.linalg.norm(f(q_max)) >= 1e-14:
        q_max += 1.0
        if q_max > 200:
            raise ConvergenceError("integrand does not decay")
    panels = max(1, int(quad_points) // 21)
    rhs, err = quad_vec(f, 0.0, q_max, epsabs=1e-14, epsrel=1e-12, norm="2", limit=panels)
    lhs = saturated_gain(space).dense().ravel()
    if err > tol * np.linalg.norm(rhs):
        raise ConvergenceError(
            f"quadrature under-resolved: error estimate {err:.3e} with {panels} panels"
        )
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
