"""Time evolution under a Liouvillian.

Operators such as ``a rho_ss`` only explore a small invariant subspace of
Liouville space (for number-conserving-in-difference generators, one
off-diagonal of the density matrix). ``invariant_support`` finds that
subspace from the sparsity graph, and propagation then works on the
restricted block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .errors import ConvergenceError, ParameterError
from .fock import FockSpace, SuperOperator, unvec, vec

DENSE_LIMIT = 3000


def invariant_support(L: sp.spmatrix, x0: np.ndarray) -> np.ndarray:
    """Indices reachable from the support of ``x0`` under repeated action of ``L``."""
    pattern = sp.csr_matrix(L, copy=True)
    pattern.data = np.ones_like(pattern.data, dtype=float)
    reached = np.abs(x0) > 0
    while True:
        grown = reached | ((pattern @ reached.astype(float)) > 0)
        if grown.sum() == reached.sum():
            return np.flatnonzero(reached)
        reached = grown


def restrict(L: sp.spmatrix, idx: np.ndarray):
    block = sp.csr_matrix(L)[idx][:, idx]
    return block.toarray() if len(idx) <= DENSE_LIMIT else block.tocsc()


def _step_key(h: float) -> float:
    return float(f"{h:.12e}")


def propagate(
    A, x0: np.ndarray, times: np.ndarray, *, method: str = "expm",
    rtol: float = 1e-8, atol: float = 1e-12,
) -> np.ndarray:
    """Return ``exp(A t_k) x0`` for each sample ``t_k`` (``times[0]`` must be 0).

    ``method="expm"`` multiplies by exact one-step propagators (one per
    distinct step length). ``method="ode"`` integrates ``dx/dt = A x`` with an
    adaptive 8th-order Runge-Kutta scheme at the given tolerances.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ParameterError("times must start at 0 and increase strictly")
    x0 = np.asarray(x0, dtype=complex)
    out = np.empty((len(times), len(x0)), dtype=complex)
    out[0] = x0
    if method == "expm":
        dense = not sp.issparse(A)
        cache: dict[float, np.ndarray] = {}
        x = x0
        for k, h in enumerate(np.diff(times), start=1):
            if dense:
                key = _step_key(h)
                P = cache.get(key)
                if P is None:
                    P = cache[key] = expm(A * h)
                x = P @ x
            else:
                x = expm_multiply(A * h, x)
            out[k] = x
        return out
    if method == "ode":
        rhs = (lambda t, y: A @ y)
        sol = solve_ivp(rhs, (0.0, times[-1]), x0, method="DOP853", t_eval=times,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise ConvergenceError(f"ODE integration failed: {sol.message}")
        return sol.y.T
    raise ParameterError(f"unknown propagation method {method!r}")


@dataclass(frozen=True)
class EvolutionReport:
    trace_drift: float
    hermiticity_drift: float
    min_eigenvalue: float
    tail_population: float

    def failures(self, *, trace_tol=1e-9, herm_tol=1e-10, eig_tol=1e-8, tail_tol=1e-10) -> list[str]:
        bad = []
        if self.trace_drift >= trace_tol:
            bad.append(f"trace drift {self.trace_drift:.2e}")
        if self.hermiticity_drift >= herm_tol:
            bad.append(f"Hermiticity drift {self.hermiticity_drift:.2e}")
        if self.min_eigenvalue < -eig_tol:
            bad.append(f"minimum eigenvalue {self.min_eigenvalue:.2e}")
        if self.tail_population >= tail_tol:
            bad.append(f"tail population {self.tail_population:.2e}")
        return bad

    @property
    def valid(self) -> bool:
        return not self.failures()


def evolve_density(
    L: SuperOperator, rho0: np.ndarray, times: np.ndarray, *, tail_levels: int = 5
) -> tuple[list[np.ndarray], EvolutionReport]:
    """Evolve a full density matrix and audit every sampled state."""
    space: FockSpace = L.space
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise ParameterError("times must start at 0")
    x0 = vec(np.asarray(rho0, dtype=complex))
    A = L.matrix.tocsc()
    if _uniform(times):
        xs = expm_multiply(A, x0, start=0.0, stop=times[-1], num=len(times), endpoint=True)
    else:
        xs = propagate(A, x0, times)
    states, tr, herm, lo, tail = [], 0.0, 0.0, np.inf, 0.0
    tr0 = np.trace(unvec(x0, space.dim)).real
    for x in xs:
        rho = unvec(x, space.dim)
        states.append(rho)
        tr = max(tr, abs(np.trace(rho) - tr0))
        herm = max(herm, np.linalg.norm(rho - rho.conj().T) / np.linalg.norm(rho))
        lo = min(lo, np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        tail = max(tail, float(np.sum(np.real(np.diag(rho))[-tail_levels:])))
    return states, EvolutionReport(tr, herm, float(lo), tail)


def _uniform(times: np.ndarray) -> bool:
    d = np.diff(times)
    return bool(np.allclose(d, d[0], rtol=1e-12, atol=0))
