"""Exception types raised by the simulation modules."""


class ParameterError(ValueError):
    """Physically invalid or inconsistent parameters."""


class TruncationError(RuntimeError):
    """Fock truncation too small: population leaked into the top levels."""


class SolverError(RuntimeError):
    """A linear solve did not meet its residual contract."""


class ConvergenceError(RuntimeError):
    """An iteration (central frequency, quadrature) failed to converge."""


class CoverageError(ValueError):
    """A sampled trace or grid does not cover enough of its support."""


class AliasingError(RuntimeError):
    """Spectral mass piles up at the Nyquist edge."""
