"""Quantum phase dynamics of a single-mode atom laser.

Build the master equation on a truncated Fock space, compute first-order
coherence, linewidth and output spectra, and compare against closed forms.
"""
__version__ = "0.1.0"

from .coherence import (  # noqa: E402
    CoherenceResult,
    CoherenceTrace,
    Method,
    central_frequency,
    classify_coherence,
    coherence_time_quadrature,
    coherence_time_resolvent,
    compute_g1,
    g1_trace,
    g2_zero,
    linewidth,
)
from .fock import DensityMatrix, FockSpace, SuperOperator  # noqa: E402
from .liouvillian import (  # noqa: E402
    FeedbackParams,
    LaserParams,
    Model,
    TruncationPolicy,
    build_model,
    build_total,
)
from .spectrum import Spectrum, power_spectrum  # noqa: E402

__all__ = [
    "CoherenceResult", "CoherenceTrace", "DensityMatrix", "FeedbackParams", "FockSpace",
    "LaserParams", "Method", "Model", "Spectrum", "SuperOperator", "TruncationPolicy",
    "build_model", "build_total", "central_frequency", "classify_coherence",
    "coherence_time_quadrature", "coherence_time_resolvent", "compute_g1", "g1_trace",
    "g2_zero", "linewidth", "power_spectrum",
]
