"""Gradient descent with compressed iterates (GDCI).

Iterates ``x+ = C(x) - gamma * grad f(C(x))`` for an unbiased random
compressor ``C`` and checks runs against the closed-form neighbourhood bound.
"""

from .compression import (
    CompressedSample,
    OperatorSpec,
    RngStream,
    certify_unbiased,
    certify_variance,
    compress,
    identity,
    intermittent,
    random_sparsification,
    sparsification_for_omega,
)
from .data import Dataset, parse_libsvm, synthetic_logistic
from .objectives import LogisticObjective, OptimumCertificate, QuadraticObjective, estimate_smoothness, solve_optimum
from .optimizer import GdciConfig, Trajectory, gdci_step, run
from .theory import TheoryConstants, bound_at, check_admissible, corollary_regime

__version__ = "0.1.0"

__all__ = [
    "CompressedSample", "OperatorSpec", "RngStream", "certify_unbiased", "certify_variance", "compress",
    "identity", "intermittent", "random_sparsification", "sparsification_for_omega",
    "Dataset", "parse_libsvm", "synthetic_logistic",
    "LogisticObjective", "OptimumCertificate", "QuadraticObjective", "estimate_smoothness", "solve_optimum",
    "GdciConfig", "Trajectory", "gdci_step", "run",
    "TheoryConstants", "bound_at", "check_admissible", "corollary_regime",
]
