"""Factorization of spaces nearly invariant under division by an inner function.

Finite-truncation numerics for Hilbert spaces contractively contained in
Hardy and Dirichlet-type spaces: hypothesis checks, the contraction
iteration, and verified factorization reports.
"""
from .errors import ContainedInPhiH, HypothesisError, NotDivisible, SpaceError
from .factorization import (Factorization, FactorizationReport, NearInvarianceCertificate,
                            branges_factorize, check_nearly_invariant, check_norm_hypothesis,
                            contraction_iteration, defect_factorize, hardy_vector_factorize)
from .series import (InnerFunction, TruncatedSeries, blaschke_taylor, compose_with_inner,
                     evaluate, series_multiply)
from .spaces import (AmbientSpace, ContractiveSpace, DefectSpace, SumSpace, eval_adjoint_basis,
                     gram_of_injection, inner_product_M, kernel_vector)

__version__ = "0.1.0"

__all__ = [
    "TruncatedSeries", "InnerFunction", "series_multiply", "blaschke_taylor",
    "compose_with_inner", "evaluate", "AmbientSpace", "ContractiveSpace", "DefectSpace",
    "SumSpace", "inner_product_M", "gram_of_injection", "kernel_vector", "eval_adjoint_basis",
    "check_nearly_invariant", "check_norm_hypothesis", "contraction_iteration",
    "hardy_vector_factorize", "branges_factorize", "defect_factorize", "Factorization",
    "FactorizationReport", "NearInvarianceCertificate", "SpaceError", "NotDivisible",
    "HypothesisError", "ContainedInPhiH",
]
