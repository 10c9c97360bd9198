"""Finite-size verification laboratory for the replica treatment of random k-SAT."""

from .errors import (
    CapacityError,
    ConvergenceError,
    DimacsParseError,
    InvalidGroupTableError,
    InvalidInstanceError,
    ReplicaLabError,
    ThresholdRangeError,
    VerificationError,
)
from .ksat_core import (
    EnsembleParams,
    KSatInstance,
    clause_matrix,
    count_violated_direct,
    energy,
    export_dimacs,
    generate_instance,
    import_dimacs,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "DimacsParseError",
    "InvalidGroupTableError",
    "InvalidInstanceError",
    "ReplicaLabError",
    "ThresholdRangeError",
    "VerificationError",
    "EnsembleParams",
    "KSatInstance",
    "clause_matrix",
    "count_violated_direct",
    "energy",
    "export_dimacs",
    "generate_instance",
    "import_dimacs",
]
