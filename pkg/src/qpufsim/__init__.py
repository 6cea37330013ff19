"""Simulation toolkit for quantum PUFs based on random von Neumann measurements."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ContractError,
    NumericalError,
    PreconditionError,
    QpufError,
    ScaleError,
)
from .linalg import (  # noqa: E402
    Basis,
    EigenSystem,
    PureState,
    RngStream,
    UnitaryMatrix,
    eigensystem_unitary,
    haar_unitary,
    haar_unitary_gram_schmidt,
    random_pure_state,
    trace_distance_pure,
)
from .ideal import IdealQpuf, QueryDatabase, QueryRecord, VerificationResult  # noqa: E402
from .pe import PeQpuf, PeToken, SinsKernel, sins  # noqa: E402

__all__ = [
    "Basis", "ConfigError", "ContractError", "EigenSystem", "IdealQpuf", "NumericalError",
    "PeQpuf", "PeToken", "PreconditionError", "PureState", "QpufError", "QueryDatabase",
    "QueryRecord", "RngStream", "ScaleError", "SinsKernel", "UnitaryMatrix", "VerificationResult",
    "eigensystem_unitary", "haar_unitary", "haar_unitary_gram_schmidt", "random_pure_state",
    "sins", "trace_distance_pure",
]
