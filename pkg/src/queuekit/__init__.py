"""Queueing-theory analytics with an independent discrete-event simulation oracle."""
from .errors import (CertificationError, ConvergenceError, DomainError, NotErgodicError, QueueKitError,
                     ReducibleChainError, SingularSystemError, UnstableSystemError, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "QueueKitError", "ValidationError", "ReducibleChainError", "UnstableSystemError", "NotErgodicError",
    "SingularSystemError", "DomainError", "ConvergenceError", "CertificationError", "__version__",
]
