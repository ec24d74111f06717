"""Exception types shared across the analytic and simulation modules."""


class QueueKitError(Exception):
    """Base class for all errors raised by queuekit."""


class ValidationError(QueueKitError, ValueError):
    """Input object violates a structural invariant (row sums, signs, shapes)."""


class ReducibleChainError(QueueKitError):
    """Raised when an operation needs an irreducible chain."""

    def __init__(self, classes):
        self.classes = [tuple(c) for c in classes]
        super().__init__(
            "chain is reducible; communication classes: "
            + ", ".join("{" + ", ".join(map(str, c)) + "}" for c in self.classes)
        )


class UnstableSystemError(QueueKitError):
    """A stationary quantity was requested for a system with no stationary law.

    ``verdict`` is one of ``"recurrent-null"`` (load exactly 1) or
    ``"transient"`` (load above 1); ``rho`` is the offending load.
    """

    def __init__(self, model: str, rho: float, verdict: str | None = None):
        if verdict is None:
            verdict = "recurrent-null" if abs(rho - 1.0) <= 1e-12 else "transient"
        self.model = model
        self.rho = float(rho)
        self.verdict = verdict
        super().__init__(f"{model} is unstable: rho={rho:.6g} ({verdict})")

    def as_dict(self) -> dict:
        return {"error": "unstable", "model": self.model, "rho": self.rho, "verdict": self.verdict}


class NotErgodicError(QueueKitError):
    """Birth-death normalization constant diverges."""


class SingularSystemError(QueueKitError):
    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class DomainError(QueueKitError, ValueError):
    """Argument outside the domain where a formula is defined."""


class ConvergenceError(QueueKitError):
    """Iterative procedure failed to converge within its cap."""


class CertificationError(QueueKitError):
    """Truncated series cannot certify the requested precision."""
