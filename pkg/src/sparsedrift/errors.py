"""Exception types shared across the package.

Rejected inputs raise plain ``ValueError`` (or a subclass below when the CLI
needs to distinguish them); numeric failures raise ``RuntimeError``
subclasses so the CLI can map them to its exit code for numeric trouble.
"""


class SimulationDiverged(RuntimeError):
    """A sampled state left the admissible range (blow-up guard)."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


class UnstableMatrix(ValueError):
    """An interaction matrix whose spectrum is not in the open right half plane."""


class NumericDegeneracy(RuntimeError):
    """A covariance factorization or solve lost positive semi-definiteness."""


class DiagonalizationFailed(RuntimeError):
    """Eigenvector matrix too ill-conditioned to trust spectral constants."""


class InstrumentationRequired(ValueError):
    """An audit needs recorded noise or fine sub-paths that were not kept."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` points at the bad field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
