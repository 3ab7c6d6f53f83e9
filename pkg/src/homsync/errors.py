"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


class TruncationLeakError(ArithmeticError):
    """Probability pushed past the Fock cutoff exceeded the tolerance.

    Signals that the cutoff is too small for the requested operation; states
    are never silently renormalized to hide the loss.
    """

    def __init__(self, leak: float, tol: float, context: str = ""):
        self.leak = leak
        self.tol = tol
        msg = f"truncation leak {leak:.3e} exceeds tolerance {tol:.3e}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class NormalizationError(ArithmeticError):
    """A probability density failed its normalization check."""


class ZeroProbabilityBinError(ArithmeticError):
    """A data bin carries counts but the model assigns it zero probability.

    Usually means the reconstruction cutoff is too small for the data.
    """


class DegenerateModeError(RuntimeError):
    """Leading second-moment eigenvalue is degenerate; no preferred mode.

    Carries the eigenvalue spectrum so callers can still inspect it.
    """

    def __init__(self, message: str, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration budget without converging."""
