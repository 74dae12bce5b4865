"""Exception types raised across the toolkit."""


class InvalidArgument(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    """Non-finite loss or gradient during training."""

    def __init__(self, step, message="non-finite gradient"):
        self.step = step
        super().__init__(f"training diverged at step {step}: {message}")


class GraphCycleError(RuntimeError):
    pass


class DegenerateSamples(ValueError):
    """All observations identical; a rank test has no information."""


class IncompleteMatrix(LookupError):
    def __init__(self, message=None, missing=()):
        self.missing = list(missing)
        super().__init__(message or f"incomplete experiment matrix, missing: {self.missing}")


class NumericalError(ArithmeticError):
    pass


class ManifestError(RuntimeError):
    pass
