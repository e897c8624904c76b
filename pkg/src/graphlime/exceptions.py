"""Exception types shared across the package."""


class GraphLimeError(Exception):
    """Base class for all errors raised by this package."""


class GraphFormatError(GraphLimeError):
    """A dataset file is malformed or the files are mutually inconsistent."""


class InsufficientNeighborsError(GraphLimeError):
    """The sampled neighborhood is too small to fit a local surrogate."""


class DegenerateProblemError(GraphLimeError):
    """No usable signal: every candidate feature (or perturbation) is constant."""


class TrainingError(GraphLimeError):
    """Reference model training diverged."""


class ModelFormatError(GraphLimeError):
    """A serialized model file cannot be read back into a model."""


class GateUnmetError(GraphLimeError):
    """An experiment's accuracy gate could not be met within the retry budget."""

    def __init__(self, message: str, achieved=None):
        super().__init__(message)
        self.achieved = achieved
