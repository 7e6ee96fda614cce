"""Exception hierarchy shared by every stage of the pipeline."""


class FsmlError(Exception):
    """Base class for all errors raised by :mod:`fsml`."""


class ParameterError(FsmlError, ValueError):
    """A tuning parameter or argument is outside its admissible range."""


class GridMismatchError(FsmlError, ValueError):
    """Two curves were combined although they live on different grids."""


class InsufficientDataError(FsmlError, ValueError):
    """Too few (valid) observations for the requested estimate."""


class DegenerateFitError(FsmlError, ArithmeticError):
    """A local fit has no support, e.g. all kernel weights vanish."""


class ExtrapolationError(FsmlError, ArithmeticError):
    """A query curve lies too far from the training data to interpolate."""


class FoldConstructionError(FsmlError, ValueError):
    """Cross-validation folds cannot be built with every class represented."""


class StateError(FsmlError, RuntimeError):
    """An object is used before it is fitted or its state is unusable."""


class BundleError(FsmlError, OSError):
    """A saved model bundle is unreadable or incomplete."""


class IncompatibleBundleError(BundleError):
    """A saved model bundle was written by an unsupported format version."""


class StageError(FsmlError):
    """Wraps an error raised inside one stage of :func:`fsml.pipeline.fit`."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
