"""Exception hierarchy shared across the package."""


class ShapecastError(Exception):
    """Base class for all package errors."""


class GridMismatchError(ShapecastError):
    """Two curves do not share the same evaluation grid."""


class InvalidWarpingError(ShapecastError):
    """A warping function violates monotonicity or boundary constraints."""


class DegenerateSrsfError(ShapecastError):
    """A slope function cannot be mapped back to a warping (zero mass)."""


class NonInvertibleError(ShapecastError):
    """A warping is too flat to invert on the working grid."""


class SmoothingFitError(ShapecastError):
    """B-spline least squares fit is rank deficient or infeasible."""


class DegenerateOracleError(ShapecastError):
    """Misclassification oracle hit a zero-probability estimated state."""


class ModelFitError(ShapecastError):
    """A regression or clustering step cannot be carried out."""


class IngestError(ShapecastError):
    """Raw data file cannot be parsed into curves."""


class ConfigError(ShapecastError):
    """Configuration file or parameter set is invalid."""
