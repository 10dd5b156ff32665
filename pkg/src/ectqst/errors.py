"""Exception types raised by the tomography pipeline."""


class TomographyError(ValueError):
    """Base class for invalid inputs and failed planning steps."""


class InvalidDimensionError(TomographyError):
    pass


class EmptyMeasurementError(TomographyError):
    pass


class SparsityError(TomographyError):
    """Raised when a sparsity measure is undefined (all-zero input)."""


class CalibrationError(TomographyError):
    pass


class PlanningError(TomographyError):
    pass


class SizeGuardError(TomographyError):
    """Raised when a requested Hilbert space is too large to enumerate."""


class DensityMatrixError(TomographyError):
    pass
