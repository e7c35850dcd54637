"""Exception types raised across the package."""


class CalibrationError(Exception):
    """Base class for all dqcalib errors."""


class NonUnitQuaternion(CalibrationError, ValueError):
    pass


class NotARotation(CalibrationError, ValueError):
    pass


class NonUnitDualQuaternion(CalibrationError, ValueError):
    pass


class NotSymmetric(CalibrationError, ValueError):
    pass


class SingularKKT(CalibrationError, ArithmeticError):
    """The KKT matrix of an equality-constrained QP is singular."""


class TooFewMeasurements(CalibrationError, ValueError):
    pass


class MalformedInput(CalibrationError, ValueError):
    """An input file does not follow the pose-pair schema."""


class UnknownFixture(CalibrationError, KeyError):
    pass
