"""Exception types raised across the package."""


class PseudoLidarError(Exception):
    """Base class for all package errors."""


class MissingFile(PseudoLidarError):
    pass


class DimensionMismatch(PseudoLidarError):
    pass


class MalformedCalibration(PseudoLidarError):
    pass


class MalformedLine(PseudoLidarError):
    pass


class IoFailure(PseudoLidarError):
    pass


class WindowTooLarge(PseudoLidarError):
    pass


class SizeMismatch(PseudoLidarError):
    pass


class WrongLayer(PseudoLidarError):
    pass


class EmptyInput(PseudoLidarError):
    pass


class NoValidPixels(PseudoLidarError):
    pass


class MissingCounterpart(PseudoLidarError):
    pass


class ConfigError(PseudoLidarError):
    pass
