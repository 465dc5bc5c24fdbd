"""Exception types shared across the package."""


class WxclearError(Exception):
    """Base class for all package errors."""


class DimensionError(WxclearError, ValueError):
    """Tensor shape or spatial-size contract violated."""


class ParameterError(WxclearError, ValueError):
    """Scalar argument outside its documented range."""


class NumericError(WxclearError, ArithmeticError):
    """Non-finite values where finite math is required."""


class PartitionError(WxclearError, ValueError):
    """Token count not divisible by the requested group count."""


class SelectorError(WxclearError, ValueError):
    """Partner selection invoked with fewer than two groups."""


class ResourceError(WxclearError, RuntimeError):
    """Configured resource cap exceeded (e.g. spatial-attention token cap)."""


class ConfigError(WxclearError, ValueError):
    """Malformed or inconsistent configuration."""


class ValidationError(WxclearError, ValueError):
    """Invalid runtime input (image range, degradation parameters, ...)."""


class DataError(WxclearError, ValueError):
    """Dataset layout or manifest problems."""


class NanLossError(WxclearError, ArithmeticError):
    """Training loss became non-finite; carries the diagnostic dump path."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path
