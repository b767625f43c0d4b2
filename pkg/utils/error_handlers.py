"""
Error handling utilities for besovflow
"""
import logging
from functools import wraps
from typing import Callable, Any

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_HYPOTHESIS = 2
EXIT_IO = 3


class BesovFlowError(Exception):
    """Base exception for besovflow errors"""
    def __init__(self, message: str, exit_code: int = EXIT_FAILED):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


class FieldError(BesovFlowError):
    """Exception raised when a grid or field invariant is violated"""
    pass


class NonFiniteFieldError(FieldError):
    """Exception raised when field samples contain NaN or infinity"""
    pass


class ComponentMismatchError(FieldError):
    """Exception raised when component counts or grids do not line up"""
    pass


class FieldFormatError(BesovFlowError):
    """Exception raised when a PFLD file cannot be decoded"""
    def __init__(self, message: str, exit_code: int = EXIT_IO):
        super().__init__(message, exit_code)


class BadMagicError(FieldFormatError):
    """Exception raised when a PFLD file does not start with the magic bytes"""
    pass


class DimensionMismatchError(FieldFormatError):
    """Exception raised when the PFLD header describes an impossible grid"""
    pass


class TruncatedPayloadError(FieldFormatError):
    """Exception raised when a PFLD payload is shorter than its header says"""
    pass


class SynthesisError(BesovFlowError):
    """Exception raised when a synthetic field cannot be generated"""
    pass


class UnsupportedExponentError(BesovFlowError):
    """Exception raised for smoothness exponents outside the supported range"""
    pass


class UnderResolvedError(BesovFlowError):
    """Exception raised when the grid cannot resolve the requested operation"""
    pass


class InsufficientScalesError(BesovFlowError):
    """Exception raised when a scan has too few scales to fit"""
    pass


class ZeroNormError(BesovFlowError):
    """Exception raised when a scan to be regressed contains zero norms"""
    pass


class InterpolationError(BesovFlowError):
    """Exception raised by K-functional and interpolation norm evaluation"""
    pass


class TRangeTooNarrowError(InterpolationError):
    """Exception raised when the interpolation integrand has not decayed"""
    pass


class DivergenceError(BesovFlowError):
    """Exception raised when a field expected to be divergence-free is not"""
    pass


class CFLViolationError(BesovFlowError):
    """Exception raised when a time step breaks the CFL limit"""
    pass


class HypothesisError(BesovFlowError):
    """Exception raised when a configuration violates a theorem hypothesis"""
    def __init__(self, message: str, exit_code: int = EXIT_HYPOTHESIS):
        super().__init__(message, exit_code)


class OutputError(BesovFlowError):
    """Exception raised when outputs cannot be written"""
    def __init__(self, message: str, exit_code: int = EXIT_IO):
        super().__init__(message, exit_code)


def handle_errors(func: Callable) -> Callable:
    """
    Decorator for handling errors in CLI subcommands

    The wrapped function returns an exit code; errors are logged and
    converted into the exit code of the matching exception.
    """
    @wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        try:
            return func(*args, **kwargs)
        except BesovFlowError as e:
            logger.error(f"{type(e).__name__}: {e.message}")
            return e.exit_code
        except OSError as e:
            logger.error(f"IO error: {str(e)}")
            return EXIT_IO
        except Exception as e:
            logger.exception(f"Unexpected error: {str(e)}")
            return EXIT_FAILED
    return wrapper
