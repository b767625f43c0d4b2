"""
Hypothesis validation utilities for besovflow experiments
"""
import math
import re
from typing import Tuple, Optional

from utils.error_handlers import HypothesisError


class HypothesisValidator:
    """Validates experiment parameters against the theorem hypotheses"""

    SUPPORTED_DIMS = (2, 3)
    TIME_CLAIMS = ('i', 'ii', 'iii', 'iv')
    PRESSURE_EXPONENTS = (2.0, 3.0, 4.0)

    GRID_PATTERN = r'^\d+(x\d+)*$'

    @staticmethod
    def validate_theta(theta: float) -> Tuple[bool, Optional[str]]:
        """
        Validate the spatial smoothness exponent

        Args:
            theta: Besov exponent of the velocity

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(theta, (int, float)) or not math.isfinite(theta):
            return False, "theta must be a finite number"
        if not 0 < theta < 1:
            return False, "theta must lie in (0, 1)"
        return True, None

    @staticmethod
    def validate_integrability(r: float) -> Tuple[bool, Optional[str]]:
        """
        Validate the integrability exponent r

        Args:
            r: Lebesgue exponent

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(r, (int, float)):
            return False, "r must be a number"
        if not 1 < r < math.inf:
            return False, "requires r in (1, inf)"
        return True, None

    @staticmethod
    def validate_pressure_exponent(r: float) -> Tuple[bool, Optional[str]]:
        """Pressure estimates are checked for r in PRESSURE_EXPONENTS only"""
        if not isinstance(r, (int, float)) or float(r) not in HypothesisValidator.PRESSURE_EXPONENTS:
            allowed = ', '.join(f'{v:g}' for v in HypothesisValidator.PRESSURE_EXPONENTS)
            return False, f"requires r in {{{allowed}}}, got {r}"
        return True, None

    @staticmethod
    def validate_time_claim(claim: str, theta: float) -> Tuple[bool, Optional[str]]:
        """
        Validate a time-regularity claim against its hypothesis

        Args:
            claim: One of 'i', 'ii', 'iii', 'iv'
            theta: Spatial exponent of the velocity

        Returns:
            Tuple of (is_valid, error_message)
        """
        if claim not in HypothesisValidator.TIME_CLAIMS:
            return False, f"Unknown time claim '{claim}'. Supported: {', '.join(HypothesisValidator.TIME_CLAIMS)}"
        if claim in ('ii', 'iv') and theta <= 0.5:
            return False, f"claim ({claim}) requires θ > 1/2, got θ = {theta}"
        return True, None

    @staticmethod
    def validate_beta(beta: float, theta: float) -> Tuple[bool, Optional[str]]:
        """
        Validate the spatial gain beta of claim (ii)

        Args:
            beta: Extra spatial smoothness above one derivative
            theta: Spatial exponent of the velocity

        Returns:
            Tuple of (is_valid, error_message)
        """
        if beta < 0:
            return False, "beta must be nonnegative"
        if beta >= 2 * theta - 1:
            return False, f"requires 0 ≤ β < 2θ − 1 = {2 * theta - 1:.3f}"
        return True, None

    @staticmethod
    def validate_pair(gamma: float, theta: float) -> Tuple[bool, Optional[str]]:
        """
        Validate an exponent pair for the interpolation inequalities

        Args:
            gamma: Lower exponent
            theta: Upper exponent

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not 0 < gamma <= theta < 1:
            return False, f"requires 0 < γ ≤ θ < 1, got γ = {gamma}, θ = {theta}"
        return True, None

    @staticmethod
    def validate_grid_spec(spec: str) -> Tuple[bool, Optional[str]]:
        """
        Validate a grid spec string such as '256x256'

        Args:
            spec: Grid sizes joined by 'x'

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not spec or not isinstance(spec, str):
            return False, "grid spec is required"
        if not re.match(HypothesisValidator.GRID_PATTERN, spec.strip().lower()):
            return False, "grid spec must look like 256x256 or 64x64x64"
        dims = spec.strip().lower().count('x') + 1
        if dims not in HypothesisValidator.SUPPORTED_DIMS:
            return False, f"grid must have {' or '.join(map(str, HypothesisValidator.SUPPORTED_DIMS))} axes, got {dims}"
        return True, None


def require(result: Tuple[bool, Optional[str]]) -> None:
    """Raise HypothesisError for a failed validation tuple"""
    is_valid, error = result
    if not is_valid:
        raise HypothesisError(error)
