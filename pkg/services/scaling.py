"""
Norm scans and log-log exponent regression
"""
import csv
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from utils.error_handlers import (
    BesovFlowError,
    InsufficientScalesError,
    OutputError,
    ZeroNormError,
)

logger = logging.getLogger(__name__)

# Drop the coarsest scale (constant contamination) and the finest two (grid contamination)
DEFAULT_WINDOW = (1, 2)
MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class NormScan:
    """Pairs (scale, norm value) for one estimator, scales strictly decreasing"""
    scale_values: Tuple[float, ...]
    norm_values: Tuple[float, ...]
    estimator_id: str

    def __post_init__(self):
        scales = tuple(float(v) for v in self.scale_values)
        values = tuple(float(v) for v in self.norm_values)
        if len(scales) != len(values):
            raise BesovFlowError(
                f"Scan '{self.estimator_id}' has {len(scales)} scales but {len(values)} values"
            )
        if any(b >= a for a, b in zip(scales, scales[1:])):
            raise BesovFlowError(f"Scan '{self.estimator_id}' scales must be strictly decreasing")
        if any(v < 0 or not np.isfinite(v) for v in values):
            raise BesovFlowError(f"Scan '{self.estimator_id}' contains negative or non-finite norms")
        object.__setattr__(self, 'scale_values', scales)
        object.__setattr__(self, 'norm_values', values)

    def __len__(self) -> int:
        return len(self.scale_values)

    def nonzero(self, rel_tol: float = 1e-12) -> 'NormScan':
        """Copy without entries at or below rel_tol times the largest value (FFT round-off counts as zero)"""
        floor = rel_tol * max(self.norm_values, default=0.0)
        keep = [(s, v) for s, v in zip(self.scale_values, self.norm_values) if v > floor]
        return NormScan(tuple(s for s, _ in keep), tuple(v for _, v in keep), self.estimator_id)

    def scaled_sup(self, exponent: float) -> float:
        """max over entries of value / scale^exponent"""
        if not self.scale_values:
            return 0.0
        scales = np.asarray(self.scale_values)
        return float(np.max(np.asarray(self.norm_values) / scales ** exponent))

    def write_csv(self, path: str, config_hash: str = '') -> None:
        write_scans_csv([self], path, config_hash)


def fit_exponent(scan: NormScan, window: Optional[Tuple[int, int]] = DEFAULT_WINDOW) -> Tuple[float, float]:
    """
    Least-squares slope of log2(value) against log2(scale)

    Args:
        scan: NormScan to regress
        window: (coarse entries dropped, fine entries dropped); None keeps all

    Returns:
        Tuple of (slope, standard error)
    """
    coarse, fine = window if window is not None else (0, 0)
    stop = len(scan) - fine
    scales = np.asarray(scan.scale_values[coarse:stop])
    values = np.asarray(scan.norm_values[coarse:stop])

    if len(scales) < MIN_FIT_POINTS:
        raise InsufficientScalesError(
            f"insufficient scales: {len(scales)} points in fit window of '{scan.estimator_id}', need {MIN_FIT_POINTS}"
        )
    if np.any(values <= 0):
        raise ZeroNormError(f"zero norm in scan '{scan.estimator_id}'")

    result = stats.linregress(np.log2(scales), np.log2(values))
    logger.debug(f"Fitted slope {result.slope:.4f} ± {result.stderr:.4f} on '{scan.estimator_id}'")
    return float(result.slope), float(result.stderr)


def write_scans_csv(scans: Sequence[NormScan], path: str, config_hash: str = '') -> None:
    """Write one or more scans into a single CSV with a header row"""
    rows: List[List] = []
    for scan in scans:
        for scale, value in zip(scan.scale_values, scan.norm_values):
            rows.append([repr(scale), repr(value), scan.estimator_id, config_hash])
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(['scale', 'value', 'estimator_id', 'config_hash'])
            writer.writerows(rows)
    except OSError as e:
        raise OutputError(f"Cannot write scan CSV {path}: {str(e)}") from e
