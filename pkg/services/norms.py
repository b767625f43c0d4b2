"""
Lebesgue, Sobolev and Besov norms, mollifiers and mollification scans
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from services.grid import Field, Grid, SpectralField, derivative, inverse, transform
from services.scaling import NormScan
from utils.config import get_workers
from utils.error_handlers import (
    HypothesisError,
    InsufficientScalesError,
    UnderResolvedError,
    UnsupportedExponentError,
)

logger = logging.getLogger(__name__)

ESTIMATORS = ('difference', 'littlewood_paley')
KERNELS = ('gaussian_truncated', 'polynomial_bump')

# Kernel widths in units of delta; both symbols drop to about 1/2 at |k| = 1/delta.
GAUSSIAN_SIGMA = np.sqrt(np.log(2.0) / 2.0) / np.pi
BUMP_RADIUS = 0.65
RATIO_BOUND = 10.0
EMBEDDING_CONSTANT = 2.0
EMBEDDING_SLACK = 1.1


@dataclass(frozen=True)
class BesovParams:
    """Smoothness theta, integrability r, summability s and estimator"""
    theta: float
    r: float = 2.0
    s: float = np.inf
    estimator: str = 'littlewood_paley'

    def __post_init__(self):
        if self.theta <= 0:
            raise UnsupportedExponentError(f"theta must be positive, got {self.theta}")
        if not 1 <= self.r <= np.inf:
            raise UnsupportedExponentError(f"r must lie in [1, inf], got {self.r}")
        if self.s != np.inf:
            raise UnsupportedExponentError("only s = inf is supported")
        if self.estimator not in ESTIMATORS:
            raise UnsupportedExponentError(f"Unknown estimator '{self.estimator}'")

    @property
    def difference_order(self) -> int:
        return 1 if self.theta < 1 else 2


@dataclass(frozen=True)
class MollifierSpec:
    kernel: str = 'gaussian_truncated'
    delta: float = 0.1

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise UnderResolvedError(f"Unknown kernel '{self.kernel}'. Supported: {', '.join(KERNELS)}")
        if not self.delta > 0:
            raise UnderResolvedError(f"delta must be positive, got {self.delta}")


# ---------------------------------------------------------------------------
# Lebesgue and Sobolev norms
# ---------------------------------------------------------------------------

def lp_norm(f: Field, r: float) -> float:
    """L^r norm of the pointwise magnitude under the unit-mass measure"""
    magnitude = f.magnitude()
    if r == np.inf:
        return float(np.max(magnitude))
    return float(np.mean(magnitude ** r) ** (1.0 / r))


def _multi_indices(dim: int, order: int):
    return [alpha for alpha in itertools.product(range(order + 1), repeat=dim) if sum(alpha) == order]


def _apply_multi_index(F: SpectralField, alpha: Tuple[int, ...]) -> SpectralField:
    for axis, power in enumerate(alpha):
        if power:
            F = derivative(F, axis, power)
    return F


def sobolev_seminorm(f: Field, order: int, r: float) -> float:
    """Sum over |alpha| = order of ||D^alpha f||_{L^r}"""
    if order == 0:
        return lp_norm(f, r)
    F = transform(f)
    return float(sum(
        lp_norm(inverse(_apply_multi_index(F, alpha)), r)
        for alpha in _multi_indices(f.grid.dim, order)
    ))


def sobolev_norm(f: Field, order: int, r: float) -> float:
    """W^{order, r} norm: sum of the seminorms of orders 0..order"""
    return float(sum(sobolev_seminorm(f, m, r) for m in range(order + 1)))


def gradient_norm(f: Field, r: float) -> float:
    """L^r norm of the full gradient tensor magnitude"""
    F = transform(f)
    blocks = [inverse(derivative(F, axis)).data for axis in range(f.grid.dim)]
    return lp_norm(Field(f.grid, np.concatenate(blocks)), r)


# ---------------------------------------------------------------------------
# Besov seminorms
# ---------------------------------------------------------------------------

def _shift_directions(dim: int) -> List[Tuple[int, ...]]:
    axes = [tuple(1 if i == a else 0 for i in range(dim)) for a in range(dim)]
    diagonals = [(1,) + signs for signs in itertools.product((1, -1), repeat=dim - 1)]
    return axes + diagonals


def _difference(data: np.ndarray, shift: Tuple[int, ...], order: int) -> np.ndarray:
    axes = tuple(range(1, data.ndim))
    once = np.roll(data, tuple(-s for s in shift), axis=axes)
    if order == 1:
        return once - data
    twice = np.roll(data, tuple(-2 * s for s in shift), axis=axes)
    return twice - 2.0 * once + data


def difference_scan(f: Field, params: BesovParams) -> NormScan:
    """
    Increment norms over dyadic lattice shifts

    Shifts of s = n/4, n/8, ..., 1 cells are taken along every axis and main
    diagonal. The scan value at step s is the largest increment norm over the
    directions, each rescaled to the axis length s*dx so that
    value / (s*dx)^theta is the difference quotient.
    """
    grid = f.grid
    dx = grid.min_spacing
    order = params.difference_order
    steps = []
    step = min(grid.n) // 4
    while step >= 1:
        steps.append(step)
        step //= 2

    def scan_step(cells: int) -> float:
        best = 0.0
        for direction in _shift_directions(grid.dim):
            shift = tuple(cells * d for d in direction)
            length = np.sqrt(sum((s * h) ** 2 for s, h in zip(shift, grid.spacing)))
            increment = lp_norm(Field(grid, _difference(f.data, shift, order)), params.r)
            best = max(best, increment * (cells * dx / length) ** params.theta)
        return best

    with ThreadPoolExecutor(max_workers=get_workers()) as pool:
        values = list(pool.map(scan_step, steps))
    return NormScan(tuple(s * dx for s in steps), tuple(values), f'difference-order{order}')


def besov_seminorm_diff(f: Field, params: BesovParams) -> float:
    """
    Difference-quotient Besov seminorm with s = inf

    First differences for theta < 1, second differences for theta in [1, 2).
    """
    if params.theta >= 2:
        raise UnsupportedExponentError(f"unsupported exponent theta = {params.theta} >= 2")
    return difference_scan(f, params).scaled_sup(params.theta)


def _block_count(grid: Grid) -> int:
    top = float(np.max(grid.k_magnitude()))
    return int(np.floor(np.log2(top))) + 1


def block_masks(grid: Grid) -> List[np.ndarray]:
    """Sharp annuli 2^(J-1) <= |k| < 2^J for J = 1, 2, ... covering the grid"""
    return list(_block_masks(grid))


@lru_cache(maxsize=16)
def _block_masks(grid: Grid) -> Tuple[np.ndarray, ...]:
    magnitude = grid.k_magnitude()
    masks = []
    for J in range(1, _block_count(grid) + 1):
        mask = (magnitude >= 2.0 ** (J - 1)) & (magnitude < 2.0 ** J)
        mask.setflags(write=False)
        masks.append(mask)
    return tuple(masks)


def lp_block(F: SpectralField, J: int) -> Field:
    """Littlewood-Paley block J; block 0 is the mean"""
    if J == 0:
        mask = F.grid.k_magnitude() == 0
    else:
        mask = _block_masks(F.grid)[J - 1]
    return inverse(SpectralField(F.grid, F.coeffs * mask))


def lp_block_scan(f: Field, r: float) -> NormScan:
    """||Delta_J f||_{L^r} for J = 1, 2, ..., with scale 2^-J"""
    F = transform(f)
    count = len(_block_masks(f.grid))
    values = [lp_norm(lp_block(F, J), r) for J in range(1, count + 1)]
    scales = [2.0 ** (-J) for J in range(1, count + 1)]
    return NormScan(tuple(scales), tuple(values), 'littlewood-paley')


def besov_seminorm_lp(f: Field, params: BesovParams) -> float:
    """sup over J >= 1 of 2^(J theta) ||Delta_J f||_{L^r}; the mean block is excluded"""
    return lp_block_scan(f, params.r).scaled_sup(params.theta)


def besov_seminorm(f: Field, params: BesovParams) -> float:
    if params.estimator == 'difference':
        return besov_seminorm_diff(f, params)
    return besov_seminorm_lp(f, params)


def besov_norm(f: Field, params: BesovParams) -> float:
    """Full norm ||f||_{L^r} + [f]_{B^theta_{r,inf}}"""
    return lp_norm(f, params.r) + besov_seminorm(f, params)


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------

def _kernel_profile(kernel: str, rho: np.ndarray) -> np.ndarray:
    inside = rho < 1.0
    if kernel == 'gaussian_truncated':
        values = np.exp(-rho ** 2 / (2.0 * GAUSSIAN_SIGMA ** 2))
    else:
        values = np.clip(1.0 - (rho / BUMP_RADIUS) ** 2, 0.0, None) ** 4
    return np.where(inside, values, 0.0)


@lru_cache(maxsize=64)
def kernel_symbol(grid: Grid, spec: MollifierSpec) -> np.ndarray:
    """
    Fourier multiplier of the sampled, unit-mass kernel

    The kernel is sampled at periodic minimum-image distances, so it is even
    and its symbol is real with value 1 at k = 0.
    """
    if spec.delta < grid.min_spacing:
        raise UnderResolvedError(
            f"under-resolved mollifier: delta = {spec.delta} is below one grid cell ({grid.min_spacing})"
        )
    if spec.delta > min(grid.period) / 2:
        raise UnderResolvedError(f"delta = {spec.delta} exceeds half the period")

    squared = np.zeros(grid.shape)
    for axis, (size, period) in enumerate(zip(grid.n, grid.period)):
        index = np.arange(size)
        offset = np.minimum(index, size - index) * period / size
        shape = [1] * grid.dim
        shape[axis] = size
        squared = squared + offset.reshape(shape) ** 2
    kernel = _kernel_profile(spec.kernel, np.sqrt(squared) / spec.delta)
    kernel /= kernel.sum()
    symbol = transform(Field(grid, kernel)).coeffs[0].real * grid.size
    symbol.setflags(write=False)
    return symbol


def mollify(f: Field, spec: MollifierSpec) -> Field:
    """Periodic convolution with the kernel rescaled to width delta"""
    symbol = kernel_symbol(f.grid, spec)
    return inverse(SpectralField(f.grid, transform(f).coeffs * symbol))


def tensor_square(f: Field) -> Field:
    """Pointwise f (x) f as an m*m component field"""
    m = f.components
    return Field(f.grid, np.stack([f.data[i] * f.data[j] for i in range(m) for j in range(m)]))


def commutator_tensor(f: Field, spec: MollifierSpec) -> Field:
    """f_delta (x) f_delta - (f (x) f)_delta"""
    return tensor_square(mollify(f, spec)) - mollify(tensor_square(f), spec)


def mollification_scan(f: Field, deltas: Sequence[float], r: float = 2.0, order: int = 0,
                       kernel: str = 'gaussian_truncated') -> Dict[str, NormScan]:
    """
    Scans of the three mollification estimates against delta

    Args:
        f: Field to mollify
        deltas: Strictly decreasing mollification widths (at least 4)
        r: Integrability exponent
        order: Sobolev order n of the derivative and commutator estimates
        kernel: Kernel name

    Returns:
        Dictionary with 'error' (slope theta), 'derivative' (slope
        theta - order - 1) and 'commutator' (slope 2 theta - order) scans
    """
    if len(deltas) < 4:
        raise InsufficientScalesError(f"insufficient scales: {len(deltas)} deltas given, need 4")

    def measure(delta: float) -> Tuple[float, float, float]:
        spec = MollifierSpec(kernel, delta)
        smooth = mollify(f, spec)
        error = lp_norm(f - smooth, r)
        top = sobolev_seminorm(smooth, order + 1, r)
        comm = sobolev_seminorm(commutator_tensor(f, spec), order, r)
        return error, top, comm

    logger.info(f"Mollification scan over {len(deltas)} widths, r={r}, order={order}, kernel={kernel}")
    with ThreadPoolExecutor(max_workers=get_workers()) as pool:
        rows = list(pool.map(measure, deltas))

    scales = tuple(float(d) for d in deltas)
    return {
        'error': NormScan(scales, tuple(row[0] for row in rows), 'molli-error'),
        'derivative': NormScan(scales, tuple(row[1] for row in rows), f'molli-derivative-w{order + 1}'),
        'commutator': NormScan(scales, tuple(row[2] for row in rows), f'molli-commutator-w{order}'),
    }


# ---------------------------------------------------------------------------
# Interpolation and embedding inequalities
# ---------------------------------------------------------------------------

def _ratio(left: float, right: float) -> float:
    if left == 0:
        return 0.0
    if right == 0:
        return np.inf
    return left / right


def check_interpolation_inequalities(f: Field, gamma: float, theta: float, r: float = 2.0,
                                     estimator: str = 'difference') -> Dict:
    """
    Evaluate both Besov interpolation inequalities on one field

    First:  [f]_{B^gamma} <= C ||f||_{L^r}^(1 - gamma/theta) ||f||_{B^theta}^(gamma/theta)
    Second: [f]_{B^theta} <= C ||f||_{B^gamma}^((1-theta)/(1-gamma)) ||f||_{W^{1,r}}^((theta-gamma)/(1-gamma))

    Args:
        f: Field
        gamma: Lower exponent
        theta: Upper exponent, gamma <= theta < 1
        r: Integrability exponent
        estimator: Seminorm estimator

    Returns:
        Dictionary with both sides, the ratios without C and the pass flag
    """
    if gamma > theta:
        raise HypothesisError(f"requires γ ≤ θ, got γ = {gamma} > θ = {theta}")
    if not 0 < gamma <= theta < 1:
        raise HypothesisError(f"requires 0 < γ ≤ θ < 1, got γ = {gamma}, θ = {theta}")

    lebesgue = lp_norm(f, r)
    semi_gamma = besov_seminorm(f, BesovParams(gamma, r, np.inf, estimator))
    semi_theta = besov_seminorm(f, BesovParams(theta, r, np.inf, estimator))
    sobolev = lebesgue + gradient_norm(f, r)

    right_first = lebesgue ** (1 - gamma / theta) * (lebesgue + semi_theta) ** (gamma / theta)
    lam = (theta - gamma) / (1 - gamma)
    right_second = (lebesgue + semi_gamma) ** (1 - lam) * sobolev ** lam

    first = _ratio(semi_gamma, right_first)
    second = _ratio(semi_theta, right_second)
    return {
        'gamma': gamma,
        'theta': theta,
        'r': r,
        'first': {'left': semi_gamma, 'right': right_first, 'ratio': first},
        'second': {'left': semi_theta, 'right': right_second, 'ratio': second},
        'max_ratio': max(first, second),
        'passed': max(first, second) <= RATIO_BOUND,
    }


def embedding_check(f: Field, gamma: float, theta: float, r: float = 2.0,
                    estimator: str = 'difference') -> Dict:
    """[f]_{B^gamma} <= 2 (||f||_{L^r} + [f]_{B^theta}) with 10% slack, gamma <= theta"""
    if gamma > theta:
        raise HypothesisError(f"requires γ ≤ θ, got γ = {gamma} > θ = {theta}")
    left = besov_seminorm(f, BesovParams(gamma, r, np.inf, estimator))
    right = EMBEDDING_CONSTANT * (lp_norm(f, r) + besov_seminorm(f, BesovParams(theta, r, np.inf, estimator)))
    ratio = _ratio(left, right)
    return {'left': left, 'right': right, 'ratio': ratio, 'passed': ratio <= EMBEDDING_SLACK}
