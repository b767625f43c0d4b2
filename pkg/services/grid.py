"""
Periodic grids, real and spectral field representations and spectral
calculus on the flat torus
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft

from utils.config import get_workers
from utils.error_handlers import (
    ComponentMismatchError,
    FieldError,
    NonFiniteFieldError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the d-torus"""
    n: Tuple[int, ...]
    period: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        sizes = tuple(int(v) for v in self.n)
        if len(sizes) not in (2, 3):
            raise FieldError(f"Grid dimension must be 2 or 3, got {len(sizes)}")
        for size in sizes:
            if size < 8 or size & (size - 1):
                raise FieldError(f"Grid sizes must be powers of two >= 8, got {sizes}")

        if self.period is None:
            periods = (1.0,) * len(sizes)
        elif np.isscalar(self.period):
            periods = (float(self.period),) * len(sizes)
        else:
            periods = tuple(float(v) for v in self.period)
        if len(periods) != len(sizes) or any(not np.isfinite(p) or p <= 0 for p in periods):
            raise FieldError(f"Grid periods must be positive, one per axis, got {periods}")

        object.__setattr__(self, 'n', sizes)
        object.__setattr__(self, 'period', periods)

    @classmethod
    def parse(cls, spec: str, period: float = 1.0) -> 'Grid':
        """Build a grid from a spec string such as '256x256'"""
        try:
            sizes = tuple(int(part) for part in spec.lower().split('x'))
        except (AttributeError, ValueError) as e:
            raise FieldError(f"Invalid grid spec '{spec}'") from e
        return cls(sizes, (period,) * len(sizes))

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(p / s for p, s in zip(self.period, self.n))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    def coordinates(self) -> List[np.ndarray]:
        """Sample coordinates per axis, broadcast to the full grid"""
        axes = [np.arange(s) * h for s, h in zip(self.n, self.spacing)]
        return np.meshgrid(*axes, indexing='ij')

    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, shaped for broadcasting"""
        return _integer_wavenumbers(self)

    def physical_wavenumbers(self, zero_nyquist: bool = True) -> Tuple[np.ndarray, ...]:
        """Angular wavenumbers 2*pi*k/period per axis

        With zero_nyquist the Nyquist index is set to zero, which keeps odd
        derivative multipliers Hermitian.
        """
        result = []
        for k, size, period in zip(self.wavenumbers(), self.n, self.period):
            kp = TWO_PI * k / period
            if zero_nyquist:
                kp = np.where(np.abs(k) == size // 2, 0.0, kp)
            result.append(kp)
        return tuple(result)

    def k_magnitude(self) -> np.ndarray:
        """Euclidean norm |k| of the integer wavevector on the full grid"""
        return _k_magnitude(self)

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean mask keeping |k_i| < fraction * n_i / 2 on every axis"""
        mask = np.ones(self.shape, dtype=bool)
        for k, size in zip(self.wavenumbers(), self.n):
            mask = mask & (np.abs(k) < fraction * size / 2)
        return mask

    def max_level(self) -> int:
        """Largest dyadic level j with 2^j strictly below the Nyquist index"""
        return int(np.log2(min(self.n))) - 2

    def describe(self) -> str:
        return 'x'.join(str(s) for s in self.n)


@lru_cache(maxsize=32)
def _integer_wavenumbers(grid: Grid) -> Tuple[np.ndarray, ...]:
    result = []
    for axis, size in enumerate(grid.n):
        k = np.rint(np.fft.fftfreq(size, d=1.0 / size))
        shape = [1] * grid.dim
        shape[axis] = size
        k = k.reshape(shape)
        k.setflags(write=False)
        result.append(k)
    return tuple(result)


@lru_cache(maxsize=32)
def _k_magnitude(grid: Grid) -> np.ndarray:
    total = np.zeros(grid.shape)
    for k in grid.wavenumbers():
        total = total + k ** 2
    magnitude = np.sqrt(total)
    magnitude.setflags(write=False)
    return magnitude


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a scalar or vector field, stored component-major"""
    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.shape == self.grid.shape:
            data = data[np.newaxis]
        if data.ndim != self.grid.dim + 1 or data.shape[1:] != self.grid.shape or data.shape[0] < 1:
            raise ComponentMismatchError(
                f"Field data of shape {data.shape} does not fit grid {self.grid.describe()}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteFieldError("Field data contains non-finite values")
        object.__setattr__(self, 'data', _frozen(data))

    @classmethod
    def zeros(cls, grid: Grid, components: int = 1) -> 'Field':
        return cls(grid, np.zeros((components,) + grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., Union[np.ndarray, Sequence[np.ndarray]]]) -> 'Field':
        """Sample func(*coordinates) on the grid; a sequence result is a vector field"""
        values = func(*grid.coordinates())
        if isinstance(values, (list, tuple)):
            values = np.stack([np.broadcast_to(v, grid.shape) for v in values])
        else:
            values = np.broadcast_to(values, grid.shape)
        return cls(grid, values)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    def component(self, index: int) -> 'Field':
        return Field(self.grid, self.data[index])

    def mean(self) -> np.ndarray:
        return self.data.reshape(self.components, -1).mean(axis=1)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude over components"""
        return np.sqrt(np.sum(self.data ** 2, axis=0))

    def _check_compatible(self, other: 'Field') -> None:
        if other.grid != self.grid or other.components != self.components:
            raise ComponentMismatchError("Fields live on different grids or have different components")

    def __add__(self, other: 'Field') -> 'Field':
        self._check_compatible(other)
        return Field(self.grid, self.data + other.data)

    def __sub__(self, other: 'Field') -> 'Field':
        self._check_compatible(other)
        return Field(self.grid, self.data - other.data)

    def __mul__(self, scalar: float) -> 'Field':
        return Field(self.grid, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> 'Field':
        return Field(self.grid, -self.data)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a field, normalized so k = 0 holds the mean"""
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape == self.grid.shape:
            coeffs = coeffs[np.newaxis]
        if coeffs.shape[1:] != self.grid.shape:
            raise ComponentMismatchError(
                f"Coefficients of shape {coeffs.shape} do not fit grid {self.grid.describe()}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise NonFiniteFieldError("Spectral coefficients contain non-finite values")
        object.__setattr__(self, 'coeffs', _frozen(coeffs))

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def component(self, index: int) -> 'SpectralField':
        return SpectralField(self.grid, self.coeffs[index])

    def energy(self) -> float:
        """Sum of squared coefficient moduli (equals the mean of |f|^2)"""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def hermitian_defect(self) -> float:
        """Max deviation from conj-symmetry F(-k) = conj(F(k))"""
        axes = tuple(range(1, self.grid.dim + 1))
        mirrored = np.roll(np.flip(self.coeffs, axis=axes), 1, axis=axes)
        return float(np.max(np.abs(self.coeffs - np.conj(mirrored)), initial=0.0))

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> 'SpectralField':
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def _axes(grid: Grid) -> Tuple[int, ...]:
    return tuple(range(1, grid.dim + 1))


def transform(f: Field) -> SpectralField:
    """Forward FFT of every component, normalized by the number of samples"""
    coeffs = scipy.fft.fftn(f.data, axes=_axes(f.grid), workers=get_workers())
    return SpectralField(f.grid, coeffs / f.grid.size)


def inverse(F: SpectralField) -> Field:
    """Inverse FFT back to real samples; the imaginary round-off is dropped"""
    values = scipy.fft.ifftn(F.coeffs * F.grid.size, axes=_axes(F.grid), workers=get_workers())
    return Field(F.grid, values.real)


def derivative(F: SpectralField, axis: int, order: int = 1) -> SpectralField:
    """
    Spectral partial derivative

    Args:
        F: Field in spectral form
        axis: Differentiation axis
        order: Derivative order (>= 1)

    Returns:
        SpectralField multiplied by (2*pi*i*k_axis/period)^order
    """
    if order < 1:
        raise FieldError(f"Derivative order must be >= 1, got {order}")
    if not 0 <= axis < F.grid.dim:
        raise FieldError(f"Axis {axis} out of range for a {F.grid.dim}-d grid")
    multiplier = (1j * F.grid.physical_wavenumbers()[axis]) ** order
    return SpectralField(F.grid, F.coeffs * multiplier)


def gradient(F: SpectralField) -> SpectralField:
    """Gradient of a scalar field (d components)"""
    if F.components != 1:
        raise ComponentMismatchError(f"Gradient needs a scalar field, got {F.components} components")
    return SpectralField(F.grid, np.concatenate(
        [derivative(F, axis).coeffs for axis in range(F.grid.dim)]
    ))


def divergence(F: SpectralField) -> SpectralField:
    """Divergence of a vector field"""
    _require_vector(F)
    total = np.zeros(F.grid.shape, dtype=np.complex128)
    for axis, k in enumerate(F.grid.physical_wavenumbers()):
        total = total + 1j * k * F.coeffs[axis]
    return SpectralField(F.grid, total)


def laplacian(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, -_k_squared(F.grid) * F.coeffs)


def solve_poisson(F: SpectralField) -> SpectralField:
    """Zero-mean solution p of -Laplace(p) = F"""
    k2 = _k_squared(F.grid)
    safe = np.where(k2 > 0, k2, 1.0)
    return SpectralField(F.grid, np.where(k2 > 0, F.coeffs / safe, 0.0))


def bessel_potential(F: SpectralField, order: float) -> SpectralField:
    """Apply (1 - Laplace)^(order/2)"""
    symbol = (1.0 + _k_squared(F.grid, zero_nyquist=False)) ** (order / 2.0)
    return SpectralField(F.grid, F.coeffs * symbol)


def leray_project(F: SpectralField) -> SpectralField:
    """Orthogonal projection onto divergence-free fields"""
    _require_vector(F)
    ks = F.grid.physical_wavenumbers()
    k2 = _k_squared(F.grid)
    safe = np.where(k2 > 0, k2, 1.0)
    k_dot = sum(k * F.coeffs[axis] for axis, k in enumerate(ks))
    factor = np.where(k2 > 0, k_dot / safe, 0.0)
    projected = np.stack([F.coeffs[axis] - k * factor for axis, k in enumerate(ks)])
    return SpectralField(F.grid, projected)


def dealias(F: SpectralField, fraction: float = 2.0 / 3.0) -> SpectralField:
    """Zero every coefficient outside the dealiasing mask"""
    return SpectralField(F.grid, F.coeffs * F.grid.dealias_mask(fraction))


def energy_outside(F: SpectralField, fraction: float) -> float:
    """Relative spectral energy outside the dealiasing mask"""
    total = F.energy()
    if total == 0:
        return 0.0
    outside = np.sum(np.abs(F.coeffs[:, ~F.grid.dealias_mask(fraction)]) ** 2)
    return float(outside / total)


def spectral_inner(F: SpectralField, G: SpectralField) -> complex:
    """Inner product sum_k F(k) conj(G(k)) over all components"""
    return complex(np.sum(F.coeffs * np.conj(G.coeffs)))


def max_divergence(u: Field) -> float:
    """Max-norm of the spectral divergence of a vector field"""
    return float(np.max(np.abs(inverse(divergence(transform(u))).data)))


def _require_vector(F: SpectralField) -> None:
    if F.components != F.grid.dim:
        raise ComponentMismatchError(
            f"Vector operation needs {F.grid.dim} components, got {F.components}"
        )


def _k_squared(grid: Grid, zero_nyquist: bool = True) -> np.ndarray:
    return sum(k ** 2 for k in grid.physical_wavenumbers(zero_nyquist))
