"""
Synthetic periodic fields with prescribed Besov regularity
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from services.grid import Field, Grid, SpectralField, inverse, leray_project, transform
from utils.config import get_workers
from utils.error_handlers import SynthesisError

logger = logging.getLogger(__name__)

KINDS = ('lacunary', 'power-spectrum')
SERIES_KINDS = ('product', 'transported')

# Level j targets |k| = SHELL_RADIUS 2^j, turned a quarter turn from level j - 1.
SHELL_RADIUS = np.sqrt(2.0)
QUARTER_TURN = np.pi / 2.0
DIRECTION_JITTER = np.pi / 24.0
MAGNITUDE_SCALE = 0.05
ANGLE_SCALE = np.pi / 24.0


def level_generator(seed: int, level: int, component: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, level, component)"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, level, component])))


def max_resolved_level(grid: Grid, fraction: Optional[float] = None) -> int:
    """
    Largest dyadic level usable on a grid

    Level j terms carry wavevectors with |k| < 2^(j+1). Without a fraction the
    bound is the Nyquist index; with one, every component must also stay
    inside the dealiasing mask of that fraction.
    """
    level = grid.max_level()
    if fraction is not None:
        cutoff = fraction * min(grid.n) / 2.0
        level = min(level, int(np.floor(np.log2(cutoff))) - 1)
    return level


@dataclass(frozen=True)
class RoughFieldSpec:
    """Recipe for one synthetic rough field"""
    theta: float
    kind: str = 'lacunary'
    jmax: int = 5
    seed: int = 0
    divergence_free: bool = True
    amplitude: float = 1.0
    components: Optional[int] = None

    def validate(self, grid: Grid) -> None:
        if not 0 < self.theta < 1:
            raise SynthesisError(f"theta must lie in (0, 1), got {self.theta}")
        if self.kind not in KINDS:
            raise SynthesisError(f"Unknown field kind '{self.kind}'. Supported: {', '.join(KINDS)}")
        if self.jmax < 0:
            raise SynthesisError(f"jmax must be nonnegative, got {self.jmax}")
        if 2 ** self.jmax >= min(grid.n) / 2:
            raise SynthesisError(
                f"2^jmax = {2 ** self.jmax} is at or above the Nyquist index of grid {grid.describe()}"
            )
        if self.divergence_free and self.field_components(grid) != grid.dim:
            raise SynthesisError("Divergence-free fields need one component per axis")

    def field_components(self, grid: Grid) -> int:
        if self.components is not None:
            return self.components
        return grid.dim if self.divergence_free else 1


@dataclass(frozen=True)
class LevelPlane:
    """
    Plane holding the level directions of one seed

    Level j points along angle + j * QUARTER_TURN (plus a small jitter) inside
    the plane spanned by the rows of basis, so consecutive levels are nearly
    orthogonal and levels two apart nearly parallel.
    """
    basis: np.ndarray
    angle: float

    @classmethod
    def draw(cls, seed: int, dim: int) -> 'LevelPlane':
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, dim])))
        if dim == 2:
            basis = np.eye(2)
        else:
            basis = np.linalg.qr(rng.standard_normal((dim, 2)))[0].T
        return cls(basis, float(rng.uniform(0.0, np.pi)))

    def direction(self, angle: float) -> np.ndarray:
        return np.cos(angle) * self.basis[0] + np.sin(angle) * self.basis[1]

    def target(self, level: int, rng: np.random.Generator) -> np.ndarray:
        jitter = rng.uniform(-DIRECTION_JITTER, DIRECTION_JITTER)
        return self.direction(self.angle + level * QUARTER_TURN + jitter)

    def drift(self) -> np.ndarray:
        """Unit vector halfway between the level-0 and level-1 directions"""
        return self.direction(self.angle + QUARTER_TURN / 2.0)

    def perpendicular(self, k: np.ndarray) -> np.ndarray:
        """In-plane vector orthogonal to k"""
        if k.size == 2:
            return np.array([-k[1], k[0]], dtype=float)
        return np.cross(np.cross(self.basis[0], self.basis[1]), k)


def _canonical(k: np.ndarray) -> Tuple[int, ...]:
    nonzero = k[np.nonzero(k)[0][0]]
    return tuple(int(v) for v in (k if nonzero > 0 else -k))


def lattice_wavevector(grid: Grid, level: int, direction: np.ndarray,
                       taken: Optional[Set[Tuple[int, ...]]] = None) -> np.ndarray:
    """
    Integer wavevector closest to SHELL_RADIUS 2^level along direction

    Candidates lie in the shell 2^level <= |k| < 2^(level+1), have components
    not all even (so the mode attains its extrema on the grid up to one cell),
    stay below the Nyquist index and are not already in `taken` (up to sign).
    The box searched around the target doubles until one candidate qualifies.
    """
    low, high = 2.0 ** level, 2.0 ** (level + 1)
    target = SHELL_RADIUS * low * direction
    center = np.rint(target).astype(int)
    limits = np.asarray(grid.n) / 2
    radius = max(1, int(np.ceil(MAGNITUDE_SCALE * SHELL_RADIUS * low)))

    while radius <= 2 * high:
        axes = [np.arange(-radius, radius + 1)] * grid.dim
        candidates = center + np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, grid.dim)
        norms = np.linalg.norm(candidates, axis=1)
        usable = (norms >= low) & (norms < high)
        usable &= np.any(candidates % 2 == 1, axis=1) & np.all(np.abs(candidates) < limits, axis=1)
        if taken:
            usable &= np.array([ok and _canonical(k) not in taken for k, ok in zip(candidates, usable)])
        if np.any(usable):
            safe = np.maximum(norms, 1.0)
            angle = np.arccos(np.clip(np.abs(candidates @ direction) / safe, 0.0, 1.0))
            cost = (np.log(safe / (SHELL_RADIUS * low)) / MAGNITUDE_SCALE) ** 2 + (angle / ANGLE_SCALE) ** 2
            key = _canonical(candidates[int(np.argmin(np.where(usable, cost, np.inf)))])
            if taken is not None:
                taken.add(key)
            return np.asarray(key)
        radius *= 2
    raise SynthesisError(f"Could not place a wavevector at level {level} on grid {grid.describe()}")


def mode_direction(rng: np.random.Generator, k: np.ndarray, components: int,
                   divergence_free: bool, plane: LevelPlane) -> np.ndarray:
    """Unit amplitude vector of a mode; in-plane and orthogonal to k when divergence-free"""
    if components == 1:
        return np.ones(1)
    vector = plane.perpendicular(k) if divergence_free else rng.standard_normal(components)
    return vector / np.linalg.norm(vector)


def cosine_mode(grid: Grid, k: np.ndarray, direction: np.ndarray, phase: float) -> np.ndarray:
    """Samples of direction * cos(2*pi*<k, x/period> + phase), shape (m, *n)"""
    coords = grid.coordinates()
    argument = sum(2.0 * np.pi * kk * x / period for kk, x, period in zip(k, coords, grid.period))
    return direction.reshape((-1,) + (1,) * grid.dim) * np.cos(argument + phase)


@dataclass(frozen=True)
class CosineMode:
    k: np.ndarray
    direction: np.ndarray
    phase: float
    weight: float


def lacunary_modes(spec: RoughFieldSpec, grid: Grid) -> List[CosineMode]:
    """The one cosine per level 0..jmax of a lacunary field"""
    spec.validate(grid)
    plane = LevelPlane.draw(spec.seed, grid.dim)
    modes = []
    for level in range(spec.jmax + 1):
        rng = level_generator(spec.seed, level, 0)
        k = lattice_wavevector(grid, level, plane.target(level, rng))
        direction = mode_direction(rng, k, spec.field_components(grid), spec.divergence_free, plane)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        modes.append(CosineMode(k, direction, phase, spec.amplitude * 2.0 ** (-level * spec.theta)))
    return modes


def lacunary_field(spec: RoughFieldSpec, grid: Grid) -> Field:
    """
    One cosine per dyadic level, weighted 2^(-j*theta)

    Level j has |k| close to sqrt(2) 2^j and turns a quarter turn from level
    j - 1, which keeps the pressure of neighbouring levels away from
    cancellation.

    Args:
        spec: Field recipe (kind is ignored)
        grid: Target grid

    Returns:
        Field whose level-j term sits alone in Littlewood-Paley block j + 1
    """
    modes = lacunary_modes(spec, grid)
    with ThreadPoolExecutor(max_workers=get_workers()) as pool:
        terms = list(pool.map(lambda m: m.weight * cosine_mode(grid, m.k, m.direction, m.phase), modes))
    data = np.sum(terms, axis=0)
    logger.debug(f"Lacunary field: theta={spec.theta}, jmax={spec.jmax}, seed={spec.seed}")
    return Field(grid, data)


def power_spectrum_field(spec: RoughFieldSpec, grid: Grid) -> Field:
    """
    Random-phase field with |f(k)| proportional to |k|^-(theta + d/2)

    Args:
        spec: Field recipe (kind is ignored)
        grid: Target grid

    Returns:
        Field whose expected block L2 norms decay like 2^(-j*theta)
    """
    spec.validate(grid)
    components = spec.field_components(grid)
    magnitude = grid.k_magnitude()
    coeffs = np.zeros((components,) + grid.shape, dtype=np.complex128)
    decay = np.where(magnitude > 0, magnitude, 1.0) ** (-(spec.theta + grid.dim / 2.0))

    for level in range(spec.jmax + 1):
        shell = (magnitude >= 2.0 ** level) & (magnitude < 2.0 ** (level + 1))
        count = int(np.count_nonzero(shell))
        for component in range(components):
            rng = level_generator(spec.seed, level, component)
            noise = rng.standard_normal((2, count))
            coeffs[component][shell] = (noise[0] + 1j * noise[1]) / np.sqrt(2.0) * decay[shell]

    f = inverse(SpectralField(grid, spec.amplitude * coeffs))
    if spec.divergence_free:
        f = inverse(leray_project(transform(f)))
    return f


def generate(spec: RoughFieldSpec, grid: Grid) -> Field:
    """Dispatch on spec.kind"""
    if spec.kind == 'lacunary':
        return lacunary_field(spec, grid)
    if spec.kind == 'power-spectrum':
        return power_spectrum_field(spec, grid)
    raise SynthesisError(f"Unknown field kind '{spec.kind}'")


def corpus(spec: RoughFieldSpec, grid: Grid, size: int) -> List[Field]:
    """Fields for seeds spec.seed, spec.seed + 1, ..."""
    if size < 1:
        raise SynthesisError("corpus empty")
    specs = [replace(spec, seed=spec.seed + i) for i in range(size)]
    with ThreadPoolExecutor(max_workers=get_workers()) as pool:
        return list(pool.map(lambda s: generate(s, grid), specs))


@dataclass(frozen=True)
class SpaceTimeSeries:
    """
    Divergence-free space-time series with prescribed exponents

    kind 'product':

        u(t, x) = sum_j a 2^(-j theta_time) cos(2 pi b_j t + psi_j) e_j(x)

    where b_j = 2^j (1 + rho_j) with rho_j drawn in [0.15, 0.85] and e_j a unit
    divergence-free cosine mode at spatial level round(j theta_time / theta_space),
    capped at jmax. Distinct terms use distinct wavevectors.

    kind 'transported':

        u(t, x) = U(x - c t)

    with U the divergence-free lacunary field of exponent theta_space on levels
    0..jmax and c the unit drift of its level plane. Increments in time are
    translations in space, so u keeps the exponent theta and p = T(u, u) the
    exponent 2 theta of the pressure of U. Here theta_time = theta_space and
    levels = jmax.
    """
    grid: Grid
    theta_space: float
    theta_time: Optional[float] = None
    levels: Optional[int] = None
    jmax: Optional[int] = None
    seed: int = 0
    amplitude: float = 1.0
    kind: str = 'product'
    _terms: Dict[str, np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in SERIES_KINDS:
            raise SynthesisError(f"Unknown series kind '{self.kind}'. Supported: {', '.join(SERIES_KINDS)}")
        if not 0 < self.theta_space < 1:
            raise SynthesisError(f"theta_space must lie in (0, 1), got {self.theta_space}")
        theta_time = self.theta_space if self.theta_time is None else self.theta_time
        if not 0 < theta_time < 2:
            raise SynthesisError(f"theta_time must lie in (0, 2), got {theta_time}")
        jmax = max_resolved_level(self.grid, 2.0 / 3.0) if self.jmax is None else self.jmax
        if jmax < 0 or 2 ** jmax >= min(self.grid.n) / 2:
            raise SynthesisError(f"jmax = {jmax} is not resolved on grid {self.grid.describe()}")
        levels = jmax if self.levels is None else self.levels
        if self.kind == 'transported' and (theta_time != self.theta_space or levels != jmax):
            raise SynthesisError("transported series tie theta_time to theta_space and levels to jmax")
        object.__setattr__(self, 'theta_time', theta_time)
        object.__setattr__(self, 'jmax', jmax)
        object.__setattr__(self, 'levels', levels)
        builder = self._transported_terms if self.kind == 'transported' else self._product_terms
        object.__setattr__(self, '_terms', builder())

    @property
    def drift(self) -> Optional[np.ndarray]:
        """Transport velocity c, None for product series"""
        return self._terms.get('drift')

    def spatial_level(self, level: int) -> int:
        return min(int(round(level * self.theta_time / self.theta_space)), self.jmax)

    def _product_terms(self) -> Dict[str, np.ndarray]:
        plane = LevelPlane.draw(self.seed, self.grid.dim)
        taken: Set[Tuple[int, ...]] = set()
        shapes, weights, freqs, phases = [], [], [], []
        for j in range(self.levels + 1):
            rng = level_generator(self.seed, j, 0)
            k = lattice_wavevector(self.grid, self.spatial_level(j), plane.target(j, rng), taken)
            direction = mode_direction(rng, k, self.grid.dim, True, plane)
            shapes.append(cosine_mode(self.grid, k, direction, rng.uniform(0.0, 2.0 * np.pi)))

            time_rng = level_generator(self.seed, j, 1)
            freqs.append(2.0 ** j * (1.0 + time_rng.uniform(0.15, 0.85)))
            phases.append(time_rng.uniform(0.0, 2.0 * np.pi))
            weights.append(self.amplitude * 2.0 ** (-j * self.theta_time))
        return {
            'cos': np.stack(shapes),
            'weights': np.asarray(weights),
            'freqs': np.asarray(freqs),
            'phases': np.asarray(phases),
        }

    def _transported_terms(self) -> Dict[str, np.ndarray]:
        spec = RoughFieldSpec(self.theta_space, 'lacunary', self.jmax, self.seed, True, self.amplitude)
        modes = lacunary_modes(spec, self.grid)
        drift = LevelPlane.draw(self.seed, self.grid.dim).drift()
        return {
            'cos': np.stack([cosine_mode(self.grid, m.k, m.direction, m.phase) for m in modes]),
            'sin': np.stack([cosine_mode(self.grid, m.k, m.direction, m.phase - np.pi / 2.0) for m in modes]),
            'weights': np.asarray([m.weight for m in modes]),
            'freqs': np.asarray([np.sum(m.k * drift / np.asarray(self.grid.period)) for m in modes]),
            'phases': np.zeros(len(modes)),
            'drift': drift,
        }

    def _combine(self, cos_coefficients: np.ndarray, sin_coefficients: np.ndarray) -> Field:
        data = np.tensordot(cos_coefficients, self._terms['cos'], axes=1)
        if 'sin' in self._terms:
            data = data + np.tensordot(sin_coefficients, self._terms['sin'], axes=1)
        return Field(self.grid, data)

    def _angle(self, t: float) -> np.ndarray:
        return 2.0 * np.pi * self._terms['freqs'] * t + self._terms['phases']

    def velocity(self, t: float) -> Field:
        angle = self._angle(t)
        weights = self._terms['weights']
        return self._combine(weights * np.cos(angle), weights * np.sin(angle))

    def velocity_rate(self, t: float) -> Field:
        """Exact time derivative of velocity(t)"""
        angle = self._angle(t)
        scale = 2.0 * np.pi * self._terms['freqs'] * self._terms['weights']
        return self._combine(-scale * np.sin(angle), scale * np.cos(angle))


def taylor_green(grid: Grid, amplitude: float = 1.0) -> Field:
    """
    Taylor-Green vortex on the first axis pair

    2D: (sin 2πx cos 2πy, -cos 2πx sin 2πy); in 3D the same profile is
    multiplied by cos 2πz with zero third component.
    """
    def velocity(*coords):
        x, y = (2.0 * np.pi * c / p for c, p in zip(coords[:2], grid.period[:2]))
        envelope = np.cos(2.0 * np.pi * coords[2] / grid.period[2]) if grid.dim == 3 else 1.0
        components = [amplitude * np.sin(x) * np.cos(y) * envelope,
                      -amplitude * np.cos(x) * np.sin(y) * envelope]
        if grid.dim == 3:
            components.append(np.zeros(grid.shape))
        return components

    return Field.from_function(grid, velocity)
