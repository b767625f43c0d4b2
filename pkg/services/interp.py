"""
Real interpolation numerics on Hilbert couples of periodic Sobolev spaces

Every K-functional here is the quadratic relaxation
    K2(t, x) = inf_{x = a + b} (||a||_X^2 + t^2 ||b||_Y^2)^(1/2),
which has a closed form per Fourier mode and brackets the true K-functional
as K2 <= K <= sqrt(2) K2.
"""
import csv
import logging
import os
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from services.grid import Field, Grid, SpectralField, bessel_potential, transform
from services.norms import BesovParams, besov_seminorm_lp
from utils.error_handlers import InterpolationError, OutputError, TRangeTooNarrowError

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
DECAY = 1e-6
AUTO_DECAY = 1e-12
POINTS_PER_DECADE = 100
DEFAULT_T_GRID = np.logspace(-4.0, 4.0, 61)
EQUIVALENCE_BAND = (0.05, 20.0)
K_RATIO_BOUND = 100.0
INCLUSION_BOUND = 10.0
TRIANGLE_TOLERANCE = 1e-8

RELAXATION_NOTE = 'Hilbert-couple relaxation: K2 <= K <= sqrt(2) K2, r = 2 spaces only'


def _physical_k2(grid: Grid) -> np.ndarray:
    return sum(kp ** 2 for kp in grid.physical_wavenumbers(zero_nyquist=False))


@dataclass(frozen=True)
class HilbertCouple:
    """Couple (W^{sigma_x,2}, W^{sigma_y,2}) with weights (1 + |2 pi k|^2)^(sigma/2)"""
    sigma_x: float = 0.0
    sigma_y: float = 2.0
    label: str = ''

    def __post_init__(self):
        if self.sigma_y < self.sigma_x:
            raise InterpolationError("Y must embed in X: sigma_y >= sigma_x")
        if not self.label:
            object.__setattr__(self, 'label', f'(H^{self.sigma_x:g}, H^{self.sigma_y:g})')

    def weights(self, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
        k2 = _physical_k2(grid)
        return (1.0 + k2) ** (self.sigma_x / 2.0), (1.0 + k2) ** (self.sigma_y / 2.0)

    def shells(self, x: SpectralField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Energy, w_X^2 and w_Y^2 collapsed over modes sharing |k|^2"""
        wx, wy = self.weights(x.grid)
        energy = np.sum(np.abs(x.coeffs) ** 2, axis=0).ravel()
        keys = np.round(_physical_k2(x.grid).ravel(), 6)
        unique, inverse_index = np.unique(keys, return_inverse=True)
        shell_energy = np.bincount(inverse_index, weights=energy, minlength=len(unique))
        wx2 = np.bincount(inverse_index, weights=wx.ravel() ** 2, minlength=len(unique))
        wy2 = np.bincount(inverse_index, weights=wy.ravel() ** 2, minlength=len(unique))
        counts = np.bincount(inverse_index, minlength=len(unique))
        keep = shell_energy > 0
        return shell_energy[keep], (wx2 / counts)[keep], (wy2 / counts)[keep]

    def norm_x(self, x: SpectralField) -> float:
        energy, wx2, _ = self.shells(x)
        return float(np.sqrt(np.sum(energy * wx2)))

    def norm_y(self, x: SpectralField) -> float:
        energy, _, wy2 = self.shells(x)
        return float(np.sqrt(np.sum(energy * wy2)))


def _relaxed_k(shells: Tuple[np.ndarray, np.ndarray, np.ndarray], t: np.ndarray) -> np.ndarray:
    energy, wx2, wy2 = shells
    t = np.asarray(t, dtype=float)
    t2 = (t ** 2)[..., np.newaxis]
    per_shell = energy * wx2 * t2 * wy2 / (wx2 + t2 * wy2)
    return np.sqrt(np.sum(per_shell, axis=-1))


def k_functional(x: SpectralField, couple: HilbertCouple, t: float) -> float:
    """
    Quadratic-relaxation K-functional K2(t, x)

    Args:
        x: Element in spectral form
        couple: Hilbert couple (X, Y)
        t: Positive parameter

    Returns:
        K2(t, x)
    """
    if not t > 0:
        raise InterpolationError(f"t must be positive, got {t}")
    return float(_relaxed_k(couple.shells(x), np.asarray(t)))


@dataclass(frozen=True)
class KProfile:
    """Sampled t -> K2(t, x) with the elementary upper bound min(||x||_X, t ||x||_Y)"""
    t_values: Tuple[float, ...]
    K_values: Tuple[float, ...]
    x_ref: str
    norm_x: float
    norm_y: float
    single_mode: bool = False

    @property
    def bound_min_norm(self) -> np.ndarray:
        t = np.asarray(self.t_values)
        return np.minimum(self.norm_x, t * self.norm_y)

    def check(self, tolerance: float = 1e-12) -> Dict[str, bool]:
        """
        Shape checks of the sampled profile

        monotone, K/t nonincreasing, chords within the sqrt(2) bracket, the
        upper bound, and exact concavity when x is a single shell.
        """
        t = np.asarray(self.t_values)
        K = np.asarray(self.K_values)
        scale = max(float(np.max(K, initial=0.0)), 1e-300)
        slack = tolerance * scale

        monotone = bool(np.all(np.diff(K) >= -slack))
        quotient = K / t
        quasi_concave = bool(np.all(np.diff(quotient) <= tolerance * np.maximum(quotient[:-1], 1e-300)))
        chord = K[:-2] + (K[2:] - K[:-2]) * (t[1:-1] - t[:-2]) / (t[2:] - t[:-2])
        concave_bracket = bool(np.all(SQRT2 * K[1:-1] >= chord - slack))
        bounded = bool(np.all(K <= self.bound_min_norm * (1 + tolerance) + slack))
        result = {
            'monotone': monotone,
            'quasi_concave': quasi_concave,
            'concave_within_bracket': concave_bracket,
            'bounded': bounded,
        }
        if self.single_mode:
            result['concave'] = bool(np.all(K[1:-1] >= chord - slack))
        return result

    def write_csv(self, path: str, config_hash: str = '') -> None:
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, 'w', newline='', encoding='utf-8') as handle:
                writer = csv.writer(handle)
                writer.writerow(['t', 'K', 'bound_min_norm', 'config_hash'])
                for t, K, bound in zip(self.t_values, self.K_values, self.bound_min_norm):
                    writer.writerow([repr(float(t)), repr(float(K)), repr(float(bound)), config_hash])
        except OSError as e:
            raise OutputError(f"Cannot write K profile {path}: {str(e)}") from e


def k_profile(x: SpectralField, couple: HilbertCouple, t_values: Sequence[float] = DEFAULT_T_GRID,
              x_ref: str = '') -> KProfile:
    shells = couple.shells(x)
    t = np.asarray(t_values, dtype=float)
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise InterpolationError("t values must be positive and increasing")
    energy, wx2, wy2 = shells
    return KProfile(
        t_values=tuple(t),
        K_values=tuple(_relaxed_k(shells, t)),
        x_ref=x_ref,
        norm_x=float(np.sqrt(np.sum(energy * wx2))),
        norm_y=float(np.sqrt(np.sum(energy * wy2))),
        single_mode=len(energy) == 1,
    )


def _auto_range(shells, theta: float, r: float) -> Tuple[float, float]:
    energy, wx2, wy2 = shells
    crossover = np.sqrt(wx2 / wy2)
    power = 1.0 if r == np.inf else r
    low = np.min(crossover) * AUTO_DECAY ** (1.0 / ((1.0 - theta) * power))
    high = np.max(crossover) * AUTO_DECAY ** (-1.0 / (theta * power))
    return float(low), float(high)


def _integrand(shells, theta: float, r: float, t: np.ndarray) -> np.ndarray:
    base = t ** (-theta) * _relaxed_k(shells, t)
    return base if r == np.inf else base ** r


def interp_norm(x: SpectralField, couple: HilbertCouple, theta: float, r: float,
                t_range: Optional[Tuple[float, float]] = None,
                points_per_decade: int = POINTS_PER_DECADE) -> float:
    """
    (X, Y)_{theta, r} norm: L^r(dt/t) norm of t^-theta K2(t, x)

    Args:
        x: Element in spectral form
        couple: Hilbert couple
        theta: Interpolation index in (0, 1)
        r: Summability in [1, inf]
        t_range: Optional (t_min, t_max); chosen from the spectrum if omitted
        points_per_decade: Log-grid density of the quadrature

    Returns:
        Trapezoid quadrature in ln t (sup over the grid for r = inf)
    """
    if not 0 < theta < 1:
        raise InterpolationError(f"theta must lie in (0, 1), got {theta}")
    shells = couple.shells(x)
    if len(shells[0]) == 0:
        return 0.0

    low, high = t_range if t_range is not None else _auto_range(shells, theta, r)
    decades = np.log10(high) - np.log10(low)
    t = np.logspace(np.log10(low), np.log10(high), max(int(decades * points_per_decade), 2) + 1)
    values = _integrand(shells, theta, r, t)

    peak = float(np.max(values))
    if values[0] > DECAY * peak or values[-1] > DECAY * peak:
        raise TRangeTooNarrowError(
            f"t-range too narrow: integrand at ends is {values[0] / peak:.2e}, {values[-1] / peak:.2e} of its peak"
        )
    if r == np.inf:
        return peak
    return float(integrate.trapezoid(values, np.log(t)) ** (1.0 / r))


def _mean_free(f: Field) -> SpectralField:
    F = transform(f)
    coeffs = np.array(F.coeffs)
    coeffs[(slice(None),) + (0,) * f.grid.dim] = 0.0
    return SpectralField(f.grid, coeffs)


def inclusion_chain_check(x: SpectralField, couple: HilbertCouple, theta: float, r: float, s: float,
                          gamma: Optional[float] = None) -> Dict:
    """
    Norm ratios along X ∩ Y -> (X,Y)_{theta,r} -> (X,Y)_{theta,s} -> X + Y

    With gamma >= theta the extra link (X,Y)_{gamma,r} -> (X,Y)_{theta,s}
    is checked too. Each ratio must stay below a fixed constant.
    """
    if r > s:
        raise InterpolationError(f"requires r <= s, got r = {r}, s = {s}")
    intersection = max(couple.norm_x(x), couple.norm_y(x))
    theta_r = interp_norm(x, couple, theta, r)
    theta_s = interp_norm(x, couple, theta, s)
    total = k_functional(x, couple, 1.0) if intersection > 0 else 0.0

    def ratio(left: float, right: float) -> float:
        return 0.0 if left == 0 else left / right

    ratios = {
        'intersection_to_theta_r': ratio(theta_r, intersection),
        'theta_r_to_theta_s': ratio(theta_s, theta_r),
        'theta_s_to_sum': ratio(total, theta_s),
    }
    if gamma is not None:
        if gamma < theta:
            raise InterpolationError(f"requires γ ≥ θ, got γ = {gamma} < θ = {theta}")
        ratios['gamma_r_to_theta_s'] = ratio(theta_s, interp_norm(x, couple, gamma, r))
    return {'ratios': ratios, 'passed': all(v <= INCLUSION_BOUND for v in ratios.values())}


def interp_triangle_check(x: SpectralField, y: SpectralField, couple: HilbertCouple,
                          theta: float, r: float) -> Dict:
    """||x + y|| <= ||x|| + ||y|| on a common t grid"""
    ranges = [_auto_range(couple.shells(z), theta, r) for z in (x, y, x + y) if np.any(z.coeffs)]
    if not ranges:
        return {'left': 0.0, 'right': 0.0, 'passed': True}
    t_range = (min(lo for lo, _ in ranges), max(hi for _, hi in ranges))
    left = interp_norm(x + y, couple, theta, r, t_range)
    right = interp_norm(x, couple, theta, r, t_range) + interp_norm(y, couple, theta, r, t_range)
    return {'left': left, 'right': right, 'passed': left <= right * (1 + TRIANGLE_TOLERANCE)}


def verify_besov_equivalence(f: Field, theta: float, t_grid: Optional[Tuple[float, float]] = None) -> Dict:
    """
    Compare the (L^2, H^2)_{theta/2, inf} norm with the LP seminorm [f]_{B^theta_{2,inf}}

    Both act on the mean-free part; the ratio must fall inside a fixed band.
    """
    x = _mean_free(f)
    interp_value = interp_norm(x, HilbertCouple(0.0, 2.0), theta / 2.0, np.inf, t_grid)
    besov_value = besov_seminorm_lp(f, BesovParams(theta, 2.0, np.inf, 'littlewood_paley'))

    if interp_value == 0 and besov_value < 1e-12:
        return {'interp': 0.0, 'besov': besov_value, 'ratio': 1.0, 'passed': True,
                'note': 'mean-free part is zero'}
    ratio = interp_value / besov_value if besov_value > 0 else np.inf
    low, high = EQUIVALENCE_BAND
    return {'interp': interp_value, 'besov': besov_value, 'ratio': ratio,
            'passed': bool(low <= ratio <= high)}


def _k_values(x: SpectralField, couple: HilbertCouple, t: np.ndarray) -> np.ndarray:
    shells = couple.shells(x)
    if len(shells[0]) == 0:
        return np.zeros_like(t)
    return _relaxed_k(shells, t)


def _ratio_report(numerator: np.ndarray, denominator: np.ndarray, t: np.ndarray) -> Dict:
    valid = denominator > 0
    ratios = np.where(valid, numerator / np.where(valid, denominator, 1.0), np.nan)
    finite = ratios[valid]
    max_ratio = float(np.max(finite)) if finite.size else 0.0
    bound_value = SQRT2 * max_ratio
    return {
        't': t.tolist(),
        'ratios': [None if np.isnan(v) else float(v) for v in ratios],
        'skipped': int(np.count_nonzero(~valid)),
        'max_ratio': max_ratio,
        'bracketed_max': bound_value,
        'bound': K_RATIO_BOUND,
        'passed': bool(np.isfinite(bound_value) and bound_value < K_RATIO_BOUND),
    }


def verify_bilinear_K_inequality(x1: Field, x2: Field, operator: Callable[[Field, Field], Field],
                                 t_grid: Sequence[float] = DEFAULT_T_GRID,
                                 input_couple: HilbertCouple = HilbertCouple(0.0, 1.0),
                                 output_couple: HilbertCouple = HilbertCouple(0.0, 2.0)) -> Dict:
    """
    Ratio K(t, T(x1, x2)) / (K(sqrt t, x1) K(sqrt t, x2)) over t

    Args:
        x1, x2: Divergence-free inputs
        operator: Bilinear operator returning a Field (the pressure solve)
        t_grid: Positive t values
        input_couple: Couple of both inputs
        output_couple: Couple of the output

    Returns:
        Report dictionary with the per-t ratios and the pass flag
    """
    t = np.asarray(t_grid, dtype=float)
    X1, X2 = transform(x1), transform(x2)
    if not np.any(X1.coeffs) or not np.any(X2.coeffs):
        return {'t': t.tolist(), 'ratios': [None] * len(t), 'skipped': len(t), 'max_ratio': 0.0,
                'bracketed_max': 0.0, 'bound': K_RATIO_BOUND, 'passed': True, 'note': 'zero input'}
    output = transform(operator(x1, x2))
    numerator = _k_values(output, output_couple, t)
    denominator = _k_values(X1, input_couple, np.sqrt(t)) * _k_values(X2, input_couple, np.sqrt(t))
    return _ratio_report(numerator, denominator, t)


def verify_trilinear_K_inequality(x1: Field, x2: Field, x3: Field,
                                  operator: Callable[[Field, Field, Field], Field],
                                  t_grid: Sequence[float] = DEFAULT_T_GRID,
                                  input_couple: HilbertCouple = HilbertCouple(0.0, 1.0),
                                  output_couple: HilbertCouple = HilbertCouple(0.0, 2.0)) -> Dict:
    """
    Ratio K(t, Q) / R(t) with Q = (1 - Laplace)^(-1/2) T(x1, x2, x3) and

        R(t) = |x1| K(√t, x2) K(√t, x3) + K(√t, x1) (|x2| K(√t, x3) + |x3| K(√t, x2))

    where |.| is the norm of the smaller input space.
    """
    t = np.asarray(t_grid, dtype=float)
    inputs = [transform(x) for x in (x1, x2, x3)]
    if any(not np.any(X.coeffs) for X in inputs):
        return {'t': t.tolist(), 'ratios': [None] * len(t), 'skipped': len(t), 'max_ratio': 0.0,
                'bracketed_max': 0.0, 'bound': K_RATIO_BOUND, 'passed': True, 'note': 'zero input'}

    integrated = bessel_potential(transform(operator(x1, x2, x3)), -1.0)
    numerator = _k_values(integrated, output_couple, t)
    norms = [input_couple.norm_x(X) for X in inputs]
    ks = [_k_values(X, input_couple, np.sqrt(t)) for X in inputs]
    denominator = (norms[0] * ks[1] * ks[2]
                   + ks[0] * (norms[1] * ks[2] + norms[2] * ks[1]))
    report = _ratio_report(numerator, denominator, t)
    report['deviation'] = 'output integrated by (1 - Laplace)^(-1/2) before the (L^2, H^2) couple'
    return report
