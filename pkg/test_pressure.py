"""
Tests for the pressure solvers and the double-regularity experiment
"""
import numpy as np
import pytest

from services.grid import Field, Grid, gradient, inverse, transform
from services.pressure import (
    ESTIMATE_BOUND,
    bilinear_estimate_ratio,
    double_regularity_experiment,
    estimate_ratio_sweep,
    pressure,
    pressure_besov_ratio,
    pressure_blocks,
    pressure_exponent,
    solve_bilinear,
    solve_double_divergence,
    solve_trilinear,
    trilinear_estimate_ratio,
)
from services.synth import RoughFieldSpec, corpus, generate, taylor_green
from utils.error_handlers import (
    ComponentMismatchError,
    DivergenceError,
    HypothesisError,
    SynthesisError,
    UnderResolvedError,
)


@pytest.fixture
def shear32(grid32):
    """Divergence-free shear (cos 4πy, 0)"""
    return Field.from_function(grid32, lambda x, y: [np.cos(4 * np.pi * y), np.zeros_like(x)])


class TestBilinear:
    def test_taylor_green_pressure(self):
        """Steady Taylor-Green has p = (cos 4πx + cos 4πy) / 4"""
        grid = Grid((128, 128))
        result = solve_bilinear(taylor_green(grid), taylor_green(grid))
        x, y = grid.coordinates()
        expected = (np.cos(4 * np.pi * x) + np.cos(4 * np.pi * y)) / 4
        np.testing.assert_allclose(result.p.data[0], expected, atol=1e-12)
        assert result.residual < 1e-8
        assert result.input_norms['u_L2'] == pytest.approx(np.sqrt(0.5))

    def test_zero_mean(self, taylor_green32, smooth_velocity32):
        p = solve_bilinear(taylor_green32, smooth_velocity32).p
        assert abs(float(p.mean()[0])) < 1e-14

    def test_symmetric(self, taylor_green32, smooth_velocity32):
        a = solve_bilinear(taylor_green32, smooth_velocity32).p
        b = solve_bilinear(smooth_velocity32, taylor_green32).p
        np.testing.assert_allclose(a.data, b.data, atol=1e-13)

    def test_rejects_divergent_input(self, grid32):
        u = Field.from_function(grid32, lambda x, y: [np.sin(2 * np.pi * x), np.zeros_like(x)])
        with pytest.raises(DivergenceError, match='not divergence-free'):
            solve_bilinear(u, u)

    def test_projects_divergent_input(self, grid32):
        """(sin 2πx, 0) is a pure gradient, so its projection vanishes"""
        u = Field.from_function(grid32, lambda x, y: [np.sin(2 * np.pi * x), np.zeros_like(x)])
        p = solve_bilinear(u, u, project=True).p
        assert np.max(np.abs(p.data)) < 1e-12

    def test_under_resolved(self, grid32, taylor_green32):
        w = Field.from_function(grid32, lambda x, y: [np.zeros_like(x), np.cos(2 * np.pi * 15 * x)])
        with pytest.raises(UnderResolvedError, match='resolution too small'):
            solve_bilinear(taylor_green32, w)

    def test_scalar_input(self, cosine_x, taylor_green32):
        with pytest.raises(ComponentMismatchError):
            solve_bilinear(cosine_x, taylor_green32)

    def test_double_divergence_matches_bilinear(self, taylor_green32, shear32):
        Q = solve_double_divergence(taylor_green32, shear32)
        np.testing.assert_allclose(inverse(Q).data, solve_bilinear(taylor_green32, shear32).p.data, atol=1e-13)

    def test_bilinear_in_each_slot(self, taylor_green32, shear32, smooth_velocity32):
        a, b = 0.7, -1.3
        mixed = Field(taylor_green32.grid, a * taylor_green32.data + b * shear32.data)
        left = solve_bilinear(mixed, smooth_velocity32).p.data
        expected = (a * solve_bilinear(taylor_green32, smooth_velocity32).p.data
                    + b * solve_bilinear(shear32, smooth_velocity32).p.data)
        np.testing.assert_allclose(left, expected, atol=1e-12)

    def test_poisson_residual(self, grid64):
        u = generate(RoughFieldSpec(0.5, 'lacunary', 3, 2, True), grid64)
        assert solve_bilinear(u, u).residual < 1e-12

    def test_estimate_ratio_reuses_pressure(self, grid64):
        u = generate(RoughFieldSpec(0.5, 'lacunary', 3, 4, True), grid64)
        p = pressure(u)
        assert bilinear_estimate_ratio(u, u, 0.3, 0.6, p=p) == pytest.approx(bilinear_estimate_ratio(u, u, 0.3, 0.6))
        assert pressure_besov_ratio(u, 0.5, p=p) == pytest.approx(pressure_besov_ratio(u, 0.5))

    def test_estimate_sweep_takes_worst_member(self, grid64):
        members = corpus(RoughFieldSpec(0.4, 'lacunary', 3, 1, True), grid64, 3)
        sweep = estimate_ratio_sweep(members, [(0.3, 0.6)])
        ratios = [bilinear_estimate_ratio(u, u, 0.3, 0.6) for u in members]
        assert sweep == {'0.3,0.6': pytest.approx(max(ratios))}
        assert max(ratios) <= ESTIMATE_BOUND

    def test_estimate_ratio_rejects_r(self, taylor_green32):
        with pytest.raises(HypothesisError, match='requires r in'):
            bilinear_estimate_ratio(taylor_green32, taylor_green32, 0.3, 0.3, r=2.5)


class TestTrilinear:
    def test_constant_slot(self, grid32, taylor_green32, shear32):
        """A constant first slot c gives q = c · grad T(u, w)"""
        c = (0.3, -0.7)
        constant = Field(grid32, np.stack([np.full((32, 32), c[0]), np.full((32, 32), c[1])]))
        q = solve_trilinear(constant, taylor_green32, shear32).p
        grad = inverse(gradient(transform(solve_bilinear(taylor_green32, shear32).p)))
        expected = c[0] * grad.data[0] + c[1] * grad.data[1]
        np.testing.assert_allclose(q.data[0], expected, atol=1e-10)

    def test_half_rule_resolution(self, grid32, taylor_green32):
        w = Field.from_function(grid32, lambda x, y: [np.zeros_like(x), np.cos(2 * np.pi * 9 * x)])
        with pytest.raises(UnderResolvedError):
            solve_trilinear(taylor_green32, taylor_green32, w)

    def test_estimate_needs_exponent_sum(self, taylor_green32):
        with pytest.raises(HypothesisError, match='requires γ \\+ θ > 1'):
            trilinear_estimate_ratio(taylor_green32, taylor_green32, taylor_green32, 0.4, 0.5)

    def test_trilinear_in_each_slot(self, taylor_green32, shear32, smooth_velocity32):
        a, b = 2.0, 0.5
        mixed = Field(shear32.grid, a * shear32.data + b * smooth_velocity32.data)
        left = solve_trilinear(taylor_green32, mixed, taylor_green32).p.data
        expected = (a * solve_trilinear(taylor_green32, shear32, taylor_green32).p.data
                    + b * solve_trilinear(taylor_green32, smooth_velocity32, taylor_green32).p.data)
        np.testing.assert_allclose(left, expected, atol=1e-11)

    def test_estimate_bounded_on_corpus(self, grid64):
        members = corpus(RoughFieldSpec(0.5, 'lacunary', 3, 0, True), grid64, 3)
        for i in range(3):
            ratio = trilinear_estimate_ratio(members[i], members[(i + 1) % 3], members[(i + 2) % 3], 0.6, 0.6)
            assert 0 < ratio <= ESTIMATE_BOUND


class TestDoubleRegularity:
    def test_report_structure(self, grid64):
        report = double_regularity_experiment(0.4, 2.0, 2, grid64, seed=3)
        assert report.claim == 'pressure-double'
        assert report.floor == pytest.approx(0.8)
        assert report.tolerance == pytest.approx(0.15)
        assert len(report.fitted['fitted_exponents']) == 2
        assert report.fitted['max_besov_ratio'] > 0
        assert 'pass' in report.to_dict()
        assert set(report.fitted['bilinear_ratios']) == {'0.3,0.3', '0.3,0.6', '0.6,0.6'}
        assert set(report.fitted['trilinear_ratios']) == {'0.6,0.6'}

    def test_default_example_passes(self):
        report = double_regularity_experiment(0.4, 2.0, 6, Grid((256, 256)))
        assert report.fitted['blocks'] == [3, 6]
        assert all(e is not None for e in report.fitted['fitted_exponents'])
        assert report.fitted['min_exponent'] >= 0.65
        assert report.passed

    def test_passes_at_128(self):
        report = double_regularity_experiment(0.4, 2.0, 4, Grid((128, 128)), seed=11)
        assert report.fitted['min_exponent'] >= 0.65
        assert report.passed

    def test_estimate_ratios_bounded(self):
        report = double_regularity_experiment(0.5, 3.0, 3, Grid((128, 128)), seed=5)
        ratios = list(report.fitted['bilinear_ratios'].values()) + list(report.fitted['trilinear_ratios'].values())
        assert all(0 < ratio <= ESTIMATE_BOUND for ratio in ratios)

    def test_rejects_r_one(self, grid64):
        with pytest.raises(HypothesisError, match='requires r in'):
            double_regularity_experiment(0.4, 1.0, 2, grid64)

    @pytest.mark.parametrize('r', [1.5, 2.5, 6.0])
    def test_rejects_r_outside_supported(self, grid64, r):
        with pytest.raises(HypothesisError, match=r'requires r in \{2, 3, 4\}'):
            double_regularity_experiment(0.4, r, 2, grid64)

    def test_rejects_theta(self, grid64):
        with pytest.raises(HypothesisError):
            double_regularity_experiment(1.2, 2.0, 2, grid64)

    def test_empty_corpus(self, grid64):
        with pytest.raises(SynthesisError, match='corpus empty'):
            double_regularity_experiment(0.4, 2.0, 0, grid64)


def test_pressure_blocks():
    assert pressure_blocks(5) == (3, 6)


def test_pressure_exponent_of_single_shell(taylor_green32):
    """Taylor-Green pressure sits in one block, too few to fit"""
    assert pressure_exponent(pressure(taylor_green32), 2.0) is None
