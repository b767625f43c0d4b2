"""
Tests for the periodic grid, fields and spectral calculus
"""
import numpy as np
import pytest

from services.grid import (
    Field,
    Grid,
    SpectralField,
    bessel_potential,
    derivative,
    gradient,
    inverse,
    leray_project,
    max_divergence,
    solve_poisson,
    spectral_inner,
    transform,
)
from utils.error_handlers import ComponentMismatchError, FieldError, NonFiniteFieldError


class TestGrid:
    def test_parse(self):
        """Grid specs parse into sizes and unit periods"""
        grid = Grid.parse('32x16')
        assert grid.shape == (32, 16)
        assert grid.period == (1.0, 1.0)
        assert grid.dim == 2

    def test_parse_3d(self):
        assert Grid.parse('8x8x8').dim == 3

    def test_rejects_non_power_of_two(self):
        with pytest.raises(FieldError, match='powers of two'):
            Grid((24, 32))

    def test_rejects_dimension(self):
        with pytest.raises(FieldError, match='dimension'):
            Grid((16,))

    def test_dealias_mask_counts(self, grid32):
        """2/3 rule on 32 points keeps |k_i| <= 10"""
        assert int(grid32.dealias_mask(2.0 / 3.0).sum()) == 21 * 21

    def test_physical_wavenumbers_zero_nyquist(self, grid16):
        kx = grid16.physical_wavenumbers()[0].ravel()
        assert kx[8] == 0.0
        assert kx[1] == pytest.approx(2 * np.pi)

    def test_hashable(self):
        assert hash(Grid((16, 16))) == hash(Grid((16, 16), 1.0))


class TestField:
    def test_scalar_shape(self, grid16):
        f = Field(grid16, np.ones((16, 16)))
        assert f.components == 1
        assert f.data.shape == (1, 16, 16)

    def test_read_only(self, grid16):
        f = Field.zeros(grid16, 2)
        with pytest.raises(ValueError):
            f.data[0, 0, 0] = 1.0

    def test_rejects_non_finite(self, grid16):
        data = np.zeros((16, 16))
        data[3, 3] = np.nan
        with pytest.raises(NonFiniteFieldError):
            Field(grid16, data)

    def test_rejects_wrong_shape(self, grid16):
        with pytest.raises(ComponentMismatchError):
            Field(grid16, np.zeros((2, 8, 8)))

    def test_arithmetic(self, grid16):
        f = Field(grid16, np.ones((16, 16)))
        g = (f + f) * 0.5 - f
        assert np.all(g.data == 0.0)

    def test_mismatched_components(self, grid16):
        with pytest.raises(ComponentMismatchError):
            Field.zeros(grid16, 1) + Field.zeros(grid16, 2)


class TestTransform:
    def test_zero_mode_is_mean(self, grid16):
        f = Field(grid16, np.full((16, 16), 3.5))
        F = transform(f)
        assert F.coeffs[0, 0, 0] == pytest.approx(3.5)
        assert F.energy() == pytest.approx(3.5 ** 2)

    def test_inverse_recovers_samples(self, grid32, taylor_green32):
        np.testing.assert_allclose(inverse(transform(taylor_green32)).data, taylor_green32.data, atol=1e-13)

    def test_real_field_is_hermitian(self, taylor_green32):
        assert transform(taylor_green32).hermitian_defect() < 1e-14

    def test_parseval(self, grid32):
        f = Field(grid32, np.random.default_rng(3).standard_normal((2, 32, 32)))
        assert transform(f).energy() == pytest.approx(float(np.mean(np.sum(f.data ** 2, axis=0))), rel=1e-12)


class TestCalculus:
    def test_derivative_of_sine(self, grid32):
        f = Field.from_function(grid32, lambda x, y: np.sin(2 * np.pi * x))
        expected = 2 * np.pi * np.cos(2 * np.pi * grid32.coordinates()[0])
        np.testing.assert_allclose(inverse(derivative(transform(f), 0)).data[0], expected, atol=1e-11)

    def test_second_derivative(self, grid32, cosine_x):
        result = inverse(derivative(transform(cosine_x), 0, 2)).data[0]
        np.testing.assert_allclose(result, -(2 * np.pi) ** 2 * cosine_x.data[0], atol=1e-9)

    def test_derivative_order(self, grid32, cosine_x):
        with pytest.raises(FieldError, match='order'):
            derivative(transform(cosine_x), 0, 0)

    def test_poisson(self, grid32, cosine_x):
        """-Laplace q = 4π² cos 2πx gives q = cos 2πx"""
        rhs = transform(cosine_x * (2 * np.pi) ** 2)
        np.testing.assert_allclose(inverse(solve_poisson(rhs)).data, cosine_x.data, atol=1e-12)

    def test_bessel_potential_order_zero(self, taylor_green32):
        F = transform(taylor_green32)
        np.testing.assert_allclose(bessel_potential(F, 0.0).coeffs, F.coeffs)

    def test_gradient_needs_scalar(self, taylor_green32):
        with pytest.raises(ComponentMismatchError):
            gradient(transform(taylor_green32))


class TestLeray:
    def test_removes_gradients(self, grid32):
        phi = Field.from_function(grid32, lambda x, y: np.cos(2 * np.pi * x) * np.sin(4 * np.pi * y))
        projected = leray_project(gradient(transform(phi)))
        assert np.max(np.abs(projected.coeffs)) < 1e-12

    def test_projected_field_is_divergence_free(self, grid32):
        u = Field.from_function(grid32, lambda x, y: [np.sin(2 * np.pi * x), np.cos(2 * np.pi * (x + y))])
        assert max_divergence(u) > 1.0
        assert max_divergence(inverse(leray_project(transform(u)))) < 1e-10

    def test_keeps_divergence_free(self, taylor_green32):
        F = transform(taylor_green32)
        np.testing.assert_allclose(leray_project(F).coeffs, F.coeffs, atol=1e-14)

    def test_needs_vector(self, cosine_x):
        with pytest.raises(ComponentMismatchError):
            leray_project(transform(cosine_x))

    def test_idempotent(self, grid32):
        F = transform(Field(grid32, np.random.default_rng(1).standard_normal((2, 32, 32))))
        once = leray_project(F)
        np.testing.assert_allclose(leray_project(once).coeffs, once.coeffs, atol=1e-13)

    def test_self_adjoint(self):
        grid = Grid((16, 16, 16))
        rng = np.random.default_rng(2)
        F = transform(Field(grid, rng.standard_normal((3, 16, 16, 16))))
        G = transform(Field(grid, rng.standard_normal((3, 16, 16, 16))))
        left = spectral_inner(leray_project(F), G)
        right = spectral_inner(F, leray_project(G))
        assert abs(left - right) < 1e-12 * abs(spectral_inner(F, F))


def test_spectral_field_shape(grid16):
    with pytest.raises(ComponentMismatchError):
        SpectralField(grid16, np.zeros((1, 8, 8)))
