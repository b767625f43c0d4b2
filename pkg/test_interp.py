"""
Tests for K-functionals, interpolation norms and the K inequalities
"""
import numpy as np
import pytest

from services.grid import Field, transform
from services.interp import (
    HilbertCouple,
    inclusion_chain_check,
    interp_norm,
    interp_triangle_check,
    k_functional,
    k_profile,
    verify_besov_equivalence,
    verify_bilinear_K_inequality,
    verify_trilinear_K_inequality,
)
from services.pressure import solve_bilinear, solve_trilinear
from services.synth import RoughFieldSpec, corpus, generate
from utils.error_handlers import InterpolationError, TRangeTooNarrowError

COUPLE = HilbertCouple(0.0, 2.0)


@pytest.fixture
def single_mode(cosine_x):
    return transform(cosine_x)


def closed_form_norms():
    """Norms of cos 2πx in L^2 and H^2"""
    energy = 0.5
    wy2 = (1 + 4 * np.pi ** 2) ** 2
    return np.sqrt(energy), np.sqrt(energy * wy2)


class TestKFunctional:
    def test_single_mode_closed_form(self, single_mode):
        a, b = closed_form_norms()
        for t in (1e-3, 0.05, 1.0, 30.0):
            expected = a * t * b / np.sqrt(a ** 2 + (t * b) ** 2)
            assert k_functional(single_mode, COUPLE, t) == pytest.approx(expected, rel=1e-12)

    def test_limits(self, single_mode):
        a, b = closed_form_norms()
        assert k_functional(single_mode, COUPLE, 1e-8) == pytest.approx(1e-8 * b, rel=1e-6)
        assert k_functional(single_mode, COUPLE, 1e8) == pytest.approx(a, rel=1e-6)

    def test_rejects_non_positive_t(self, single_mode):
        with pytest.raises(InterpolationError, match='t must be positive'):
            k_functional(single_mode, COUPLE, 0.0)

    def test_couple_order(self):
        with pytest.raises(InterpolationError):
            HilbertCouple(2.0, 0.0)


class TestKProfile:
    def test_single_mode_is_concave(self, single_mode):
        profile = k_profile(single_mode, COUPLE)
        assert profile.single_mode
        assert all(profile.check().values())
        assert 'concave' in profile.check()

    def test_multi_shell_shape(self, grid64):
        f = generate(RoughFieldSpec(0.5, 'lacunary', 4, 3, False), grid64)
        profile = k_profile(transform(f), COUPLE)
        checks = profile.check()
        assert not profile.single_mode
        assert 'concave' not in checks
        assert checks['monotone'] and checks['quasi_concave'] and checks['bounded']
        assert checks['concave_within_bracket']

    def test_rejects_unordered_t(self, single_mode):
        with pytest.raises(InterpolationError):
            k_profile(single_mode, COUPLE, [1.0, 0.5])

    def test_csv(self, tmp_path, single_mode):
        path = tmp_path / 'profile.csv'
        k_profile(single_mode, COUPLE, [0.1, 1.0, 10.0]).write_csv(str(path), 'h')
        lines = path.read_text().splitlines()
        assert lines[0] == 't,K,bound_min_norm,config_hash'
        assert len(lines) == 4


class TestInterpNorm:
    @pytest.mark.parametrize('theta', [0.25, 0.5, 0.7])
    def test_r2_closed_form(self, single_mode, theta):
        a, b = closed_form_norms()
        expected = a ** (1 - theta) * b ** theta * np.sqrt(np.pi / (2 * np.sin(np.pi * theta)))
        assert interp_norm(single_mode, COUPLE, theta, 2.0) == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize('theta', [0.3, 0.5])
    def test_sup_closed_form(self, single_mode, theta):
        a, b = closed_form_norms()
        expected = a ** (1 - theta) * b ** theta * ((1 - theta) / theta) ** ((1 - theta) / 2) * np.sqrt(theta)
        assert interp_norm(single_mode, COUPLE, theta, np.inf) == pytest.approx(expected, rel=1e-3)

    def test_zero_element(self, grid32):
        assert interp_norm(transform(Field.zeros(grid32)), COUPLE, 0.5, 2.0) == 0.0

    def test_t_range_too_narrow(self, single_mode):
        with pytest.raises(TRangeTooNarrowError, match='t-range too narrow'):
            interp_norm(single_mode, COUPLE, 0.5, 2.0, t_range=(1e-3, 1e-1))

    def test_theta_range(self, single_mode):
        with pytest.raises(InterpolationError):
            interp_norm(single_mode, COUPLE, 1.0, 2.0)

    def test_triangle(self, grid32, cosine_x):
        other = Field.from_function(grid32, lambda x, y: 0.3 * np.sin(4 * np.pi * y))
        result = interp_triangle_check(transform(cosine_x), transform(other), COUPLE, 0.5, 2.0)
        assert result['passed']
        assert result['left'] <= result['right']

    def test_inclusion_chain(self, single_mode):
        result = inclusion_chain_check(single_mode, COUPLE, 0.5, 2.0, np.inf, gamma=0.6)
        assert result['passed']
        assert set(result['ratios']) == {
            'intersection_to_theta_r', 'theta_r_to_theta_s', 'theta_s_to_sum', 'gamma_r_to_theta_s',
        }

    def test_inclusion_needs_r_below_s(self, single_mode):
        with pytest.raises(InterpolationError, match='requires r <= s'):
            inclusion_chain_check(single_mode, COUPLE, 0.5, np.inf, 2.0)


class TestBesovEquivalence:
    def test_lacunary_field(self, grid64):
        f = generate(RoughFieldSpec(0.4, 'lacunary', 4, 5, False), grid64)
        result = verify_besov_equivalence(f, 0.4)
        assert result['passed']
        assert 0.05 <= result['ratio'] <= 20

    def test_constant_field(self, grid32):
        f = Field(grid32, np.full((32, 32), 4.0))
        result = verify_besov_equivalence(f, 0.4)
        assert result['passed']
        assert result['note'] == 'mean-free part is zero'


class TestKInequalities:
    def test_bilinear_on_taylor_green(self, taylor_green32):
        result = verify_bilinear_K_inequality(
            taylor_green32, taylor_green32, lambda u, w: solve_bilinear(u, w).p,
        )
        assert result['passed']
        assert result['skipped'] == 0
        assert 0 < result['max_ratio'] < 10

    def test_trilinear_on_taylor_green(self, taylor_green32):
        result = verify_trilinear_K_inequality(
            taylor_green32, taylor_green32, taylor_green32, lambda u, w, z: solve_trilinear(u, w, z).p,
        )
        assert result['passed']
        assert 'deviation' in result

    def test_bilinear_on_rough_corpus(self, grid64):
        members = corpus(RoughFieldSpec(0.4, 'lacunary', 3, 6, True), grid64, 3)
        for i in range(3):
            result = verify_bilinear_K_inequality(members[i], members[(i + 1) % 3], lambda u, w: solve_bilinear(u, w).p)
            assert result['passed']
            assert result['bracketed_max'] <= result['bound']

    def test_bilinear_ratio_is_scale_free(self, grid64):
        u = generate(RoughFieldSpec(0.5, 'lacunary', 3, 1, True), grid64)

        def operator(a, b):
            return solve_bilinear(a, b).p

        base = verify_bilinear_K_inequality(u, u, operator)
        scaled = verify_bilinear_K_inequality(u * 3.0, u * 0.5, operator)
        np.testing.assert_allclose(scaled['ratios'], base['ratios'], rtol=1e-9)

    def test_zero_input(self, grid32, taylor_green32):
        zero = Field.zeros(grid32, 2)
        result = verify_bilinear_K_inequality(zero, taylor_green32, lambda u, w: solve_bilinear(u, w).p)
        assert result['passed']
        assert result['note'] == 'zero input'
