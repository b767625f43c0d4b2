"""
Tests for synthetic field generators
"""
import numpy as np
import pytest

from services.grid import Grid, SpectralField, inverse, max_divergence, transform
from services.norms import lp_block_scan, lp_norm
from services.scaling import NormScan, fit_exponent
from services.synth import (
    SHELL_RADIUS,
    LevelPlane,
    RoughFieldSpec,
    SpaceTimeSeries,
    corpus,
    generate,
    lacunary_modes,
    lattice_wavevector,
    max_resolved_level,
    taylor_green,
)
from utils.error_handlers import SynthesisError


class TestLacunary:
    def test_single_term_energy(self, grid32):
        """jmax = 0 is one cosine of the given amplitude"""
        f = generate(RoughFieldSpec(0.5, 'lacunary', 0, 3, False, 2.0), grid32)
        assert f.components == 1
        assert lp_norm(f, 2) == pytest.approx(2.0 / np.sqrt(2.0), rel=1e-12)

    def test_block_decay(self, grid64):
        """Term j sits alone in block j + 1 with L2 norm 2^(-j θ)/√2"""
        f = generate(RoughFieldSpec(0.4, 'lacunary', 4, 11, False), grid64)
        scan = lp_block_scan(f, 2.0).nonzero()
        assert len(scan) == 5
        np.testing.assert_allclose(scan.norm_values, [2.0 ** (-0.4 * j) / np.sqrt(2.0) for j in range(5)],
                                   rtol=1e-10)
        assert fit_exponent(scan, None)[0] == pytest.approx(0.4, abs=1e-10)

    def test_divergence_free(self, grid32):
        u = generate(RoughFieldSpec(0.3, 'lacunary', 3, 5, True), grid32)
        assert u.components == 2
        assert max_divergence(u) < 1e-10

    def test_divergence_free_3d(self):
        grid = Grid((16, 16, 16))
        u = generate(RoughFieldSpec(0.5, 'lacunary', 2, 1, True), grid)
        assert u.components == 3
        assert max_divergence(u) < 1e-10

    def test_deterministic(self, grid32):
        spec = RoughFieldSpec(0.5, 'lacunary', 3, 42, True)
        np.testing.assert_array_equal(generate(spec, grid32).data, generate(spec, grid32).data)

    def test_seed_changes_field(self, grid32):
        a = generate(RoughFieldSpec(0.5, 'lacunary', 3, 1, True), grid32)
        b = generate(RoughFieldSpec(0.5, 'lacunary', 3, 2, True), grid32)
        assert not np.allclose(a.data, b.data)

    def test_jmax_at_nyquist(self, grid16):
        with pytest.raises(SynthesisError, match='Nyquist'):
            generate(RoughFieldSpec(0.5, 'lacunary', 3), grid16)

    def test_theta_range(self, grid16):
        with pytest.raises(SynthesisError):
            generate(RoughFieldSpec(1.5, 'lacunary', 1), grid16)

    def test_levels_near_shell_radius(self):
        modes = lacunary_modes(RoughFieldSpec(0.5, 'lacunary', 5, 9, True), Grid((256, 256)))
        for level, mode in enumerate(modes[3:], start=3):
            assert np.linalg.norm(mode.k) == pytest.approx(SHELL_RADIUS * 2.0 ** level, rel=0.1)

    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_neighbouring_levels_turn(self, seed):
        """Consecutive levels are close to orthogonal, levels two apart close to parallel"""
        modes = lacunary_modes(RoughFieldSpec(0.5, 'lacunary', 5, seed, True), Grid((256, 256)))
        unit = [m.k / np.linalg.norm(m.k) for m in modes]
        for j in range(3, 6):
            assert abs(unit[j] @ unit[j - 1]) < 0.45
            assert abs(unit[j] @ unit[j - 2]) > 0.9

    def test_lattice_wavevector_avoids_taken(self, grid64):
        direction = LevelPlane.draw(0, 2).direction(0.3)
        taken = set()
        first = lattice_wavevector(grid64, 3, direction, taken)
        second = lattice_wavevector(grid64, 3, direction, taken)
        assert tuple(first) != tuple(second)
        assert len(taken) == 2
        for k in (first, second):
            assert 8 <= np.linalg.norm(k) < 16
            assert np.any(k % 2 == 1)

    def test_plane_is_orthonormal_3d(self):
        plane = LevelPlane.draw(4, 3)
        np.testing.assert_allclose(plane.basis @ plane.basis.T, np.eye(2), atol=1e-12)


class TestPowerSpectrum:
    def test_divergence_free(self, grid32):
        u = generate(RoughFieldSpec(0.5, 'power-spectrum', 3, 0, True), grid32)
        assert max_divergence(u) < 1e-10

    def test_band_limited(self, grid32):
        """No energy above the top shell"""
        f = generate(RoughFieldSpec(0.5, 'power-spectrum', 1, 0, False), grid32)
        scan = lp_block_scan(f, 2.0)
        assert all(v < 1e-12 for v in scan.norm_values[2:])
        assert scan.norm_values[1] > 0

    def test_block_slope(self):
        f = generate(RoughFieldSpec(0.3, 'power-spectrum', 6, 2, False), Grid((256, 256)))
        scan = lp_block_scan(f, 2.0)
        mid = NormScan(scan.scale_values[2:6], scan.norm_values[2:6], scan.estimator_id)
        assert fit_exponent(mid, None)[0] == pytest.approx(0.3, abs=0.05)


class TestCorpus:
    def test_members_differ(self, grid32):
        members = corpus(RoughFieldSpec(0.4, 'lacunary', 3, 0, True), grid32, 3)
        assert len(members) == 3
        assert not np.allclose(members[0].data, members[1].data)

    def test_empty(self, grid32):
        with pytest.raises(SynthesisError, match='corpus empty'):
            corpus(RoughFieldSpec(0.4), grid32, 0)


def test_max_resolved_level():
    assert max_resolved_level(Grid((128, 128)), 2.0 / 3.0) == 4
    assert max_resolved_level(Grid((256, 256)), 2.0 / 3.0) == 5
    assert max_resolved_level(Grid((64, 64))) == 4


class TestSpaceTimeSeries:
    def test_rate_matches_difference(self, grid32):
        series = SpaceTimeSeries(grid32, 0.5, levels=3, seed=3)
        h = 1e-6
        finite = (series.velocity(0.3 + h) - series.velocity(0.3 - h)) * (1.0 / (2 * h))
        np.testing.assert_allclose(finite.data, series.velocity_rate(0.3).data, atol=1e-5)

    def test_divergence_free(self, grid32):
        series = SpaceTimeSeries(grid32, 0.7, levels=6, seed=1)
        assert max_divergence(series.velocity(0.17)) < 1e-10

    def test_spatial_level_capped(self, grid32):
        series = SpaceTimeSeries(grid32, 0.5, levels=8)
        assert series.spatial_level(1) == 1
        assert series.spatial_level(8) == series.jmax

    def test_rejects_theta(self, grid32):
        with pytest.raises(SynthesisError):
            SpaceTimeSeries(grid32, 1.2)

    def test_product_has_no_drift(self, grid32):
        assert SpaceTimeSeries(grid32, 0.5, levels=3).drift is None

    def test_unknown_kind(self, grid32):
        with pytest.raises(SynthesisError, match='Unknown series kind'):
            SpaceTimeSeries(grid32, 0.5, kind='spiral')


class TestTransportedSeries:
    def test_starts_at_lacunary_field(self, grid64):
        series = SpaceTimeSeries(grid64, 0.6, seed=5, kind='transported')
        u0 = generate(RoughFieldSpec(0.6, 'lacunary', series.jmax, 5, True), grid64)
        np.testing.assert_allclose(series.velocity(0.0).data, u0.data, atol=1e-12)

    def test_is_a_translation(self, grid64):
        """u(t) is u(0) shifted by drift * t"""
        series = SpaceTimeSeries(grid64, 0.6, seed=5, kind='transported')
        t = 0.37
        U = transform(series.velocity(0.0))
        phase = sum(k * c for k, c in zip(grid64.physical_wavenumbers(), series.drift))
        shifted = inverse(SpectralField(grid64, U.coeffs * np.exp(-1j * phase * t)))
        np.testing.assert_allclose(series.velocity(t).data, shifted.data, atol=1e-10)
        assert np.linalg.norm(series.drift) == pytest.approx(1.0)

    def test_rate_matches_difference(self, grid64):
        series = SpaceTimeSeries(grid64, 0.6, seed=1, kind='transported')
        h = 1e-6
        finite = (series.velocity(0.2 + h) - series.velocity(0.2 - h)) * (1.0 / (2 * h))
        np.testing.assert_allclose(finite.data, series.velocity_rate(0.2).data, atol=1e-4)

    def test_divergence_free(self, grid64):
        series = SpaceTimeSeries(grid64, 0.7, seed=2, kind='transported')
        assert max_divergence(series.velocity(0.41)) < 1e-10

    def test_ties_time_exponent(self, grid64):
        with pytest.raises(SynthesisError, match='transported'):
            SpaceTimeSeries(grid64, 0.6, theta_time=0.3, kind='transported')
        with pytest.raises(SynthesisError, match='transported'):
            SpaceTimeSeries(grid64, 0.6, levels=8, kind='transported')


def test_taylor_green_divergence_free(grid32):
    u = taylor_green(grid32)
    assert max_divergence(u) < 1e-12
    assert lp_norm(u, np.inf) == pytest.approx(1.0)
