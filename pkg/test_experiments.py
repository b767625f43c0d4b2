"""
Tests for the claim runners
"""
import pytest

from services.experiments import molli, molli_windows, mollifier_widths, pressure_double, time_reg
from services.grid import Grid
from utils.config import ExperimentConfig


def test_mollifier_widths():
    assert mollifier_widths(Grid((256, 256))) == pytest.approx([2.0 ** -n for n in range(1, 7)])
    assert mollifier_widths(Grid((32, 32))) == pytest.approx([0.5, 0.25, 0.125])


def test_molli_windows():
    assert molli_windows(6, 0.5) == {'error': (1, 3), 'derivative': (4, 6), 'commutator': (3, 5)}
    assert molli_windows(6, 0.3)['commutator'] == (1, 3)
    assert molli_windows(6, 0.95)['commutator'] == (4, 6)


class TestMolli:
    @pytest.mark.parametrize('theta', [0.3, 0.5, 0.7])
    def test_slopes(self, tmp_path, theta):
        config = ExperimentConfig(claim='molli', theta=theta, corpus_size=1)
        report = molli(config, str(tmp_path))
        slopes = report.fitted['slopes']
        assert slopes['error'][0] == pytest.approx(theta, abs=0.1)
        assert slopes['derivative'][0] == pytest.approx(theta - 1.0, abs=0.1)
        assert slopes['commutator'][0] == pytest.approx(2.0 * theta, abs=0.15)
        assert report.passed
        assert (tmp_path / 'molli_scans.csv').exists()


class TestTimeReg:
    @pytest.mark.parametrize('claim', ['ii', 'iii', 'iv'])
    def test_pressure_claims(self, tmp_path, claim):
        config = ExperimentConfig(claim='time-reg', time_claim=claim, theta=0.7, grid='128x128', seed=2)
        report = time_reg(config, str(tmp_path))
        assert report.claim == f'time-reg-{claim}'
        assert report.passed

    def test_claim_i_with_split_bound(self, tmp_path):
        config = ExperimentConfig(claim='time-reg', time_claim='i', theta=0.5, seed=3)
        report = time_reg(config, str(tmp_path))
        assert report.fitted['exponent'] == pytest.approx(0.5, abs=0.1)
        assert report.fitted['split_bound_exponent'] >= 0.4
        assert report.fitted['split_bound_passed']
        assert report.passed
        assert (tmp_path / 'time_reg_scans.csv').exists()


def test_pressure_double_runner(tmp_path):
    config = ExperimentConfig(claim='pressure-double', theta=0.4, corpus_size=3, seed=4)
    report = pressure_double(config, str(tmp_path))
    assert report.fitted['min_exponent'] >= 0.65
    assert max(report.fitted['bilinear_ratios'].values()) <= 100
    assert report.passed
