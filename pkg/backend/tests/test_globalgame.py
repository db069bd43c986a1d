"""
Tests for global-game run thresholds
"""
import numpy as np
import pytest

from app.core.exceptions import DomainError
from app.services.globalgame.thresholds import (
    GameParams,
    GasMap,
    PowerDistortion,
    TabulatedDistortion,
    ambiguous_threshold,
    avg_congestion,
    gas_threshold,
    run_threshold,
    threshold_report,
)


@pytest.mark.unit
class TestRunThreshold:
    """Test the ambiguity-neutral threshold"""

    def test_reference_congestion(self):
        """Test default cost curve averages to 0.2 and the threshold is 0.8"""
        c_bar = avg_congestion(GameParams())
        assert c_bar == pytest.approx(0.2)
        assert run_threshold(c_bar) == pytest.approx(0.8)

    def test_linear_congestion(self):
        """Test lambda = 1 halves the slope"""
        assert avg_congestion(GameParams(phi0_g=0.0, gamma_g=0.4, lambda_g=1.0)) == pytest.approx(
            0.2
        )

    @pytest.mark.parametrize("c_bar", [-0.1, 1.5])
    def test_out_of_range(self, c_bar):
        """Test congestion outside [0, 1]"""
        with pytest.raises(DomainError):
            run_threshold(c_bar)

    @pytest.mark.parametrize(
        "kwargs", [{"gamma_g": -1.0}, {"lambda_g": 0.5}, {"ambiguity_a": 0.9}]
    )
    def test_params_validated(self, kwargs):
        """Test parameter guards"""
        with pytest.raises(DomainError):
            GameParams(**kwargs)


@pytest.mark.unit
class TestAmbiguousThreshold:
    """Test thresholds under distorted survival beliefs"""

    def test_no_ambiguity_matches_neutral(self):
        """Test a = 1 reproduces the neutral threshold"""
        assert ambiguous_threshold(0.2, 1.0) == pytest.approx(run_threshold(0.2))

    @pytest.mark.parametrize("a", [1.5, 2.0, 3.0, 5.0])
    def test_ambiguity_raises_threshold(self, a):
        """Test runs start earlier when beliefs are distorted"""
        assert ambiguous_threshold(0.2, a) > run_threshold(0.2)

    def test_power_closed_form(self):
        """Test theta = (1 - C)^(1/a)"""
        assert ambiguous_threshold(0.2, 2.0) == pytest.approx(np.sqrt(0.8))

    def test_increasing_in_exponent(self):
        """Test stronger ambiguity, higher threshold"""
        values = [ambiguous_threshold(0.3, a) for a in (1.0, 2.0, 3.0, 4.0)]
        assert np.all(np.diff(values) > 0)

    def test_tabulated_matches_power(self):
        """Test a tabulated power distortion inverts like the closed form"""
        p = np.linspace(0.0, 1.0, 201)
        table = TabulatedDistortion(p, p**2)
        assert ambiguous_threshold(0.2, distortion=table) == pytest.approx(np.sqrt(0.8), abs=1e-4)

    def test_tabulated_requires_increasing_grid(self):
        """Test a non-monotone table is rejected"""
        with pytest.raises(DomainError):
            TabulatedDistortion([0.0, 0.5, 0.4], [0.0, 0.2, 0.3])

    def test_power_distortion_round_trip(self):
        """Test inverse undoes value"""
        psi = PowerDistortion(3.0)
        assert psi.inverse(psi.value(0.7)) == pytest.approx(0.7)


@pytest.mark.unit
class TestGasMapping:
    """Test the bridge to observable gas"""

    def test_flat_map_returns_intercept(self):
        """Test the default map pins the estimated threshold"""
        assert gas_threshold(0.9, GasMap()) == pytest.approx(32.93)

    def test_affine_map(self):
        """Test slope on the congestion margin"""
        assert gas_threshold(0.8, GasMap(slope=10.0, intercept=30.0)) == pytest.approx(32.0)

    def test_report_keys(self):
        """Test the report collects every threshold"""
        report = threshold_report(GameParams(), GasMap())
        assert set(report) == {"c_bar", "theta_star", "theta_star_amb", "gas_threshold_gwei"}
        assert report["theta_star_amb"] > report["theta_star"]
