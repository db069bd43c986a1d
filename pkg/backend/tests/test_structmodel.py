"""
Tests for the structural transmission chain and path simulation
"""
import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import AlignmentError, DomainError
from app.services.structmodel.params import NoiseConfig, StructuralParams
from app.services.structmodel.simulation import simulate_path
from app.services.structmodel.transmission import (
    PRICE_UNIT_USD,
    availability,
    excess_supply,
    friction,
    net_redemption,
    network_state,
    redemption_demand,
    spread_change,
)


@pytest.mark.unit
class TestNetworkSector:
    """Test availability and friction"""

    def test_availability_linear_then_clamped(self):
        """Test availability falls linearly and stops at zero"""
        assert availability(0.0, 0.002) == 1.0
        assert availability(100.0, 0.002) == pytest.approx(0.8)
        assert availability(1e6, 0.002) == 0.0

    def test_availability_broadcasts(self):
        """Test array input returns an array of the same shape"""
        out = availability(np.array([0.0, 250.0, 900.0]), 0.002)
        np.testing.assert_allclose(out, [1.0, 0.5, 0.0])

    def test_availability_rejects_negative_intensity(self):
        """Test negative intensity is outside the domain"""
        with pytest.raises(DomainError):
            availability(-1.0, 0.002)

    def test_friction_baseline_and_full_outage(self):
        """Test friction at full and zero availability"""
        assert friction(1.0, 20.0, 200.0, 2.0) == pytest.approx(20.0)
        assert friction(0.0, 20.0, 200.0, 2.0) == pytest.approx(220.0)
        assert friction(0.8, 20.0, 200.0, 2.0) == pytest.approx(28.0)

    def test_friction_rejects_out_of_range_availability(self):
        """Test availability above one raises"""
        with pytest.raises(DomainError):
            friction(1.2, 20.0, 200.0, 2.0)

    def test_friction_decreasing_in_availability(self):
        """Test friction is monotone"""
        values = friction(np.linspace(0, 1, 11), 20.0, 200.0, 2.0)
        assert np.all(np.diff(values) < 0)

    def test_network_state(self, structural_params):
        """Test composed network state"""
        state = network_state(100.0, structural_params)
        assert state.availability == pytest.approx(0.8)
        assert state.friction == pytest.approx(28.0)


@pytest.mark.unit
class TestFlowSector:
    """Test redemption and price response"""

    def test_panic_switches_on_strictly_below_bar(self, structural_params):
        """Test the panic premium at and below omega_bar"""
        at_bar = redemption_demand(0.0, structural_params.omega_bar, structural_params)
        below = redemption_demand(0.0, structural_params.omega_bar - 1e-9, structural_params)
        assert at_bar == pytest.approx(structural_params.rho0)
        assert below == pytest.approx(structural_params.rho0 + structural_params.rho2)

    def test_negative_crypto_return_raises_demand(self, structural_params):
        """Test demand rises when crypto falls"""
        assert redemption_demand(-0.1, 1.0, structural_params) > redemption_demand(
            0.1, 1.0, structural_params
        )

    def test_net_redemption_discounted_by_friction(self):
        """Test realized flow shrinks with gas"""
        assert net_redemption(1.0, 0.0, 0.01) == pytest.approx(1.0)
        assert net_redemption(1.0, 100.0, 0.01) == pytest.approx(0.5)

    def test_net_redemption_rejects_negative_friction(self):
        """Test negative gas is rejected"""
        with pytest.raises(DomainError):
            net_redemption(1.0, -1.0, 0.01)

    def test_excess_supply_sign(self):
        """Test the supply sign flips at eta = 1"""
        assert excess_supply(1.0, 0.5) > 0
        assert excess_supply(1.0, 1.0) == 0
        assert excess_supply(1.0, 3.73) < 0

    def test_spread_change_at_baseline_eta(self):
        """Test one unit of redemptions at eta 3.73 narrows the spread by 2.73 bps"""
        assert spread_change(1.0, 3.73, 1.0) == pytest.approx(-2.73)

    @pytest.mark.parametrize("eta", [0.0, 0.5, 0.99])
    def test_spread_widens_when_recycling_is_weak(self, eta):
        """Test positive response for eta below one"""
        assert spread_change(1.0, eta, 1.0) > 0

    @pytest.mark.parametrize("eta", [1.01, 2.0, 6.46])
    def test_spread_narrows_when_recycling_dominates(self, eta):
        """Test negative response for eta above one"""
        assert spread_change(1.0, eta, 1.0) < 0

    def test_spread_change_zero_redemption(self):
        """Test no flow, no response"""
        assert spread_change(0.0, 3.73, 1.0) == 0

    def test_spread_change_rejects_non_positive_impact(self):
        """Test lambda_price must be positive"""
        with pytest.raises(DomainError):
            spread_change(1.0, 3.73, 0.0)


@pytest.mark.unit
class TestStructuralParams:
    """Test parameter validation"""

    def test_defaults_are_valid(self):
        """Test the default calibration constructs"""
        params = StructuralParams()
        assert params.to_dict()["eta"] == pytest.approx(3.73)

    @pytest.mark.parametrize(
        "field,value",
        [("kappa", -1.0), ("phi1", 0.0), ("gamma_c", 0.5), ("omega_bar", 1.0), ("psi", 0.0)],
    )
    def test_invalid_values_rejected(self, field, value):
        """Test each guarded field"""
        with pytest.raises(DomainError):
            StructuralParams(**{field: value})

    def test_noise_config_rejects_negative_sd(self):
        """Test noise SD must be non-negative"""
        with pytest.raises(DomainError):
            NoiseConfig(noise_sd_bps=-1.0)


@pytest.mark.unit
class TestSimulatePath:
    """Test daily simulation"""

    @pytest.fixture
    def calendar10(self):
        return pd.bdate_range("2022-03-01", periods=10)

    def test_quiet_path_stays_at_baseline(self, calendar10, structural_params, noise_free):
        """Test zero shocks and zero returns leave the spread flat"""
        zeros = pd.Series(0.0, index=calendar10)
        panel = simulate_path(zeros, zeros, structural_params, noise_free, rng_seed=1)
        np.testing.assert_allclose(panel.frame["cp_spread_bps"], noise_free.baseline_spread_bps)
        np.testing.assert_allclose(panel.frame["gas_gwei"], structural_params.phi0)
        assert len(panel.states) == 10

    def test_shock_day_matches_closed_form(self, calendar10, structural_params, noise_free):
        """Test the spread step on a panic day equals the composed chain"""
        shocks = pd.Series(0.0, index=calendar10)
        shocks.iloc[4] = 2e8  # intensity 200, availability 0.6
        returns = pd.Series(0.0, index=calendar10)
        panel = simulate_path(shocks, returns, structural_params, noise_free, rng_seed=1)

        state = panel.state_on(calendar10[4])
        assert state.network.availability == pytest.approx(0.6)
        phi = 20.0 + 200.0 * 0.4**2
        realized = structural_params.rho2 / (1.0 + structural_params.psi * phi)
        step = (1.0 - 3.73) * realized * noise_free.float_usd / PRICE_UNIT_USD
        spread = panel.frame["cp_spread_bps"].to_numpy()
        assert spread[4] - spread[3] == pytest.approx(step)
        assert panel.frame["gas_gwei"].iloc[4] == pytest.approx(phi)
        assert panel.frame["net_redemption_usd"].iloc[4] == pytest.approx(
            realized * noise_free.float_usd
        )

    def test_level_accumulates_changes(self, calendar10, structural_params, noise_free):
        """Test the latent level is the running sum of daily changes"""
        rng = np.random.default_rng(0)
        returns = pd.Series(rng.normal(0, 0.03, 10), index=calendar10)
        shocks = pd.Series(0.0, index=calendar10)
        panel = simulate_path(shocks, returns, structural_params, noise_free, rng_seed=1)
        changes = np.array([s.flow.spread_change for s in panel.states])
        np.testing.assert_allclose(
            panel.frame["cp_spread_bps"], noise_free.baseline_spread_bps + np.cumsum(changes)
        )

    def test_reversion_pulls_level_back(self, calendar10, structural_params):
        """Test a panic step decays geometrically toward the baseline"""
        shocks = pd.Series(0.0, index=calendar10)
        shocks.iloc[4] = 2e8
        zeros = pd.Series(0.0, index=calendar10)
        noise = NoiseConfig(noise_sd_bps=0.0, reversion=0.1)
        panel = simulate_path(shocks, zeros, structural_params, noise, rng_seed=1)
        gap = panel.frame["cp_spread_bps"].to_numpy() - noise.baseline_spread_bps
        assert gap[4] < 0
        np.testing.assert_allclose(gap[5:], gap[4] * 0.9 ** np.arange(1, 6))

    def test_default_layer_keeps_long_paths_positive(self, structural_params):
        """Test four years of crypto returns and panic exploits do not drive spreads negative"""
        dates = pd.bdate_range("2021-01-04", periods=1000)
        rng = np.random.default_rng(42)
        returns = pd.Series(rng.normal(0.0018, 0.0394, 1000), index=dates)
        shocks = pd.Series(0.0, index=dates)
        shocks.iloc[25::50] = 2e8
        panel = simulate_path(shocks, returns, structural_params, NoiseConfig(), rng_seed=42)
        spread = panel.frame["cp_spread_bps"]
        assert spread.min() > 0.0
        assert abs(spread.mean() - NoiseConfig().baseline_spread_bps) < 3.0

    def test_reversion_outside_unit_interval(self):
        """Test reversion must lie in [0, 1]"""
        with pytest.raises(DomainError):
            NoiseConfig(reversion=1.5)

    def test_same_seed_same_noise(self, calendar10, structural_params):
        """Test observation noise is reproducible"""
        zeros = pd.Series(0.0, index=calendar10)
        a = simulate_path(zeros, zeros, structural_params, NoiseConfig(), rng_seed=3)
        b = simulate_path(zeros, zeros, structural_params, NoiseConfig(), rng_seed=3)
        pd.testing.assert_frame_equal(a.frame, b.frame)

    def test_misaligned_inputs_raise(self, calendar10, structural_params):
        """Test shock and return series must share dates"""
        shocks = pd.Series(0.0, index=calendar10)
        returns = pd.Series(0.0, index=calendar10[1:])
        with pytest.raises(AlignmentError):
            simulate_path(shocks, returns, structural_params)
