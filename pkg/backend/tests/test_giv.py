"""
Tests for the granular instrument and the two-stage multiplier estimate
"""
import numpy as np
import pandas as pd
import pytest
from linearmodels.iv import IV2SLS

from app.core.exceptions import DataError
from app.services.datagen.protocols import protocol_shocks
from app.services.datagen.scenarios import MULTIPLIER_BPS, giv_dgp
from app.services.econ.giv import (
    CUM_INSTRUMENT,
    INSTRUMENT,
    INTERACTION,
    abnormal_spread,
    build_giv,
    demean_comparison,
    eta_bootstrap,
    eta_subsample,
    first_stage,
    instrument_lag_structure,
    macro_orthogonality,
    tsls,
)


@pytest.fixture(scope="module")
def noiseless():
    return giv_dgp(3, n_events=25, n_days=500, noisy=False)


@pytest.fixture(scope="module")
def noisy():
    return giv_dgp(3, n_events=50, n_days=1000)


def _giv(scenario):
    return build_giv(scenario.protocols.shocks, scenario.protocols.weights)


@pytest.mark.unit
class TestBuildGiv:
    """Test instrument construction"""

    @pytest.fixture
    def small(self):
        dates = pd.bdate_range("2022-01-03", periods=3)
        weights = pd.DataFrame(
            {"a": [0.2, 0.2, 0.2], "b": [0.3, 0.3, 0.3], "c": [0.1, 0.1, np.nan]}, index=dates
        )
        shocks = pd.DataFrame({"a": [0.0, -0.5, 0.0], "b": [0.0, 0.0, -0.1]}, index=dates)
        return shocks, weights

    def test_demeaned_weighted_sum(self, small):
        """Test Z = sum S (g - mean g) over active protocols"""
        shocks, weights = small
        giv = build_giv(shocks, weights)
        np.testing.assert_allclose(giv.z.iloc[0], 0.0)
        common = -0.5 / 3.0
        expected = 0.2 * (-0.5 - common) + 0.3 * (0.0 - common) + 0.1 * (0.0 - common)
        assert giv.z.iloc[1] == pytest.approx(expected)
        # protocol c is inactive on day 3
        common = -0.1 / 2.0
        assert giv.z.iloc[2] == pytest.approx(0.2 * (0.0 - common) + 0.3 * (-0.1 - common))

    def test_without_demeaning(self, small):
        """Test the raw size-weighted sum"""
        shocks, weights = small
        giv = build_giv(shocks, weights, demean=False)
        np.testing.assert_allclose(giv.z.to_numpy(), [0.0, -0.1, -0.03])

    def test_missing_weight_for_shocked_protocol(self, small):
        """Test a shock without a weight is an error"""
        shocks, weights = small
        shocks = shocks.assign(c=[0.0, 0.0, -0.2])
        with pytest.raises(DataError):
            build_giv(shocks, weights)

    def test_weights_must_not_exceed_one(self, small):
        """Test share totals above one"""
        shocks, weights = small
        with pytest.raises(DataError):
            build_giv(shocks, weights * 2.0)

    def test_protocol_shocks_from_catalog(self, catalog_factory):
        """Test g = -loss / TVL on the event day"""
        dates = pd.bdate_range("2022-01-03", periods=5)
        catalog = catalog_factory([dates[2]])
        table = protocol_shocks(catalog, dates)
        assert table.loc[dates[2], "protocol_00"] == pytest.approx(-0.25)
        assert table["protocol_00"].abs().sum() == pytest.approx(0.25)


@pytest.mark.unit
class TestTsls:
    """Test recovery on the instrument DGP"""

    def test_noiseless_exact_recovery(self, noiseless):
        """Test the multiplier is exact without disturbances"""
        result = tsls(noiseless.panel, _giv(noiseless), noiseless.events, macro=())
        assert result.multiplier == pytest.approx(MULTIPLIER_BPS, abs=1e-8)
        assert result.first_stage.coef(INSTRUMENT) == pytest.approx(-1e11, rel=1e-9)
        assert not result.weak_instrument

    def test_noisy_recovery(self, noisy):
        """Test the estimate is within two SEs of -2.73 with a strong first stage"""
        result = tsls(noisy.panel, _giv(noisy), noisy.events)
        assert result.first_stage_f > 10
        assert result.multiplier == pytest.approx(MULTIPLIER_BPS, abs=2.0 * result.multiplier_se)
        assert result.second_stage.se_flavor == "cluster(event)"
        assert INTERACTION in result.second_stage.names

    def test_second_stage_matches_formula_iv(self, noisy):
        """Test coefficient and clustered SE against an independently specified IV2SLS"""
        result = tsls(noisy.panel, _giv(noisy), noisy.events)
        frame = result.stage2_frame
        reference = IV2SLS.from_formula(
            f"abnormal_spread ~ 1 + post + C(event_id) + [{INTERACTION} ~ {CUM_INSTRUMENT}]",
            frame,
        ).fit(cov_type="clustered", clusters=frame["event_id"], debiased=True)
        assert result.second_stage.coef(INTERACTION) == pytest.approx(
            reference.params[INTERACTION], rel=1e-8
        )
        assert result.second_stage.se_of(INTERACTION) == pytest.approx(
            reference.std_errors[INTERACTION], rel=1e-6
        )

    def test_interaction_cumulates_post_event_flow(self, noisy):
        """Test the endogenous regressor and its instrument cumulate from the event day"""
        frame = tsls(noisy.panel, _giv(noisy), noisy.events).stage2_frame
        post_flow = frame["net_redemption_usd"] * frame["post"]
        expected = post_flow.groupby(frame["event_id"]).cumsum()
        np.testing.assert_allclose(frame[INTERACTION], expected)
        assert (frame.loc[frame["k"] < 0, [INTERACTION, CUM_INSTRUMENT]] == 0.0).all().all()

    def test_irrelevant_instrument_flagged(self):
        """Test weak-instrument warning when flows ignore Z"""
        scenario = giv_dgp(5, n_events=30, n_days=600, relevant=False)
        result = tsls(scenario.panel, _giv(scenario), scenario.events)
        assert result.weak_instrument
        assert any("weak instrument" in w for w in result.warnings)

    def test_first_stage_newey_west(self, noisy):
        """Test first-stage flavor and lag"""
        fit = first_stage(noisy.panel, _giv(noisy), nw_lag=2)
        assert fit.se_flavor == "NeweyWest(2)"

    def test_abnormal_spread_without_factors(self, noisy):
        """Test plain cumulation of spread changes"""
        series = abnormal_spread(noisy.panel)
        spread = noisy.panel.frame["cp_spread_bps"]
        np.testing.assert_allclose(series.to_numpy(), (spread - spread.iloc[0]).to_numpy())


@pytest.mark.unit
class TestEtaInference:
    """Test bootstrap and subsample readings of eta"""

    def test_bootstrap_centers_on_point_estimate(self, noisy):
        """Test the event bootstrap median sits near 1 - beta"""
        result = tsls(noisy.panel, _giv(noisy), noisy.events)
        draws = eta_bootstrap(result, n_boot=50, rng_seed=1)
        assert len(draws) == 50
        eta_hat = 1.0 - result.multiplier
        spread = 4.0 * result.multiplier_se
        assert abs(np.nanmedian(draws["eta"]) - eta_hat) < spread

    def test_bootstrap_reproducible(self, noisy):
        """Test same seed, same draws"""
        result = tsls(noisy.panel, _giv(noisy), noisy.events)
        a = eta_bootstrap(result, n_boot=10, rng_seed=2, threads=1)
        b = eta_bootstrap(result, n_boot=10, rng_seed=2, threads=2)
        pd.testing.assert_frame_equal(a, b)

    def test_subsample_rows(self, noisy):
        """Test a split inside the sample gives two rows"""
        result = tsls(noisy.panel, _giv(noisy), noisy.events)
        middle = noisy.panel.dates[len(noisy.panel.dates) // 2]
        table = eta_subsample(result, str(middle.date()))
        assert list(table["subsample"]) == ["before", "after"]
        assert table["n_events"].sum() == result.stage2_frame["event_id"].nunique()


@pytest.mark.unit
class TestInstrumentDiagnostics:
    """Test the robustness tables around the instrument"""

    def test_lag_structure(self, noisy):
        """Test lag 1 carries the first stage"""
        table = instrument_lag_structure(noisy.panel, _giv(noisy))
        assert list(table["lag"]) == [0, 1, 2, 3]
        strongest = table.loc[table["t"].abs().idxmax(), "lag"]
        assert strongest == 1

    def test_macro_orthogonality(self, noisy):
        """Test the joint test on macro factors is stored"""
        fit = macro_orthogonality(_giv(noisy), noisy.panel)
        assert fit.test("macro_joint").df1 == 3

    def test_demean_comparison(self, noisy):
        """Test both instruments are described and correlated"""
        out = demean_comparison(noisy.protocols.shocks, noisy.protocols.weights)
        assert list(out["describe"].index) == ["standard", "no_demean"]
        assert -1.0 <= out["correlation"] <= 1.0


@pytest.mark.slow
class TestGivCoverage:
    """Monte Carlo recovery of the multiplier"""

    def test_coverage_and_first_stage_strength(self):
        """Test two-SE coverage and F > 10 across seeds"""
        n_seeds = 200
        hits = strong = 0
        for seed in range(n_seeds):
            scenario = giv_dgp(seed)
            result = tsls(scenario.panel, _giv(scenario), scenario.events)
            hits += abs(result.multiplier - MULTIPLIER_BPS) <= 2.0 * result.multiplier_se
            strong += result.first_stage_f > 10
        assert hits / n_seeds >= 0.90
        assert strong / n_seeds >= 0.95
