"""
Tests for covariate-matched placebo inference
"""
import numpy as np
import pytest
from scipy import stats

from app.core.exceptions import EmptyPoolError, EstimatorError
from app.core.panels import EventCatalog
from app.services.datagen.panels import build_stacked_panel
from app.services.datagen.scenarios import event_study_dgp
from app.services.econ.event_study import event_study
from app.services.econ.placebo import candidate_pool, placebo


@pytest.fixture(scope="module")
def scenario():
    return event_study_dgp(11, n_events=20, n_days=600)


@pytest.fixture(scope="module")
def real_fit(scenario):
    stacked = build_stacked_panel(scenario.panel, scenario.events, window=(-5, 3))
    return event_study(stacked)


@pytest.mark.unit
class TestCandidatePool:
    """Test the pseudo-event pool"""

    def test_filters_applied_in_order(self, scenario):
        """Test each filter can only shrink the pool"""
        pool, diagnostics = candidate_pool(scenario.panel, scenario.events, (-5, 3))
        counts = [diagnostics[name] for name in (
            "calendar_days", "window_coverage", "outside_exclusion", "matched_vix",
            "matched_spread",
        )]
        assert counts == sorted(counts, reverse=True)
        assert len(pool) == diagnostics["matched_spread"] > 0

    def test_pool_excludes_event_neighborhood(self, scenario):
        """Test no candidate lies within the exclusion zone"""
        pool, _ = candidate_pool(scenario.panel, scenario.events, (-5, 3), exclusion_days=10)
        gaps = np.abs(
            (pool.values[:, None] - scenario.events.dates.values[None, :]) / np.timedelta64(1, "D")
        )
        assert gaps.min() > 10

    def test_empty_pool_names_constraint(self, scenario):
        """Test the error reports where the pool ran dry"""
        with pytest.raises(EmptyPoolError) as info:
            candidate_pool(scenario.panel, scenario.events, (-5, 3), vix_tol=1e-12)
        assert "matched_vix" in str(info.value)
        assert info.value.diagnostics["matched_vix"] == 0


@pytest.mark.unit
class TestPlacebo:
    """Test the placebo distribution and p-values"""

    def test_real_effect_is_extreme(self, scenario, real_fit):
        """Test post-event p-values are zero when every placebo is above the real step"""
        result = placebo(real_fit, scenario.panel, scenario.events, n_draws=20, n_dates=20,
                         rng_seed=1)
        assert result.n_draws == 20
        table = result.table()
        assert list(table["k"]) == [-5, -4, -3, -2, 0, 1, 2, 3]
        assert (table.loc[table["k"] >= 0, "p_empirical"] == 0.0).all()
        assert table["p_empirical"].between(0.0, 1.0).all()

    def test_reproducible_across_threads(self, scenario, real_fit):
        """Test identical draws for one and two workers"""
        a = placebo(real_fit, scenario.panel, scenario.events, n_draws=6, n_dates=15,
                    rng_seed=2, threads=1)
        b = placebo(real_fit, scenario.panel, scenario.events, n_draws=6, n_dates=15,
                    rng_seed=2, threads=2)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_draws_frame_long_format(self, scenario, real_fit):
        """Test one row per draw and coefficient"""
        result = placebo(real_fit, scenario.panel, scenario.events, n_draws=4, n_dates=15,
                         rng_seed=3)
        frame = result.draws_frame()
        assert list(frame.columns) == ["draw", "term", "coef"]
        assert len(frame) == 4 * 8

    def test_needs_real_events(self, scenario, real_fit):
        """Test an empty catalog is rejected"""
        with pytest.raises(EstimatorError):
            placebo(real_fit, scenario.panel, EventCatalog.empty(), n_draws=2)


@pytest.mark.slow
class TestPlaceboSize:
    """Placebo p-values under the null and under a real step"""

    @staticmethod
    def _day0_p(seed: int, delta_0: float) -> float:
        scenario = event_study_dgp(seed, n_events=20, n_days=1000, delta_0=delta_0)
        stacked = build_stacked_panel(scenario.panel, scenario.events, window=(-5, 3))
        result = placebo(event_study(stacked), scenario.panel, scenario.events,
                         n_draws=200, n_dates=20, rng_seed=seed)
        return float(result.p_values[result.ks.index(0)])

    def test_null_p_values_uniform(self):
        """Test the day-0 p-value is uniform over 300 seeds without an effect"""
        p_values = [self._day0_p(seed, 0.0) for seed in range(300)]
        assert stats.kstest(p_values, "uniform").pvalue > 0.01

    def test_three_bps_step_detected(self):
        """Test a -3 bps step gives a day-0 p-value below 1% in at least 95% of seeds"""
        n_seeds = 100
        small = sum(self._day0_p(seed, -3.0) < 0.01 for seed in range(n_seeds))
        assert small / n_seeds >= 0.95
