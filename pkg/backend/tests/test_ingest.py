"""
Tests for series parsing, alignment, event parsing and the CSV writers
"""
import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import DataError, DomainError
from app.services.datagen.events import trading_calendar
from app.services.ingest.cleaning import winsorize
from app.services.ingest.events import parse_events, read_date_list
from app.services.ingest.series import align_and_fill, parse_series
from app.services.ingest.writers import (
    read_holdings,
    read_panel,
    read_weights,
    write_events,
    write_holdings,
    write_panel,
    write_weights,
)

EVENTS_HEADER = "date,protocol,chain,loss_usd,tvl_usd,gas_gwei,session,disclosure_date\n"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.unit
class TestParseSeries:
    """Test two-column series files"""

    def test_fred_missing_marker(self, tmp_path):
        """Test '.' and empty cells are missing in FRED files"""
        path = write(tmp_path, "cp.csv",
                     "DATE,DCPN3M\n2022-01-03,0.10\n2022-01-04,.\n2022-01-05,\n2022-01-06,0.12\n")
        series = parse_series(path)
        assert series.name == "DCPN3M"
        assert len(series) == 4
        assert series.values.isna().sum() == 2
        assert series.values.iloc[-1] == pytest.approx(0.12)

    def test_plain_csv_rejects_dot(self, tmp_path):
        """Test '.' is malformed outside the FRED format"""
        path = write(tmp_path, "vix.csv", "date,vix\n2022-01-03,17.2\n2022-01-04,.\n")
        with pytest.raises(DataError) as info:
            parse_series(path, fmt="plain_csv")
        assert info.value.line == 3

    def test_bad_date_line_number(self, tmp_path):
        """Test unparseable date reports its line"""
        path = write(tmp_path, "vix.csv", "date,vix\n2022-01-03,17.2\n2022/01/04,18.0\n")
        with pytest.raises(DataError) as info:
            parse_series(path, fmt="plain_csv")
        assert info.value.line == 3

    def test_duplicate_date(self, tmp_path):
        """Test repeated dates"""
        path = write(tmp_path, "vix.csv", "date,vix\n2022-01-03,17.2\n2022-01-03,18.0\n")
        with pytest.raises(DataError, match="duplicate"):
            parse_series(path, fmt="plain_csv")

    def test_unknown_format(self, tmp_path):
        """Test invalid format name"""
        with pytest.raises(DataError):
            parse_series(tmp_path / "x.csv", fmt="excel")


@pytest.mark.unit
class TestAlignAndFill:
    """Test calendar alignment"""

    def _series(self, tmp_path, name, rows):
        text = "date,value\n" + "".join(f"{d},{v}\n" for d, v in rows)
        return parse_series(write(tmp_path, f"{name}.csv", text), fmt="plain_csv", name=name)

    def test_forward_fill_and_overlap(self, tmp_path):
        """Test the calendar is the overlap and short gaps carry the last value"""
        cp = self._series(tmp_path, "cp", [("2022-01-03", 0.5), ("2022-01-05", 0.7),
                                           ("2022-01-07", 0.8)])
        tb = self._series(tmp_path, "tb", [("2022-01-04", 0.1), ("2022-01-05", 0.1),
                                           ("2022-01-06", 0.2), ("2022-01-07", 0.2)])
        panel = align_and_fill({"cp": cp, "tb": tb}, spreads={"cp_spread_bps": ("cp", "tb")})
        assert list(panel.dates.strftime("%Y-%m-%d")) == [
            "2022-01-04", "2022-01-05", "2022-01-06", "2022-01-07"
        ]
        np.testing.assert_allclose(panel.frame["cp"], [0.5, 0.7, 0.7, 0.8])
        np.testing.assert_allclose(panel.frame["cp_spread_bps"], [40.0, 60.0, 50.0, 60.0])

    def test_gap_too_long(self, tmp_path):
        """Test a run of missing days beyond max_gap"""
        cp = self._series(tmp_path, "cp", [("2022-01-03", 0.5), ("2022-01-14", 0.7)])
        with pytest.raises(DataError, match="consecutive missing"):
            align_and_fill({"cp": cp}, max_gap=5)

    def test_no_overlap(self, tmp_path):
        """Test disjoint coverage"""
        a = self._series(tmp_path, "a", [("2022-01-03", 1.0)])
        b = self._series(tmp_path, "b", [("2022-02-03", 1.0)])
        with pytest.raises(DataError, match="overlapping"):
            align_and_fill({"a": a, "b": b})

    def test_spread_needs_columns(self, tmp_path):
        """Test spread definition naming a missing rate"""
        a = self._series(tmp_path, "a", [("2022-01-03", 1.0), ("2022-01-04", 1.0)])
        with pytest.raises(DataError):
            align_and_fill({"a": a}, spreads={"s": ("a", "tbill")})


@pytest.mark.unit
class TestParseEvents:
    """Test exploit list parsing and session alignment"""

    def test_session_alignment(self, tmp_path):
        """Test after-hours and weekend events move to the next trading day"""
        path = write(
            tmp_path, "events.csv",
            EVENTS_HEADER
            + "2022-01-05,alpha,ethereum,1e6,1e7,30,regular,\n"
            + "2022-01-07,beta,ethereum,2e6,1e7,40,after_hours,\n"
            + "2022-01-15,gamma,bsc,3e6,1e7,5,weekend,\n",
        )
        events = parse_events(path)
        assert list(events.dates.strftime("%Y-%m-%d")) == ["2022-01-05", "2022-01-10", "2022-01-17"]
        assert "disclosure_date" not in events.frame.columns
        assert list(events.frame["protocol"]) == ["alpha", "beta", "gamma"]

    def test_calendar_holiday_rolls_forward(self, tmp_path):
        """Test a date missing from the trading calendar"""
        calendar = trading_calendar("2022-01-03", periods=10, holidays=["2022-01-05"])
        path = write(tmp_path, "events.csv",
                     EVENTS_HEADER + "2022-01-05,alpha,ethereum,1e6,1e7,30,regular,\n")
        assert parse_events(path, calendar).dates[0] == pd.Timestamp("2022-01-06")

    def test_disclosure_date(self, tmp_path):
        """Test t=0 moves to the disclosure day unless switched off"""
        path = write(tmp_path, "events.csv",
                     EVENTS_HEADER + "2022-01-05,alpha,ethereum,1e6,1e7,30,regular,2022-01-12\n")
        disclosed = parse_events(path)
        assert disclosed.dates[0] == pd.Timestamp("2022-01-12")
        assert disclosed.frame["occurrence_date"].iloc[0] == pd.Timestamp("2022-01-05")
        assert parse_events(path, use_disclosure=False).dates[0] == pd.Timestamp("2022-01-05")

    def test_loss_above_tvl(self, tmp_path):
        """Test loss larger than TVL reports its line"""
        path = write(tmp_path, "events.csv",
                     EVENTS_HEADER + "2022-01-05,alpha,ethereum,1e6,1e7,30,regular,\n"
                     + "2022-01-06,beta,ethereum,5e7,1e7,30,regular,\n")
        with pytest.raises(DataError) as info:
            parse_events(path)
        assert info.value.line == 3

    @pytest.mark.parametrize("field,value", [("gas_gwei", "fast"), ("session", "lunch")])
    def test_malformed_fields(self, tmp_path, field, value):
        """Test malformed numeric and session fields"""
        row = {"gas_gwei": "30", "session": "regular"}
        row[field] = value
        path = write(tmp_path, "events.csv",
                     EVENTS_HEADER
                     + f"2022-01-05,alpha,ethereum,1e6,1e7,{row['gas_gwei']},{row['session']},\n")
        with pytest.raises(DataError):
            parse_events(path)

    def test_missing_columns(self, tmp_path):
        """Test header without the required columns"""
        path = write(tmp_path, "events.csv", "date,protocol\n2022-01-05,alpha\n")
        with pytest.raises(DataError, match="missing columns"):
            parse_events(path)

    def test_date_list(self, tmp_path):
        """Test comments and blank lines are skipped"""
        path = write(tmp_path, "holidays.txt", "# market holidays\n2022-01-17\n\n2022-02-21\n")
        assert list(read_date_list(path).strftime("%Y-%m-%d")) == ["2022-01-17", "2022-02-21"]


@pytest.mark.unit
class TestWinsorize:
    """Test percentile clipping"""

    def test_linear_percentiles(self):
        """Test 1..100 clipped at the 5th and 95th percentiles"""
        clipped = winsorize(np.arange(1.0, 101.0), 5.0, 95.0)
        assert clipped.min() == pytest.approx(5.95)
        assert clipped.max() == pytest.approx(95.05)

    def test_series_keeps_index_and_nan(self):
        """Test Series input keeps its index and NaNs"""
        values = pd.Series([1.0, np.nan, 3.0, 100.0], index=list("abcd"))
        out = winsorize(values, 0.0, 50.0)
        assert list(out.index) == list("abcd")
        assert np.isnan(out["b"])
        assert out["d"] == pytest.approx(3.0)

    def test_bad_bounds(self):
        """Test inverted percentiles"""
        with pytest.raises(DomainError):
            winsorize(np.arange(5.0), 90.0, 10.0)

    def test_empty(self):
        """Test all-missing input"""
        with pytest.raises(DataError):
            winsorize(np.array([np.nan, np.nan]))


@pytest.mark.unit
class TestWriters:
    """Test files written by the toolkit read back unchanged"""

    def test_panel(self, tmp_path, flat_panel):
        """Test panel values and dates survive a write and read"""
        path = write_panel(flat_panel, tmp_path / "panel.csv")
        pd.testing.assert_frame_equal(read_panel(path).frame, flat_panel.frame, check_freq=False)

    def test_events(self, tmp_path, toy_catalog):
        """Test written events parse to the same dates and losses"""
        path = write_events(toy_catalog, tmp_path / "events.csv")
        parsed = parse_events(path)
        assert parsed.dates.equals(toy_catalog.dates)
        np.testing.assert_allclose(parsed.frame["loss_usd"], toy_catalog.frame["loss_usd"])

    def test_holdings(self, tmp_path):
        """Test months are written as YYYY-MM and read back as periods"""
        holdings = pd.DataFrame({
            "month": pd.period_range("2022-01", periods=3, freq="M"),
            "prime_cp_share": [0.2, 0.25, 0.3],
            "hack_month": [0.0, 1.0, 0.0],
        })
        path = write_holdings(holdings, tmp_path / "holdings.csv")
        assert "2022-02" in path.read_text(encoding="utf-8")
        pd.testing.assert_frame_equal(read_holdings(path), holdings)

    def test_weights_keep_inactive_cells(self, tmp_path):
        """Test inactive protocols stay missing"""
        weights = pd.DataFrame(
            {"protocol_00": [0.6, 1.0], "protocol_01": [0.4, np.nan]},
            index=pd.DatetimeIndex(["2022-01-03", "2022-01-04"], name="date"),
        )
        read = read_weights(write_weights(weights, tmp_path / "weights.csv"))
        pd.testing.assert_frame_equal(read, weights)

    def test_unreadable_panel(self, tmp_path):
        """Test a panel without a date column"""
        path = write(tmp_path, "panel.csv", "x,y\n1,2\n")
        with pytest.raises(DataError):
            read_panel(path)
