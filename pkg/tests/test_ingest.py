import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstdyn.errors import DataError, DimensionError, ParseError
from mstdyn.ingest import (PricePanel, load_prices, log_returns, panel_to_csv,
                           survivorship_filter)


def csv_of(rows):
    return "date,ticker,close\n" + "".join(f"{d},{t},{p}\n" for d, t, p in rows)


class TestLoadPrices:
    def test_strict_drops_gapped_ticker_keeps_all_dates(self):
        text = csv_of([("2020-01-01", "AAA", 10), ("2020-01-02", "AAA", 11),
                       ("2020-01-03", "AAA", 12), ("2020-01-01", "BBB", 5),
                       ("2020-01-03", "BBB", 6)])
        panel = load_prices(text)
        assert panel.tickers == ("AAA",)
        assert panel.dates == ("2020-01-01", "2020-01-02", "2020-01-03")

    def test_single_ticker_two_days(self):
        panel = load_prices(csv_of([("2020-01-01", "X", 100), ("2020-01-02", "X", 110)]))
        assert panel.prices.shape == (1, 2)

    def test_header_only_is_no_rows(self):
        with pytest.raises(DataError, match="no rows"):
            load_prices("date,ticker,close\n")

    def test_malformed_row_reports_line(self):
        text = "date,ticker,close\n2020-01-01,AAA,10\nbroken-line\n"
        with pytest.raises(ParseError, match="line 3"):
            load_prices(text)

    def test_unparseable_price_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            load_prices("date,ticker,close\n2020-01-01,AAA,ten\n")

    def test_non_positive_price_rejected(self):
        with pytest.raises(DataError, match="non-positive"):
            load_prices(csv_of([("2020-01-01", "AAA", -3)]))

    def test_duplicate_observation_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            load_prices(csv_of([("2020-01-01", "A", 1), ("2020-01-01", "A", 2)]))

    def test_record_order_irrelevant(self):
        rows = [("2020-01-02", "B", 2.5), ("2020-01-01", "A", 1.5),
                ("2020-01-01", "B", 2.0), ("2020-01-02", "A", 1.25)]
        p1 = load_prices(csv_of(rows))
        p2 = load_prices(csv_of(rows[::-1]))
        assert p1.tickers == p2.tickers and p1.dates == p2.dates
        assert np.array_equal(p1.prices, p2.prices)

    def test_window_mode_restricts_dates(self):
        rows = [("2020-01-01", "A", 1), ("2020-01-02", "A", 2), ("2020-01-03", "A", 3),
                ("2020-01-02", "B", 5), ("2020-01-03", "B", 6)]
        panel = load_prices(csv_of(rows), survivorship="window",
                            start="2020-01-02", end="2020-01-03")
        assert panel.tickers == ("A", "B")
        assert panel.dates == ("2020-01-02", "2020-01-03")

    def test_strict_rejects_bounds(self):
        with pytest.raises(DataError):
            load_prices(csv_of([("2020-01-01", "A", 1)]), start="2020-01-01")

    def test_bytes_input(self):
        panel = load_prices(csv_of([("2020-01-01", "A", 1.0)]).encode())
        assert panel.tickers == ("A",)


class TestSurvivorshipFilter:
    def make_panel(self):
        prices = np.array([[1.0, 2.0, 3.0], [1.0, np.nan, 3.0], [4.0, 5.0, 6.0]])
        return PricePanel(("A", "B", "C"), ("d1", "d2", "d3"), prices)

    def test_strict_drops_gap(self):
        filtered = survivorship_filter(self.make_panel())
        assert filtered.tickers == ("A", "C")

    def test_complete_panel_identity(self):
        panel = survivorship_filter(self.make_panel())
        again = survivorship_filter(panel)
        assert again.tickers == panel.tickers
        assert np.array_equal(again.prices, panel.prices)

    def test_idempotent(self):
        once = survivorship_filter(self.make_panel())
        twice = survivorship_filter(once)
        assert once.tickers == twice.tickers
        assert np.array_equal(once.prices, twice.prices)

    def test_gap_outside_window_retains_ticker(self):
        filtered = survivorship_filter(self.make_panel(), mode="window",
                                       start="d3", end="d3")
        assert filtered.tickers == ("A", "B", "C")

    def test_all_gapped_errors(self):
        panel = PricePanel(("A",), ("d1", "d2"), np.array([[1.0, np.nan]]))
        with pytest.raises(DataError, match="survives"):
            survivorship_filter(panel)


class TestLogReturns:
    def panel(self, prices):
        arr = np.asarray(prices, dtype=float)[None, :]
        dates = tuple(f"2020-01-{i + 1:02d}" for i in range(arr.shape[1]))
        return PricePanel(("X",), dates, arr)

    def test_flat_price_zero_return(self):
        rp = log_returns(self.panel([100.0, 100.0]))
        assert rp.returns[0, 0] == 0.0

    def test_e_fold_is_unit_return(self):
        rp = log_returns(self.panel([100.0, 100.0 * math.e]))
        assert rp.returns[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_hand_values(self):
        rp = log_returns(self.panel([100.0, 110.0, 99.0]))
        assert rp.returns[0].tolist() == pytest.approx(
            [math.log(1.1), math.log(0.9)], abs=1e-15)

    def test_too_short(self):
        with pytest.raises(DimensionError):
            log_returns(self.panel([100.0]))

    def test_reconstruction(self, rng):
        prices = 50.0 * np.exp(np.cumsum(rng.normal(0, 0.02, size=(3, 40)), axis=1))
        dates = tuple(f"2020-02-{i + 1:02d}" for i in range(40))
        panel = PricePanel(("A", "B", "C"), dates, prices)
        rp = log_returns(panel)
        rebuilt = prices[:, :1] * np.exp(
            np.concatenate([np.zeros((3, 1)), np.cumsum(rp.returns, axis=1)], axis=1))
        assert np.max(np.abs(rebuilt / prices - 1.0)) <= 1e-12


@given(st.lists(st.tuples(
    st.sampled_from(["AAA", "BBB", "CCC", "DD"]),
    st.floats(min_value=0.01, max_value=1e6, allow_nan=False)),
    min_size=1, max_size=8, unique_by=lambda r: r[0]))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(column):
    dates = ("2021-03-01", "2021-03-02")
    tickers = tuple(sorted(t for t, _ in column))
    prices = np.array([[p, p * 1.5] for _, p in sorted(column)])
    panel = PricePanel(tickers, dates, prices)
    reloaded = load_prices(panel_to_csv(panel))
    assert reloaded.tickers == panel.tickers
    assert reloaded.dates == panel.dates
    assert np.array_equal(reloaded.prices, panel.prices)
