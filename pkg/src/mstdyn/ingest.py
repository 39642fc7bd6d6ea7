"""Price ingestion: CSV loading, survivorship filtering, log-returns.

Input format is a long CSV with header ``date,ticker,close``. Dates are
treated as opaque ordered ISO-8601 labels; there is no exchange-calendar
logic. Tickers are sorted lexicographically everywhere, which fixes the
vertex numbering used by every downstream module.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, ParseError

__all__ = [
    "PricePanel",
    "ReturnPanel",
    "load_prices",
    "log_returns",
    "survivorship_filter",
    "panel_to_csv",
]


@dataclass(frozen=True)
class PricePanel:
    """Closing prices on a common calendar; NaN marks a missing cell.

    A panel is *complete* when every (ticker, date) cell is populated;
    survivorship filtering produces complete panels and everything
    downstream requires one.
    """

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    prices: np.ndarray  # shape (n_tickers, n_dates), float64

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        n, t = prices.shape
        if n != len(self.tickers) or t != len(self.dates):
            raise DataError("price matrix shape does not match labels")
        if any(self.dates[i] >= self.dates[i + 1] for i in range(t - 1)):
            raise DataError("dates must be strictly increasing")
        filled = prices[~np.isnan(prices)]
        if filled.size and not np.all(filled > 0):
            raise DataError("prices must be positive")

    @property
    def complete(self) -> bool:
        return not np.isnan(self.prices).any()

    def n_assets(self) -> int:
        return len(self.tickers)


@dataclass(frozen=True)
class ReturnPanel:
    """Natural-log returns; column t is ln(price[t+1] / price[t])."""

    tickers: tuple[str, ...]
    dates: tuple[str, ...]  # label of the later day of each return
    returns: np.ndarray  # shape (n_tickers, n_dates), float64

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=np.float64)
        object.__setattr__(self, "returns", returns)
        if returns.shape != (len(self.tickers), len(self.dates)):
            raise DataError("return matrix shape does not match labels")
        if not np.all(np.isfinite(returns)):
            raise DataError("returns must be finite")

    def n_assets(self) -> int:
        return len(self.tickers)

    def n_rows(self) -> int:
        return len(self.dates)


def _parse_rows(stream) -> list[tuple[str, str, float]]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing header") from None
    if [h.strip().lower() for h in header] != ["date", "ticker", "close"]:
        raise ParseError("header must be 'date,ticker,close'", line=1)
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != 3:
            raise ParseError(f"expected 3 fields, got {len(rec)}", line=lineno)
        date, ticker, close = (f.strip() for f in rec)
        if not date or not ticker:
            raise ParseError("empty date or ticker", line=lineno)
        try:
            price = float(close)
        except ValueError:
            raise ParseError(f"unparseable price {close!r}", line=lineno) from None
        if not math.isfinite(price) or price <= 0:
            raise DataError(f"line {lineno}: non-positive price for {ticker} on {date}")
        rows.append((date, ticker, price))
    return rows


def load_prices(source, survivorship: str = "strict",
                start: str | None = None, end: str | None = None) -> PricePanel:
    """Load a price panel from CSV records.

    The calendar is the sorted set of observed dates (restricted to
    [start, end] in window mode); survivorship keeps only tickers quoted
    on every calendar date, so the result is a complete panel. The result
    does not depend on record order.
    """
    if survivorship not in ("strict", "window"):
        raise DataError(f"unknown survivorship mode {survivorship!r}")
    if survivorship == "strict" and (start is not None or end is not None):
        raise DataError("start/end bounds require survivorship='window'")
    rows = _parse_rows(source)
    if not rows:
        raise DataError("no rows")
    if survivorship == "window":
        rows = [r for r in rows
                if (start is None or r[0] >= start) and (end is None or r[0] <= end)]
        if not rows:
            raise DataError("no rows inside the survivorship window")

    dates = sorted({r[0] for r in rows})
    tickers = sorted({r[1] for r in rows})
    date_ix = {d: i for i, d in enumerate(dates)}
    tick_ix = {t: i for i, t in enumerate(tickers)}

    prices = np.full((len(tickers), len(dates)), np.nan)
    for date, ticker, price in rows:
        i, j = tick_ix[ticker], date_ix[date]
        if not np.isnan(prices[i, j]):
            raise DataError(f"duplicate observation for {ticker} on {date}")
        prices[i, j] = price

    panel = PricePanel(tuple(tickers), tuple(dates), prices)
    return survivorship_filter(panel, mode="strict")


def survivorship_filter(panel: PricePanel, mode: str = "strict",
                        start: str | None = None, end: str | None = None) -> PricePanel:
    """Keep only tickers with a complete price series.

    ``strict`` requires completeness over the panel's full calendar;
    ``window`` restricts the calendar to [start, end] first. Idempotent.
    """
    if mode == "window":
        keep = [j for j, d in enumerate(panel.dates)
                if (start is None or d >= start) and (end is None or d <= end)]
        if not keep:
            raise DataError("empty calendar in survivorship window")
        dates = tuple(panel.dates[j] for j in keep)
        prices = panel.prices[:, keep]
    elif mode == "strict":
        dates = panel.dates
        prices = panel.prices
    else:
        raise DataError(f"unknown survivorship mode {mode!r}")

    survivors = ~np.isnan(prices).any(axis=1)
    if not survivors.any():
        raise DataError("no ticker survives the completeness filter")
    tickers = tuple(t for t, ok in zip(panel.tickers, survivors) if ok)
    return PricePanel(tickers, dates, prices[survivors])


def log_returns(panel: PricePanel) -> ReturnPanel:
    """Log-return panel: returns[i, t] = ln(prices[i, t+1] / prices[i, t])."""
    if not panel.complete:
        raise DataError("panel has missing cells; apply survivorship_filter first")
    if len(panel.dates) < 2:
        raise DimensionError("need at least 2 dates to compute returns")
    returns = np.log(panel.prices[:, 1:] / panel.prices[:, :-1])
    return ReturnPanel(panel.tickers, panel.dates[1:], returns)


def panel_to_csv(panel: PricePanel) -> str:
    """Serialize a panel to the canonical CSV form (date-major, round-trip safe)."""
    out = io.StringIO()
    out.write("date,ticker,close\n")
    for j, date in enumerate(panel.dates):
        for i, ticker in enumerate(panel.tickers):
            p = panel.prices[i, j]
            if not np.isnan(p):
                out.write(f"{date},{ticker},{float(p)!r}\n")
    return out.getvalue()
