"""Synthetic data generators.

A one-factor Gaussian return panel with a planted loading episode stands
in for proprietary market data: while the episode is active the chosen
asset's market loading dominates, its correlations with every other asset
exceed all pairwise ones, and it becomes the tree hub (degree condensation
by construction). Closed-form series generators produce the growth-law and
two-branch-peak test beds directly. Everything is Philox-seeded and
deterministic.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import PricePanel, ReturnPanel
from .phasefit import nucleation_curve

__all__ = [
    "PlantedEpisode",
    "FactorModelSpec",
    "generate_panel",
    "prices_from_returns",
    "generate_law_series",
]


@dataclass(frozen=True)
class PlantedEpisode:
    """Loading boost for one asset over [start, end) day rows.

    ``profile``: 'ramp-plateau-ramp' rises over the first half, holds over
    the third quarter and falls over the last; 'triangle' rises to a single
    apex at the midpoint (sharper benchmark for extremum-location tests).
    """

    asset: int
    start: int
    end: int
    peak_loading: float = 6.0
    profile: str = "ramp-plateau-ramp"

    def weight(self, t: np.ndarray) -> np.ndarray:
        """Profile weight in [0, 1] per day row."""
        span = self.end - self.start
        u = (np.asarray(t, dtype=np.float64) - self.start) / span
        w = np.zeros(u.shape)
        inside = (u >= 0.0) & (u < 1.0)
        if self.profile == "triangle":
            w[inside] = 1.0 - np.abs(2.0 * u[inside] - 1.0)
        elif self.profile == "ramp-plateau-ramp":
            ui = u[inside]
            w[inside] = np.where(ui < 0.5, 2.0 * ui,
                                 np.where(ui < 0.75, 1.0, 4.0 * (1.0 - ui)))
        else:
            raise DataError(f"unknown loading profile {self.profile!r}")
        return w


@dataclass(frozen=True)
class FactorModelSpec:
    """One-factor panel: r_i(t) = beta_i(t) m(t) + eps_i(t)."""

    n: int
    t_days: int
    market_vol: float = 0.01
    idio_vol: float = 0.02
    beta_range: tuple[float, float] = (0.6, 1.4)
    episode: PlantedEpisode | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.t_days < 2:
            raise DataError("need n >= 2 assets and t_days >= 2")
        if self.market_vol < 0 or self.idio_vol <= 0:
            raise DataError("volatilities must be positive")
        if self.episode is not None:
            ep = self.episode
            if not (0 <= ep.start < ep.end <= self.t_days):
                raise DataError("episode must lie inside [0, t_days)")
            if not 0 <= ep.asset < self.n:
                raise DataError("episode asset index out of range")


def _dates(count: int, start=datetime.date(2004, 1, 1)) -> tuple[str, ...]:
    return tuple((start + datetime.timedelta(days=t)).isoformat()
                 for t in range(count))


def generate_panel(spec: FactorModelSpec) -> ReturnPanel:
    """Seed-deterministic return panel with the optional planted episode."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    lo, hi = spec.beta_range
    betas = rng.uniform(lo, hi, spec.n)
    market = rng.normal(0.0, spec.market_vol, spec.t_days)
    idio = rng.normal(0.0, spec.idio_vol, (spec.n, spec.t_days))

    loading = np.repeat(betas[:, None], spec.t_days, axis=1)
    if spec.episode is not None:
        ep = spec.episode
        w = ep.weight(np.arange(spec.t_days))
        loading[ep.asset] = betas[ep.asset] + (ep.peak_loading - betas[ep.asset]) * w

    returns = loading * market[None, :] + idio
    tickers = tuple(f"S{i:04d}" for i in range(spec.n))
    return ReturnPanel(tickers, _dates(spec.t_days, datetime.date(2004, 1, 2)),
                       returns)


def prices_from_returns(panel: ReturnPanel, p0: float = 100.0) -> PricePanel:
    """Price panel whose log-returns reproduce the input exactly."""
    levels = np.concatenate(
        [np.zeros((panel.n_assets(), 1)), np.cumsum(panel.returns, axis=1)], axis=1)
    prices = p0 * np.exp(levels)
    dates = _dates(len(panel.dates) + 1)
    return PricePanel(panel.tickers, dates, prices)


def generate_law_series(kind: str, params: dict, length: int,
                        noise_sigma: float = 0.0, seed: int = 0,
                        integer: bool = False, guard: int = 3) -> np.ndarray:
    """Closed-form phase-law series plus Gaussian noise.

    ``kind='nucleation'`` needs a0, amplitude, z, t_crit; ``kind='lambda'``
    needs a_left, tau_left, a_right, tau_right, t_lambda. The logarithmic
    singularity is clamped ``guard`` frames around the center (finite-size
    truncation). ``integer`` rounds to whole degrees.
    """
    t = np.arange(length, dtype=np.float64)
    if kind == "nucleation":
        base = nucleation_curve(t, params["t_crit"], params["a0"],
                                params["amplitude"], params["z"])
    elif kind == "lambda":
        tl = params["t_lambda"]
        delta_left = np.maximum(tl - t, guard)
        delta_right = np.maximum(t - tl, guard)
        left = -params["a_left"] * np.log(delta_left / params["tau_left"])
        right = -params["a_right"] * np.log(delta_right / params["tau_right"])
        base = np.where(t <= tl, left, right)
    else:
        raise DataError(f"unknown law kind {kind!r}")
    if noise_sigma < 0:
        raise DataError("noise_sigma must be >= 0")
    if noise_sigma > 0:
        rng = np.random.Generator(np.random.Philox(int(seed)))
        base = base + rng.normal(0.0, noise_sigma, length)
    if integer:
        base = np.rint(base)
    return base
