import math

import numpy as np
import pytest

from mstdyn import corrnet
from mstdyn.errors import DataError
from mstdyn.ingest import log_returns
from mstdyn.synthgen import (FactorModelSpec, PlantedEpisode, generate_law_series,
                             generate_panel, prices_from_returns)


class TestGeneratePanel:
    def test_seed_determinism(self):
        spec = FactorModelSpec(n=12, t_days=80, seed=7)
        a = generate_panel(spec)
        b = generate_panel(spec)
        assert np.array_equal(a.returns, b.returns)
        c = generate_panel(FactorModelSpec(n=12, t_days=80, seed=8))
        assert not np.array_equal(a.returns, c.returns)

    def test_zero_beta_means_weak_correlation(self):
        spec = FactorModelSpec(n=6, t_days=1000, beta_range=(0.0, 0.0), seed=3)
        panel = generate_panel(spec)
        corr = np.corrcoef(panel.returns)
        off = corr[np.triu_indices(6, 1)]
        assert np.abs(off).max() < 0.1

    def test_unit_beta_tiny_idio_near_perfect_correlation(self):
        spec = FactorModelSpec(n=5, t_days=400, beta_range=(1.0, 1.0),
                               idio_vol=1e-6, seed=3)
        panel = generate_panel(spec)
        corr = np.corrcoef(panel.returns)
        assert corr[np.triu_indices(5, 1)].min() > 0.999

    def test_panel_invariants(self):
        panel = generate_panel(FactorModelSpec(n=8, t_days=50, seed=1))
        assert np.all(np.isfinite(panel.returns))
        assert len(panel.dates) == 50
        assert panel.tickers == tuple(sorted(panel.tickers))

    def test_episode_bounds_checked(self):
        with pytest.raises(DataError):
            FactorModelSpec(n=5, t_days=50,
                            episode=PlantedEpisode(asset=0, start=10, end=60))
        with pytest.raises(DataError):
            FactorModelSpec(n=5, t_days=50,
                            episode=PlantedEpisode(asset=9, start=0, end=20))

    def test_planted_asset_becomes_hub(self):
        hits = 0
        for seed in range(5):
            ep = PlantedEpisode(asset=2, start=100, end=400, peak_loading=8.0,
                                profile="triangle")
            spec = FactorModelSpec(n=30, t_days=500, episode=ep, seed=seed)
            panel = generate_panel(spec)
            mid = panel.returns[:, 200:300]
            frame = corrnet.build_mst(
                np.sqrt(2 * (1 - np.corrcoef(mid))), tickers=panel.tickers)
            hits += int(np.argmax(frame.degree)) == 2
        assert hits == 5

    def test_profiles(self):
        tri = PlantedEpisode(asset=0, start=0, end=100, profile="triangle")
        w = tri.weight(np.array([0, 25, 50, 75, 99]))
        assert w.tolist() == pytest.approx([0.0, 0.5, 1.0, 0.5, 0.02])
        rpr = PlantedEpisode(asset=0, start=0, end=100, profile="ramp-plateau-ramp")
        w2 = rpr.weight(np.array([0, 25, 50, 60, 75, 90]))
        assert w2.tolist() == pytest.approx([0.0, 0.5, 1.0, 1.0, 1.0, 0.4])
        with pytest.raises(DataError):
            PlantedEpisode(asset=0, start=0, end=10, profile="square").weight(
                np.arange(5))

    def test_prices_round_trip(self):
        panel = generate_panel(FactorModelSpec(n=4, t_days=60, seed=5))
        prices = prices_from_returns(panel)
        back = log_returns(prices)
        assert np.abs(back.returns - panel.returns).max() <= 1e-12


class TestGenerateLawSeries:
    def test_noiseless_nucleation_exact(self):
        s = generate_law_series(
            "nucleation", dict(a0=4.5273, amplitude=2.50, z=2.0, t_crit=164),
            length=400)
        assert s[0] == 4.5273
        assert s[164] == 4.5273
        assert s[200] == pytest.approx(4.5273 + 2.5 * 6.0, abs=1e-12)

    def test_left_branch_zero_at_tau(self):
        s = generate_law_series(
            "lambda", dict(a_left=7.0, tau_left=50.0, a_right=7.0,
                           tau_right=50.0, t_lambda=100), length=200)
        assert s[50] == pytest.approx(0.0, abs=1e-12)   # t_lambda - tau_left
        assert s[150] == pytest.approx(0.0, abs=1e-12)  # t_lambda + tau_right

    def test_guard_clamps_singularity(self):
        s = generate_law_series(
            "lambda", dict(a_left=7.0, tau_left=50.0, a_right=7.0,
                           tau_right=50.0, t_lambda=100), length=200, guard=3)
        peak_value = -7.0 * math.log(3 / 50)
        assert s[100] == pytest.approx(peak_value, abs=1e-12)
        assert s.max() == pytest.approx(peak_value, abs=1e-12)

    def test_integer_mode_rounds(self):
        s = generate_law_series(
            "nucleation", dict(a0=4.5273, amplitude=2.50, z=2.0, t_crit=10),
            length=60, integer=True)
        assert np.all(s == np.rint(s))
        exact = generate_law_series(
            "nucleation", dict(a0=4.5273, amplitude=2.50, z=2.0, t_crit=10),
            length=60)
        assert np.abs(s - exact).max() <= 0.5

    def test_noise_seeded(self):
        kw = dict(a0=1.0, amplitude=1.0, z=2.0, t_crit=5)
        a = generate_law_series("nucleation", kw, 50, noise_sigma=1.0, seed=3)
        b = generate_law_series("nucleation", kw, 50, noise_sigma=1.0, seed=3)
        c = generate_law_series("nucleation", kw, 50, noise_sigma=1.0, seed=4)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_unknown_kind(self):
        with pytest.raises(DataError):
            generate_law_series("exponential", {}, 10)


class TestPipelineClosure:
    @pytest.mark.parametrize("seed", [3, 17])
    def test_planted_center_recovered_within_five_frames(self, seed):
        # full chain: panel -> rolling trees -> leader-degree series ->
        # two-branch peak fit; the fitted center must land on the frame
        # whose window midpoint hits the planted loading apex
        from mstdyn import phasefit
        ep = PlantedEpisode(asset=5, start=400, end=1100, peak_loading=8.0,
                            profile="triangle")
        spec = FactorModelSpec(n=60, t_days=1400, idio_vol=0.005, episode=ep,
                               seed=seed)
        panel = generate_panel(spec)
        wspec = corrnet.WindowSpec(200, 5)
        leader = [int(frame.degree.max())
                  for frame in corrnet.frame_stream(panel, wspec)]
        fit = phasefit.fit_lambda_peak(np.array(leader, dtype=float))
        apex_day = 750  # triangle midpoint
        expected_frame = (apex_day - wspec.center_offset()) / wspec.step_td
        assert abs(fit.t_lambda - expected_frame) <= 5
