import numpy as np
import pytest

from mstdyn.errors import DataError, KernelError
from mstdyn.kinetics import TransitionKernel, theoretical_kernel
from mstdyn.laddersim import (LadderChain, iterate_dragon_king, step,
                              stationary_histogram)
from mstdyn.phasefit import integrate_generic, nucleation_attach_rate


def identity_kernel(cap):
    return TransitionKernel(n=50, k_cap=cap, p={k: {0: 1.0} for k in range(1, cap + 1)})


def smooth_kernel(cap=30, alpha=3.07):
    return theoretical_kernel({k: 0.3 / k for k in range(2, cap + 1)}, alpha, 459,
                              k_cap=cap)


class TestChain:
    def test_identity_kernel_freezes_state(self):
        chain = LadderChain(identity_kernel(6), k0=4, seed=1)
        for _ in range(50):
            step(chain)
        assert chain.state == 4
        assert chain.visits[4] == 50

    def test_deterministic_up_kernel(self):
        rows = {1: {1: 1.0}, 2: {-1: 0.0, 0: 1.0}}
        chain = LadderChain(TransitionKernel(n=9, k_cap=2, p=rows), k0=1, seed=3)
        assert step(chain).state == 2

    def test_bad_row_mass_rejected(self):
        rows = {1: {0: 0.9}, 2: {0: 1.0}}
        with pytest.raises(KernelError, match="mass"):
            LadderChain(TransitionKernel(n=9, k_cap=2, p=rows), k0=1, seed=0)

    def test_out_of_ladder_row_rejected(self):
        rows = {1: {0: 0.5, 2: 0.5}, 2: {0: 1.0}}
        with pytest.raises(KernelError, match="ladder"):
            LadderChain(TransitionKernel(n=9, k_cap=2, p=rows), k0=1, seed=0)

    def test_seeded_determinism(self):
        kern = smooth_kernel(12)
        a = LadderChain(kern, k0=3, seed=42).run(20000)
        b = LadderChain(kern, k0=3, seed=42).run(20000)
        assert a.state == b.state
        assert np.array_equal(a.visits, b.visits)
        c = LadderChain(kern, k0=3, seed=43).run(20000)
        assert not np.array_equal(a.visits, c.visits)

    def test_stepwise_equals_bulk(self):
        kern = smooth_kernel(8)
        a = LadderChain(kern, k0=2, seed=9)
        for _ in range(500):
            step(a)
        b = LadderChain(kern, k0=2, seed=9).run(500)
        assert a.state == b.state
        assert np.array_equal(a.visits, b.visits)

    def test_histogram_total_is_step_count(self):
        chain = LadderChain(smooth_kernel(10), k0=1, seed=5).run(1234)
        assert chain.visits.sum() == chain.steps == 1234


class TestStationaryHistogram:
    def test_two_state_closed_form(self):
        a, b = 0.12, 0.3  # up from 1, down from 2: P(1)/P(2) = b/a
        rows = {1: {0: 1 - a, 1: a}, 2: {-1: b, 0: 1 - b}}
        kern = TransitionKernel(n=9, k_cap=2, p=rows)
        hist = stationary_histogram(kern, steps=400_000, burn_in=2000, seed=11)
        assert hist[1] / hist[2] == pytest.approx(b / a, rel=0.05)

    def test_reaches_all_plankton_degrees(self):
        hist = stationary_histogram(smooth_kernel(), steps=300_000, burn_in=1000,
                                    seed=2)
        assert np.all(hist[2:12] > 0)

    def test_ergodic_on_restricted_ladder(self):
        # every level of [1, 20] is reachable whenever single-edge rates
        # stay positive
        kern = smooth_kernel(20)
        hist = stationary_histogram(kern, steps=10 ** 6, burn_in=1000, seed=4)
        assert np.all(hist[1:21] > 0)

    def test_power_law_exponent_recovered(self):
        hist = stationary_histogram(smooth_kernel(), steps=10 ** 6, burn_in=10_000,
                                    seed=0)
        ks = np.arange(2, 12)
        slope = np.polyfit(np.log(ks), np.log(hist[2:12]), 1)[0]
        assert -slope == pytest.approx(3.07, abs=0.15)

    def test_thinning_keeps_frequencies(self):
        kern = smooth_kernel(12)
        full = stationary_histogram(kern, steps=600_000, burn_in=5000, seed=8)
        thinned = stationary_histogram(kern, steps=600_000, burn_in=5000, seed=8,
                                       thin=20)
        assert np.abs(full[1:13] - thinned[1:13]).max() < 0.01

    def test_burn_in_bounds(self):
        with pytest.raises(DataError):
            stationary_histogram(smooth_kernel(8), steps=10, burn_in=10, seed=0)


class TestIterateDragonKing:
    def test_zero_rate_constant(self):
        out = iterate_dragon_king(lambda k: 0.0, k0=5.0, steps=10, n=100)
        assert np.all(out == 5.0)

    def test_full_attachment_single_jump(self):
        out = iterate_dragon_king(lambda k: 1.0, k0=3.0, steps=2, n=100)
        assert out[1] == 99.0 and out[2] == 99.0

    def test_tracks_continuum_growth_envelope(self):
        # unit-step map vs RK4 of the same attachment law: O(dt) agreement
        amplitude, gamma, k0, n = 2.5, 1.0, 4.5, 459
        rate = nucleation_attach_rate(amplitude, gamma, k0, n)
        start = k0 + amplitude  # growth-law value at t' = 1
        steps = 200
        discrete = iterate_dragon_king(rate, start, steps, n)
        _, continuum = integrate_generic(rate, start, (1.0, 1.0 + steps), dt=0.02, n=n)
        envelope = k0 + amplitude * np.sqrt(1.0 + np.arange(steps + 1))
        # the unit-step map is first-order accurate; its accumulated bias
        # over this span stays below 0.3 degrees (vs values ~7..40)
        assert abs(discrete[-1] - continuum[-1]) <= 0.25
        assert np.max(np.abs(discrete - envelope)) <= 0.3
