"""Stochastic single-vertex degree-ladder simulator.

A chain realizes the kinetic equation as a Markov walk on k = 1..k_cap
under a TransitionKernel (survival included; boundary rows are naturally
reflecting because out-of-ladder jumps carry no mass). The RNG is
counter-based (Philox) and a seed is always explicit: identical seed and
kernel reproduce identical trajectories on either kernel backend.
"""

from __future__ import annotations

import numpy as np

from ._kernels import ladder_visits
from .errors import DataError, KernelError
from .kinetics import TransitionKernel

__all__ = ["LadderChain", "step", "stationary_histogram", "iterate_dragon_king"]


def _compile_rows(kernel: TransitionKernel, tol: float = 1e-9):
    """Pack kernel rows into (cdf, jump, row_len) arrays for the walkers."""
    cap = kernel.k_cap
    rows = []
    for k in range(1, cap + 1):
        row = kernel.row(k)
        if row is None:
            raise KernelError(f"kernel row k={k} unavailable; cannot simulate")
        ls = sorted(row)
        probs = np.array([row[l] for l in ls], dtype=np.float64)
        if probs.min() < -tol:
            raise KernelError(f"row k={k} has negative mass")
        mass = float(probs.sum())
        if abs(mass - 1.0) > tol:
            raise KernelError(f"row k={k} mass {mass!r} differs from 1")
        for l in ls:
            if not 1 <= k + l <= cap:
                raise KernelError(f"transition {k}->{k + l} leaves the ladder")
        rows.append((ls, probs))
    width = max(len(ls) for ls, _ in rows)
    cdf = np.zeros((cap + 1, width), dtype=np.float64)
    jump = np.zeros((cap + 1, width), dtype=np.int32)
    row_len = np.zeros(cap + 1, dtype=np.int32)
    for k, (ls, probs) in enumerate(rows, start=1):
        c = np.cumsum(np.clip(probs, 0.0, None))
        c[-1] = 1.0
        cdf[k, :len(ls)] = c
        jump[k, :len(ls)] = ls
        row_len[k] = len(ls)
    return cdf, jump, row_len


class LadderChain:
    """Seeded degree-ladder walk with a running visit histogram."""

    def __init__(self, kernel: TransitionKernel, k0: int, seed: int):
        if not 1 <= k0 <= kernel.k_cap:
            raise DataError(f"k0 must lie in [1, {kernel.k_cap}]")
        self.kernel = kernel
        self.state = int(k0)
        self.seed = int(seed)
        self.steps = 0
        self.visits = np.zeros(kernel.k_cap + 1, dtype=np.int64)
        self._cdf, self._jump, self._row_len = _compile_rows(kernel)
        self._rng = np.random.Generator(np.random.Philox(self.seed))

    def run(self, n_steps: int) -> "LadderChain":
        """Advance the chain by n_steps, counting every visited state."""
        if n_steps <= 0:
            return self
        uniforms = self._rng.random(n_steps)
        visits, k = ladder_visits(self.state, uniforms, self._cdf, self._jump,
                                  self._row_len, 0, 1)
        self.visits += visits
        self.state = int(k)
        self.steps += n_steps
        return self


def step(chain: LadderChain) -> LadderChain:
    """Advance the chain by one step (in place; returned for chaining)."""
    return chain.run(1)


def stationary_histogram(kernel: TransitionKernel, steps: int, burn_in: int = 0,
                         seed: int = 0, k0: int = 1, thin: int = 1) -> np.ndarray:
    """Normalized visit frequencies over k after burn-in.

    ``thin`` records only every thin-th post-burn-in state, which makes the
    retained samples nearly independent (the per-step survival mass gives
    the walk a short but non-zero correlation time). Deterministic for a
    fixed seed.
    """
    if steps <= burn_in:
        raise DataError("steps must exceed burn_in")
    if thin < 1:
        raise DataError("thin must be >= 1")
    cdf, jump, row_len = _compile_rows(kernel)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    uniforms = rng.random(int(steps))
    visits, _ = ladder_visits(int(k0), uniforms, cdf, jump, row_len,
                              int(burn_in), int(thin))
    total = visits.sum()
    return visits / total


def iterate_dragon_king(b_plus_model, k0: float, steps: int,
                        n: int = 459) -> np.ndarray:
    """Discrete-time deterministic hub growth k <- k + (n-1-k) b(1|k).

    The unit-step twin of the continuum attachment equation; it tracks the
    RK4 trajectory to first order in the step size.
    """
    out = np.empty(steps + 1)
    k = float(k0)
    out[0] = k
    for i in range(steps):
        k = k + (n - 1 - k) * b_plus_model(k)
        if not 0.0 < k <= n - 1:
            raise DataError(f"iteration left (0, n-1] at step {i + 1}")
        out[i + 1] = k
    return out
