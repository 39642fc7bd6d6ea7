"""Degree-transition kinetics of the tree's vertex-degree ladder.

Empirical one-frame transition statistics p(l|k) are tallied from matched
vertices across consecutive frames. The single-edge disconnection and
connection probabilities b(-1|k), b(1|k) come from least-squares fits of a
pure binomial strategy to the rows, and a detailed-balance kernel follows
by combining the binomial down-rates with power-law degree ratios
(1 +- l/k)^alpha. Under that kernel every microscopic current between
degree levels vanishes for P(k) ~ k^-alpha, which is what the simulator in
``laddersim`` and the acceptance suite verify.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .corrnet import TreeFrame
from .errors import DataError, FitError, KernelError

__all__ = [
    "TransitionCounts",
    "TransitionKernel",
    "CurrentField",
    "count_transitions",
    "empirical_kernel",
    "fit_b_minus",
    "fit_b_plus",
    "theoretical_kernel",
    "detailed_balance_residuals",
    "currents",
    "master_step",
    "stationary_power_law",
    "kernel_to_json",
    "kernel_from_json",
]

#: soft upper bound on observed |l| (diagnostic only)
SUPPORT_BOUND = 5


@dataclass(frozen=True)
class TransitionCounts:
    """Observed one-frame degree-change events: counts[(k, l)] vertices went
    from degree k to k + l."""

    counts: dict[tuple[int, int], int]
    totals: dict[int, int]
    n: int
    n_pairs: int
    frame_range: tuple[int, int] | None = None

    @property
    def n_events(self) -> int:
        return sum(self.counts.values())

    def tail_fraction(self, l_bound: int = SUPPORT_BOUND) -> float:
        """Fraction of events with |l| above the soft support bound."""
        total = self.n_events
        if total == 0:
            return 0.0
        tail = sum(c for (k, l), c in self.counts.items() if abs(l) > l_bound)
        return tail / total


def count_transitions(frames, stride: int = 1) -> TransitionCounts:
    """Tally per-vertex degree changes between frames ``stride`` apart.

    The stream is thinned to frames whose index offset from the first one
    is a multiple of ``stride``; consecutive retained frames pair up only
    when their index gap is exactly ``stride`` (gaps from skipped windows
    drop the pair, never shift it). Ticker sets must match.
    """
    if stride < 1:
        raise DataError("stride must be >= 1")
    counter: Counter = Counter()
    totals: Counter = Counter()
    prev = None
    first_index = None
    last_index = None
    n = None
    n_pairs = 0
    for frame in frames:
        if not isinstance(frame, TreeFrame):
            continue  # skipped-window markers
        if first_index is None:
            first_index = frame.frame_index
        last_index = frame.frame_index
        if (frame.frame_index - first_index) % stride != 0:
            continue
        if n is None:
            n = frame.n
        if prev is not None and frame.frame_index - prev.frame_index == stride:
            if frame.tickers != prev.tickers:
                raise DataError("ticker sets differ between paired frames")
            ks = prev.degree
            ls = frame.degree - prev.degree
            keys = ks * (2 * frame.n + 1) + (ls + frame.n)
            uniq, cnt = np.unique(keys, return_counts=True)
            base = 2 * frame.n + 1
            for key, c in zip(uniq.tolist(), cnt.tolist()):
                k, l = divmod(key, base)
                counter[(k, l - frame.n)] += c
                totals[k] += c
            n_pairs += 1
        prev = frame
    if n is None:
        raise DataError("no frames to count transitions on")
    return TransitionCounts(dict(counter), dict(totals), n, n_pairs,
                            (first_index, last_index))


@dataclass(frozen=True)
class TransitionKernel:
    """Degree-ladder jump probabilities p(l|k) on k = 1..k_cap.

    ``p`` maps k to its row {l: probability}; empirical kernels carry only
    rows whose sample count reached ``min_samples`` (explicit gaps, never
    imputed zeros). ``b_minus``/``b_plus`` are the fitted single-edge
    disconnection/connection probabilities where the fit was possible.
    """

    n: int
    k_cap: int
    p: dict[int, dict[int, float]]
    b_minus: dict[int, float] = field(default_factory=dict)
    b_plus: dict[int, float] = field(default_factory=dict)
    alpha_bar: float | None = None
    kind: str = "empirical"
    provenance: dict = field(default_factory=dict)

    def row(self, k: int) -> dict[int, float] | None:
        return self.p.get(k)

    def available_rows(self) -> list[int]:
        return sorted(self.p)

    def l_cutoffs(self) -> dict[int, tuple[int, int]]:
        """Per-row support (l_min, l_max) over cells with positive mass."""
        out = {}
        for k, row in self.p.items():
            ls = [l for l, v in row.items() if l != 0 and v > 0]
            if ls:
                out[k] = (-min(ls) if min(ls) < 0 else 0, max(max(ls), 0))
        return out

    def transition_matrix(self, tol: float = 1e-9) -> np.ndarray:
        """Dense row-stochastic matrix over states 0..k_cap (state 0 unused).

        Requires every row 1..k_cap to be present with unit mass within
        ``tol``.
        """
        t = np.zeros((self.k_cap + 1, self.k_cap + 1))
        for k in range(1, self.k_cap + 1):
            row = self.p.get(k)
            if row is None:
                raise KernelError(f"kernel row k={k} unavailable")
            mass = 0.0
            for l, v in sorted(row.items()):
                dest = k + l
                if dest < 1 or dest > self.k_cap:
                    raise KernelError(f"transition {k}->{dest} leaves the ladder")
                t[k, dest] += v
                mass += v
            if abs(mass - 1.0) > tol:
                raise KernelError(f"row k={k} mass {mass!r} differs from 1")
        return t


def _binom_model(n_trials: int, ls: np.ndarray, b: float) -> np.ndarray:
    if b <= 0.0:
        return np.where(ls == 0, 1.0, 0.0)
    if b >= 1.0:
        return np.where(ls == n_trials, 1.0, 0.0)
    out = np.empty(ls.shape[0])
    for idx, l in enumerate(ls):
        out[idx] = math.comb(n_trials, int(l)) * b ** l * (1.0 - b) ** (n_trials - l)
    return out


def _fit_binomial(cells: dict[int, float], n_trials: int) -> tuple[float, float]:
    """Least-squares single-parameter binomial fit over the given cells.

    Returns (b, residual). The grid mixes uniform, log-spaced and
    moment-matched candidates: connection fits have n_trials ~ n, so the
    minimum sits at scale 1/n and a uniform grid alone would step over it.
    The objective can also have two global minima (a lone l=1 cell at k=2
    is symmetric around 1/2); the smaller root wins.
    """
    ls = np.array(sorted(cells), dtype=np.int64)
    ps = np.array([cells[int(l)] for l in ls])

    def objective(b):
        return float(((ps - _binom_model(n_trials, ls, b)) ** 2).sum())

    moment = float(np.clip((ls * ps).sum() / n_trials, 0.0, 1.0))
    grid = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, 1001),
        np.logspace(-9, 0, 181),
        np.array([moment]),
    ]))
    vals = np.array([objective(b) for b in grid])
    best = int(np.argmin(vals))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    if hi - lo <= 0:
        return float(grid[best]), float(vals[best])
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    b_hat, r_hat = float(res.x), float(res.fun)
    if vals[best] < r_hat:
        b_hat, r_hat = float(grid[best]), float(vals[best])
    return b_hat, r_hat


def fit_b_minus(kernel: TransitionKernel, k: int) -> float:
    """Single-edge disconnection probability b(-1|k) fitted from the
    negative-l cells of row k (binomial over the k attached edges)."""
    row = kernel.row(k)
    if row is None:
        raise FitError(f"row k={k} unavailable")
    cells = {-l: v for l, v in row.items() if l < 0}
    if not cells:
        raise FitError(f"row k={k} has no negative-l cells")
    b, _ = _fit_binomial(cells, k)
    return b


def fit_b_plus(kernel: TransitionKernel, k: int) -> float:
    """Single-edge connection probability b(1|k) fitted from the
    positive-l cells of row k (binomial over the n-1-k free slots)."""
    row = kernel.row(k)
    if row is None:
        raise FitError(f"row k={k} unavailable")
    cells = {l: v for l, v in row.items() if l > 0}
    if not cells:
        raise FitError(f"row k={k} has no positive-l cells")
    b, _ = _fit_binomial(cells, kernel.n - 1 - k)
    return b


def empirical_kernel(counts: TransitionCounts, min_samples: int = 30,
                     alpha_bar: float | None = None,
                     k_cap: int | None = None) -> TransitionKernel:
    """Empirical kernel p(k, l) = counts/totals on rows with enough samples.

    Rows below ``min_samples`` stay absent (explicit gaps). The fitted
    b(-/+1|k) tables are attached where the corresponding cells exist.
    Support beyond |l| = 5 only triggers a warning, mirroring how thin the
    large-jump statistics are expected to be.
    """
    rows: dict[int, dict[int, float]] = {}
    for (k, l), c in counts.counts.items():
        if counts.totals[k] >= min_samples:
            rows.setdefault(k, {})[l] = c / counts.totals[k]
    rows = {k: dict(sorted(row.items())) for k, row in sorted(rows.items())}
    if k_cap is None:
        k_cap = max(rows) if rows else 1
    kernel = TransitionKernel(
        n=counts.n, k_cap=k_cap, p=rows, alpha_bar=alpha_bar, kind="empirical",
        provenance={"min_samples": min_samples, "n_pairs": counts.n_pairs,
                    "n_events": counts.n_events,
                    "frame_range": list(counts.frame_range or ()),
                    "tail_fraction": counts.tail_fraction()},
    )
    wide = [k for k, (lmin, lmax) in kernel.l_cutoffs().items()
            if lmin > SUPPORT_BOUND or lmax > SUPPORT_BOUND]
    if wide:
        warnings.warn(f"rows {wide} have support beyond |l| = {SUPPORT_BOUND}",
                      stacklevel=2)
    b_minus, b_plus = {}, {}
    for k in kernel.available_rows():
        try:
            b_minus[k] = fit_b_minus(kernel, k)
        except FitError:
            pass
        try:
            b_plus[k] = fit_b_plus(kernel, k)
        except FitError:
            pass
    return TransitionKernel(kernel.n, kernel.k_cap, kernel.p, b_minus, b_plus,
                            alpha_bar, "empirical", kernel.provenance)


def _b_lookup(b_minus, k: int) -> float:
    b = b_minus(k) if callable(b_minus) else b_minus[k]
    if not 0.0 <= b <= 1.0:
        raise KernelError(f"b(-1|{k}) = {b} outside [0, 1]")
    return float(b)


def theoretical_kernel(b_minus, alpha_bar: float, n: int,
                       k_cap: int = 30) -> TransitionKernel:
    """Detailed-balance kernel on the ladder k = 1..k_cap.

    Down-jumps are binomial in the single-edge disconnection probability:
    p(-l|k) = C(k,l) b(-1|k)^l (1-b(-1|k))^(k-l). Up-jumps follow from the
    vanishing-current condition with power-law degree ratios:
    p(l|k) = C(k+l,l) b(-1|k+l)^l (1-b(-1|k+l))^k (1+l/k)^-alpha.
    Survival takes the leftover mass; a negative leftover (inconsistent
    b/alpha) renormalizes the row and warns instead of aborting.
    """
    if k_cap < 2:
        raise KernelError("k_cap must be >= 2")
    rows: dict[int, dict[int, float]] = {}
    renormed = []
    for k in range(1, k_cap + 1):
        row: dict[int, float] = {}
        bk = _b_lookup(b_minus, k) if k >= 2 else 0.0
        for l in range(1, k):
            row[-l] = math.comb(k, l) * bk ** l * (1.0 - bk) ** (k - l)
        for l in range(1, k_cap - k + 1):
            bkl = _b_lookup(b_minus, k + l)
            row[l] = (math.comb(k + l, l) * bkl ** l * (1.0 - bkl) ** k
                      * (1.0 + l / k) ** -alpha_bar)
        moving = sum(row.values())
        if moving > 1.0:
            renormed.append(k)
            row = {l: v / moving for l, v in row.items()}
            row[0] = 0.0
        else:
            row[0] = 1.0 - moving
        rows[k] = dict(sorted(row.items()))
    if renormed:
        warnings.warn(
            f"rows {renormed} had negative survival mass and were renormalized; "
            "the b table is inconsistent with the power-law exponent", stacklevel=2)
    table = {k: _b_lookup(b_minus, k) for k in range(2, k_cap + 1)}
    return TransitionKernel(n=n, k_cap=k_cap, p=rows, b_minus=table,
                            alpha_bar=alpha_bar, kind="theoretical",
                            provenance={"renormalized_rows": renormed})


def stationary_power_law(alpha_bar: float, k_cap: int) -> np.ndarray:
    """P(k) ~ k^-alpha normalized over the ladder 1..k_cap (index = degree)."""
    p = np.zeros(k_cap + 1)
    ks = np.arange(1, k_cap + 1, dtype=np.float64)
    w = ks ** -alpha_bar
    p[1:] = w / w.sum()
    return p


def master_step(kernel: TransitionKernel, p: np.ndarray) -> np.ndarray:
    """One step of the kinetic equation: gains from every level plus survival."""
    t = kernel.transition_matrix()
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (kernel.k_cap + 1,):
        raise DataError(f"distribution must have length k_cap+1 = {kernel.k_cap + 1}")
    return p @ t


def detailed_balance_residuals(kernel: TransitionKernel,
                               p: np.ndarray) -> dict[tuple[int, int], float]:
    """Stationary microscopic currents j(l;k) = p(l|k)P(k) - p(-l|k+l)P(k+l).

    All vanish for the theoretical kernel with its own power law; for
    empirical kernels the residuals measure how far each (k, k+l) pair is
    from equilibrium. Cells with an unavailable row are skipped.
    """
    p = np.asarray(p, dtype=np.float64)
    out: dict[tuple[int, int], float] = {}
    for k in kernel.available_rows():
        row = kernel.p[k]
        for l, up in row.items():
            if l <= 0 or k + l > kernel.k_cap:
                continue
            partner = kernel.p.get(k + l)
            if partner is None:
                continue
            down = partner.get(-l, 0.0)
            out[(k, l)] = up * p[k] - down * p[k + l]
    return out


@dataclass(frozen=True)
class CurrentField:
    """Microscopic currents j[(k, l)] (flow k -> k+l) and the macroscopic
    in/out currents per degree level."""

    j: dict[tuple[int, int], float]
    j_in: np.ndarray
    j_out: np.ndarray


def currents(kernel: TransitionKernel, p_t: np.ndarray, p_t1: np.ndarray,
             tol: float = 1e-12) -> CurrentField:
    """Currents of one kinetic step, with the continuity identity asserted.

    P(k, t+1) - P(k, t) must equal -(J_out - J_in) within ``tol``; the
    boundary rows k=1 and k=k_cap simply lose the out-of-ladder terms.
    """
    t = kernel.transition_matrix()
    p_t = np.asarray(p_t, dtype=np.float64)
    p_t1 = np.asarray(p_t1, dtype=np.float64)
    cap = kernel.k_cap
    j: dict[tuple[int, int], float] = {}
    for k in range(1, cap + 1):
        for l in range(1, cap - k + 1):
            j[(k, l)] = t[k, k + l] * p_t[k] - t[k + l, k] * p_t[k + l]
    j_out = np.zeros(cap + 1)
    j_in = np.zeros(cap + 1)
    for (k, l), val in j.items():
        j_out[k] += val
        j_in[k + l] += val
    for k in range(1, cap + 1):
        lhs = p_t1[k] - p_t[k]
        rhs = -(j_out[k] - j_in[k])
        if abs(lhs - rhs) > tol:
            raise KernelError(
                f"continuity violated at k={k}: dP={lhs!r} vs -(Jout-Jin)={rhs!r}")
    return CurrentField(j, j_in, j_out)


def kernel_to_json(kernel: TransitionKernel) -> str:
    """Deterministic JSON document (b tables, p rows, cutoffs, provenance)."""
    doc = {
        "kind": kernel.kind,
        "n": kernel.n,
        "k_cap": kernel.k_cap,
        "alpha_bar": kernel.alpha_bar,
        "p": {str(k): {str(l): v for l, v in row.items()}
              for k, row in kernel.p.items()},
        "b_minus": {str(k): v for k, v in kernel.b_minus.items()},
        "b_plus": {str(k): v for k, v in kernel.b_plus.items()},
        "l_cutoffs": {str(k): list(v) for k, v in kernel.l_cutoffs().items()},
        "provenance": kernel.provenance,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def kernel_from_json(text: str) -> TransitionKernel:
    doc = json.loads(text)
    return TransitionKernel(
        n=int(doc["n"]),
        k_cap=int(doc["k_cap"]),
        p={int(k): {int(l): float(v) for l, v in row.items()}
           for k, row in doc["p"].items()},
        b_minus={int(k): float(v) for k, v in doc.get("b_minus", {}).items()},
        b_plus={int(k): float(v) for k, v in doc.get("b_plus", {}).items()},
        alpha_bar=doc.get("alpha_bar"),
        kind=doc.get("kind", "empirical"),
        provenance=doc.get("provenance", {}),
    )
