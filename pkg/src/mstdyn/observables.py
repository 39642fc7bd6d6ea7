"""Per-frame tree observables.

Everything here is a pure function of a TreeFrame (plus, for the
leader-excluded occupation layer, the frame's distance matrix): degree
distribution and its power-law exponent, mean occupation layer, mean
handshake distance, degree entropy, tree betweenness, degree-rank
tracking, rank handshake distances, variograms and the Boltzmann energy
mapping of the degree ladder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import corrnet
from .corrnet import DistanceMatrix, TreeFrame
from .errors import DataError, DimensionError, FitError

__all__ = [
    "DegreeDistribution",
    "PowerLawFit",
    "RankRecord",
    "VariogramSeries",
    "BoltzmannMap",
    "TreeMetrics",
    "degree_distribution",
    "fit_power_law",
    "mean_alpha",
    "central_vertex",
    "mol",
    "mhsd",
    "total_path_edges",
    "degree_entropy",
    "efficiency_entropy",
    "tree_betweenness",
    "rank_track",
    "thsd",
    "variogram",
    "boltzmann_map",
]


# ---------------------------------------------------------------------------
# tree plumbing

def _csr(frame: TreeFrame):
    """Adjacency of the tree in CSR form: (indptr, neighbors)."""
    n = frame.n
    ends = np.concatenate([frame.edge_i, frame.edge_j])
    other = np.concatenate([frame.edge_j, frame.edge_i])
    order = np.argsort(ends, kind="stable")
    nbrs = other[order]
    counts = np.bincount(ends, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, nbrs


def _bfs(indptr, nbrs, root: int, n: int):
    """BFS from root; returns (visit order, parent, level) arrays."""
    order = np.empty(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    level = np.full(n, -1, dtype=np.int64)
    order[0] = root
    level[root] = 0
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        head += 1
        lv = level[v] + 1
        for u in nbrs[indptr[v]:indptr[v + 1]]:
            if level[u] < 0:
                level[u] = lv
                parent[u] = v
                order[tail] = u
                tail += 1
    if tail != n:
        raise DataError("tree frame is not connected")
    return order, parent, level


def _subtree_sizes(order, parent, n):
    sizes = np.ones(n, dtype=np.int64)
    for idx in range(n - 1, 0, -1):
        v = order[idx]
        sizes[parent[v]] += sizes[v]
    return sizes


class TreeMetrics:
    """Shared structural quantities of one frame.

    Per-frame observables need the same rooted pass (BFS order, subtree
    sizes, betweenness) over and over; this view computes each piece once.
    The module-level functions build a throwaway instance, while the frame
    pipeline keeps one per frame.
    """

    def __init__(self, frame: TreeFrame):
        self.frame = frame
        self.n = frame.n
        self.indptr, self.nbrs = _csr(frame)
        self.order, self.parent, _ = _bfs(self.indptr, self.nbrs, 0, self.n)
        self.sizes = _subtree_sizes(self.order, self.parent, self.n)
        self._betweenness = None
        self._rank_order = None

    def levels_from(self, root: int) -> np.ndarray:
        _, _, level = _bfs(self.indptr, self.nbrs, root, self.n)
        return level

    def betweenness(self) -> np.ndarray:
        if self._betweenness is None:
            n = self.n
            sq = np.zeros(n, dtype=np.int64)
            non_root = self.order[1:]
            np.add.at(sq, self.parent[non_root], self.sizes[non_root] ** 2)
            up = n - self.sizes
            up[self.order[0]] = 0
            self._betweenness = ((n - 1) ** 2 - (sq + up ** 2)) // 2
        return self._betweenness

    def rank_order(self) -> np.ndarray:
        if self._rank_order is None:
            self._rank_order = np.lexsort(
                (np.arange(self.n), -self.betweenness(), -self.frame.degree))
        return self._rank_order

    def total_path_edges(self) -> int:
        sub = self.sizes[self.order[1:]]
        return int((sub * (self.n - sub)).sum())


# ---------------------------------------------------------------------------
# degree distribution and power-law exponent

@dataclass(frozen=True)
class DegreeDistribution:
    """Vertex-degree counts N(k) of one frame; P(k) = N(k)/n."""

    frame_index: int
    counts: dict[int, int]
    n: int

    @classmethod
    def from_counts(cls, counts: dict[int, int], frame_index: int = 0) -> "DegreeDistribution":
        """Synthetic distribution; no tree identities are enforced."""
        if any(k < 1 or c < 0 for k, c in counts.items()):
            raise DataError("degrees must be >= 1 and counts >= 0")
        n = int(sum(counts.values()))
        return cls(frame_index, dict(sorted(counts.items())), n)

    def probability(self, k: int) -> float:
        return self.counts.get(k, 0) / self.n


def degree_distribution(frame: TreeFrame) -> DegreeDistribution:
    """Exact degree counts; for a tree they satisfy sum_k k N(k) = 2(n-1)."""
    ks, cs = np.unique(frame.degree, return_counts=True)
    counts = {int(k): int(c) for k, c in zip(ks, cs)}
    dist = DegreeDistribution(frame.frame_index, counts, frame.n)
    if sum(k * c for k, c in counts.items()) != 2 * (frame.n - 1):
        raise DataError("degree sum violates the tree identity 2(n-1)")
    return dist


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted exponent of N(k) ~ k^-alpha over [k_min, k_max)."""

    alpha: float
    alpha_stderr: float
    k_min: int
    k_max: int
    r2: float
    n_bins: int
    method: str = "ols"


def fit_power_law(dist: DegreeDistribution, k_min: int = 2, k_max: int = 12,
                  method: str = "ols") -> PowerLawFit:
    """Exponent of the degree distribution over populated bins in [k_min, k_max).

    Default is ordinary least squares on (ln k, ln N(k)); alpha is the
    negated slope and alpha_stderr the standard error of the slope.
    ``method="mle"`` instead maximizes the truncated discrete power-law
    likelihood (sensitivity check; r2 is not defined there).
    """
    ks = np.array([k for k in sorted(dist.counts) if k_min <= k < k_max
                   and dist.counts[k] > 0], dtype=np.float64)
    if ks.size < 3:
        raise FitError(f"need >= 3 populated degree bins in [{k_min}, {k_max}), "
                       f"got {ks.size}")
    ns = np.array([dist.counts[int(k)] for k in ks], dtype=np.float64)

    if method == "ols":
        x = np.log(ks)
        y = np.log(ns)
        xm, ym = x.mean(), y.mean()
        sxx = float(((x - xm) ** 2).sum())
        slope = float(((x - xm) * (y - ym)).sum()) / sxx
        resid = y - (ym + slope * (x - xm))
        sse = float((resid ** 2).sum())
        sst = float(((y - ym) ** 2).sum())
        dof = ks.size - 2
        stderr = math.sqrt(sse / dof / sxx) if dof > 0 else 0.0
        r2 = 1.0 if sst == 0.0 else 1.0 - sse / sst
        return PowerLawFit(-slope, stderr, k_min, k_max, r2, int(ks.size), "ols")

    if method == "mle":
        total = ns.sum()
        sum_log = float((ns * np.log(ks)).sum())

        def nll(alpha):
            z = float((ks ** -alpha).sum())
            return alpha * sum_log + total * math.log(z)

        res = minimize_scalar(nll, bounds=(1e-3, 20.0), method="bounded",
                              options={"xatol": 1e-10})
        alpha = float(res.x)
        h = 1e-4
        info = (nll(alpha + h) - 2 * nll(alpha) + nll(alpha - h)) / h ** 2
        stderr = 1.0 / math.sqrt(info) if info > 0 else float("nan")
        return PowerLawFit(alpha, stderr, k_min, k_max, float("nan"),
                           int(ks.size), "mle")

    raise FitError(f"unknown power-law fit method {method!r}")


def mean_alpha(alphas) -> tuple[float, float]:
    """Mean and sample standard deviation of the valid exponents."""
    vals = np.array([a.alpha if isinstance(a, PowerLawFit) else a
                     for a in alphas if a is not None], dtype=np.float64)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise FitError("no valid exponents")
    std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return float(vals.mean()), std


# ---------------------------------------------------------------------------
# centrality, occupation layer, handshake distances

def tree_betweenness(frame: TreeFrame, metrics: TreeMetrics | None = None) -> np.ndarray:
    """Per-vertex count of unordered pairs whose unique path crosses it.

    From subtree sizes: the branches at v partition the other n-1 vertices,
    and b_v = sum over branch pairs of size_a * size_b.
    """
    return (metrics or TreeMetrics(frame)).betweenness()


def central_vertex(frame: TreeFrame, rule: str = "degree",
                   metrics: TreeMetrics | None = None) -> int:
    """Root used by the occupation layer.

    ``degree``: maximal degree, ties by larger betweenness, then smallest
    (lexicographic) id. ``betweenness`` swaps the first two criteria.
    """
    metrics = metrics or TreeMetrics(frame)
    btw = metrics.betweenness()
    idx = np.arange(frame.n)
    if rule == "degree":
        keys = (idx, -btw, -frame.degree)
    elif rule == "betweenness":
        keys = (idx, -frame.degree, -btw)
    else:
        raise DataError(f"unknown central-vertex rule {rule!r}")
    return int(np.lexsort(keys)[0])


def mol(frame: TreeFrame, exclude=None, dist: DistanceMatrix | np.ndarray | None = None,
        central_rule: str = "degree", metrics: TreeMetrics | None = None) -> float:
    """Mean occupation layer: average handshake distance from the central vertex.

    With ``exclude`` set the tree is rebuilt from the distance matrix with
    that asset removed (a tree minus a vertex is disconnected, so masking
    is not meaningful) and the layer is evaluated on the reduced tree.
    """
    if exclude is None:
        metrics = metrics or TreeMetrics(frame)
        level = metrics.levels_from(central_vertex(frame, central_rule, metrics))
        return float(level.sum()) / frame.n
    if dist is None:
        raise DataError("excluding an asset requires the frame's distance matrix")
    values = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist)
    a = frame.tickers.index(exclude) if isinstance(exclude, str) else int(exclude)
    if frame.n - 1 < 2:
        raise DimensionError("exclusion leaves fewer than 2 vertices")
    keep = [v for v in range(frame.n) if v != a]
    reduced = values[np.ix_(keep, keep)]
    tickers = tuple(frame.tickers[v] for v in keep)
    sub = corrnet.build_mst(reduced, frame.frame_index, frame.center_date, tickers)
    return mol(sub, central_rule=central_rule)


def total_path_edges(frame: TreeFrame, metrics: TreeMetrics | None = None) -> int:
    """Sum of tree path lengths (in edges) over all unordered vertex pairs.

    Each edge separates a subtree of size s from the other n-s vertices and
    is crossed by exactly s(n-s) pairs.
    """
    return (metrics or TreeMetrics(frame)).total_path_edges()


def mhsd(frame: TreeFrame, metrics: TreeMetrics | None = None) -> float:
    """Mean handshake distance over all n(n-1)/2 vertex pairs."""
    n = frame.n
    return total_path_edges(frame, metrics) / (n * (n - 1) // 2)


def degree_entropy(dist: DegreeDistribution) -> float:
    """Shannon entropy -sum_k P(k) ln P(k) of the degree distribution."""
    s = 0.0
    for c in dist.counts.values():
        if c > 0:
            p = c / dist.n
            s -= p * math.log(p)
    return s


def efficiency_entropy(frame: TreeFrame) -> float:
    """Entropy of normalized vertex efficiencies e(v) = sum_u 1/hd(v, u).

    Nonstandard reconstruction (the usual definitions live elsewhere);
    outputs carrying this series are labeled accordingly.
    """
    n = frame.n
    indptr, nbrs = _csr(frame)
    eff = np.empty(n)
    for v in range(n):
        _, _, level = _bfs(indptr, nbrs, v, n)
        level[v] = 1  # avoid 0-division; the v term is excluded below
        eff[v] = (1.0 / level).sum() - 1.0
    p = eff / eff.sum()
    return float(-(p * np.log(p)).sum())


# ---------------------------------------------------------------------------
# rank tracking

@dataclass(frozen=True)
class RankRecord:
    """Degree ranking of one frame (ties by betweenness, then id).

    When a followed vertex was supplied, thsd2/thsd3 carry its handshake
    distances to the rank-2/rank-3 degree holders (with twin distances);
    they are 0 exactly when the followed vertex holds the rank itself.
    """

    leader: int
    vice: int
    third: int | None
    k_leader: int
    k2: int
    k3: int | None
    leader_id: str
    vice_id: str
    third_id: str | None
    b_leader: int
    b_vice: int
    thsd2: int | None = None
    thsd2_twin: int | None = None
    thsd3: int | None = None
    thsd3_twin: int | None = None

    @property
    def delta(self) -> int:
        return self.k_leader - self.k2

    @property
    def delta2(self) -> int | None:
        return None if self.k3 is None else self.k2 - self.k3


def _rank_order(frame: TreeFrame, metrics: TreeMetrics | None = None) -> np.ndarray:
    return (metrics or TreeMetrics(frame)).rank_order()


def rank_track(frame: TreeFrame, follow=None,
               metrics: TreeMetrics | None = None) -> RankRecord:
    """Leader / vice-leader / third vertex by degree, deterministically
    tie-broken, with the rank handshake distances measured from ``follow``
    (the current leader when no vertex is followed)."""
    metrics = metrics or TreeMetrics(frame)
    btw = metrics.betweenness()
    order = metrics.rank_order()
    leader, vice = int(order[0]), int(order[1])
    third = int(order[2]) if frame.n > 2 else None
    if follow is None:
        src = leader
    elif isinstance(follow, str):
        src = frame.tickers.index(follow)
    else:
        src = int(follow)
    levels = metrics.levels_from(src)
    thsd2, thsd2_twin = thsd(frame, src, 2, metrics, levels)
    thsd3 = thsd3_twin = None
    if third is not None:
        thsd3, thsd3_twin = thsd(frame, src, 3, metrics, levels)
    return RankRecord(
        leader=leader, vice=vice, third=third,
        k_leader=int(frame.degree[leader]), k2=int(frame.degree[vice]),
        k3=None if third is None else int(frame.degree[third]),
        leader_id=frame.tickers[leader], vice_id=frame.tickers[vice],
        third_id=None if third is None else frame.tickers[third],
        b_leader=int(btw[leader]), b_vice=int(btw[vice]),
        thsd2=thsd2, thsd2_twin=thsd2_twin, thsd3=thsd3, thsd3_twin=thsd3_twin,
    )


def thsd(frame: TreeFrame, from_vertex, rank: int = 2,
         metrics: TreeMetrics | None = None,
         levels: np.ndarray | None = None) -> tuple[int, int | None]:
    """Handshake distance from a vertex to the holders of a degree rank.

    Returns (distance to the nearest holder of the rank's degree, distance
    to the next holder whose distance is not shorter; None when the holder
    is unique). Zero distance means ``from_vertex`` itself holds the rank.
    """
    if rank < 1 or rank > frame.n:
        raise DataError(f"rank {rank} out of range")
    src = frame.tickers.index(from_vertex) if isinstance(from_vertex, str) else int(from_vertex)
    metrics = metrics or TreeMetrics(frame)
    k_rank = int(frame.degree[metrics.rank_order()[rank - 1]])
    holders = np.flatnonzero(frame.degree == k_rank)
    if levels is None:
        levels = metrics.levels_from(src)
    dists = np.sort(levels[holders], kind="stable")
    first = int(dists[0])
    twin = int(dists[1]) if dists.size > 1 else None
    return first, twin


# ---------------------------------------------------------------------------
# variogram

@dataclass(frozen=True)
class VariogramSeries:
    """First differences of a series plus block-wise partial variances."""

    increments: np.ndarray
    partial_variances: list[tuple[int, float]]
    lag: int
    block_td: int
    squared: bool = False


def variogram(series, lag: int = 1, partial_window: int = 60,
              squared: bool = False) -> VariogramSeries:
    """Increments x(t+lag) - x(t) and their variances over disjoint blocks.

    Blocks of ``partial_window`` increments are taken consecutively from
    the start; an incomplete tail block is dropped. Variances are unbiased
    (ddof=1). ``squared`` emits squared increments instead of raw ones.
    """
    x = np.asarray(series, dtype=np.float64)
    if lag < 1 or x.size <= lag:
        raise DataError("series too short for the requested lag")
    if partial_window < 2:
        raise DataError("partial_window must be >= 2")
    inc = x[lag:] - x[:-lag]
    if squared:
        inc = inc ** 2
    partials = []
    for start in range(0, inc.size - partial_window + 1, partial_window):
        block = inc[start:start + partial_window]
        partials.append((start, float(block.var(ddof=1))))
    return VariogramSeries(inc, partials, lag, partial_window, squared)


# ---------------------------------------------------------------------------
# Boltzmann mapping of the degree ladder

@dataclass(frozen=True)
class BoltzmannMap:
    """Energy view of the degree ladder: eps(k) = ln k, beta = alpha - 1."""

    beta: float
    z: float
    degrees: np.ndarray
    energies: np.ndarray
    weights: np.ndarray


def boltzmann_map(dist: DegreeDistribution | int, alpha_bar: float) -> BoltzmannMap:
    """Boltzmann weights exp(-beta ln k)/Z over the ladder k = 1..n-1."""
    n = dist if isinstance(dist, int) else dist.n
    if n < 2:
        raise DimensionError("ladder needs n >= 2")
    beta = alpha_bar - 1.0
    degrees = np.arange(1, n, dtype=np.int64)
    energies = np.log(degrees.astype(np.float64))
    raw = np.exp(-beta * energies)
    z = float(raw.sum())
    return BoltzmannMap(beta, z, degrees, energies, raw / z)
