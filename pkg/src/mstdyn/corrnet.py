"""Rolling-window correlation matrices, the distance transform and per-window
minimal spanning trees.

This is the hot path: correlations are maintained incrementally (running
Σx, Σx² and Σxy per pair, one subtract/add per scan step) with a full
recomputation every ``recompute_every`` frames to bound floating-point
drift. Tree construction is Kruskal over candidate edges sorted by
(distance, i, j), so results are fully deterministic under ties; the
union-find inner loop runs in the compiled kernel when available.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import argsort_edges, kruskal_select
from .errors import DataError, DimensionError
from .ingest import ReturnPanel

__all__ = [
    "WindowSpec",
    "CorrelationMatrix",
    "DistanceMatrix",
    "TreeFrame",
    "FrameSkip",
    "rolling_correlations",
    "to_distances",
    "build_mst",
    "frame_stream",
]

#: variance below this fraction of the mean square is treated as zero
_VAR_RTOL = 1e-10


@dataclass(frozen=True)
class WindowSpec:
    """Scanning-window geometry: width and step, both in trading days."""

    width_td: int = 400
    step_td: int = 1

    def __post_init__(self):
        if self.width_td < 2:
            raise DataError("width_td must be >= 2")
        if self.step_td < 1:
            raise DataError("step_td must be >= 1")

    def frame_count(self, n_rows: int) -> int:
        if n_rows < self.width_td:
            return 0
        return (n_rows - self.width_td) // self.step_td + 1

    def frame_rows(self, frame_index: int) -> tuple[int, int]:
        start = frame_index * self.step_td
        return start, start + self.width_td

    def center_offset(self) -> int:
        return self.width_td // 2


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson coefficients for one window (symmetric, unit diagonal)."""

    frame_index: int
    center_date: str
    values: np.ndarray

    def validate(self, diagnostic: bool = False, psd_tol: float = 1e-9):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError("correlation matrix must be square")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise DataError("correlation matrix must be symmetric")
        if not np.all(np.diag(v) == 1.0):
            raise DataError("correlation diagonal must be exactly 1")
        if v.min() < -1.0 or v.max() > 1.0:
            raise DataError("correlations must lie in [-1, 1]")
        if diagnostic:
            smallest = np.linalg.eigvalsh(v)[0]
            if smallest < -psd_tol:
                raise DataError(f"correlation matrix not PSD: min eigenvalue {smallest:.3e}")


@dataclass(frozen=True)
class DistanceMatrix:
    """Correlation distances d = sqrt(2(1-C)); entries in [0, 2]."""

    values: np.ndarray

    def validate(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError("distance matrix must be square")
        if not np.all(np.diag(v) == 0.0):
            raise DataError("distance diagonal must be zero")
        if v.min() < 0.0 or v.max() > 2.0:
            raise DataError("distances must lie in [0, 2]")


@dataclass(frozen=True)
class FrameSkip:
    """Marker for a window that could not produce a correlation matrix."""

    frame_index: int
    center_date: str
    tickers: tuple[str, ...]
    reason: str


@dataclass(frozen=True)
class TreeFrame:
    """One window's minimal spanning tree.

    Edges are stored as parallel arrays with edge_i < edge_j, sorted by
    (edge_i, edge_j); ``degree`` holds the per-vertex degree, whose total
    is the conserved 2(n-1).
    """

    frame_index: int
    center_date: str
    tickers: tuple[str, ...]
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_dist: np.ndarray
    degree: np.ndarray
    uses_negative_correlation: bool = False

    @property
    def n(self) -> int:
        return len(self.tickers)

    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.edge_i.tolist(), self.edge_j.tolist(),
                        self.edge_dist.tolist()))

    def total_weight(self) -> float:
        return float(self.edge_dist.sum())

    @classmethod
    def from_edges(cls, n: int, edges, frame_index: int = 0, center_date: str = "",
                   tickers=None, uses_negative_correlation: bool = False) -> "TreeFrame":
        """Build a frame from explicit (i, j[, d]) edges (tests, synthetic trees)."""
        if tickers is None:
            tickers = tuple(f"A{k:04d}" for k in range(n))
        ei, ej, ed = [], [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            d = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise DataError("self-loop edge")
            ei.append(min(i, j))
            ej.append(max(i, j))
            ed.append(d)
        ei = np.asarray(ei, dtype=np.int32)
        ej = np.asarray(ej, dtype=np.int32)
        ed = np.asarray(ed, dtype=np.float64)
        order = np.lexsort((ej, ei))
        ei, ej, ed = ei[order], ej[order], ed[order]
        if len(ei) != n - 1:
            raise DataError(f"a spanning tree on {n} vertices needs {n - 1} edges")
        degree = np.bincount(np.concatenate([ei, ej]), minlength=n).astype(np.int64)
        frame = cls(frame_index, center_date, tuple(tickers), ei, ej, ed, degree,
                    uses_negative_correlation)
        _check_spanning(frame)
        return frame


def _check_spanning(frame: TreeFrame):
    n = frame.n
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(frame.edge_i.tolist(), frame.edge_j.tolist()):
        ri, rj = find(i), find(j)
        if ri == rj:
            raise DataError("edge set contains a cycle")
        parent[ri] = rj


class _PairIndex:
    """Condensed upper-triangle bookkeeping for a fixed n."""

    _cache: dict[int, "_PairIndex"] = {}

    def __init__(self, n: int):
        iu = np.triu_indices(n, 1)
        self.n = n
        self.i = iu[0].astype(np.int32)
        self.j = iu[1].astype(np.int32)
        self.flat = (iu[0] * n + iu[1]).astype(np.int64)

    @classmethod
    def get(cls, n: int) -> "_PairIndex":
        px = cls._cache.get(n)
        if px is None:
            px = cls._cache[n] = cls(n)
        return px


def _mst_positions(dcond: np.ndarray, px: _PairIndex) -> np.ndarray:
    """Condensed positions of the MST edges of a complete distance graph."""
    order = argsort_edges(np.ascontiguousarray(dcond))
    sel = kruskal_select(order, px.i, px.j, px.n)
    if sel.shape[0] != px.n - 1:
        raise DataError("distance graph is not connected")
    return sel


def _tree_from_positions(sel, dcond, px, frame_index, center_date, tickers,
                         uses_negative) -> TreeFrame:
    ei = px.i[sel]
    ej = px.j[sel]
    ed = dcond[sel]
    order = np.lexsort((ej, ei))
    ei, ej, ed = np.ascontiguousarray(ei[order]), np.ascontiguousarray(ej[order]), ed[order]
    degree = np.bincount(np.concatenate([ei, ej]), minlength=px.n).astype(np.int64)
    return TreeFrame(frame_index, center_date, tickers, ei, ej, ed, degree,
                     uses_negative)


class _RollingScan:
    """Incremental Σx/Σxy engine producing one condensed correlation vector
    per frame."""

    def __init__(self, returns: ReturnPanel, spec: WindowSpec,
                 recompute_every: int = 256):
        self.panel = returns
        self.spec = spec
        self.recompute_every = max(int(recompute_every), 1)
        self.X = np.asfortranarray(returns.returns)
        self.n, self.t_rows = self.X.shape
        if self.n < 2:
            raise DimensionError("need at least 2 assets")
        self.px = _PairIndex.get(self.n)
        self.sums = np.zeros((self.n, self.n))
        self.s1 = np.zeros(self.n)

    def _accumulate(self, start: int):
        self.sums.fill(0.0)
        self.s1.fill(0.0)
        for t in range(start, start + self.spec.width_td):
            x = self.X[:, t]
            self.sums += x[:, None] * x[None, :]
            self.s1 += x

    def _slide(self, old_start: int, new_start: int):
        for t in range(old_start, new_start):
            x = self.X[:, t]
            self.sums -= x[:, None] * x[None, :]
            self.s1 -= x
        for t in range(old_start + self.spec.width_td, new_start + self.spec.width_td):
            x = self.X[:, t]
            self.sums += x[:, None] * x[None, :]
            self.s1 += x

    def frames(self):
        """Yield (frame_index, start, center_date, ccond, bad_vertex_idx).

        ccond is None for skipped frames (zero-variance asset in window);
        bad_vertex_idx is then the offending vertex index array.
        """
        spec = self.spec
        count = spec.frame_count(self.t_rows)
        if count == 0:
            warnings.warn(
                f"window width {spec.width_td} exceeds the {self.t_rows} return rows; "
                "empty frame stream", stacklevel=3)
            return
        w = float(spec.width_td)
        px = self.px
        prev_start = None
        for f in range(count):
            start, _ = spec.frame_rows(f)
            if prev_start is None or f % self.recompute_every == 0:
                self._accumulate(start)
            else:
                self._slide(prev_start, start)
            prev_start = start
            center_date = self.panel.dates[start + spec.center_offset()]

            diag = np.diagonal(self.sums).copy()
            den0 = w * diag - self.s1 * self.s1
            bad = den0 <= _VAR_RTOL * w * np.abs(diag)
            if bad.any():
                yield f, start, center_date, None, np.flatnonzero(bad)
                continue
            num = w * np.take(self.sums.reshape(-1), px.flat) \
                - self.s1[px.i] * self.s1[px.j]
            den = np.sqrt(den0[px.i] * den0[px.j])
            ccond = num / den
            np.clip(ccond, -1.0, 1.0, out=ccond)
            yield f, start, center_date, ccond, None


def _square_from_condensed(ccond: np.ndarray, px: _PairIndex,
                           diag: float) -> np.ndarray:
    m = np.empty((px.n, px.n))
    np.fill_diagonal(m, diag)
    m[px.i, px.j] = ccond
    m[px.j, px.i] = ccond
    return m


def rolling_correlations(returns: ReturnPanel, spec: WindowSpec | None = None,
                         recompute_every: int = 256):
    """Stream of per-frame CorrelationMatrix (or FrameSkip) objects.

    Frame f covers return rows [f*step, f*step + width); its center date is
    the date at offset width//2 inside the window. A zero-variance asset in
    a window yields a FrameSkip naming the tickers, never a silently filled
    matrix.
    """
    spec = spec or WindowSpec()
    scan = _RollingScan(returns, spec, recompute_every)
    for f, _start, center_date, ccond, bad in scan.frames():
        if ccond is None:
            names = tuple(returns.tickers[k] for k in bad)
            yield FrameSkip(f, center_date, names,
                            f"zero variance in frame {f}: {', '.join(names)}")
            continue
        yield CorrelationMatrix(f, center_date,
                                _square_from_condensed(ccond, scan.px, 1.0))


def to_distances(corr: CorrelationMatrix | np.ndarray) -> DistanceMatrix:
    """Distance transform d(i,j) = sqrt(2(1 - C(i,j)))."""
    values = corr.values if isinstance(corr, CorrelationMatrix) else np.asarray(corr)
    d = np.sqrt(2.0 * (1.0 - values))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


def build_mst(dist: DistanceMatrix | np.ndarray, frame_index: int = 0,
              center_date: str = "", tickers=None) -> TreeFrame:
    """Kruskal MST of a full distance matrix.

    Candidate edges are processed in (distance, min(i,j), max(i,j)) order;
    the negative-correlation diagnostic flags any selected edge with
    d^2 > 2, i.e. C < 0.
    """
    values = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DataError("distance matrix must be square")
    if not np.all(np.isfinite(values)):
        raise DataError("distance matrix must be finite")
    if not np.allclose(values, values.T, rtol=0.0, atol=1e-12):
        raise DataError("distance matrix must be symmetric")
    n = values.shape[0]
    if n < 2:
        raise DimensionError("need at least 2 vertices to build a tree")
    if tickers is None:
        tickers = tuple(f"A{k:04d}" for k in range(n))
    px = _PairIndex.get(n)
    dcond = np.ascontiguousarray(np.take(values.reshape(-1), px.flat))
    sel = _mst_positions(dcond, px)
    uses_negative = bool(np.any(dcond[sel] * dcond[sel] > 2.0))
    return _tree_from_positions(sel, dcond, px, frame_index, center_date,
                                tuple(tickers), uses_negative)


def frame_stream(returns: ReturnPanel, spec: WindowSpec | None = None,
                 recompute_every: int = 256):
    """Stream of per-frame TreeFrame (or FrameSkip) objects in frame order."""
    spec = spec or WindowSpec()
    scan = _RollingScan(returns, spec, recompute_every)
    px = scan.px
    for f, _start, center_date, ccond, bad in scan.frames():
        if ccond is None:
            names = tuple(returns.tickers[k] for k in bad)
            yield FrameSkip(f, center_date, names,
                            f"zero variance in frame {f}: {', '.join(names)}")
            continue
        dcond = np.sqrt(2.0 * (1.0 - ccond))
        sel = _mst_positions(dcond, px)
        uses_negative = bool(np.any(ccond[sel] < 0.0))
        yield _tree_from_positions(sel, dcond, px, f, center_date,
                                   returns.tickers, uses_negative)
