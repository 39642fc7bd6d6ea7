"""Shared test helpers: random trees, brute-force oracles."""

from collections import deque
from functools import lru_cache
from itertools import product

import numpy as np
import pytest

from mstdyn.corrnet import TreeFrame


def prufer_to_edges(seq, n):
    """Decode a Pruefer sequence into the unique labeled tree's edge list."""
    seq = list(seq)
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    last = [i for i in range(n) if degree[i] == 1]
    edges.append((last[0], last[1]))
    return edges


@lru_cache(maxsize=None)
def all_labeled_trees(n):
    """Edge lists of all n^(n-2) labeled spanning trees on n vertices."""
    if n == 2:
        return [[(0, 1)]]
    return [prufer_to_edges(seq, n) for seq in product(range(n), repeat=n - 2)]


def random_tree_frame(n, rng, frame_index=0):
    """Uniform random labeled tree with random edge weights."""
    if n == 2:
        edges = [(0, 1)]
    else:
        edges = prufer_to_edges(rng.integers(0, n, size=n - 2), n)
    weighted = [(i, j, float(w)) for (i, j), w in
                zip(edges, rng.uniform(0.1, 1.9, size=len(edges)))]
    return TreeFrame.from_edges(n, weighted, frame_index=frame_index)


def adjacency(frame):
    adj = {v: [] for v in range(frame.n)}
    for i, j in zip(frame.edge_i.tolist(), frame.edge_j.tolist()):
        adj[i].append(j)
        adj[j].append(i)
    return adj


def bfs_levels_oracle(frame, root):
    """Plain queue BFS; independent of the package's CSR machinery."""
    adj = adjacency(frame)
    level = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if u not in level:
                level[u] = level[v] + 1
                queue.append(u)
    return [level[v] for v in range(frame.n)]


def all_pairs_paths_oracle(frame):
    """Dict (i, j) -> vertex path, from per-source BFS with parents."""
    adj = adjacency(frame)
    paths = {}
    for src in range(frame.n):
        parent = {src: None}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in parent:
                    parent[u] = v
                    queue.append(u)
        for dst in range(src + 1, frame.n):
            path = [dst]
            while path[-1] != src:
                path.append(parent[path[-1]])
            paths[(src, dst)] = path[::-1]
    return paths


def betweenness_oracle(frame):
    counts = [0] * frame.n
    for path in all_pairs_paths_oracle(frame).values():
        for v in path[1:-1]:
            counts[v] += 1
    return counts


def total_path_length_oracle(frame):
    return sum(len(p) - 1 for p in all_pairs_paths_oracle(frame).values())


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
