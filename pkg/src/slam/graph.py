"""Exact k-nearest-neighbour lists and the mutual k-NN spatial graph."""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from .core import SlamError


class GraphError(SlamError):
    pass


_CHUNK = 512


def _check(coords, k):
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2:
        raise GraphError(f"coords must be a 2-D array, got shape {coords.shape}")
    n = coords.shape[0]
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise GraphError(f"k must be a positive integer, got {k!r}")
    if k >= n:
        raise GraphError(f"k={k} must be smaller than the number of nodes ({n})")
    return coords, n


def knn_lists(coords, k: int) -> np.ndarray:
    """Indices of each node's ``k`` nearest other nodes, nearest first.

    Distances are exact Euclidean; ties are broken by ascending node index.
    Coincident points are legitimate neighbours at distance 0.
    """
    coords, n = _check(coords, k)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        rows = np.arange(start, stop)
        # squared distances computed per coordinate so equal geometric distances
        # compare equal (the |a|^2+|b|^2-2ab expansion would not)
        d2 = np.zeros((stop - start, n))
        for j in range(coords.shape[1]):
            diff = coords[start:stop, j, None] - coords[None, :, j]
            d2 += diff * diff
        d2[rows - start, rows] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        less = d2 < kth[:, None]
        equal = d2 == kth[:, None]
        need = k - less.sum(axis=1)
        take = less | (equal & (np.cumsum(equal, axis=1) <= need[:, None]))
        # nonzero walks row-major, so within a row candidates come out in index order
        r, c = np.nonzero(take)
        idx = c.reshape(stop - start, k)
        dist = d2[r, c].reshape(stop - start, k)
        order = np.argsort(dist, axis=1, kind="stable")
        out[start:stop] = np.take_along_axis(idx, order, axis=1)
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class SpatialGraph:
    """Undirected graph over spots. ``edges[r]`` has edge index ``r + 1``."""

    n_nodes: int
    edges: np.ndarray  # (E, 2) int, u < v, lexicographically sorted
    k: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        lookup = {(int(u), int(v)): r + 1 for r, (u, v) in enumerate(edges)}
        object.__setattr__(self, "_lookup", lookup)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def edge_index(self, u: int, v: int) -> int:
        """The bijection I(u, v) onto 1..|E|; symmetric in its arguments."""
        key = (u, v) if u < v else (v, u)
        try:
            return self._lookup[key]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None

    def has_edge(self, u: int, v: int) -> bool:
        key = (u, v) if u < v else (v, u)
        return key in self._lookup

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["u", "v", "I"])
            for r, (u, v) in enumerate(self.edges):
                writer.writerow([int(u), int(v), r + 1])


def build_mutual_knn(coords, k: int) -> SpatialGraph:
    """Connect u and v iff each is among the other's k nearest neighbours."""
    coords, n = _check(coords, k)
    nbrs = knn_lists(coords, k)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = nbrs.ravel()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    keys, counts = np.unique(lo * n + hi, return_counts=True)
    mutual = keys[counts == 2]
    edges = np.stack([mutual // n, mutual % n], axis=1)
    return SpatialGraph(n_nodes=n, edges=edges, k=int(k))
