"""Label-conditional edge attributes and sampling from their kernel density estimate."""

from __future__ import annotations


import numpy as np

from .core import SlamError
from .graph import SpatialGraph


class EdgeAttributeError(SlamError):
    pass


def type_edges(graph: SpatialGraph, codes, n_labels: int) -> np.ndarray:
    """Edge type t when both endpoints carry label t (codes 1..K), else 0."""
    codes = np.asarray(codes)
    if codes.shape != (graph.n_nodes,):
        raise EdgeAttributeError(f"expected {graph.n_nodes} label codes, got shape {codes.shape}")
    if codes.size and (codes.min() < 1 or codes.max() > n_labels):
        raise EdgeAttributeError(f"label codes must lie in 1..{n_labels}")
    cu = codes[graph.edges[:, 0]]
    cv = codes[graph.edges[:, 1]]
    return np.where(cu == cv, cu, 0).astype(np.int64)


def similarity(x_u, x_v) -> float:
    """Cosine similarity clamped to [0, 1]; 0 when either vector is all zeros."""
    x_u = np.asarray(x_u, dtype=float)
    x_v = np.asarray(x_v, dtype=float)
    if x_u.shape != x_v.shape:
        raise EdgeAttributeError(f"dimension mismatch: {x_u.shape} vs {x_v.shape}")
    nu = np.linalg.norm(x_u)
    nv = np.linalg.norm(x_v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(x_u, x_v) / (nu * nv))))


def edge_similarity(attributes, edges) -> np.ndarray:
    X = np.asarray(attributes, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    u, v = edges[:, 0], edges[:, 1]
    dots = np.einsum("ij,ij->i", X[u], X[v])
    denom = norms[u] * norms[v]
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(sim, 0.0, 1.0)


def severity_weights(graph: SpatialGraph, truth_codes, attributes=None, mode: str = "cosine-clamped") -> np.ndarray:
    """Per-edge weight: Sim on edges inside a truth domain, 1 - Sim on edges crossing domains.

    Only the ground-truth edge types enter, so the same vector serves every
    labeling of the dataset.
    """
    if mode == "constant-one":
        return np.ones(graph.n_edges)
    if mode != "cosine-clamped":
        raise EdgeAttributeError(f"unknown similarity mode {mode!r}")
    if attributes is None:
        raise EdgeAttributeError("cosine-clamped weights need per-spot attributes")
    truth_codes = np.asarray(truth_codes)
    same = truth_codes[graph.edges[:, 0]] == truth_codes[graph.edges[:, 1]]
    sim = edge_similarity(attributes, graph.edges)
    return np.where(same, sim, 1.0 - sim)


def edge_attribute_matrix(edge_types, weights, n_labels: int, zero_rows: str = "keep") -> np.ndarray:
    """One-hot edge types scaled row-wise by the weights; type-0 edges give zero rows.

    ``zero_rows="drop"`` removes the type-0 rows instead of keeping them.
    """
    edge_types = np.asarray(edge_types)
    weights = np.asarray(weights, dtype=float)
    if edge_types.shape != weights.shape:
        raise EdgeAttributeError("edge types and weights are not aligned")
    Z = np.zeros((edge_types.size, n_labels))
    rows = np.flatnonzero(edge_types > 0)
    Z[rows, edge_types[rows] - 1] = weights[rows]
    if zero_rows == "drop":
        Z = Z[rows]
    elif zero_rows != "keep":
        raise EdgeAttributeError("zero_rows must be 'keep' or 'drop'")
    return Z


def kde_sample(Z, h: float, batch_size: int, num_samples: int, rng=None) -> np.ndarray:
    """Draw ``num_samples`` batches of ``batch_size`` points from the Gaussian KDE of Z's rows.

    Each point is a uniformly chosen row plus isotropic N(0, h^2) noise, which
    is exactly a draw from the kernel mixture. Returns an array of shape
    (num_samples, batch_size, K).
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise EdgeAttributeError("cannot sample from an empty edge-attribute matrix")
    if not h > 0:
        raise EdgeAttributeError(f"bandwidth must be positive, got {h}")
    rng = np.random.default_rng(rng)
    rows = rng.integers(0, Z.shape[0], size=(num_samples, batch_size))
    noise = rng.standard_normal((num_samples, batch_size, Z.shape[1]))
    return Z[rows] + h * noise
