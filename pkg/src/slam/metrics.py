"""Benchmark metrics: supervised, unsupervised external, and internal (spatial) indices.

Reductions use ``math.fsum`` or sorted sums so that results do not depend on
spot order or label names; two labelings that are mirror images of each
other score bit-identically.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .core import Labeling, SlamError, sort_tokens
from .graph import knn_lists


class MetricError(SlamError):
    pass


@dataclasses.dataclass(frozen=True)
class MetricDescriptor:
    name: str
    lower: Optional[float]  # infimum of the range, None if unbounded
    upper: Optional[float]  # supremum of the range, None if unbounded
    higher_is_better: bool
    kind: str

    @property
    def direction(self) -> str:
        return "higher-better" if self.higher_is_better else "lower-better"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "range": [self.lower, self.upper],
            "direction": self.direction,
            "kind": self.kind,
        }


_INF = None
CATALOG: dict[str, MetricDescriptor] = {
    d.name: d
    for d in [
        MetricDescriptor("SLAM", 0.0, 2.0, False, "external"),
        MetricDescriptor("accuracy", 0.0, 1.0, True, "supervised"),
        MetricDescriptor("precision", 0.0, 1.0, True, "supervised"),
        MetricDescriptor("recall", 0.0, 1.0, True, "supervised"),
        MetricDescriptor("f1", 0.0, 1.0, True, "supervised"),
        MetricDescriptor("NMI", 0.0, 1.0, True, "unsupervised"),
        MetricDescriptor("ARI", -1.0, 1.0, True, "unsupervised"),
        MetricDescriptor("jaccard", 0.0, 1.0, True, "unsupervised"),
        MetricDescriptor("v_measure", 0.0, 1.0, True, "unsupervised"),
        MetricDescriptor("FMI", 0.0, 1.0, True, "unsupervised"),
        MetricDescriptor("CHAOS", 0.0, _INF, False, "internal"),
        MetricDescriptor("PAS", 0.0, 1.0, False, "internal"),
        MetricDescriptor("ASW", -1.0, 1.0, True, "internal"),
        MetricDescriptor("CH", 0.0, _INF, True, "internal"),
        MetricDescriptor("DB", 0.0, _INF, False, "internal"),
    ]
}

SUPERVISED = ("accuracy", "precision", "recall", "f1")
UNSUPERVISED = ("ARI", "NMI", "jaccard", "FMI", "v_measure")
INTERNAL = ("ASW", "CHAOS", "PAS", "CH", "DB")


def catalog_json() -> list[dict]:
    return [d.to_dict() for d in CATALOG.values()]


def _labels(x) -> np.ndarray:
    if isinstance(x, Labeling):
        return np.asarray(x.labels, dtype=object)
    return np.asarray([str(v) for v in np.asarray(x, dtype=object).ravel()], dtype=object)


def contingency(truth, pred) -> np.ndarray:
    """Counts n_ij of spots with truth class i and predicted cluster j."""
    t = _labels(truth)
    p = _labels(pred)
    if t.shape != p.shape:
        raise MetricError("labelings have different lengths")
    _, ti = np.unique(t.astype(str), return_inverse=True)
    _, pj = np.unique(p.astype(str), return_inverse=True)
    table = np.zeros((ti.max() + 1, pj.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pj), 1)
    return table


def _comb2(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(x))


# ----------------------------------------------------------------- supervised


def supervised_scores(truth: Labeling, pred: Labeling) -> dict:
    """Accuracy and macro precision / recall / F1 over the truth label space.

    A class whose denominator is zero contributes 0 to the macro average.
    """
    extra = set(pred.tokens) - set(truth.label_space)
    if extra:
        raise MetricError(f"predicted labels {sorted(extra)} are outside the truth label space")
    classes = sort_tokens(list(truth.label_space) + list(pred.tokens))
    t = _labels(truth)
    p = _labels(pred)
    if t.shape != p.shape:
        raise MetricError("labelings have different lengths")
    precision, recall, f1 = [], [], []
    for c in classes:
        tp = int(np.sum((t == c) & (p == c)))
        n_pred = int(np.sum(p == c))
        n_true = int(np.sum(t == c))
        pr = tp / n_pred if n_pred else 0.0
        rc = tp / n_true if n_true else 0.0
        precision.append(pr)
        recall.append(rc)
        f1.append(2 * pr * rc / (pr + rc) if pr + rc > 0 else 0.0)
    k = len(classes)
    return {
        "accuracy": int(np.sum(t == p)) / t.size,
        "precision": math.fsum(precision) / k,
        "recall": math.fsum(recall) / k,
        "f1": math.fsum(f1) / k,
    }


# ------------------------------------------------------- unsupervised external


def ari(truth, pred) -> float:
    table = contingency(truth, pred)
    n = int(table.sum())
    if n < 2:
        raise MetricError("ARI needs at least 2 spots")
    index = _comb2(table)
    sum_a = _comb2(table.sum(axis=1))
    sum_b = _comb2(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # both partitions trivial in the same way (all singletons or one cluster)
        return 1.0 if index == max_index else 0.0
    return (index - expected) / (max_index - expected)


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    n = counts.sum()
    return -math.fsum((c / n) * math.log(c / n) for c in counts)


def mutual_information(truth, pred) -> float:
    table = contingency(truth, pred)
    n = table.sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    terms = []
    for i, j in zip(*np.nonzero(table)):
        nij = table[i, j]
        terms.append(nij / n * math.log(n * nij / (a[i] * b[j])))
    return max(0.0, math.fsum(terms))


def _same_partition(truth, pred) -> bool:
    table = contingency(truth, pred)
    return bool(np.all((table > 0).sum(axis=0) == 1) and np.all((table > 0).sum(axis=1) == 1))


def nmi(truth, pred) -> float:
    """MI / sqrt(H(U) H(V)); zero-entropy inputs give 1 if the partitions coincide, else 0."""
    table = contingency(truth, pred)
    hu = _entropy(table.sum(axis=1))
    hv = _entropy(table.sum(axis=0))
    if hu == 0 or hv == 0:
        return 1.0 if _same_partition(truth, pred) else 0.0
    return min(1.0, mutual_information(truth, pred) / math.sqrt(hu * hv))


def _conditional_entropy(table, given_axis) -> float:
    # H(X | Y) where Y indexes ``given_axis`` of the table
    n = table.sum()
    marg = table.sum(axis=1 - given_axis)
    terms = []
    for i, j in zip(*np.nonzero(table)):
        y = j if given_axis == 1 else i
        terms.append(table[i, j] / n * math.log(table[i, j] / marg[y]))
    return -math.fsum(terms)


def homogeneity_completeness(truth, pred) -> tuple[float, float]:
    table = contingency(truth, pred)
    h_c = _entropy(table.sum(axis=1))
    h_k = _entropy(table.sum(axis=0))
    h = 1.0 - _conditional_entropy(table, 1) / h_c if h_c > 0 else 1.0
    c = 1.0 - _conditional_entropy(table, 0) / h_k if h_k > 0 else 1.0
    return h, c


def v_measure(truth, pred) -> float:
    """Harmonic mean of homogeneity and completeness (same degenerate rule as NMI)."""
    table = contingency(truth, pred)
    if _entropy(table.sum(axis=1)) == 0 or _entropy(table.sum(axis=0)) == 0:
        return 1.0 if _same_partition(truth, pred) else 0.0
    h, c = homogeneity_completeness(truth, pred)
    if h + c == 0:
        return 0.0
    return 2 * h * c / (h + c)


def jaccard_score(truth, pred) -> float:
    """Mean over classes l of |C_l & K_l| / |C_l | K_l|; an empty union contributes 0."""
    t = _labels(truth)
    p = _labels(pred)
    space = list(truth.label_space) if isinstance(truth, Labeling) else []
    if isinstance(pred, Labeling):
        space += list(pred.label_space)
    classes = sort_tokens(space + list(t) + list(p))
    ratios = []
    for c in classes:
        inter = int(np.sum((t == c) & (p == c)))
        union = int(np.sum((t == c) | (p == c)))
        ratios.append(inter / union if union else 0.0)
    return math.fsum(ratios) / len(classes)


def fmi(truth, pred) -> float:
    table = contingency(truth, pred)
    tp = _comb2(table)
    tp_fp = _comb2(table.sum(axis=0))
    tp_fn = _comb2(table.sum(axis=1))
    if tp == 0:
        return 0.0
    return tp / math.sqrt(tp_fp * tp_fn)


# ------------------------------------------------------------------- internal


def _clusters(labels) -> list[np.ndarray]:
    lab = _labels(labels)
    return [np.flatnonzero(lab == t) for t in sort_tokens(lab)]


def _pairwise_dist(A, B) -> np.ndarray:
    d2 = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        diff = A[:, j, None] - B[None, :, j]
        d2 += diff * diff
    return np.sqrt(d2)


def _sorted_sum(values, axis=-1):
    return np.sort(values, axis=axis).sum(axis=axis)


def _need_two_clusters(clusters, name):
    if len(clusters) < 2:
        raise MetricError(f"{name} is undefined for a single cluster")


def silhouette_samples(coords, labels) -> np.ndarray:
    """Per-spot silhouette width; spots in singleton clusters get 0."""
    coords = np.asarray(coords, dtype=float)
    clusters = _clusters(labels)
    _need_two_clusters(clusters, "ASW")
    n = coords.shape[0]
    # mean distance from every spot to every cluster, chunked over spots
    means = np.empty((n, len(clusters)))
    for start in range(0, n, 1024):
        block = coords[start:start + 1024]
        for c, members in enumerate(clusters):
            D = _pairwise_dist(block, coords[members])
            means[start:start + 1024, c] = _sorted_sum(D, axis=1)
    own = np.empty(n, dtype=np.int64)
    sizes = np.array([len(m) for m in clusters])
    for c, members in enumerate(clusters):
        own[members] = c
    s = np.zeros(n)
    for i in range(n):
        c = own[i]
        if sizes[c] == 1:
            continue
        a = means[i, c] / (sizes[c] - 1)  # self-distance is 0
        others = [means[i, o] / sizes[o] for o in range(len(clusters)) if o != c]
        b = min(others)
        denom = max(a, b)
        s[i] = (b - a) / denom if denom > 0 else 0.0
    return s


def asw(coords, labels) -> float:
    return math.fsum(silhouette_samples(coords, labels)) / len(_labels(labels))


def chaos(coords, labels) -> float:
    """Sum over spots of the distance to the nearest other spot of the same cluster, over N.

    Spots alone in their cluster contribute nothing.
    """
    coords = np.asarray(coords, dtype=float)
    total = []
    for members in _clusters(labels):
        if len(members) < 2:
            continue
        pts = coords[members]
        for start in range(0, len(members), 1024):
            D = _pairwise_dist(pts[start:start + 1024], pts)
            D[np.arange(D.shape[0]), np.arange(start, start + D.shape[0])] = np.inf
            total.extend(D.min(axis=1).tolist())
    return math.fsum(total) / coords.shape[0]


def pas(coords, labels, k: int = 10, threshold: int = 6) -> float:
    """Fraction of spots whose label differs from at least 6 of their 10 nearest neighbours."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[0] <= k:
        raise MetricError(f"PAS needs more than {k} spots, got {coords.shape[0]}")
    lab = _labels(labels)
    nbrs = knn_lists(coords, k)
    differ = (lab[nbrs] != lab[:, None]).sum(axis=1)
    return int(np.sum(differ >= threshold)) / coords.shape[0]


def _centroid(pts) -> np.ndarray:
    return np.array([math.fsum(pts[:, j]) / pts.shape[0] for j in range(pts.shape[1])])


def ch_index(coords, labels) -> float:
    """Calinski-Harabasz: between-cluster over within-cluster dispersion, each per degree of freedom."""
    coords = np.asarray(coords, dtype=float)
    clusters = _clusters(labels)
    _need_two_clusters(clusters, "CH index")
    n, K = coords.shape[0], len(clusters)
    if n == K:
        raise MetricError("CH index is undefined when every spot is its own cluster")
    c = _centroid(coords)
    between, within = [], []
    for members in clusters:
        pts = coords[members]
        ck = _centroid(pts)
        between.append(len(members) * math.fsum((ck - c) ** 2))
        within.extend(((pts - ck) ** 2).sum(axis=1).tolist())
    W = math.fsum(within)
    B = math.fsum(between)
    if W == 0:
        return math.inf
    return (B / (K - 1)) / (W / (n - K))


def db_index(coords, labels) -> float:
    """Davies-Bouldin with s_i the mean distance of cluster i's spots to its centroid."""
    coords = np.asarray(coords, dtype=float)
    clusters = _clusters(labels)
    _need_two_clusters(clusters, "DB index")
    cents = [_centroid(coords[m]) for m in clusters]
    spread = [
        math.fsum(np.sqrt(((coords[m] - ck) ** 2).sum(axis=1)).tolist()) / len(m)
        for m, ck in zip(clusters, cents)
    ]
    worst = []
    for i in range(len(clusters)):
        ratios = []
        for j in range(len(clusters)):
            if i == j:
                continue
            dij = math.sqrt(math.fsum((cents[i] - cents[j]) ** 2))
            ratios.append((spread[i] + spread[j]) / dij if dij > 0 else math.inf)
        worst.append(max(ratios))
    return math.fsum(worst) / len(clusters)


def external_scores(truth: Labeling, pred: Labeling) -> dict:
    return {
        "ARI": ari(truth, pred),
        "NMI": nmi(truth, pred),
        "jaccard": jaccard_score(truth, pred),
        "FMI": fmi(truth, pred),
        "v_measure": v_measure(truth, pred),
    }


def internal_scores(coords, labels) -> dict:
    """All five internal indices; an index that is undefined for the input maps to None."""
    out = {}
    for name, fn in (("ASW", asw), ("CHAOS", chaos), ("PAS", pas), ("CH", ch_index), ("DB", db_index)):
        try:
            out[name] = fn(coords, labels)
        except MetricError:
            out[name] = None
    return out
