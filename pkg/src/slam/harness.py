"""Q coefficient, simulated evaluation cases, and the bandwidth / complexity sweeps."""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from .core import EvaluationConfig, Labeling, SlamError, SpatialDataset
from .discrepancy import slam_score
from .graph import build_mutual_knn
from .metrics import CATALOG, external_scores, internal_scores, supervised_scores


class HarnessError(SlamError):
    pass


def q_coefficient(metric, s1: float, s2: float) -> float:
    """Signed, range-normalised gap between a worse (s1) and a better (s2) labeling's scores.

    Positive when the metric ranks the two labelings correctly.
    """
    if isinstance(metric, str):
        metric = CATALOG[metric]
    if not (math.isfinite(s1) and math.isfinite(s2)):
        raise HarnessError(f"scores must be finite, got {s1} and {s2}")
    lo, hi = metric.lower, metric.upper
    if lo is not None and hi is not None:
        r = hi - lo
    elif lo is not None:
        r = s1 - lo
    elif hi is not None:
        r = hi - s2
    else:
        r = max(abs(s1), abs(s2))
    if r == 0:
        raise HarnessError(f"{metric.name}: range is zero for scores {s1}, {s2}")
    sign = -1.0 if metric.higher_is_better else 1.0
    return sign * (s1 - s2) / r + 0.0  # + 0.0 folds -0.0 into 0.0


# ----------------------------------------------------------------- cases

CASE_IDS = ("I", "II", "III", "IV", "V", "VI")
CASE_II_COUNTS = tuple(int(round(x)) for x in np.linspace(9, 95, 10))


@dataclasses.dataclass(frozen=True, eq=False)
class CaseInstance:
    """A simulated dataset with its truth and labelings.

    For two-labeling cases ``labelings`` is ordered (more erroneous, less
    erroneous); for Case II it is the ten-step sequence of growing error.
    """

    case_id: str
    dataset: SpatialDataset
    truth: Labeling
    labelings: tuple[Labeling, ...]
    names: tuple[str, ...]
    settings: dict  # EvaluationConfig overrides used for this case
    params: dict


def _grid(ncols: int, nrows: int) -> np.ndarray:
    """Unit square lattice centred on the origin, row-major (x fastest)."""
    xs = np.arange(ncols) - (ncols - 1) / 2
    ys = np.arange(nrows) - (nrows - 1) / 2
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _mirror_order(coords) -> np.ndarray:
    """Row order by (|x|, y, x).

    Nearest-neighbour ties are broken by spot index; numbering spots outward
    from the vertical centre line makes those ties resolve the same way on
    both sides, so the graph is symmetric under x -> -x.
    """
    return np.lexsort((coords[:, 0], coords[:, 1], np.abs(coords[:, 0])))


def _ids(n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"s{i:0{width}d}" for i in range(n))


def _dataset(coords, attrs=None) -> SpatialDataset:
    return SpatialDataset(_ids(coords.shape[0]), coords, attrs)


def _relabel(base, idx, token, space) -> Labeling:
    labels = list(base)
    for i in idx:
        labels[i] = token
    return Labeling(tuple(labels), space)


def _case_i(seed):
    coords = _grid(6, 6)
    space = ("A", "B")
    truth = Labeling(("A",) * 36, space, role="ground-truth")
    right = np.flatnonzero(coords[:, 0] > -1.0)  # 4 rightmost columns
    left = np.flatnonzero(coords[:, 0] < -1.0)  # 2 leftmost columns
    lab1 = _relabel(truth.labels, right, "B", space)
    lab2 = _relabel(truth.labels, left, "B", space)
    ds = SpatialDataset(_ids(36), coords)
    return ds, truth, (lab1, lab2), ("I: 24 right spots -> B", "II: 12 left spots -> B"), {}


def _case_ii(seed):
    coords = _grid(20, 18)
    space = ("A", "B")
    base = np.where(coords[:, 0] < 0, "A", "B")
    truth = Labeling(tuple(base), space, role="ground-truth")
    order = np.random.default_rng(seed).permutation(np.flatnonzero(base == "A"))
    labelings = tuple(_relabel(truth.labels, order[:c], "B", space) for c in CASE_II_COUNTS)
    names = tuple(f"step {i + 1}: {c} A -> B" for i, c in enumerate(CASE_II_COUNTS))
    ds = SpatialDataset(_ids(360), coords)
    return ds, truth, labelings, names, {"mislabel_counts": list(CASE_II_COUNTS)}


def _case_iii(seed):
    coords = _grid(6, 5)
    n = coords.shape[0]
    # disc centre off the lattice centre so tumour and normal centroids differ
    center = np.array([-1.2, 0.1])
    dist = np.sqrt(((coords - center) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(n), dist))
    tumor = order[:15]
    rank = np.empty(n)
    rank[tumor] = np.arange(15)
    certainty = np.zeros(n)
    certainty[tumor] = 1.0 - 0.5 * rank[tumor] / 14
    space = ("normal", "tumor")
    base = np.array(["normal"] * n, dtype=object)
    base[tumor] = "tumor"
    truth = Labeling(tuple(base), space, role="ground-truth")
    core = tumor[:3]
    edge = tumor[-3:]
    attrs = np.column_stack([certainty, 1.0 - certainty])
    ds = SpatialDataset(_ids(n), coords, attrs)
    lab1 = _relabel(truth.labels, core, "normal", space)
    lab2 = _relabel(truth.labels, edge, "normal", space)
    return ds, truth, (lab1, lab2), ("I: 3 core tumor -> normal", "II: 3 edge tumor -> normal"), {
        "core": [int(i) for i in core],
        "edge": [int(i) for i in edge],
    }


def _case_iv(seed):
    coords = _grid(10, 10)
    n = coords.shape[0]
    space = ("cancer", "normal")
    truth = Labeling(("normal",) * n, space, role="ground-truth")
    ix = np.rint(coords[:, 0] + 4.5).astype(int)
    iy = np.rint(coords[:, 1] + 4.5).astype(int)
    # scattered over the interior, where every spot has four neighbours; the
    # aggregated block sits in a corner, so it has fewer neighbours in total
    interior = np.flatnonzero((ix > 0) & (ix < 9) & (iy > 0) & (iy < 9))
    dispersed = np.sort(np.random.default_rng(seed).choice(interior, size=40, replace=False))
    aggregated = np.flatnonzero((ix < 8) & (iy < 5))
    lab1 = _relabel(truth.labels, dispersed, "cancer", space)
    lab2 = _relabel(truth.labels, aggregated, "cancer", space)
    return _dataset(coords), truth, (lab1, lab2), ("I: 40 dispersed", "II: 40 aggregated"), {
        "dispersed": [int(i) for i in dispersed],
        "aggregated": [int(i) for i in aggregated],
    }


def _case_v(seed):
    coords = _grid(6, 5)
    coords = coords[_mirror_order(coords)]
    n = coords.shape[0]
    space = ("cancer", "normal")
    x, y = coords[:, 0], coords[:, 1]
    base = np.where(x < 0, "normal", "cancer").astype(object)
    truth = Labeling(tuple(base), space, role="ground-truth")
    fn = np.flatnonzero((x > 0) & (x < 2) & (np.abs(y) <= 1))
    fp = np.flatnonzero((x < 0) & (x > -2) & (np.abs(y) <= 1))
    # cancer spots share one expression profile; normal spots alternate between
    # two profiles, so neighbouring normal spots are only partly similar
    parity = (np.rint(x + 2.5) + np.rint(y + 2)).astype(int) % 2
    attrs = np.zeros((n, 3))
    attrs[base == "cancer", 0] = 1.0
    attrs[base == "normal", 1] = 1.0
    attrs[(base == "normal") & (parity == 1), 2] = 1.0
    lab1 = _relabel(truth.labels, fn, "normal", space)
    lab2 = _relabel(truth.labels, fp, "cancer", space)
    return _dataset(coords, attrs), truth, (lab1, lab2), ("I: 6 false negatives", "II: 6 false positives"), {}


GLAND_ADIPOSE_COS = 0.791
GLAND_CANCER_COS = 0.673


def case_vi_profiles(g: int = 50) -> dict:
    """Unit expression profiles with the two prescribed gland cosines, zero-padded to g dims."""
    vecs = {
        "gland": [1.0, 0.0],
        "adipose": [GLAND_ADIPOSE_COS, math.sqrt(1 - GLAND_ADIPOSE_COS**2)],
        "cancer": [GLAND_CANCER_COS, -math.sqrt(1 - GLAND_CANCER_COS**2)],
    }
    out = {}
    for name, v in vecs.items():
        full = np.zeros(g)
        full[:2] = v
        out[name] = full
    return out


# Left half of the Case VI lattice, bottom row first; the right half is its
# mirror image with adipose and cancer swapped. Lower-case spots are the ones
# relabelled as gland. None of them touches a spot of its own tissue, so the two
# labelings differ only in the weights of their edges to gland spots.
CASE_VI_LEFT = (
    "A G a",
    "A A G",
    "A G a",
    "A A G",
    "A G a",
)
_VI_TISSUE = {"A": "adipose", "a": "adipose", "G": "gland"}
_VI_MIRROR = {"A": "C", "a": "c", "G": "G"}


def _case_vi(seed):
    rows = [r.split() for r in CASE_VI_LEFT]
    marks = np.array([left + [_VI_MIRROR[t] for t in reversed(left)] for left in rows], dtype=object).ravel()
    coords = _grid(len(rows[0]) * 2, len(rows))
    order = _mirror_order(coords)
    coords, marks = coords[order], marks[order]
    tissue = dict(_VI_TISSUE, C="cancer", c="cancer")
    base = np.array([tissue[t] for t in marks], dtype=object)
    space = ("adipose", "cancer", "gland")
    truth = Labeling(tuple(base), space, role="ground-truth")
    prof = case_vi_profiles()
    attrs = np.array([prof[b] for b in base])
    lab_adipose = _relabel(truth.labels, np.flatnonzero(marks == "a"), "gland", space)
    lab_cancer = _relabel(truth.labels, np.flatnonzero(marks == "c"), "gland", space)
    # cancer -> gland is the larger expression gap, hence the more severe error
    return _dataset(coords, attrs), truth, (lab_cancer, lab_adipose), (
        "II: 3 cancer -> gland",
        "I: 3 adipose -> gland",
    ), {}


_GENERATORS: dict[str, Callable] = {
    "I": _case_i,
    "II": _case_ii,
    "III": _case_iii,
    "IV": _case_iv,
    "V": _case_v,
    "VI": _case_vi,
}

# Evaluation settings used for the simulated cases: the 4-neighbour lattice graph
# and more projections than the default, which keeps Monte-Carlo noise in the
# projection directions well below the gaps between paired labelings.
CASE_SETTINGS = {cid: {"k_neighbors": 4, "num_projections": 500} for cid in ("I", "III", "IV", "V", "VI")}
CASE_SETTINGS["II"] = {"k_neighbors": 4}


def generate_case(case_id: str, seed: int = 0) -> CaseInstance:
    try:
        gen = _GENERATORS[case_id]
    except KeyError:
        raise HarnessError(f"unknown case {case_id!r}; expected one of {CASE_IDS}") from None
    ds, truth, labelings, names, params = gen(seed)
    params = dict(params, seed=seed)
    return CaseInstance(case_id, ds, truth, tuple(labelings), tuple(names), dict(CASE_SETTINGS[case_id]), params)


def case_config(case: CaseInstance, seed: Optional[int] = None, **changes) -> EvaluationConfig:
    """Default config with the case's settings applied; the seed defaults to the case's own."""
    seed = case.params.get("seed", 0) if seed is None else seed
    return EvaluationConfig(rng_seed=seed).replace(**dict(case.settings, **changes))


def score_labeling(truth: Labeling, labeling: Labeling, dataset: SpatialDataset, config, graph=None) -> dict:
    """Every metric for one labeling against its truth; inapplicable metrics are omitted."""
    scores = {"SLAM": slam_score(truth, labeling, dataset, config, graph=graph)[0]}
    try:
        scores.update(supervised_scores(truth, labeling))
    except SlamError:
        pass
    scores.update(external_scores(truth, labeling))
    scores.update({k: v for k, v in internal_scores(dataset.coords, labeling).items() if v is not None})
    return scores


def case_q_table(case: CaseInstance, config: Optional[EvaluationConfig] = None) -> dict:
    """Q of every metric for a two-labeling case (labelings ordered worse, better).

    Without an explicit ``config`` the case's own settings and seed are used.
    """
    if len(case.labelings) != 2:
        raise HarnessError("Q needs exactly two labelings")
    config = config or case_config(case)
    graph = build_mutual_knn(case.dataset.coords, config.k_neighbors)
    worse, better = (score_labeling(case.truth, lab, case.dataset, config, graph) for lab in case.labelings)
    return {
        name: q_coefficient(CATALOG[name], worse[name], better[name])
        for name in worse
        if name in better
    }


# ----------------------------------------------------------------- sweeps

DEFAULT_H_VALUES = (0.001, 0.01, 0.05, 0.1, 0.5)


def _workers(threads: Optional[int]) -> int:
    return max(1, int(threads or 1))


def sensitivity_sweep(
    h_values: Sequence[float] = DEFAULT_H_VALUES,
    base_case: Optional[CaseInstance] = None,
    config: Optional[EvaluationConfig] = None,
    threads: Optional[int] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> list[dict]:
    """SLAM score for every (bandwidth, Case II step) cell, sorted by h then step."""
    case = base_case or generate_case("II")
    for h in h_values:
        if not 0 < h <= 10:
            raise HarnessError(f"bandwidth {h} outside (0, 10]")
    config = config or case_config(case)
    graph = build_mutual_knn(case.dataset.coords, config.k_neighbors)
    truth_a = np.asarray(case.truth.labels, dtype=object)
    cells = [(h, step) for h in sorted(h_values) for step in range(len(case.labelings))]

    def run(cell):
        h, step = cell
        lab = case.labelings[step]
        d, _ = slam_score(case.truth, lab, case.dataset, config.replace(bandwidth_h=float(h)), graph=graph)
        wrong = int(np.sum(np.asarray(lab.labels, dtype=object) != truth_a))
        if progress:
            progress(f"h={h} step={step + 1} d={d:.6f}")
        return {
            "h": float(h),
            "step": step + 1,
            "n_mislabeled": wrong,
            "error_rate": wrong / case.dataset.n,
            "slam": d,
        }

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        return list(pool.map(run, cells))


def spearman_by_h(table: list[dict]) -> dict:
    from scipy.stats import spearmanr

    out = {}
    for h in sorted({row["h"] for row in table}):
        rows = [r for r in table if r["h"] == h]
        rho = spearmanr([r["error_rate"] for r in rows], [r["slam"] for r in rows]).statistic
        out[h] = float(rho)
    return out


def random_case(n_spots: int, n_labels: int, seed: int = 0, mislabel_fraction: float = 0.5):
    """Square-ish lattice with vertical-stripe domains and a randomly relabelled fraction of spots."""
    if n_spots < 2 or n_labels < 1:
        raise HarnessError("need at least 2 spots and 1 label")
    ncols = int(math.ceil(math.sqrt(n_spots)))
    coords = _grid(ncols, int(math.ceil(n_spots / ncols)))[:n_spots]
    x = coords[:, 0]
    span = x.max() - x.min()
    stripe = np.minimum(((x - x.min()) / (span if span > 0 else 1) * n_labels).astype(int), n_labels - 1)
    space = tuple(f"L{i + 1}" for i in range(n_labels))
    truth = Labeling(tuple(space[s] for s in stripe), space, role="ground-truth")
    rng = np.random.default_rng(seed)
    flip = rng.choice(n_spots, size=int(round(mislabel_fraction * n_spots)), replace=False)
    pred = np.array(truth.labels, dtype=object)
    pred[flip] = rng.choice(np.array(space, dtype=object), size=flip.size)
    return SpatialDataset(_ids(n_spots), coords), truth, Labeling(tuple(pred), space)


def complexity_sweep(
    spot_counts: Sequence[int] = (10, 100, 1000, 10000),
    label_counts: Sequence[int] = (5, 7, 9, 11, 13, 15),
    config: Optional[EvaluationConfig] = None,
    label_sweep_spots: int = 1000,
    spot_sweep_labels: int = 5,
    progress: Optional[Callable[[str], None]] = None,
) -> list[dict]:
    """Wall-clock seconds of one slam_score call per spot count and per label count."""
    config = config or EvaluationConfig()
    rows = []
    cells = [("n_spots", n, spot_sweep_labels) for n in spot_counts]
    cells += [("n_labels", label_sweep_spots, k) for k in label_counts]
    for kind, n, k in cells:
        if n < 2 or k < 1:
            raise HarnessError(f"invalid sweep cell n={n}, K={k}")
        ds, truth, pred = random_case(n, k, seed=config.rng_seed)
        cfg = config.replace(k_neighbors=min(config.k_neighbors, n - 1))
        t0 = time.perf_counter()
        d, _ = slam_score(truth, pred, ds, cfg)
        elapsed = time.perf_counter() - t0
        if progress:
            progress(f"{kind}: n={n} K={k} {elapsed:.2f}s")
        rows.append({"sweep": kind, "n_spots": n, "n_labels": k, "seconds": elapsed, "slam": d})
    return rows
