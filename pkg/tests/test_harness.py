import math

import numpy as np
import pytest

from slam.attributes import type_edges
from slam.core import EvaluationConfig
from slam.graph import build_mutual_knn
from slam.harness import (
    CASE_II_COUNTS,
    GLAND_ADIPOSE_COS,
    GLAND_CANCER_COS,
    HarnessError,
    case_config,
    case_q_table,
    complexity_sweep,
    generate_case,
    random_case,
    sensitivity_sweep,
    spearman_by_h,
)


def n_wrong(case, lab):
    return sum(a != b for a, b in zip(case.truth.labels, lab.labels))


def counts(labels):
    out = {}
    for x in labels:
        out[x] = out.get(x, 0) + 1
    return out


def test_case_i():
    case = generate_case("I")
    assert case.dataset.n == 36
    assert [n_wrong(case, lab) for lab in case.labelings] == [24, 12]
    assert set(case.truth.labels) == {"A"}


def test_case_i_boundaries_congruent():
    case = generate_case("I")
    g = build_mutual_knn(case.dataset.coords, 4)
    zeros = [int(np.sum(type_edges(g, lab.codes(case.truth.label_space), 2) == 0)) for lab in case.labelings]
    assert zeros == [6, 6]


def test_case_ii():
    case = generate_case("II")
    assert case.dataset.n == 360
    assert counts(case.truth.labels) == {"A": 180, "B": 180}
    assert len(case.labelings) == 10
    wrong = [n_wrong(case, lab) for lab in case.labelings]
    assert wrong == list(CASE_II_COUNTS)
    assert wrong[0] == 9 and wrong[-1] == 95
    # each step keeps the previous step's mislabels
    prev = set()
    for lab in case.labelings:
        cur = {i for i, (a, b) in enumerate(zip(case.truth.labels, lab.labels)) if a != b}
        assert prev <= cur
        prev = cur


def test_case_iii():
    case = generate_case("III")
    assert case.dataset.n == 30
    assert counts(case.truth.labels) == {"normal": 15, "tumor": 15}
    assert [n_wrong(case, lab) for lab in case.labelings] == [3, 3]
    cert = case.dataset.attributes[:, 0]
    assert cert[case.params["core"]].min() > cert[case.params["edge"]].max()


def test_case_iv():
    case = generate_case("IV", 3)
    assert case.dataset.n == 100
    assert set(case.truth.labels) == {"normal"}
    assert [n_wrong(case, lab) for lab in case.labelings] == [40, 40]
    g = build_mutual_knn(case.dataset.coords, 4)
    deg = g.degrees()
    # the dispersed set touches more edges than the corner block
    assert deg[case.params["dispersed"]].sum() > deg[case.params["aggregated"]].sum()


def test_case_iv_seed_moves_dispersed_spots():
    assert generate_case("IV", 0).params["dispersed"] != generate_case("IV", 1).params["dispersed"]
    assert generate_case("IV", 0).params["aggregated"] == generate_case("IV", 1).params["aggregated"]


def _mirror_index(coords):
    lookup = {(float(x), float(y)): i for i, (x, y) in enumerate(coords)}
    return np.array([lookup[(-float(x), float(y))] for x, y in coords])


def test_case_v_mirror():
    case = generate_case("V")
    assert counts(case.truth.labels) == {"normal": 15, "cancer": 15}
    worse, better = case.labelings
    assert [n_wrong(case, lab) for lab in case.labelings] == [6, 6]
    mirror = _mirror_index(case.dataset.coords)
    swap = {"cancer": "normal", "normal": "cancer"}
    # reflecting labeling I and swapping the two classes gives labeling II
    assert tuple(swap[worse.labels[mirror[i]]] for i in range(30)) == better.labels
    g = build_mutual_knn(case.dataset.coords, 4)
    space = case.truth.label_space
    tw = np.bincount(type_edges(g, worse.codes(space), 2), minlength=3)
    tb = np.bincount(type_edges(g, better.codes(space), 2), minlength=3)
    assert tw[0] == tb[0] and tw[1] == tb[2] and tw[2] == tb[1]


def test_case_vi():
    case = generate_case("VI")
    assert counts(case.truth.labels) == {"adipose": 10, "gland": 10, "cancer": 10}
    assert [n_wrong(case, lab) for lab in case.labelings] == [3, 3]
    X = case.dataset.attributes
    lab = np.array(case.truth.labels)

    def cos(a, b):
        u, v = X[lab == a][0], X[lab == b][0]
        return u @ v / (np.linalg.norm(u) * np.linalg.norm(v))

    assert cos("gland", "adipose") == pytest.approx(GLAND_ADIPOSE_COS, abs=1e-6)
    assert cos("gland", "cancer") == pytest.approx(GLAND_CANCER_COS, abs=1e-6)
    # flipped spots are mirror images of each other
    mirror = _mirror_index(case.dataset.coords)
    flips = [{i for i in range(30) if case.truth.labels[i] != l.labels[i]} for l in case.labelings]
    assert {int(mirror[i]) for i in flips[0]} == flips[1]
    g = build_mutual_knn(case.dataset.coords, 4)
    space = case.truth.label_space
    t0, t1 = (np.bincount(type_edges(g, l.codes(space), 3), minlength=4) for l in case.labelings)
    assert t0[0] == t1[0] and t0[3] == t1[3] and {t0[1], t0[2]} == {t1[1], t1[2]}


def test_deterministic():
    for cid in ("II", "IV"):
        a, b = generate_case(cid, 5), generate_case(cid, 5)
        assert a.truth == b.truth and a.labelings == b.labelings
        np.testing.assert_array_equal(a.dataset.coords, b.dataset.coords)


def test_unknown_case():
    with pytest.raises(HarnessError):
        generate_case("VII")


def test_case_config():
    case = generate_case("V", 7)
    cfg = case_config(case)
    assert cfg.rng_seed == 7 and cfg.k_neighbors == 4 and cfg.num_projections == 500
    assert case_config(case, seed=1, gamma=2.0).gamma == 2.0
    assert case_config(case, seed=1).rng_seed == 1


def test_q_table_needs_pair():
    with pytest.raises(HarnessError):
        case_q_table(generate_case("II"))


def test_case_i_q_table():
    q = case_q_table(generate_case("I"))
    assert q["accuracy"] == pytest.approx(1 / 3)
    assert q["jaccard"] == pytest.approx(1 / 6)
    assert q["SLAM"] > 0
    for k in ("ARI", "NMI", "FMI", "v_measure"):
        assert q[k] == 0.0


def test_sensitivity_sweep_small():
    case = generate_case("II")
    cfg = case_config(case).replace(num_samples=6, batch_size=30, num_projections=20)
    rows = sensitivity_sweep((0.5, 0.1), case, cfg, threads=2)
    assert len(rows) == 20
    assert [(r["h"], r["step"]) for r in rows] == sorted((r["h"], r["step"]) for r in rows)
    assert rows[0]["n_mislabeled"] == 9 and rows[0]["error_rate"] == pytest.approx(9 / 360)
    rho = spearman_by_h(rows)
    assert set(rho) == {0.1, 0.5}
    assert all(-1 <= v <= 1 for v in rho.values())


def test_sensitivity_rejects_bandwidth():
    with pytest.raises(HarnessError):
        sensitivity_sweep((0.0,))


def test_random_case():
    ds, truth, pred = random_case(50, 4, seed=2)
    assert ds.n == 50 and set(truth.labels) == {"L1", "L2", "L3", "L4"}
    assert set(pred.labels) <= set(truth.label_space)
    wrong = sum(a != b for a, b in zip(truth.labels, pred.labels))
    assert wrong <= 25


def test_complexity_sweep_small():
    cfg = EvaluationConfig(num_samples=4, batch_size=20, num_projections=10)
    rows = complexity_sweep((10, 40), (3, 4), cfg, label_sweep_spots=40)
    assert [(r["sweep"], r["n_spots"], r["n_labels"]) for r in rows] == [
        ("n_spots", 10, 5),
        ("n_spots", 40, 5),
        ("n_labels", 40, 3),
        ("n_labels", 40, 4),
    ]
    assert all(r["seconds"] >= 0 and math.isfinite(r["slam"]) for r in rows)
