import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from slam.core import Labeling
from slam.harness import HarnessError, generate_case, q_coefficient
from slam.metrics import (
    CATALOG,
    INTERNAL,
    MetricError,
    ari,
    asw,
    catalog_json,
    ch_index,
    chaos,
    contingency,
    db_index,
    external_scores,
    fmi,
    internal_scores,
    jaccard_score,
    nmi,
    pas,
    supervised_scores,
    v_measure,
)

import oracles

small_pair = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 3), min_size=n, max_size=n),
        st.lists(st.integers(0, 4), min_size=n, max_size=n),
    )
)


def lab(xs):
    return Labeling(tuple(str(x) for x in xs))


# ----------------------------------------------------------------- supervised


def test_supervised_identity():
    t = lab("AABBC")
    assert supervised_scores(t, t) == {"accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_case_i_accuracy():
    case = generate_case("I")
    assert supervised_scores(case.truth, case.labelings[1])["accuracy"] == pytest.approx(24 / 36)
    assert supervised_scores(case.truth, case.labelings[0])["accuracy"] == pytest.approx(12 / 36)


def test_one_false_positive_by_hand():
    # class P: tp 2, predicted 3, true 2; class N: tp 1, predicted 1, true 2
    s = supervised_scores(lab("PPNN"), lab("PPPN"))
    assert s["accuracy"] == 0.75
    assert s["precision"] == pytest.approx((2 / 3 + 1) / 2)
    assert s["recall"] == pytest.approx((1 + 0.5) / 2)
    assert s["f1"] == pytest.approx((0.8 + 2 / 3) / 2)


def test_supervised_needs_shared_space():
    with pytest.raises(MetricError):
        supervised_scores(lab("AB"), lab("AX"))


# ------------------------------------------------------------------- external


def test_contingency():
    np.testing.assert_array_equal(contingency(lab("aabb"), lab("xyxx")), [[1, 1], [2, 0]])


def test_identity_gives_one():
    t = lab("aabbbcd")
    for v in external_scores(t, t).values():
        assert v == 1.0


def test_ari_singletons_vs_one_cluster():
    assert ari(lab(range(8)), lab("a" * 8)) == 0.0


def test_nmi_independent_two_by_two():
    t, p = lab("AABB"), lab("ABAB")
    assert nmi(t, p) == 0.0
    assert v_measure(t, p) == 0.0


def test_fmi_all_singletons():
    assert fmi(lab("aabb"), lab("wxyz")) == 0.0


def test_jaccard_disjoint():
    assert jaccard_score(lab("AABB"), lab("BBAA")) == 0.0


def test_degenerate_entropy_convention():
    assert nmi(lab("aaaa"), lab("xxxx")) == 1.0
    assert nmi(lab("aaaa"), lab("xxyy")) == 0.0
    assert v_measure(lab("aaaa"), lab("xxyy")) == 0.0


@settings(max_examples=300, deadline=None)
@given(small_pair)
def test_external_match_oracles(tp):
    t, p = tp
    T, P = lab(t), lab(p)
    expected = oracles.ari_pairs(t, p)
    if expected is not None:
        assert ari(T, P) == pytest.approx(expected, abs=1e-10)
    assert fmi(T, P) == pytest.approx(oracles.fmi_pairs(t, p), abs=1e-10)
    assert jaccard_score(T, P) == pytest.approx(oracles.jaccard_sets(t, p), abs=1e-10)
    for fn, ora in ((nmi, oracles.nmi_direct), (v_measure, oracles.v_measure_direct)):
        expected = ora(t, p)
        if expected is not None:
            assert fn(T, P) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(small_pair, st.permutations(range(5)), st.permutations(range(5)))
def test_external_permutation_invariant(tp, pt, pp):
    t, p = tp
    base = external_scores(lab(t), lab(p))
    moved = external_scores(lab(pt[x] for x in t), lab(pp[x] for x in p))
    for k in ("ARI", "NMI", "FMI", "v_measure"):
        assert moved[k] == pytest.approx(base[k], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(small_pair)
def test_external_in_range(tp):
    t, p = tp
    for k, v in external_scores(lab(t), lab(p)).items():
        d = CATALOG[k]
        assert d.lower - 1e-12 <= v <= d.upper + 1e-12


def test_sklearn_agreement():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = rng.integers(0, 4, 60)
        p = rng.integers(0, 5, 60)
        T, P = lab(t), lab(p)
        assert ari(T, P) == pytest.approx(sk.adjusted_rand_score(t, p), abs=1e-10)
        assert nmi(T, P) == pytest.approx(sk.normalized_mutual_info_score(t, p, average_method="geometric"), abs=1e-10)
        assert fmi(T, P) == pytest.approx(sk.fowlkes_mallows_score(t, p), abs=1e-10)
        assert v_measure(T, P) == pytest.approx(sk.v_measure_score(t, p), abs=1e-10)
        X = rng.normal(size=(60, 2))
        assert asw(X, P) == pytest.approx(sk.silhouette_score(X, p), abs=1e-10)
        assert ch_index(X, P) == pytest.approx(sk.calinski_harabasz_score(X, p), rel=1e-10)
        assert db_index(X, P) == pytest.approx(sk.davies_bouldin_score(X, p), rel=1e-10)


# ------------------------------------------------------------------- internal


def test_two_far_clusters():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(0, 0.01, (10, 2)), rng.normal(1000, 0.01, (10, 2))])
    L = lab("a" * 10 + "b" * 10)
    assert asw(X, L) > 0.999
    assert 0 < db_index(X, L) < 1e-4
    assert pas(X, L) == 0.0


def test_chaos_two_spots():
    assert chaos(np.array([[0.0, 0.0], [1.0, 0.0]]), lab("aa")) == 1.0


def test_chaos_singletons_contribute_nothing():
    X = np.array([[0.0, 0], [1, 0], [5, 5]])
    assert chaos(X, lab("aab")) == pytest.approx(2 / 3)


@pytest.mark.parametrize("fn", [asw, ch_index, db_index])
def test_single_cluster_rejected(fn):
    with pytest.raises(MetricError):
        fn(np.random.default_rng(0).normal(size=(5, 2)), lab("aaaaa"))


def test_pas_needs_eleven_spots():
    with pytest.raises(MetricError):
        pas(np.zeros((10, 2)), lab("a" * 10))


def test_internal_undefined_maps_to_none():
    out = internal_scores(np.random.default_rng(0).normal(size=(5, 2)), lab("aaaaa"))
    assert out["ASW"] is None and out["PAS"] is None and out["CHAOS"] is not None


internal_case = st.integers(11, 20).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n), st.integers(0, 2**32 - 1))
)


@settings(max_examples=80, deadline=None)
@given(internal_case)
def test_internal_match_naive(data):
    labels, seed = data
    assume(len(set(labels)) >= 2 and len(set(labels)) < len(labels))
    X = np.random.default_rng(seed).uniform(0, 10, (len(labels), 2))
    L = lab(labels)
    pts = [tuple(r) for r in X]
    assert asw(X, L) == pytest.approx(oracles.silhouette_naive(pts, labels), abs=1e-9)
    assert chaos(X, L) == pytest.approx(oracles.chaos_naive(pts, labels), abs=1e-9)
    assert pas(X, L) == pytest.approx(oracles.pas_naive(pts, labels), abs=1e-9)
    assert ch_index(X, L) == pytest.approx(oracles.ch_naive(pts, labels), rel=1e-9)
    assert db_index(X, L) == pytest.approx(oracles.db_naive(pts, labels), rel=1e-9)


def test_internal_ignore_label_names_and_order():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 2))
    labels = rng.integers(0, 3, 30)
    a = internal_scores(X, lab(labels))
    b = internal_scores(X, lab("xyz"[i] for i in labels))
    perm = rng.permutation(30)
    c = internal_scores(X[perm], lab(labels[perm]))
    for k in INTERNAL:
        assert a[k] == b[k]
        assert c[k] == pytest.approx(a[k], rel=1e-12)


# ------------------------------------------------------------------ catalog / Q


def test_catalog_json():
    entries = {e["name"]: e for e in catalog_json()}
    assert len(entries) == 15
    assert entries["ARI"]["range"] == [-1.0, 1.0]
    assert entries["CHAOS"]["range"] == [0.0, None] and entries["CHAOS"]["direction"] == "lower-better"
    assert entries["SLAM"]["direction"] == "lower-better"


def test_q_examples():
    assert q_coefficient("accuracy", 1 / 3, 2 / 3) == pytest.approx(0.3333, abs=1e-3)
    assert q_coefficient("CHAOS", 2.0, 1.5) == 0.25
    assert q_coefficient("ARI", 0.4, 0.4) == 0.0
    assert math.copysign(1, q_coefficient("ARI", 0.4, 0.4)) == 1.0


def test_q_upper_only_and_unbounded():
    from slam.metrics import MetricDescriptor

    upper = MetricDescriptor("u", None, 1.0, True, "x")
    # r = sup - s2 = 0.4
    assert q_coefficient(upper, 0.2, 0.6) == pytest.approx(1.0)
    free = MetricDescriptor("f", None, None, False, "x")
    assert q_coefficient(free, -4.0, 2.0) == pytest.approx(-6 / 4)


def test_q_errors():
    with pytest.raises(HarnessError):
        q_coefficient("CHAOS", 0.0, 0.0)
    with pytest.raises(HarnessError):
        q_coefficient("ARI", math.nan, 0.1)
