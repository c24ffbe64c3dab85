import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slam.core import (
    ConfigError,
    DatasetFormatError,
    DimensionMismatchError,
    DuplicateSpotError,
    EmptyLabelError,
    EvaluationConfig,
    Labeling,
    LabelingError,
    MissingSpotError,
    NonFiniteValueError,
    SpatialDataset,
    UnknownSpotError,
    load_dataset,
    load_labeling,
    save_dataset,
    save_labeling,
    sort_tokens,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_xy_only(tmp_path):
    ds = load_dataset(write(tmp_path / "d.csv", "spot_id,x,y\na,0,0\nb,1,0\nc,0,1\n"))
    assert ds.n == 3
    assert ds.attributes is None
    assert ds.spot_ids == ("a", "b", "c")


def test_load_csv_with_attributes(tmp_path):
    ds = load_dataset(write(tmp_path / "d.csv", "spot_id,x,y,a1,a2\na,0,0,1,2\nb,1,0,3,4\nc,0,1,5,6\n"))
    assert ds.g == 2
    np.testing.assert_array_equal(ds.attributes[2], [5, 6])


def test_duplicate_spot_id(tmp_path):
    with pytest.raises(DuplicateSpotError):
        load_dataset(write(tmp_path / "d.csv", "spot_id,x,y\na,0,0\na,1,0\n"))


def test_malformed_row_names_row(tmp_path):
    with pytest.raises(DatasetFormatError, match="row 2"):
        load_dataset(write(tmp_path / "d.csv", "spot_id,x,y\na,0,0\nb,1,oops\n"))


def test_short_row_is_dimension_mismatch(tmp_path):
    with pytest.raises(DimensionMismatchError, match="row 2"):
        load_dataset(write(tmp_path / "d.csv", "spot_id,x,y,a1\na,0,0,1\nb,1,0\n"))


def test_non_finite_value(tmp_path):
    with pytest.raises(NonFiniteValueError):
        load_dataset(write(tmp_path / "d.csv", "spot_id,x,y\na,0,nan\n"))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        SpatialDataset(("a", "b"), np.zeros((2, 2)), np.zeros((3, 4)))


def test_dataset_json_round_trip(tmp_path):
    ds = SpatialDataset(("s1", "s2"), np.array([[0.5, 1.0], [2.0, -1.0]]), np.array([[1.0], [2.0]]))
    save_dataset(ds, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    assert back.spot_ids == ds.spot_ids
    np.testing.assert_array_equal(back.coords, ds.coords)
    np.testing.assert_array_equal(back.attributes, ds.attributes)


@pytest.fixture
def ds3():
    return SpatialDataset(("a", "b", "c"), np.array([[0, 0], [1, 0], [2, 0]], dtype=float))


def test_labeling_realigned_by_spot_id(tmp_path, ds3):
    lab = load_labeling(write(tmp_path / "l.csv", "spot_id,label\nc,Z\na,X\nb,Y\n"), ds3)
    assert lab.labels == ("X", "Y", "Z")


def test_labeling_missing_spot(tmp_path, ds3):
    with pytest.raises(MissingSpotError):
        load_labeling(write(tmp_path / "l.csv", "spot_id,label\na,X\nb,Y\n"), ds3)


def test_labeling_unknown_spot(tmp_path, ds3):
    with pytest.raises(UnknownSpotError):
        load_labeling(write(tmp_path / "l.csv", "spot_id,label\na,X\nb,Y\nc,Z\nq,Z\n"), ds3)


def test_labeling_empty_token(tmp_path, ds3):
    with pytest.raises(EmptyLabelError):
        load_labeling(write(tmp_path / "l.csv", "spot_id,label\na,X\nb,\nc,Z\n"), ds3)


def test_labeling_duplicate_row(tmp_path, ds3):
    with pytest.raises(LabelingError):
        load_labeling(write(tmp_path / "l.csv", "spot_id,label\na,X\na,Y\nb,Y\nc,Z\n"), ds3)


def test_all_a_36_spots(tmp_path):
    ds = SpatialDataset(tuple(f"s{i}" for i in range(36)), np.arange(72, dtype=float).reshape(36, 2))
    body = "spot_id,label\n" + "".join(f"s{i},A\n" for i in range(36))
    lab = load_labeling(write(tmp_path / "l.csv", body), ds)
    assert lab.label_space == ("A",)


def test_declared_label_space_survives_round_trip(tmp_path, ds3):
    lab = Labeling(("A", "A", "A"), ("A", "B"), role="ground-truth")
    save_labeling(lab, ds3, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("# label_space:")
    back = load_labeling(tmp_path / "t.csv", ds3, role="ground-truth")
    assert back == lab and back.label_space == ("A", "B")


def test_labeling_json(tmp_path, ds3):
    (tmp_path / "l.json").write_text(json.dumps({"labels": {"b": "2", "a": "1", "c": "1"}}))
    assert load_labeling(tmp_path / "l.json", ds3).labels == ("1", "2", "1")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["A", "B", "3", "10", "x y"]), min_size=1, max_size=15), st.randoms())
def test_labeling_round_trip_any_order(tmp_path_factory, labels, rnd):
    n = len(labels)
    ds = SpatialDataset(tuple(f"id{i}" for i in range(n)), np.column_stack([np.arange(n), np.zeros(n)]).astype(float))
    lab = Labeling(tuple(labels))
    path = tmp_path_factory.mktemp("rt") / "l.csv"
    save_labeling(lab, ds, path)
    lines = path.read_text().splitlines()
    body = lines[1:]
    rnd.shuffle(body)
    path.write_text("\n".join([lines[0]] + body) + "\n")
    assert load_labeling(path, ds) == lab


def test_token_order_numeric_first():
    assert sort_tokens(["b", "10", "2", "a"]) == ("2", "10", "a", "b")


def test_label_space_widened_by_carried_tokens():
    assert Labeling(("A", "C"), ("A", "B")).label_space == ("A", "B", "C")


def test_bad_role():
    with pytest.raises(LabelingError):
        Labeling(("A",), role="truth")


def test_config_defaults_and_json(tmp_path):
    cfg = EvaluationConfig()
    assert (cfg.k_neighbors, cfg.bandwidth_h, cfg.num_projections) == (6, 0.1, 50)
    (tmp_path / "c.json").write_text(json.dumps({"gamma": 2.0, "rng_seed": 7}))
    back = EvaluationConfig.from_json(tmp_path / "c.json")
    assert back.gamma == 2.0 and back.rng_seed == 7
    assert EvaluationConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "bad",
    [
        {"k_neighbors": 0},
        {"bandwidth_h": 0.0},
        {"bandwidth_h": 11.0},
        {"gamma": -1.0},
        {"num_samples": 1.5},
        {"mmd_estimator": "unbiased"},
        {"zero_rows": "maybe"},
    ],
)
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        EvaluationConfig(**bad)


def test_config_unknown_field():
    with pytest.raises(ConfigError):
        EvaluationConfig.from_dict({"k": 3})


def test_similarity_mode_auto():
    cfg = EvaluationConfig()
    plain = SpatialDataset(("a", "b"), np.zeros((2, 2)))
    rich = SpatialDataset(("a", "b"), np.zeros((2, 2)), np.ones((2, 3)))
    assert cfg.resolved_similarity_mode(plain) == "constant-one"
    assert cfg.resolved_similarity_mode(rich) == "cosine-clamped"
