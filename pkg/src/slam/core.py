"""Data types shared across the package: datasets, labelings, run configuration.

Also holds the CSV/JSON readers and writers for the on-disk formats::

    dataset CSV   spot_id,x,y[,a1..ag]
    labeling CSV  spot_id,label      (optional leading "# label_space: [...]" line)
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class SlamError(Exception):
    """Base class for every error raised by this package."""


class DatasetFormatError(SlamError):
    """Malformed row or header in a dataset file."""


class DuplicateSpotError(SlamError):
    pass


class DimensionMismatchError(SlamError):
    pass


class NonFiniteValueError(SlamError):
    pass


class LabelingError(SlamError):
    pass


class MissingSpotError(LabelingError):
    pass


class UnknownSpotError(LabelingError):
    pass


class EmptyLabelError(LabelingError):
    pass


class ConfigError(SlamError):
    pass


_INT_TOKEN = re.compile(r"^-?\d+$")


def token_key(token: str):
    """Sort key for label tokens: integer-looking tokens numerically, then the rest lexically."""
    if _INT_TOKEN.match(token):
        return (0, int(token), token)
    return (1, 0, token)


def sort_tokens(tokens: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(tokens), key=token_key))


@dataclasses.dataclass(frozen=True, eq=False)
class SpatialDataset:
    """Spot identifiers, 2-D coordinates and an optional n x g attribute matrix."""

    spot_ids: tuple[str, ...]
    coords: np.ndarray
    attributes: Optional[np.ndarray] = None

    def __post_init__(self):
        ids = tuple(str(s) for s in self.spot_ids)
        object.__setattr__(self, "spot_ids", ids)
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] != len(ids):
            raise DimensionMismatchError(
                f"coords must have shape ({len(ids)}, 2), got {coords.shape}"
            )
        seen = {}
        for i, s in enumerate(ids):
            if s in seen:
                raise DuplicateSpotError(f"duplicate spot_id {s!r} at rows {seen[s]} and {i}")
            seen[s] = i
        bad = np.flatnonzero(~np.isfinite(coords).all(axis=1))
        if bad.size:
            raise NonFiniteValueError(f"non-finite coordinate at row {bad[0]} ({ids[bad[0]]})")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.attributes is not None:
            attrs = np.array(self.attributes, dtype=float)
            if attrs.ndim != 2 or attrs.shape[0] != len(ids) or attrs.shape[1] < 1:
                raise DimensionMismatchError(
                    f"attributes must have shape ({len(ids)}, g>=1), got {attrs.shape}"
                )
            bad = np.flatnonzero(~np.isfinite(attrs).all(axis=1))
            if bad.size:
                raise NonFiniteValueError(
                    f"non-finite attribute at row {bad[0]} ({ids[bad[0]]})"
                )
            attrs.setflags(write=False)
            object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "_index", seen)

    @property
    def n(self) -> int:
        return len(self.spot_ids)

    @property
    def g(self) -> int:
        return 0 if self.attributes is None else self.attributes.shape[1]

    def index_of(self, spot_id: str) -> int:
        return self._index[spot_id]


@dataclasses.dataclass(frozen=True, eq=False)
class Labeling:
    """One label token per spot, aligned to a dataset's spot order.

    ``label_space`` may declare tokens that no spot carries (e.g. a ground truth
    where every spot is "A" but the classification task is {A, B}).
    """

    labels: tuple[str, ...]
    label_space: tuple[str, ...] = ()
    role: str = "predicted"

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        for i, lab in enumerate(labels):
            if lab == "":
                raise EmptyLabelError(f"empty label token at position {i}")
        object.__setattr__(self, "labels", labels)
        space = sort_tokens(list(self.label_space) + list(labels))
        if not space:
            raise LabelingError("label space is empty")
        object.__setattr__(self, "label_space", space)
        if self.role not in ("ground-truth", "predicted"):
            raise LabelingError(f"role must be 'ground-truth' or 'predicted', got {self.role!r}")

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return self.labels == other.labels and self.label_space == other.label_space

    __hash__ = None

    @property
    def tokens(self) -> tuple[str, ...]:
        """Tokens actually carried by at least one spot, sorted."""
        return sort_tokens(self.labels)

    def as_array(self) -> np.ndarray:
        return np.array(self.labels, dtype=object)

    def codes(self, space: Optional[Sequence[str]] = None) -> np.ndarray:
        """Dense integer codes 1..K over ``space`` (defaults to this labeling's label space)."""
        space = self.label_space if space is None else tuple(space)
        lookup = {t: i + 1 for i, t in enumerate(space)}
        try:
            return np.array([lookup[x] for x in self.labels], dtype=np.int64)
        except KeyError as exc:
            raise LabelingError(f"label {exc.args[0]!r} is outside the label space {space}") from None

    def check_aligned(self, dataset: SpatialDataset):
        if len(self.labels) != dataset.n:
            raise LabelingError(
                f"labeling has {len(self.labels)} labels but dataset has {dataset.n} spots"
            )


@dataclasses.dataclass
class EvaluationConfig:
    """Parameters of one SLAM evaluation; every run is reproducible from these."""

    k_neighbors: int = 6
    bandwidth_h: float = 0.1
    gamma: float = 1.0
    num_samples: int = 20
    batch_size: int = 100
    num_projections: int = 50
    rng_seed: int = 0
    mmd_estimator: str = "paper-verbatim"  # or "standard-biased"
    similarity_mode: str = "auto"  # "cosine-clamped", "constant-one", or "auto"
    zero_rows: str = "keep"  # "keep" or "drop"

    ESTIMATORS = ("paper-verbatim", "standard-biased")
    SIMILARITY_MODES = ("auto", "cosine-clamped", "constant-one")

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("k_neighbors", "num_samples", "batch_size", "num_projections"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("bandwidth_h", "gamma"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a positive real, got {value!r}")
        if self.bandwidth_h > 10:
            raise ConfigError(f"bandwidth_h must be <= 10, got {self.bandwidth_h}")
        if not isinstance(self.rng_seed, (int, np.integer)) or not (
            -(2**63) <= self.rng_seed < 2**64
        ):
            raise ConfigError(f"rng_seed must be a 64-bit integer, got {self.rng_seed!r}")
        if self.mmd_estimator not in self.ESTIMATORS:
            raise ConfigError(f"mmd_estimator must be one of {self.ESTIMATORS}")
        if self.similarity_mode not in self.SIMILARITY_MODES:
            raise ConfigError(f"similarity_mode must be one of {self.SIMILARITY_MODES}")
        if self.zero_rows not in ("keep", "drop"):
            raise ConfigError("zero_rows must be 'keep' or 'drop'")

    def resolved_similarity_mode(self, dataset: SpatialDataset) -> str:
        if self.similarity_mode != "auto":
            return self.similarity_mode
        return "cosine-clamped" if dataset.attributes is not None else "constant-one"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "EvaluationConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "EvaluationConfig":
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------- I/O


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetFormatError(f"row {row}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise NonFiniteValueError(f"row {row}: non-finite value in column {column!r}")
    return value


def _dataset_from_records(records: list[dict], columns: list[str]) -> SpatialDataset:
    if columns[:3] != ["spot_id", "x", "y"]:
        raise DatasetFormatError(f"header must start with spot_id,x,y; got {columns}")
    attr_cols = columns[3:]
    ids, coords, attrs = [], [], []
    seen = {}
    for row, rec in enumerate(records, start=1):
        sid = rec.get("spot_id")
        if sid is None or str(sid).strip() == "":
            raise DatasetFormatError(f"row {row}: missing spot_id")
        sid = str(sid)
        if sid in seen:
            raise DuplicateSpotError(f"row {row}: duplicate spot_id {sid!r} (first at row {seen[sid]})")
        seen[sid] = row
        if set(rec) != set(columns) or any(rec[c] is None for c in columns):
            raise DimensionMismatchError(
                f"row {row}: expected {len(columns)} fields, got {sum(v is not None for v in rec.values())}"
            )
        ids.append(sid)
        coords.append([_parse_float(str(rec["x"]), row, "x"), _parse_float(str(rec["y"]), row, "y")])
        attrs.append([_parse_float(str(rec[c]), row, c) for c in attr_cols])
    if not ids:
        raise DatasetFormatError("dataset has no rows")
    attributes = np.array(attrs, dtype=float) if attr_cols else None
    return SpatialDataset(tuple(ids), np.array(coords, dtype=float), attributes)


def load_dataset(path, format: Optional[str] = None) -> SpatialDataset:
    """Read a dataset from CSV (``spot_id,x,y[,a1..ag]``) or JSON.

    The JSON form is ``{"columns": [...], "rows": [[...], ...]}`` or a list of
    row objects keyed by column name.
    """
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                columns = [c.strip() for c in next(reader)]
            except StopIteration:
                raise DatasetFormatError(f"{path}: empty file") from None
            records = []
            for row, fields in enumerate(reader, start=1):
                if not fields:
                    continue
                if len(fields) != len(columns):
                    raise DimensionMismatchError(
                        f"row {row}: expected {len(columns)} fields, got {len(fields)}"
                    )
                records.append(dict(zip(columns, (f.strip() for f in fields))))
        return _dataset_from_records(records, columns)
    if fmt == "json":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if isinstance(data, dict) and "columns" in data:
            columns = list(data["columns"])
            records = []
            for row, values in enumerate(data.get("rows", []), start=1):
                if len(values) != len(columns):
                    raise DimensionMismatchError(
                        f"row {row}: expected {len(columns)} fields, got {len(values)}"
                    )
                records.append(dict(zip(columns, values)))
        elif isinstance(data, list) and data:
            columns = list(data[0].keys())
            records = data
        else:
            raise DatasetFormatError(f"{path}: unrecognised JSON dataset layout")
        return _dataset_from_records(records, columns)
    raise DatasetFormatError(f"unknown dataset format {fmt!r}")


def save_dataset(dataset: SpatialDataset, path):
    columns = ["spot_id", "x", "y"] + [f"a{j + 1}" for j in range(dataset.g)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for i, sid in enumerate(dataset.spot_ids):
            row = [sid, repr(float(dataset.coords[i, 0])), repr(float(dataset.coords[i, 1]))]
            if dataset.attributes is not None:
                row += [repr(float(v)) for v in dataset.attributes[i]]
            writer.writerow(row)


_SPACE_DIRECTIVE = "# label_space:"


def load_labeling(path, dataset: SpatialDataset, role: str = "predicted") -> Labeling:
    """Read a ``spot_id,label`` CSV (or JSON) and align it to ``dataset`` order."""
    path = Path(path)
    declared: list[str] = []
    pairs: list[tuple[int, str, str]] = []
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        declared = [str(t) for t in data.get("label_space", [])]
        for row, (sid, lab) in enumerate(data["labels"].items(), start=1):
            pairs.append((row, str(sid), str(lab)))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        while lines and lines[0].startswith("#"):
            line = lines.pop(0)
            if line.startswith(_SPACE_DIRECTIVE):
                declared = [str(t) for t in json.loads(line[len(_SPACE_DIRECTIVE):])]
        reader = csv.reader(lines)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty labeling file") from None
        if header != ["spot_id", "label"]:
            raise DatasetFormatError(f"{path}: header must be spot_id,label; got {header}")
        for row, fields in enumerate(reader, start=1):
            if not fields:
                continue
            if len(fields) != 2:
                raise DatasetFormatError(f"row {row}: expected 2 fields, got {len(fields)}")
            pairs.append((row, fields[0].strip(), fields[1].strip()))

    aligned: list[Optional[str]] = [None] * dataset.n
    for row, sid, lab in pairs:
        if lab == "":
            raise EmptyLabelError(f"row {row}: empty label for spot {sid!r}")
        try:
            i = dataset.index_of(sid)
        except KeyError:
            raise UnknownSpotError(f"row {row}: spot {sid!r} is not in the dataset") from None
        if aligned[i] is not None:
            raise LabelingError(f"row {row}: spot {sid!r} labeled more than once")
        aligned[i] = lab
    missing = [dataset.spot_ids[i] for i, lab in enumerate(aligned) if lab is None]
    if missing:
        raise MissingSpotError(f"{len(missing)} spot(s) without a label, first: {missing[0]!r}")
    return Labeling(tuple(aligned), tuple(declared), role=role)


def save_labeling(labeling: Labeling, dataset: SpatialDataset, path):
    """Write ``spot_id,label``; declares the label space only if it exceeds the carried tokens."""
    labeling.check_aligned(dataset)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if labeling.label_space != labeling.tokens:
            fh.write(f"{_SPACE_DIRECTIVE} {json.dumps(list(labeling.label_space))}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["spot_id", "label"])
        for sid, lab in zip(dataset.spot_ids, labeling.labels):
            writer.writerow([sid, lab])
