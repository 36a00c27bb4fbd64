"""Decision-record ingestion: tabular CSV, grayscale image directories,
seeded stratified splits, and exact-round-trip record serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError, DomainError, SchemaError, SplitError
from .rng import STREAM_SPLIT, derive_stream

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class DecisionRecord:
    """One expert decision: normalized features, a binary label, and
    optionally how many of the K panelists agreed with that label."""

    record_id: str
    features: np.ndarray
    label: int
    agreement: int | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        f.setflags(write=False)
        object.__setattr__(self, "features", f)
        if not np.all(np.isfinite(f)):
            raise DataError(f"record {self.record_id}: non-finite feature values")
        if self.label not in (0, 1):
            raise DataError(f"record {self.record_id}: label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class DatasetManifest:
    source_kind: str
    record_count: int
    class_counts: dict[str, int]
    feature_shape: tuple[int, ...]
    normalization: dict
    panel_size: int | None = None
    feature_names: tuple[str, ...] = ()
    dropped_features: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if sum(self.class_counts.values()) != self.record_count:
            raise DataError("class counts do not sum to the record count")

    def to_json_dict(self) -> dict:
        return {
            "source_kind": self.source_kind,
            "record_count": self.record_count,
            "class_counts": dict(self.class_counts),
            "feature_shape": list(self.feature_shape),
            "normalization": self.normalization,
            "panel_size": self.panel_size,
            "feature_names": list(self.feature_names),
            "dropped_features": list(self.dropped_features),
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetManifest":
        return DatasetManifest(
            source_kind=d["source_kind"],
            record_count=d["record_count"],
            class_counts={str(k): int(v) for k, v in d["class_counts"].items()},
            feature_shape=tuple(d["feature_shape"]),
            normalization=d["normalization"],
            panel_size=d.get("panel_size"),
            feature_names=tuple(d.get("feature_names", ())),
            dropped_features=tuple(d.get("dropped_features", ())),
            warnings=tuple(d.get("warnings", ())),
        )


def _class_counts(records) -> dict[str, int]:
    counts = {"0": 0, "1": 0}
    for r in records:
        counts[str(r.label)] += 1
    return counts


def _check_agreement(record_id: str, agreement: int | None, panel_size: int | None):
    if agreement is None or panel_size is None:
        return
    majority = math.ceil(panel_size / 2)
    if not (majority <= agreement <= panel_size):
        raise DataError(
            f"record {record_id}: agreement {agreement} outside [{majority}, {panel_size}]"
        )


def _parse_label(cell: str, where: str) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{where}: label {cell!r} is not a number") from None
    if value not in (0.0, 1.0):
        raise DataError(f"{where}: label must be 0 or 1, got {cell!r}")
    return int(value)


def _parse_agreement(cell: str, where: str) -> int | None:
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        raise DataError(f"{where}: agreement {cell!r} is not an integer") from None


def standardize_features(matrix: np.ndarray, names: list[str]):
    """Center and scale each column; near-constant columns are dropped.

    Returns (matrix of kept columns, kept names, per-column means/stds,
    dropped names).
    """
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    keep = stds >= STD_FLOOR
    kept_names = [n for n, k in zip(names, keep) if k]
    dropped = [n for n, k in zip(names, keep) if not k]
    out = (matrix[:, keep] - means[keep]) / stds[keep]
    return out, kept_names, means[keep], stds[keep], dropped


def load_tabular(
    path,
    feature_columns: list[str],
    label_column: str,
    agreement_column: str | None = None,
    panel_size: int | None = None,
    standardize: bool = True,
):
    """Read decision records from a CSV with a header row.

    Features are standardized per column on the loaded set by default
    (constant columns dropped with a manifest warning); pass
    standardize=False to keep raw values, e.g. when statistics will be
    computed on a training split only.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = list(feature_columns) + [label_column]
        if agreement_column is not None:
            needed.append(agreement_column)
        for col in needed:
            if col not in header:
                raise SchemaError(f"missing column {col!r} in {path.name}")
        ids, rows, labels, agreements = [], [], [], []
        for i, row in enumerate(reader):
            where = f"{path.name} row {i}"
            try:
                rows.append([float(row[c]) for c in feature_columns])
            except ValueError:
                raise DataError(f"{where}: non-numeric feature value") from None
            labels.append(_parse_label(row[label_column], where))
            if agreement_column is not None:
                agreements.append(_parse_agreement(row[agreement_column], where))
            else:
                agreements.append(None)
            ids.append(row.get("id") or f"r{i:06d}")
    if not rows:
        raise DataError(f"{path.name}: no data rows")

    matrix = np.array(rows, dtype=np.float64)
    warnings: list[str] = []
    if standardize:
        matrix, kept, means, stds, dropped = standardize_features(matrix, list(feature_columns))
        if dropped:
            warnings.append(f"dropped constant features: {', '.join(dropped)}")
        normalization = {
            "kind": "per_feature",
            "means": [float(v) for v in means],
            "stds": [float(v) for v in stds],
        }
    else:
        kept, dropped = list(feature_columns), []
        normalization = {"kind": "none"}

    records = []
    for rid, feats, label, agreement in zip(ids, matrix, labels, agreements):
        _check_agreement(rid, agreement, panel_size)
        records.append(DecisionRecord(rid, feats, label, agreement))
    manifest = DatasetManifest(
        source_kind="tabular",
        record_count=len(records),
        class_counts=_class_counts(records),
        feature_shape=(matrix.shape[1],),
        normalization=normalization,
        panel_size=panel_size,
        feature_names=tuple(kept),
        dropped_features=tuple(dropped),
        warnings=tuple(warnings),
    )
    return records, manifest


def nearest_index_map(side: int, source: int) -> np.ndarray:
    """Source index sampled for each of ``side`` output positions."""
    return (np.arange(side) * source) // side


def load_images(
    directory,
    labels_csv,
    side: int = 32,
    panel_size: int | None = None,
):
    """Read grayscale PGM/PNG images listed in a labels CSV.

    Images are nearest-neighbor downscaled to side x side, scaled to [0,1],
    then standardized by the global pixel mean and std across the whole
    set. Records are ordered by filename ascending.
    """
    if side < 8:
        raise DomainError(f"side must be >= 8, got {side}")
    directory = Path(directory)
    labels_csv = Path(labels_csv)
    with open(labels_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("filename", "label"):
            if col not in header:
                raise SchemaError(f"missing column {col!r} in {labels_csv.name}")
        entries = []
        for i, row in enumerate(reader):
            where = f"{labels_csv.name} row {i}"
            label = _parse_label(row["label"], where)
            agreement = _parse_agreement(row.get("agreement", "") or "", where)
            entries.append((row["filename"], label, agreement))
    if not entries:
        raise DataError(f"{labels_csv.name}: no data rows")
    entries.sort(key=lambda e: e[0])

    planes = []
    for filename, _, _ in entries:
        path = directory / filename
        if not path.exists():
            raise DataError(f"missing image file {filename}")
        try:
            with Image.open(path) as img:
                arr = np.asarray(img.convert("L"), dtype=np.float64)
        except DataError:
            raise
        except Exception as exc:
            raise DataError(f"cannot decode image file {filename}: {exc}") from exc
        rows = nearest_index_map(side, arr.shape[0])
        cols = nearest_index_map(side, arr.shape[1])
        planes.append(arr[np.ix_(rows, cols)] / 255.0)

    stack = np.stack(planes)
    mean = float(stack.mean())
    std = float(stack.std())
    warnings: list[str] = []
    if std < STD_FLOOR:
        warnings.append("global pixel std is ~0; scale left at 1")
        std = 1.0
    stack = (stack - mean) / std

    records = []
    for (filename, label, agreement), plane in zip(entries, stack):
        _check_agreement(filename, agreement, panel_size)
        records.append(DecisionRecord(filename, plane[:, :, None], label, agreement))
    manifest = DatasetManifest(
        source_kind="image-dir",
        record_count=len(records),
        class_counts=_class_counts(records),
        feature_shape=(side, side, 1),
        normalization={"kind": "global_pixel", "pixel_scale": 255, "mean": mean, "std": std},
        panel_size=panel_size,
        warnings=tuple(warnings),
    )
    return records, manifest


def split(records, test_fraction: float, seed: int, index: int = 0):
    """Seeded stratified split into (train, test).

    Each class contributes round(count * test_fraction) records to the test
    side; a class that would end up empty on either side raises SplitError.
    ``index`` selects an independent split stream under the same seed.
    """
    if not (0.0 < test_fraction < 1.0):
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if not records:
        raise DataError("no records to split")
    rng = derive_stream(seed, STREAM_SPLIT, index)
    test_idx: list[int] = []
    for cls in (0, 1):
        members = [i for i, r in enumerate(records) if r.label == cls]
        if not members:
            continue
        n_test = math.floor(len(members) * test_fraction + 0.5)
        if n_test == 0 or n_test == len(members):
            raise SplitError(
                f"class {cls} would have {n_test} of {len(members)} records in test"
            )
        order = rng.permutation(len(members))
        test_idx.extend(members[j] for j in order[:n_test])
    chosen = set(test_idx)
    train = [r for i, r in enumerate(records) if i not in chosen]
    test = [r for i, r in enumerate(records) if i in chosen]
    return train, test


def records_to_csv_text(records) -> str:
    """Exact-round-trip record serialization: features flattened row-major,
    floats written with repr so reloading is bit-equal."""
    records = list(records)
    if not records:
        raise DataError("no records to write")
    width = records[0].features.size
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "label", "agreement"] + [f"f{i}" for i in range(width)])
    for r in records:
        flat = r.features.reshape(-1)
        if flat.size != width:
            raise DataError(f"record {r.record_id}: inconsistent feature size")
        writer.writerow(
            [r.record_id, r.label, "" if r.agreement is None else r.agreement]
            + [repr(float(v)) for v in flat]
        )
    return buf.getvalue()


def records_from_csv(source, feature_shape: tuple[int, ...] | None = None, name: str = "records"):
    """Inverse of records_to_csv_text; ``source`` is an open text file."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or header[:3] != ["id", "label", "agreement"]:
        raise SchemaError(f"{name}: expected header id,label,agreement,f0,...")
    records = []
    for i, row in enumerate(reader):
        if not row:
            continue
        where = f"{name} row {i}"
        if len(row) != len(header):
            raise DataError(f"{where}: expected {len(header)} cells, got {len(row)}")
        label = _parse_label(row[1], where)
        agreement = _parse_agreement(row[2], where)
        try:
            feats = np.array([float(v) for v in row[3:]], dtype=np.float64)
        except ValueError:
            raise DataError(f"{where}: non-numeric feature value") from None
        if feature_shape is not None:
            if feats.size != math.prod(feature_shape):
                raise DataError(f"{where}: features do not fit shape {feature_shape}")
            feats = feats.reshape(feature_shape)
        records.append(DecisionRecord(row[0], feats, label, agreement))
    if not records:
        raise DataError(f"{name}: no data rows")
    return records


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(records_to_csv_text(records))


def read_records_csv(path, feature_shape: tuple[int, ...] | None = None):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return records_from_csv(fh, feature_shape, name=path.name)


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        return DatasetManifest.from_json_dict(json.load(fh))
