"""On-disk dataset formats, assembly, cleaning and splitting.

A study directory holds:

- ``tensors/<subject>_<modality>.hft`` -- binary tensor files (magic
  ``HFT1``, u32 version=1, three u32 dims, float32 little-endian payload
  in canonical last-index-fastest layout);
- ``ehr.csv`` -- header row, ``subject_id`` first, numeric feature columns
  (empty cell = missing);
- ``labels.csv`` -- ``subject_id,label,screen_time`` with label in {0,1}
  and a numeric ordering key for the chronological split;
- ``landmarks.csv`` -- ``subject_id,modality,landmark_id,x,y,uncertainty``.

Values are stored in float32 but all in-memory arithmetic is float64.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .registration import MODALITIES, N_LANDMARKS, LandmarkSet

TENSOR_MAGIC = b"HFT1"
TENSOR_VERSION = 1

DEFAULT_MAX_MISSING_FRACTION = 0.05


class StudyFormatError(ValueError):
    """Malformed study file (bad header, duplicate rows, bad cells)."""


# --- tensor files ----------------------------------------------------------

def write_tensor(path, t: np.ndarray) -> None:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError("tensor files hold third-order tensors")
    if not np.all(np.isfinite(t)):
        raise ValueError("refusing to write non-finite tensor values")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<IIII", TENSOR_VERSION, *t.shape))
        f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != TENSOR_MAGIC:
            raise StudyFormatError(f"{path}: bad magic, not a tensor file")
        version, i1, i2, i3 = struct.unpack("<IIII", f.read(16))
        if version != TENSOR_VERSION:
            raise StudyFormatError(f"{path}: unsupported version {version}")
        payload = f.read(4 * i1 * i2 * i3)
        if len(payload) != 4 * i1 * i2 * i3:
            raise StudyFormatError(f"{path}: truncated payload")
    t = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(i1, i2, i3)
    if not np.all(np.isfinite(t)):
        raise StudyFormatError(f"{path}: non-finite tensor values")
    return t


# --- study table -----------------------------------------------------------

@dataclass
class Subject:
    id: str
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    tabular: np.ndarray | None = None
    label: int | None = None
    landmarks: dict[str, LandmarkSet] = field(default_factory=dict)
    split: str = "train"
    segment: int | None = None
    order_key: float | None = None


@dataclass
class StudyTable:
    subjects: list[Subject]
    feature_names: list[str] = field(default_factory=list)
    exclusions: list[tuple[str, str]] = field(default_factory=list)

    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def get(self, subject_id: str) -> Subject:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def by_split(self, *tags: str) -> list[Subject]:
        return [s for s in self.subjects if s.split in tags]

    def subset(self, ids) -> "StudyTable":
        wanted = set(ids)
        return StudyTable(
            subjects=[s for s in self.subjects if s.id in wanted],
            feature_names=list(self.feature_names),
            exclusions=list(self.exclusions),
        )

    def tabular_matrix(self, subjects: list[Subject] | None = None) -> np.ndarray:
        subjects = self.subjects if subjects is None else subjects
        return np.stack([s.tabular for s in subjects])

    def labels(self, subjects: list[Subject] | None = None) -> np.ndarray:
        subjects = self.subjects if subjects is None else subjects
        return np.asarray([s.label for s in subjects], dtype=np.int64)


def _read_csv(path: Path, required_first: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise StudyFormatError(f"{path}: empty file, header row required")
        rows = [row for row in reader if row]
    if not header or header[0] != required_first:
        raise StudyFormatError(
            f"{path}: first header column must be '{required_first}'"
        )
    return header, rows


def _numeric(path, cell: str, what: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise StudyFormatError(f"{path}: non-numeric {what}: {cell!r}")


def load_study(directory, required_modalities=MODALITIES) -> StudyTable:
    """Assemble a StudyTable from a study directory, joining on subject_id.

    Subjects missing a required tensor, labels or landmarks are excluded
    and reported; an empty directory yields an empty table with a warning.
    """
    directory = Path(directory)
    ehr_path = directory / "ehr.csv"
    labels_path = directory / "labels.csv"
    landmarks_path = directory / "landmarks.csv"
    if not ehr_path.exists() and not labels_path.exists():
        warnings.warn(f"{directory}: no study files found, returning empty table")
        return StudyTable(subjects=[])

    header, rows = _read_csv(ehr_path, "subject_id")
    feature_names = header[1:]
    tabular: dict[str, np.ndarray] = {}
    for row in rows:
        sid = row[0]
        if sid in tabular:
            raise StudyFormatError(f"{ehr_path}: duplicate subject row {sid!r}")
        values = [np.nan if cell == "" else _numeric(ehr_path, cell, "EHR cell")
                  for cell in row[1:]]
        tabular[sid] = np.asarray(values, dtype=np.float64)

    _, label_rows = _read_csv(labels_path, "subject_id")
    labels: dict[str, tuple[int, float]] = {}
    for row in label_rows:
        sid = row[0]
        if sid in labels:
            raise StudyFormatError(f"{labels_path}: duplicate subject row {sid!r}")
        label = int(_numeric(labels_path, row[1], "label"))
        order_key = _numeric(labels_path, row[2], "screen_time") if len(row) > 2 else 0.0
        labels[sid] = (label, order_key)

    landmark_rows: dict[str, dict[str, list]] = {}
    if landmarks_path.exists():
        _, lm_rows = _read_csv(landmarks_path, "subject_id")
        for row in lm_rows:
            sid, modality = row[0], row[1]
            entry = landmark_rows.setdefault(sid, {}).setdefault(modality, [])
            entry.append((
                int(_numeric(landmarks_path, row[2], "landmark_id")),
                _numeric(landmarks_path, row[3], "x"),
                _numeric(landmarks_path, row[4], "y"),
                _numeric(landmarks_path, row[5], "uncertainty"),
            ))

    subjects, exclusions = [], []
    for sid in sorted(tabular):
        if sid not in labels:
            exclusions.append((sid, "missing label"))
            continue
        tensors = {}
        missing = None
        for modality in required_modalities:
            path = directory / "tensors" / f"{sid}_{modality}.hft"
            if not path.exists():
                missing = f"missing tensor {path.name}"
                break
            tensors[modality] = read_tensor(path)
        if missing:
            exclusions.append((sid, missing))
            continue
        lms = {}
        bad = None
        for modality in required_modalities:
            entries = sorted(landmark_rows.get(sid, {}).get(modality, []))
            if len(entries) != N_LANDMARKS:
                bad = f"expected {N_LANDMARKS} {modality} landmarks, got {len(entries)}"
                break
            lms[modality] = LandmarkSet(
                subject_id=sid,
                modality=modality,
                points=np.asarray([(x, y) for _, x, y, _ in entries]),
                uncertainties=np.asarray([u for _, _, _, u in entries]),
            )
        if bad:
            exclusions.append((sid, bad))
            continue
        label, order_key = labels[sid]
        subjects.append(Subject(id=sid, tensors=tensors, tabular=tabular[sid],
                                label=label, landmarks=lms, order_key=order_key))
    return StudyTable(subjects=subjects, feature_names=feature_names,
                      exclusions=exclusions)


# --- cleaning --------------------------------------------------------------

@dataclass
class CleaningReport:
    dropped_columns: list[str]
    imputed_counts: dict[str, int]


def clean_tabular(table: StudyTable,
                  max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION
                  ) -> CleaningReport:
    """Drop features with too many missing values; mean-impute the rest.

    Imputation means come from the training split only.  Modifies the
    table in place and returns the report.
    """
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValueError("max_missing_fraction must be in [0, 1]")
    if not table.subjects:
        return CleaningReport(dropped_columns=[], imputed_counts={})
    x = table.tabular_matrix()
    train_subjects = table.by_split("train", "validation") or table.subjects
    x_train = table.tabular_matrix(train_subjects)

    missing_fraction = np.mean(np.isnan(x), axis=0)
    keep = missing_fraction <= max_missing_fraction
    dropped = [name for name, k in zip(table.feature_names, keep) if not k]

    imputed_counts = {}
    with warnings.catch_warnings():
        # all-NaN training columns produce a NaN mean here; they are either
        # dropped by the threshold or rejected explicitly below
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(np.where(np.isnan(x_train), np.nan, x_train), axis=0)
    for j, name in enumerate(table.feature_names):
        if not keep[j]:
            continue
        n_missing = int(np.sum(np.isnan(x[:, j])))
        if n_missing:
            if np.all(np.isnan(x_train[:, j])):
                raise ValueError(f"feature {name!r} is 100% missing in training split")
            imputed_counts[name] = n_missing

    kept_names = [n for n, k in zip(table.feature_names, keep) if k]
    for s, row in zip(table.subjects, x):
        cleaned = row[keep].copy()
        nan_mask = np.isnan(cleaned)
        cleaned[nan_mask] = means[keep][nan_mask]
        s.tabular = cleaned
    table.feature_names = kept_names
    return CleaningReport(dropped_columns=dropped, imputed_counts=imputed_counts)


# --- splitting -------------------------------------------------------------

def chronological_split(table: StudyTable, train_fraction: float,
                        test_segments: int = 5) -> StudyTable:
    """Tag earliest subjects as train; split the rest into time segments.

    Segments are contiguous in screening order; when sizes do not divide
    evenly the earlier segments take the extra subject.
    """
    if test_segments < 1:
        raise ValueError("need at least one test segment")
    for s in table.subjects:
        if s.order_key is None:
            raise ValueError(f"subject {s.id}: missing ordering key")
    ordered = sorted(table.subjects, key=lambda s: (s.order_key, s.id))
    n_train = int(round(train_fraction * len(ordered)))
    for s in ordered[:n_train]:
        s.split = "train"
        s.segment = None
    rest = ordered[n_train:]
    if rest:
        sizes = [len(rest) // test_segments] * test_segments
        for i in range(len(rest) % test_segments):
            sizes[i] += 1
        pos = 0
        for seg, size in enumerate(sizes):
            for s in rest[pos:pos + size]:
                s.split = "test"
                s.segment = seg
            pos += size
    return table


def carve_validation(table: StudyTable, fraction: float, seed: int = 0) -> StudyTable:
    """Re-tag a stratified random share of the train split as validation."""
    train = table.by_split("train")
    labels = np.asarray([s.label for s in train], dtype=np.int64)
    rng = np.random.default_rng(seed)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_val = max(1, int(round(fraction * len(idx))))
        for i in idx[:n_val]:
            train[i].split = "validation"
    return table
