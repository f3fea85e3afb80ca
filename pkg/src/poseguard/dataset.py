"""Interval-based action labeling, feature CSV persistence, and splits.

Interval label files are comma-separated with the header
Session,Action,StartFrame,EndFrame,Actor,Label; feature files use the
header f0..f33,label with one row per sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DataError, LabelingConflictError, PersistenceError, StratificationError
from .keypoints import FEATURE_DIM, FeatureVector

INTERVAL_HEADER = ("Session", "Action", "StartFrame", "EndFrame", "Actor", "Label")
FEATURE_HEADER = tuple(f"f{i}" for i in range(FEATURE_DIM)) + ("label",)


@dataclass(frozen=True)
class IntervalLabelRow:
    session: int
    action: int
    start_frame: int
    end_frame: int
    actor: int
    label: int

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise DataError(f"interval start {self.start_frame} > end {self.end_frame}")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")
        if self.start_frame < 0:
            raise DataError(f"start frame {self.start_frame} is negative")


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: int
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for name, frac in (
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ):
            if not (0.0 < frac < 1.0):
                raise StratificationError(f"{name} must lie in (0, 1), got {frac}")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise StratificationError(f"fractions must sum to 1, got {total}")


def read_interval_labels(fp: IO[str]) -> list[IntervalLabelRow]:
    reader = csv.reader(fp)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("interval label file is empty") from None
    if tuple(h.strip() for h in header) != INTERVAL_HEADER:
        raise DataError(f"expected header {','.join(INTERVAL_HEADER)}, got {','.join(header)}")
    rows = []
    for lineno, parts in enumerate(reader, start=2):
        if not parts or all(not p.strip() for p in parts):
            continue
        if len(parts) != 6:
            raise DataError(f"line {lineno}: expected 6 columns, got {len(parts)}")
        try:
            rows.append(IntervalLabelRow(*(int(p) for p in parts)))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    return rows


def expand_interval_labels(rows: Sequence[IntervalLabelRow]) -> dict[tuple[int, int, int], int]:
    """Expand interval rows to a (session, frame, actor) -> label mapping.

    Frames not covered by any interval are absent (unlabeled, excluded from
    training). Overlapping intervals for the same (session, action, actor),
    or any conflicting label assignment to the same frame, raise
    LabelingConflictError naming both rows.
    """
    groups: dict[tuple[int, int, int], list[IntervalLabelRow]] = {}
    for row in rows:
        groups.setdefault((row.session, row.action, row.actor), []).append(row)
    for group in groups.values():
        ordered = sorted(group, key=lambda r: (r.start_frame, r.end_frame))
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.start_frame <= prev.end_frame:
                raise LabelingConflictError(f"overlapping intervals: {prev} and {cur}")

    mapping: dict[tuple[int, int, int], int] = {}
    origin: dict[tuple[int, int, int], IntervalLabelRow] = {}
    # Sorted expansion keeps the result independent of input row order.
    for row in sorted(rows, key=lambda r: (r.session, r.actor, r.start_frame, r.end_frame, r.action)):
        for frame in range(row.start_frame, row.end_frame + 1):
            key = (row.session, frame, row.actor)
            if key in mapping and mapping[key] != row.label:
                raise LabelingConflictError(
                    f"frame {frame} labeled both ways: {origin[key]} and {row}"
                )
            mapping[key] = row.label
            origin[key] = row
    return mapping


def write_feature_csv(samples: Iterable[LabeledSample], fp: IO[str]) -> int:
    """Write header plus one row per sample; returns the data row count.

    Feature values are written with full float precision (repr), well past
    the required 9 significant digits, so reading back is lossless.
    """
    try:
        fp.write(",".join(FEATURE_HEADER) + "\n")
        count = 0
        for sample in samples:
            cells = [repr(float(v)) for v in sample.features.values]
            cells.append(str(sample.label))
            fp.write(",".join(cells) + "\n")
            count += 1
    except OSError as exc:
        raise PersistenceError(f"writing feature CSV failed: {exc}") from exc
    return count


def read_feature_csv(fp: IO[str], provenance: str = "csv") -> list[LabeledSample]:
    reader = csv.reader(fp)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("feature CSV is empty") from None
    if tuple(header) != FEATURE_HEADER:
        raise DataError(f"expected header f0..f{FEATURE_DIM - 1},label")
    samples = []
    for lineno, parts in enumerate(reader, start=2):
        if not parts:
            continue
        if len(parts) != FEATURE_DIM + 1:
            raise DataError(f"line {lineno}: expected {FEATURE_DIM + 1} columns, got {len(parts)}")
        try:
            values = tuple(float(p) for p in parts[:FEATURE_DIM])
            label = int(parts[FEATURE_DIM])
            samples.append(
                LabeledSample(FeatureVector(values), label, provenance=f"{provenance}:{lineno}")
            )
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    return samples


def stratified_split(
    samples: Sequence[LabeledSample], spec: SplitSpec
) -> tuple[list[LabeledSample], list[LabeledSample], list[LabeledSample]]:
    """Split per class: floor-sized val and test, remainder to train.

    Deterministic for a fixed seed; partitions are disjoint and exhaustive.
    """
    by_class: dict[int, list[LabeledSample]] = {0: [], 1: []}
    for sample in samples:
        by_class[sample.label].append(sample)
    for label, group in by_class.items():
        if not group:
            raise StratificationError(f"class {label} has no samples")

    rng = np.random.default_rng(spec.seed)
    train: list[LabeledSample] = []
    val: list[LabeledSample] = []
    test: list[LabeledSample] = []
    for label in (0, 1):
        group = by_class[label]
        order = rng.permutation(len(group))
        n_val = int(np.floor(len(group) * spec.val_fraction))
        n_test = int(np.floor(len(group) * spec.test_fraction))
        val.extend(group[i] for i in order[:n_val])
        test.extend(group[i] for i in order[n_val : n_val + n_test])
        train.extend(group[i] for i in order[n_val + n_test :])
    return train, val, test


def samples_to_arrays(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (X, y) float64/int arrays for the classifier cores."""
    if not samples:
        return np.zeros((0, FEATURE_DIM)), np.zeros(0, dtype=int)
    X = np.array([s.features.values for s in samples], dtype=np.float64)
    y = np.array([s.label for s in samples], dtype=int)
    return X, y
