"""Domain types for pose detections and bbox-relative feature normalization.

A skeleton is 17 COCO-ordered keypoints. Normalizing it against a person
bounding box yields 34 values in [0, 1] that keep only the pose shape:
translating or scaling both skeleton and box leaves the output unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InsufficientKeypointsError, NormalizationError

COCO_KEYPOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

NUM_KEYPOINTS = 17
FEATURE_DIM = 2 * NUM_KEYPOINTS

LEFT_WRIST = 9
RIGHT_WRIST = 10
LEFT_ANKLE = 15
RIGHT_ANKLE = 16

# Fewer detected points than this carry no usable pose shape; such persons
# are skipped by the classification pipeline.
MIN_CLASSIFIABLE_KEYPOINTS = 4

# Soft containment check: detected keypoints may exceed the person box by
# this fraction of its extent before validation flags them.
BBOX_CONTAINMENT_MARGIN = 0.10


@dataclass(frozen=True)
class Keypoint:
    """One 2D landmark in image pixels. confidence 0 marks "not detected"."""

    x: float
    y: float
    confidence: float = 1.0

    @property
    def detected(self) -> bool:
        return self.confidence > 0.0


@dataclass(frozen=True)
class Skeleton:
    """Exactly 17 keypoints in COCO order (see COCO_KEYPOINT_NAMES)."""

    keypoints: tuple[Keypoint, ...]

    def detected_count(self) -> int:
        return sum(1 for kp in self.keypoints if kp.detected)

    def is_classifiable(self, min_detected: int = MIN_CLASSIFIABLE_KEYPOINTS) -> bool:
        return len(self.keypoints) == NUM_KEYPOINTS and self.detected_count() >= min_detected


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixels; valid boxes have positive extent."""

    x_min: float
    y_min: float
    width: float
    height: float

    @property
    def x_max(self) -> float:
        return self.x_min + self.width

    @property
    def y_max(self) -> float:
        return self.y_min + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def is_degenerate(self) -> bool:
        return not (self.width > 0.0 and self.height > 0.0)


@dataclass(frozen=True)
class PersonDetection:
    bbox: BoundingBox
    skeleton: Skeleton
    detection_score: float = 1.0


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    timestamp_s: float
    image_width: int
    image_height: int
    persons: tuple[PersonDetection, ...] = ()


@dataclass(frozen=True)
class FeatureVector:
    """34 bbox-relative values in [0, 1], laid out [x0, y0, ..., x16, y16].

    Undetected keypoints are encoded as the sentinel pair (0, 0); classifiers
    train on the same encoding so it stays consistent at inference.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != FEATURE_DIM:
            raise ValueError(f"feature vector must have {FEATURE_DIM} values, got {len(self.values)}")
        for v in self.values:
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"feature value {v!r} outside [0, 1]")

    def keypoint(self, index: int) -> tuple[float, float]:
        return self.values[2 * index], self.values[2 * index + 1]


@dataclass(frozen=True)
class ValidationIssue:
    """One invariant violation found in a frame. severity is error|warning."""

    code: str
    message: str
    severity: str = "error"
    person_index: int | None = None

    def __str__(self) -> str:
        where = "" if self.person_index is None else f" (person {self.person_index})"
        return f"[{self.severity}] {self.code}: {self.message}{where}"


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


def normalize_skeleton(skeleton: Skeleton, bbox: BoundingBox) -> FeatureVector:
    """Map keypoints to box-relative coordinates, clamped to [0, 1].

    Output is invariant to translating or uniformly scaling skeleton and box
    together. Undetected keypoints map to the (0, 0) sentinel. Keypoints
    outside the box are clamped rather than rejected; upstream boxes are
    approximate.
    """
    if bbox.is_degenerate():
        raise NormalizationError(
            f"cannot normalize against degenerate bbox (w={bbox.width}, h={bbox.height})"
        )
    values: list[float] = []
    for kp in skeleton.keypoints:
        if not kp.detected:
            values.extend((0.0, 0.0))
            continue
        values.append(_clamp01((kp.x - bbox.x_min) / bbox.width))
        values.append(_clamp01((kp.y - bbox.y_min) / bbox.height))
    return FeatureVector(tuple(values))


def bbox_from_skeleton(skeleton: Skeleton, margin_fraction: float = 0.0) -> BoundingBox:
    """Tight box over detected keypoints, expanded by margin_fraction per side.

    Fallback for upstream sources that supply keypoints without boxes.
    """
    detected = [kp for kp in skeleton.keypoints if kp.detected]
    if len(detected) < 2:
        raise InsufficientKeypointsError(
            f"bbox needs at least 2 detected keypoints, got {len(detected)}"
        )
    xs = [kp.x for kp in detected]
    ys = [kp.y for kp in detected]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    width = x_max - x_min
    height = y_max - y_min
    if width <= 0.0 or height <= 0.0:
        raise InsufficientKeypointsError("detected keypoints have no 2D extent")
    return BoundingBox(
        x_min=x_min - margin_fraction * width,
        y_min=y_min - margin_fraction * height,
        width=width * (1.0 + 2.0 * margin_fraction),
        height=height * (1.0 + 2.0 * margin_fraction),
    )


def validate_frame(frame: FrameDetections) -> list[ValidationIssue]:
    """Report every invariant violation in a frame without mutating it."""
    issues: list[ValidationIssue] = []
    if frame.frame_index < 0:
        issues.append(ValidationIssue("negative_frame_index", f"frame_index {frame.frame_index} < 0"))
    if frame.image_width <= 0 or frame.image_height <= 0:
        issues.append(
            ValidationIssue(
                "bad_image_size", f"image size {frame.image_width}x{frame.image_height} not positive"
            )
        )
    if not math.isfinite(frame.timestamp_s):
        issues.append(ValidationIssue("bad_timestamp", f"timestamp_s {frame.timestamp_s} not finite"))

    for idx, person in enumerate(frame.persons):
        issues.extend(_validate_person(person, idx))
    return issues


def _validate_person(person: PersonDetection, idx: int) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    bbox = person.bbox
    if bbox.is_degenerate():
        issues.append(
            ValidationIssue(
                "degenerate_bbox", f"bbox extent ({bbox.width}, {bbox.height}) not positive", person_index=idx
            )
        )
    if not all(math.isfinite(v) for v in (bbox.x_min, bbox.y_min, bbox.width, bbox.height)):
        issues.append(ValidationIssue("nonfinite_bbox", "bbox has non-finite fields", person_index=idx))
    if not (0.0 <= person.detection_score <= 1.0):
        issues.append(
            ValidationIssue(
                "bad_detection_score", f"detection_score {person.detection_score} outside [0, 1]", person_index=idx
            )
        )

    kps = person.skeleton.keypoints
    if len(kps) != NUM_KEYPOINTS:
        issues.append(
            ValidationIssue(
                "wrong_keypoint_count", f"skeleton has {len(kps)} keypoints, expected {NUM_KEYPOINTS}", person_index=idx
            )
        )
    for k, kp in enumerate(kps):
        if not (0.0 <= kp.confidence <= 1.0):
            issues.append(
                ValidationIssue(
                    "bad_confidence",
                    f"keypoint {k} confidence {kp.confidence} outside [0, 1]",
                    person_index=idx,
                )
            )
        if kp.detected and not (math.isfinite(kp.x) and math.isfinite(kp.y)):
            issues.append(
                ValidationIssue(
                    "nonfinite_keypoint", f"keypoint {k} coordinates not finite", person_index=idx
                )
            )

    # Soft check: detected keypoints should sit inside the box plus a 10%
    # margin. Approximate upstream boxes make this a warning, not an error.
    if not bbox.is_degenerate():
        mx = BBOX_CONTAINMENT_MARGIN * bbox.width
        my = BBOX_CONTAINMENT_MARGIN * bbox.height
        for k, kp in enumerate(kps):
            if not kp.detected or not (math.isfinite(kp.x) and math.isfinite(kp.y)):
                continue
            if not (bbox.x_min - mx <= kp.x <= bbox.x_max + mx and bbox.y_min - my <= kp.y <= bbox.y_max + my):
                issues.append(
                    ValidationIssue(
                        "keypoint_outside_bbox",
                        f"keypoint {k} at ({kp.x:.1f}, {kp.y:.1f}) outside expanded bbox",
                        severity="warning",
                        person_index=idx,
                    )
                )
    return issues
