"""Greedy IoU tracking and the velocity rule for ambiguous fight calls.

A detection inherits a track id when its box overlaps a live track's last
box by at least the IoU threshold (highest overlap first); otherwise a new
track is born. Tracks unseen for more than grace_frames are eliminated and
their ids are never reused. Velocities are measured on normalized feature
coordinates, so the unit is bounding-box extents per second.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import math

from .errors import ConfigError, StreamError
from .keypoints import (
    LEFT_ANKLE,
    LEFT_WRIST,
    RIGHT_ANKLE,
    RIGHT_WRIST,
    BoundingBox,
    FeatureVector,
    PersonDetection,
)


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.3
    grace_frames: int = 0  # 0: unmatched tracks are eliminated immediately
    history_capacity: int = 90

    def __post_init__(self) -> None:
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ConfigError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")
        if self.grace_frames < 0:
            raise ConfigError(f"grace_frames must be >= 0, got {self.grace_frames}")
        if self.history_capacity < 1:
            raise ConfigError(f"history_capacity must be positive, got {self.history_capacity}")


@dataclass(frozen=True)
class VelocityRuleConfig:
    # Normalized bbox-extents per second; fight-grade motion sits well above
    # this, slow ambiguous poses (hugs, trolleys) below.
    velocity_threshold: float = 0.5
    window_frames: int = 5
    tracked_keypoints: tuple[int, ...] = (LEFT_WRIST, RIGHT_WRIST, LEFT_ANKLE, RIGHT_ANKLE)

    def __post_init__(self) -> None:
        if not self.velocity_threshold > 0:
            raise ConfigError(f"velocity_threshold must be positive, got {self.velocity_threshold}")
        if self.window_frames < 2:
            raise ConfigError(f"window_frames must be >= 2, got {self.window_frames}")
        if not self.tracked_keypoints:
            raise ConfigError("tracked_keypoints must not be empty")


class VelocityHint(Enum):
    UPHOLD = "uphold"
    DOWNGRADE = "downgrade"


@dataclass
class Track:
    """One tracked person: bounded histories of boxes, features, and scores."""

    track_id: int
    capacity: int = 90
    bbox_history: deque = field(default_factory=deque)
    feature_history: deque = field(default_factory=deque)  # (frame, timestamp_s, FeatureVector)
    label_history: deque = field(default_factory=deque)  # (frame, p_fight)
    frames_since_seen: int = 0

    def __post_init__(self) -> None:
        self.bbox_history = deque(self.bbox_history, maxlen=self.capacity)
        self.feature_history = deque(self.feature_history, maxlen=self.capacity)
        self.label_history = deque(self.label_history, maxlen=self.capacity)

    @property
    def last_bbox(self) -> BoundingBox:
        return self.bbox_history[-1][1]

    def observe_bbox(self, frame_index: int, bbox: BoundingBox) -> None:
        self.bbox_history.append((frame_index, bbox))
        self.frames_since_seen = 0

    def record_feature(self, frame_index: int, timestamp_s: float, feature: FeatureVector) -> None:
        self.feature_history.append((frame_index, timestamp_s, feature))

    def record_probability(self, frame_index: int, p_fight: float) -> None:
        self.label_history.append((frame_index, p_fight))

    def recent_probabilities(self, window: int) -> list[float]:
        return [p for _, p in list(self.label_history)[-window:]]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; symmetric, in [0, 1]."""
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class TrackUpdate:
    assignments: tuple[Track, ...]  # parallel to the detections argument
    new_track_ids: tuple[int, ...]
    removed_track_ids: tuple[int, ...]


class IouTracker:
    """Per-stream tracker state; never share one instance across streams."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: dict[int, Track] = {}
        self._next_id = 1
        self._last_frame_index: int | None = None

    def update(self, frame_index: int, detections: Sequence[PersonDetection]) -> TrackUpdate:
        """Match detections to live tracks greedily by descending IoU."""
        if self._last_frame_index is not None and frame_index <= self._last_frame_index:
            raise StreamError(
                f"frame index {frame_index} not after previous {self._last_frame_index}"
            )
        self._last_frame_index = frame_index

        pairs = []
        for track_id in sorted(self.tracks):
            track = self.tracks[track_id]
            for det_idx, det in enumerate(detections):
                overlap = iou(track.last_bbox, det.bbox)
                if overlap >= self.config.iou_threshold:
                    pairs.append((overlap, track_id, det_idx))
        # Ties broken by track id then detection order for determinism.
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))

        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        assignment: dict[int, int] = {}
        for overlap, track_id, det_idx in pairs:
            if track_id in matched_tracks or det_idx in matched_dets:
                continue
            matched_tracks.add(track_id)
            matched_dets.add(det_idx)
            assignment[det_idx] = track_id

        new_ids: list[int] = []
        assigned: list[Track] = []
        for det_idx, det in enumerate(detections):
            if det_idx in assignment:
                track = self.tracks[assignment[det_idx]]
            else:
                track = Track(track_id=self._next_id, capacity=self.config.history_capacity)
                self._next_id += 1
                self.tracks[track.track_id] = track
                new_ids.append(track.track_id)
            track.observe_bbox(frame_index, det.bbox)
            assigned.append(track)

        removed: list[int] = []
        for track_id in sorted(self.tracks):
            track = self.tracks[track_id]
            if track_id in matched_tracks or track_id in new_ids:
                continue
            track.frames_since_seen += 1
            if track.frames_since_seen > self.config.grace_frames:
                removed.append(track_id)
        for track_id in removed:
            del self.tracks[track_id]

        return TrackUpdate(tuple(assigned), tuple(new_ids), tuple(removed))


def keypoint_velocity(track: Track, rule: VelocityRuleConfig) -> float | None:
    """Mean speed of the rule's keypoints in normalized units per second.

    Uses the oldest and newest feature-history entries inside the last
    window_frames frames. Returns None (rule not applicable) when there are
    fewer than two in-window entries, no elapsed time, or every tracked
    keypoint is undetected.
    """
    entries = list(track.feature_history)
    if len(entries) < 2:
        return None
    newest_frame, newest_ts, newest_fv = entries[-1]
    window_start = newest_frame - (rule.window_frames - 1)
    in_window = [e for e in entries if e[0] >= window_start]
    if len(in_window) < 2:
        return None
    oldest_frame, oldest_ts, oldest_fv = in_window[0]
    elapsed = newest_ts - oldest_ts
    if elapsed <= 0.0:
        return None

    displacements = []
    for k in rule.tracked_keypoints:
        x0, y0 = oldest_fv.keypoint(k)
        x1, y1 = newest_fv.keypoint(k)
        # (0, 0) is the undetected sentinel; a jump to or from it is noise
        if (x0 == 0.0 and y0 == 0.0) or (x1 == 0.0 and y1 == 0.0):
            continue
        displacements.append(math.hypot(x1 - x0, y1 - y0))
    if not displacements:
        return None
    return (sum(displacements) / len(displacements)) / elapsed


def apply_velocity_rule(
    p_fight: float,
    velocity: float | None,
    rule: VelocityRuleConfig,
    fight_threshold: float = 0.8,
) -> VelocityHint:
    """Gate fight calls on motion: slow movement downgrades, all else upholds.

    Only applies when p_fight reaches the fight threshold; an unavailable
    velocity (None) never downgrades.
    """
    if p_fight >= fight_threshold and velocity is not None and velocity < rule.velocity_threshold:
        return VelocityHint.DOWNGRADE
    return VelocityHint.UPHOLD
