"""Frame-by-frame inference: normalize, classify, track, smooth, alert.

Per tracked person the raw fight probability is averaged over a sliding
window, graded into Normal/Warning/Fight, optionally capped at Warning by
the velocity rule, and debounced by a small hysteresis margin so that a
probability hovering exactly on a threshold cannot flap the alert state
every frame. Events are emitted only on state changes.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Protocol, Sequence

import numpy as np

from . import streamio
from .errors import ConfigError, NormalizationError, StreamError
from .keypoints import (
    MIN_CLASSIFIABLE_KEYPOINTS,
    FrameDetections,
    normalize_skeleton,
    validate_frame,
)
from .tracking import (
    IouTracker,
    Track,
    TrackerConfig,
    VelocityHint,
    VelocityRuleConfig,
    apply_velocity_rule,
    keypoint_velocity,
)


class StateLabel(str, Enum):
    NORMAL = "normal"
    WARNING = "warning"
    FIGHT = "fight"
    SKIPPED = "skipped"  # too few detected keypoints to classify this frame


class FightScorer(Protocol):
    """Classifier heads plug in through this single-method contract."""

    def predict_proba(self, x: np.ndarray | Sequence[float]) -> float: ...


@dataclass(frozen=True)
class PipelineConfig:
    t_warn: float = 0.5
    t_alert: float = 0.8
    # None: half a second of frames at expected_fps (15 at the default 30)
    smoothing_window: int | None = None
    # A state only de-escalates once the smoothed probability falls this far
    # below the tier threshold; 0 disables the debounce entirely.
    hysteresis_margin: float = 0.05
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    velocity_rule: VelocityRuleConfig | None = field(default_factory=VelocityRuleConfig)
    expected_fps: float = 30.0
    min_keypoints: int = MIN_CLASSIFIABLE_KEYPOINTS

    def __post_init__(self) -> None:
        if not (0.0 < self.t_warn < self.t_alert <= 1.0):
            raise ConfigError(
                f"thresholds must satisfy 0 < t_warn < t_alert <= 1, got ({self.t_warn}, {self.t_alert})"
            )
        if not self.expected_fps > 0:
            raise ConfigError(f"expected_fps must be positive, got {self.expected_fps}")
        if self.smoothing_window is None:
            object.__setattr__(self, "smoothing_window", max(1, round(self.expected_fps / 2.0)))
        if self.smoothing_window < 1:
            raise ConfigError(f"smoothing_window must be positive, got {self.smoothing_window}")
        if self.hysteresis_margin < 0:
            raise ConfigError(f"hysteresis_margin must be >= 0, got {self.hysteresis_margin}")


@dataclass(frozen=True)
class PersonState:
    track_id: int
    raw_p_fight: float | None
    smoothed_p_fight: float | None
    state: StateLabel
    velocity: float | None = None


@dataclass(frozen=True)
class AlertEvent:
    frame_index: int
    timestamp_s: float
    track_id: int
    from_state: StateLabel
    to_state: StateLabel
    p_fight: float


def classify_state(p_fight: float, t_warn: float = 0.5, t_alert: float = 0.8) -> StateLabel:
    """Pure threshold grading: below warn, warn band, at or above alert."""
    if p_fight >= t_alert:
        return StateLabel.FIGHT
    if p_fight >= t_warn:
        return StateLabel.WARNING
    return StateLabel.NORMAL


def smooth_probability(window: Sequence[float]) -> float:
    """Arithmetic mean of the in-window probabilities."""
    if not window:
        raise ValueError("smoothing window must not be empty")
    return sum(window) / len(window)


def _sticky_state(
    previous: StateLabel, p: float, t_warn: float, t_alert: float, margin: float
) -> StateLabel:
    """Threshold grading with de-escalation hysteresis.

    Escalation uses the plain thresholds; dropping a tier additionally needs
    p below (threshold - margin), so a value oscillating exactly around a
    threshold holds its tier. margin = 0 reduces to classify_state.
    """
    if previous == StateLabel.FIGHT and p >= t_alert - margin:
        return StateLabel.FIGHT
    if previous in (StateLabel.FIGHT, StateLabel.WARNING):
        if p >= t_alert:
            return StateLabel.FIGHT
        if p >= t_warn - margin:
            return StateLabel.WARNING
        return StateLabel.NORMAL
    return classify_state(p, t_warn, t_alert)


class Pipeline:
    """Single-stream inference state; one owner per stream."""

    def __init__(self, classifier: FightScorer, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.classifier = classifier
        self.tracker = IouTracker(self.config.tracker)
        self._alert_states: dict[int, StateLabel] = {}
        self._velocities: dict[int, deque] = {}
        self._last_timestamp: float | None = None

    def process_frame(self, frame: FrameDetections) -> tuple[list[PersonState], list[AlertEvent]]:
        cfg = self.config
        if self._last_timestamp is not None and frame.timestamp_s < self._last_timestamp:
            raise StreamError(
                f"timestamp {frame.timestamp_s} decreases (previous {self._last_timestamp})"
            )
        update = self.tracker.update(frame.frame_index, frame.persons)
        self._last_timestamp = frame.timestamp_s
        for track_id in update.removed_track_ids:
            self._alert_states.pop(track_id, None)
            self._velocities.pop(track_id, None)

        states: list[PersonState] = []
        events: list[AlertEvent] = []
        for det, track in zip(frame.persons, update.assignments):
            if not det.skeleton.is_classifiable(cfg.min_keypoints):
                states.append(PersonState(track.track_id, None, None, StateLabel.SKIPPED))
                continue
            try:
                feature = normalize_skeleton(det.skeleton, det.bbox)
            except NormalizationError:
                states.append(PersonState(track.track_id, None, None, StateLabel.SKIPPED))
                continue

            raw_p = float(self.classifier.predict_proba(np.asarray(feature.values)))
            track.record_feature(frame.frame_index, frame.timestamp_s, feature)
            track.record_probability(frame.frame_index, raw_p)
            smoothed = smooth_probability(track.recent_probabilities(cfg.smoothing_window))

            velocity = None
            gate_velocity = None
            if cfg.velocity_rule is not None:
                velocity = keypoint_velocity(track, cfg.velocity_rule)
                recent = self._velocities.setdefault(
                    track.track_id, deque(maxlen=cfg.velocity_rule.window_frames)
                )
                if velocity is not None:
                    recent.append(velocity)
                # Periodic motion has per-frame velocity zeros at every swing
                # turnaround; "slow movement" means even the fastest recent
                # displacement was slow, so the rule gates on the window max.
                if recent:
                    gate_velocity = max(recent)

            previous = self._alert_states.get(track.track_id, StateLabel.NORMAL)
            state = _sticky_state(previous, smoothed, cfg.t_warn, cfg.t_alert, cfg.hysteresis_margin)
            if state == StateLabel.FIGHT and cfg.velocity_rule is not None:
                hint = apply_velocity_rule(smoothed, gate_velocity, cfg.velocity_rule, cfg.t_alert)
                if hint == VelocityHint.DOWNGRADE:
                    state = StateLabel.WARNING

            if state != previous:
                events.append(
                    AlertEvent(
                        frame_index=frame.frame_index,
                        timestamp_s=frame.timestamp_s,
                        track_id=track.track_id,
                        from_state=previous,
                        to_state=state,
                        p_fight=smoothed,
                    )
                )
            self._alert_states[track.track_id] = state
            states.append(PersonState(track.track_id, raw_p, smoothed, state, velocity))
        return states, events

    def track(self, track_id: int) -> Track | None:
        return self.tracker.tracks.get(track_id)


@dataclass
class StreamSummary:
    frames_processed: int = 0
    events_emitted: int = 0
    skipped_lines: int = 0
    elapsed_s: float = 0.0

    @property
    def throughput_fps(self) -> float:
        if self.elapsed_s <= 0.0:
            return 0.0
        return self.frames_processed / self.elapsed_s


def annotated_frame_record(
    frame: FrameDetections, states: Sequence[PersonState]
) -> dict:
    record = streamio.frame_to_record(frame)
    record["type"] = "frame"
    for person_record, state in zip(record["persons"], states):
        person_record["track_id"] = state.track_id
        person_record["p_fight"] = state.smoothed_p_fight
        person_record["state"] = state.state.value
    return record


def event_record(event: AlertEvent) -> dict:
    return {
        "type": "event",
        "frame_index": event.frame_index,
        "timestamp_s": event.timestamp_s,
        "track_id": event.track_id,
        "from_state": event.from_state.value,
        "to_state": event.to_state.value,
        "p_fight": event.p_fight,
    }


def run_stream(
    lines: Iterable[str],
    classifier: FightScorer,
    config: PipelineConfig | None = None,
    sink: IO[str] | None = None,
    strict: bool = False,
    diagnostics: IO[str] | None = None,
) -> StreamSummary:
    """Process a line-delimited frame stream, writing annotated records.

    Malformed or invalid lines are skipped with a diagnostic unless strict,
    in which case processing aborts with the offending line number.
    """
    pipeline = Pipeline(classifier, config)
    summary = StreamSummary()
    started = time.perf_counter()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frame = streamio.parse_frame_line(line)
            issues = [i for i in validate_frame(frame) if i.severity == "error"]
            if issues:
                raise StreamError("; ".join(str(i) for i in issues))
            states, events = pipeline.process_frame(frame)
        except StreamError as exc:
            if strict:
                raise StreamError(f"line {lineno}: {exc}") from exc
            summary.skipped_lines += 1
            if diagnostics is not None:
                diagnostics.write(f"skipped line {lineno}: {exc}\n")
            continue
        summary.frames_processed += 1
        summary.events_emitted += len(events)
        if sink is not None:
            sink.write(streamio.dumps_record(annotated_frame_record(frame, states)))
            sink.write("\n")
            for event in events:
                sink.write(streamio.dumps_record(event_record(event)))
                sink.write("\n")
    summary.elapsed_s = time.perf_counter() - started
    return summary
