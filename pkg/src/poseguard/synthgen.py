"""Deterministic synthetic skeleton streams and labeled datasets.

Actors are driven by parameterized sinusoidal joint trajectories: fight
actions (punch, kick, push) put wrists or ankles into large fast excursions
at raised positions, normal actions (walk, stand, hug, push-trolley,
kick-ball) keep limbs slower and lower. Kinematic realism is a non-goal;
class separability, velocity ordering, and seed determinism are the goals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledSample
from .errors import ConfigError
from .keypoints import (
    FrameDetections,
    Keypoint,
    PersonDetection,
    Skeleton,
    bbox_from_skeleton,
    normalize_skeleton,
)

NORMAL_ACTIONS = ("walk", "stand", "hug", "push-trolley", "kick-ball")
FIGHT_ACTIONS = ("punch", "kick", "push")
ALL_ACTIONS = NORMAL_ACTIONS + FIGHT_ACTIONS

IMAGE_WIDTH = 1280
IMAGE_HEIGHT = 720
_BBOX_MARGIN = 0.04
_DETECTION_SCORE = 0.93

# Keypoint indices (COCO order).
_NOSE, _LEYE, _REYE, _LEAR, _REAR = 0, 1, 2, 3, 4
_LSHO, _RSHO, _LELB, _RELB, _LWRI, _RWRI = 5, 6, 7, 8, 9, 10
_LHIP, _RHIP, _LKNE, _RKNE, _LANK, _RANK = 11, 12, 13, 14, 15, 16

# Standing pose in body-height units; origin at hip center, +x is the facing
# direction, +y points down as in image coordinates.
_BASE_POSE = np.array(
    [
        (0.00, -0.46),  # nose
        (0.03, -0.49),  # left eye
        (-0.03, -0.49),  # right eye
        (0.05, -0.47),  # left ear
        (-0.05, -0.47),  # right ear
        (0.11, -0.30),  # left shoulder
        (-0.11, -0.30),  # right shoulder
        (0.13, -0.12),  # left elbow
        (-0.13, -0.12),  # right elbow
        (0.14, 0.06),  # left wrist
        (-0.14, 0.06),  # right wrist
        (0.08, 0.00),  # left hip
        (-0.08, 0.00),  # right hip
        (0.09, 0.24),  # left knee
        (-0.09, 0.24),  # right knee
        (0.09, 0.50),  # left ankle
        (-0.09, 0.50),  # right ankle
    ]
)


def action_label(action: str) -> int:
    if action in FIGHT_ACTIONS:
        return 1
    if action in NORMAL_ACTIONS:
        return 0
    raise ConfigError(f"unknown action {action!r}; choose from {ALL_ACTIONS}")


@dataclass(frozen=True)
class ActorSpec:
    action: str
    start_position: tuple[float, float] = (640.0, 400.0)
    heading: float = 1.0
    label: int | None = None  # derived from action; a mismatch is rejected
    body_height_px: float = 260.0

    def __post_init__(self) -> None:
        expected = action_label(self.action)
        if self.label is not None and self.label != expected:
            raise ConfigError(
                f"action {self.action!r} implies label {expected}, got {self.label}"
            )
        object.__setattr__(self, "label", expected)
        if self.heading not in (1.0, -1.0):
            raise ConfigError(f"heading must be +1 or -1, got {self.heading}")
        if not self.body_height_px > 0:
            raise ConfigError("body_height_px must be positive")


@dataclass(frozen=True)
class ScenarioSpec:
    duration_frames: int
    actors: tuple[ActorSpec, ...]
    fps: float = 30.0
    noise_sigma: float = 0.0  # gaussian jitter in body-height units
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "actors", tuple(self.actors))
        if self.duration_frames < 1:
            raise ConfigError("duration_frames must be positive")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not self.actors:
            raise ConfigError("scenario needs at least one actor")


@dataclass(frozen=True)
class SyntheticStream:
    frames: tuple[FrameDetections, ...]
    ground_truth: tuple[tuple[int, ...], ...]  # per frame, per actor


def _walk_legs(pts: np.ndarray, t: float, phase: float, freq: float, amp: float) -> None:
    s = math.sin(2.0 * math.pi * freq * t + phase)
    pts[_LANK, 0] += amp * s
    pts[_RANK, 0] -= amp * s
    pts[_LKNE, 0] += 0.5 * amp * s
    pts[_RKNE, 0] -= 0.5 * amp * s
    pts[_LANK, 1] -= 0.02 * abs(s)
    pts[_RANK, 1] -= 0.02 * abs(1.0 - abs(s))


def _pose_at(action: str, t: float, phase: float) -> tuple[np.ndarray, float]:
    """Keypoints in body units plus forward drift, before mirror/scale."""
    pts = _BASE_POSE.copy()
    drift = 0.0

    if action == "stand":
        pass  # zero dynamics: the base pose, frame after frame

    elif action == "walk":
        _walk_legs(pts, t, phase, freq=1.3, amp=0.13)
        s = math.sin(2.0 * math.pi * 1.3 * t + phase)
        pts[_LWRI, 0] -= 0.06 * s
        pts[_RWRI, 0] += 0.06 * s
        pts[_LELB, 0] -= 0.03 * s
        pts[_RELB, 0] += 0.03 * s
        pts[:, 1] += 0.012 * math.sin(4.0 * math.pi * 1.3 * t + phase)
        drift = 0.45 * math.sin(2.0 * math.pi * 0.09 * t + phase)

    elif action == "hug":
        # both arms wrapped forward at chest height, nearly static
        sway = 0.012 * math.sin(2.0 * math.pi * 0.35 * t + phase)
        pts[_LWRI] = (0.22 + sway, -0.22)
        pts[_RWRI] = (0.18 + sway, -0.28)
        pts[_LELB] = (0.17 + 0.5 * sway, -0.18)
        pts[_RELB] = (0.10 + 0.5 * sway, -0.20)
        pts[:, 0] += 0.004 * math.sin(2.0 * math.pi * 0.3 * t + phase)

    elif action == "push-trolley":
        # hands locked on a handle at waist height while walking slowly
        _walk_legs(pts, t, phase, freq=0.9, amp=0.07)
        pts[_LWRI] = (0.26, -0.10)
        pts[_RWRI] = (0.22, -0.12)
        pts[_LELB] = (0.19, -0.14)
        pts[_RELB] = (0.15, -0.16)
        drift = 0.35 * math.sin(2.0 * math.pi * 0.08 * t + phase)

    elif action == "kick-ball":
        # gentle low pendulum swings of one leg
        s = math.sin(2.0 * math.pi * 0.55 * t + phase)
        pts[_LANK, 0] += 0.18 * s
        pts[_LANK, 1] -= 0.10 * max(0.0, s)
        pts[_LKNE, 0] += 0.10 * s
        pts[_LKNE, 1] -= 0.05 * max(0.0, s)
        pts[_LWRI, 0] -= 0.02 * s
        pts[_RWRI, 0] += 0.02 * s

    elif action == "punch":
        # alternating fast jabs at shoulder height with a raised guard
        u = 0.5 * (1.0 + math.sin(2.0 * math.pi * 3.0 * t + phase))
        v = 0.5 * (1.0 + math.sin(2.0 * math.pi * 3.0 * t + phase + math.pi))
        pts[_LWRI] = (0.24 + 0.30 * u, -0.32)
        pts[_LELB] = (0.16 + 0.16 * u, -0.26)
        pts[_RWRI] = (0.10 + 0.18 * v, -0.34)
        pts[_RELB] = (0.02 + 0.10 * v, -0.26)
        lean = 0.05 * u
        for j in (_NOSE, _LEYE, _REYE, _LEAR, _REAR, _LSHO, _RSHO):
            pts[j, 0] += lean
        pts[_LANK, 0] += 0.10
        pts[_RANK, 0] -= 0.10
        bounce = 0.02 * math.sin(2.0 * math.pi * 3.0 * t + phase)
        pts[_LANK, 1] += bounce
        pts[_RANK, 1] -= bounce

    elif action == "kick":
        # high fast strikes of the lead leg, arms up in guard
        u = max(0.0, math.sin(2.0 * math.pi * 2.4 * t + phase))
        pts[_LANK] = (0.09 + 0.15 + 0.30 * u, 0.50 - 0.05 - 0.42 * u)
        pts[_LKNE] = (0.09 + 0.10 + 0.12 * u, 0.24 - 0.28 * u)
        pump = 0.05 * math.sin(2.0 * math.pi * 2.4 * t + phase)
        pts[_LWRI] = (0.10 + pump, -0.28)
        pts[_RWRI] = (0.00 - pump, -0.30)
        pts[_LELB] = (0.12, -0.22)
        pts[_RELB] = (-0.04, -0.24)
        hop = 0.03 * max(0.0, math.sin(2.0 * math.pi * 2.4 * t + phase + 0.8))
        pts[_RANK, 1] -= hop

    elif action == "push":
        # fast shoves at chest height, arms slightly out of phase, forward lean
        u = 0.5 * (1.0 + math.sin(2.0 * math.pi * 3.0 * t + phase))
        u2 = 0.5 * (1.0 + math.sin(2.0 * math.pi * 3.0 * t + phase + 0.9))
        pts[_LWRI] = (0.18 + 0.34 * u, -0.26)
        pts[_RWRI] = (0.14 + 0.34 * u2, -0.28)
        pts[_LELB] = (0.12 + 0.20 * u, -0.22)
        pts[_RELB] = (0.08 + 0.20 * u2, -0.24)
        lean = 0.06 * u
        for j in (_NOSE, _LEYE, _REYE, _LEAR, _REAR, _LSHO, _RSHO):
            pts[j, 0] += lean
        pts[_LANK, 0] += 0.12
        pts[_RANK, 0] -= 0.08
        bounce = 0.03 * math.sin(2.0 * math.pi * 3.0 * t + phase)
        pts[_LANK, 1] += bounce
        pts[_RANK, 1] -= 0.5 * bounce

    else:
        raise ConfigError(f"unknown action {action!r}")

    return pts, drift


def generate_sequence(spec: ScenarioSpec) -> SyntheticStream:
    """Render a scenario to schema-valid frames with per-actor ground truth."""
    actor_seeds = np.random.SeedSequence(spec.seed).spawn(len(spec.actors))
    actor_rngs = [np.random.default_rng(s) for s in actor_seeds]
    phases = [rng.uniform(0.0, 2.0 * math.pi) for rng in actor_rngs]

    frames: list[FrameDetections] = []
    truth: list[tuple[int, ...]] = []
    for frame_index in range(spec.duration_frames):
        t = frame_index / spec.fps
        persons = []
        labels = []
        for actor, rng, phase in zip(spec.actors, actor_rngs, phases):
            pts, drift = _pose_at(actor.action, t, phase)
            pts = pts.copy()
            pts[:, 0] *= actor.heading
            pts *= actor.body_height_px
            pts[:, 0] += actor.start_position[0] + actor.heading * drift * actor.body_height_px
            pts[:, 1] += actor.start_position[1]
            if spec.noise_sigma > 0.0:
                pts = pts + rng.normal(0.0, spec.noise_sigma * actor.body_height_px, size=pts.shape)
            skeleton = Skeleton(tuple(Keypoint(float(x), float(y), 1.0) for x, y in pts))
            bbox = bbox_from_skeleton(skeleton, margin_fraction=_BBOX_MARGIN)
            persons.append(PersonDetection(bbox=bbox, skeleton=skeleton, detection_score=_DETECTION_SCORE))
            labels.append(actor.label)
        frames.append(
            FrameDetections(
                frame_index=frame_index,
                timestamp_s=frame_index / spec.fps,
                image_width=IMAGE_WIDTH,
                image_height=IMAGE_HEIGHT,
                persons=tuple(persons),
            )
        )
        truth.append(tuple(labels))
    return SyntheticStream(frames=tuple(frames), ground_truth=tuple(truth))


def _allocate(total: int, actions: tuple[str, ...]) -> list[tuple[str, int]]:
    base, extra = divmod(total, len(actions))
    return [(action, base + (1 if i < extra else 0)) for i, action in enumerate(actions)]


def generate_dataset(
    n_normal: int, n_fight: int, seed: int = 0, noise_sigma: float = 0.015
) -> list[LabeledSample]:
    """Labeled feature vectors balanced across action types within each class."""
    if n_normal < 1 or n_fight < 1:
        raise ConfigError("both class counts must be >= 1")
    samples: list[LabeledSample] = []
    plan = _allocate(n_normal, NORMAL_ACTIONS) + _allocate(n_fight, FIGHT_ACTIONS)
    action_seeds = np.random.SeedSequence(seed).spawn(len(plan))
    for (action, count), action_seed in zip(plan, action_seeds):
        if count == 0:
            continue
        sub_seed = int(action_seed.generate_state(1)[0])
        stream = generate_sequence(
            ScenarioSpec(
                duration_frames=count,
                actors=(ActorSpec(action=action),),
                noise_sigma=noise_sigma,
                seed=sub_seed,
            )
        )
        label = action_label(action)
        for frame in stream.frames:
            person = frame.persons[0]
            features = normalize_skeleton(person.skeleton, person.bbox)
            samples.append(
                LabeledSample(
                    features=features,
                    label=label,
                    provenance=f"synthetic:{action}:{frame.frame_index}",
                )
            )
    return samples
