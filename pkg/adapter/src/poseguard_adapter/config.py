from __future__ import annotations

from dataclasses import dataclass

from .errors import AdapterError

MODEL_COCO = "keypointrcnn"
MODEL_RANDOM = "keypointrcnn-random"  # seeded random init; smoke tests only
KNOWN_MODELS = (MODEL_COCO, MODEL_RANDOM)


@dataclass(frozen=True)
class AdapterConfig:
    """What to read, which pose model to run, and what to keep.

    source is a video file path, a directory of image frames, or a camera
    index given as a digit string. fps is used to synthesize timestamps for
    sources without a clock (image directories, cameras without one).
    """

    source: str
    model: str = MODEL_COCO
    min_score: float = 0.5
    out: str = "-"
    fps: float = 30.0
    seed: int = 0
    max_frames: int | None = None

    def __post_init__(self) -> None:
        if self.model not in KNOWN_MODELS:
            raise AdapterError(f"unknown model {self.model!r}; choose from {KNOWN_MODELS}")
        if not (0.0 <= self.min_score <= 1.0):
            raise AdapterError(f"min_score must lie in [0, 1], got {self.min_score}")
        if not self.fps > 0:
            raise AdapterError(f"fps must be positive, got {self.fps}")
        if self.max_frames is not None and self.max_frames < 0:
            raise AdapterError(f"max_frames must be >= 0, got {self.max_frames}")
