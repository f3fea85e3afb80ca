"""Canonical keypoint stream format: one JSON frame record per line, UTF-8.

Format version 1, documented in docs/formats.md. Input records carry frame
metadata and per-person boxes plus flat [x, y, confidence] x 17 keypoints;
annotated output records mirror the input and add per-person track/state
fields, with state-transition events as a second record type.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator

from .errors import StreamError
from .keypoints import (
    NUM_KEYPOINTS,
    BoundingBox,
    FrameDetections,
    Keypoint,
    PersonDetection,
    Skeleton,
)

STREAM_FORMAT_VERSION = 1


def person_to_record(person: PersonDetection) -> dict:
    flat: list[float] = []
    for kp in person.skeleton.keypoints:
        flat.extend((kp.x, kp.y, kp.confidence))
    return {
        "bbox": {
            "x": person.bbox.x_min,
            "y": person.bbox.y_min,
            "w": person.bbox.width,
            "h": person.bbox.height,
        },
        "keypoints": flat,
        "detection_score": person.detection_score,
    }


def frame_to_record(frame: FrameDetections) -> dict:
    return {
        "frame_index": frame.frame_index,
        "timestamp_s": frame.timestamp_s,
        "image_width": frame.image_width,
        "image_height": frame.image_height,
        "persons": [person_to_record(p) for p in frame.persons],
    }


def person_from_record(record: dict) -> PersonDetection:
    try:
        bbox = record["bbox"]
        flat = record["keypoints"]
        score = float(record.get("detection_score", 1.0))
        if len(flat) != 3 * NUM_KEYPOINTS:
            raise StreamError(f"expected {3 * NUM_KEYPOINTS} keypoint values, got {len(flat)}")
        kps = tuple(
            Keypoint(float(flat[3 * i]), float(flat[3 * i + 1]), float(flat[3 * i + 2]))
            for i in range(NUM_KEYPOINTS)
        )
        return PersonDetection(
            bbox=BoundingBox(float(bbox["x"]), float(bbox["y"]), float(bbox["w"]), float(bbox["h"])),
            skeleton=Skeleton(kps),
            detection_score=score,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StreamError(f"malformed person record: {exc}") from exc


def frame_from_record(record: dict) -> FrameDetections:
    try:
        return FrameDetections(
            frame_index=int(record["frame_index"]),
            timestamp_s=float(record["timestamp_s"]),
            image_width=int(record["image_width"]),
            image_height=int(record["image_height"]),
            persons=tuple(person_from_record(p) for p in record["persons"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StreamError(f"malformed frame record: {exc}") from exc


def dumps_record(record: dict) -> str:
    # Compact separators keep output byte-identical across runs.
    return json.dumps(record, separators=(",", ":"))


def write_frames(frames: Iterable[FrameDetections], fp: IO[str]) -> int:
    count = 0
    for frame in frames:
        fp.write(dumps_record(frame_to_record(frame)))
        fp.write("\n")
        count += 1
    return count


def parse_frame_line(line: str) -> FrameDetections:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StreamError(f"invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise StreamError("frame record is not an object")
    return frame_from_record(record)


def read_frames(fp: IO[str]) -> Iterator[FrameDetections]:
    """Yield frames, raising StreamError with the line number on bad input."""
    for lineno, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            yield parse_frame_line(line)
        except StreamError as exc:
            raise StreamError(f"line {lineno}: {exc}") from exc
