"""Source decoding + pose estimation -> keypoint stream records."""

from __future__ import annotations

import json
from typing import IO, Iterator

from .backend import detections_to_person_records, make_backend
from .config import AdapterConfig
from .sources import open_source


def extract_records(config: AdapterConfig) -> Iterator[dict]:
    """One schema-valid frame record per decoded frame, in order.

    Frames without detections still produce a record with empty persons.
    """
    backend = make_backend(config)
    for index, timestamp_s, image in open_source(config.source, config.fps):
        if config.max_frames is not None and index >= config.max_frames:
            break
        raw = backend.detect(image)
        yield {
            "frame_index": index,
            "timestamp_s": timestamp_s,
            "image_width": int(image.shape[1]),
            "image_height": int(image.shape[0]),
            "persons": detections_to_person_records(raw, config.min_score),
        }


def extract(config: AdapterConfig, sink: IO[str]) -> int:
    """Write the stream to sink; returns the number of frames emitted."""
    count = 0
    for record in extract_records(config):
        sink.write(json.dumps(record, separators=(",", ":")))
        sink.write("\n")
        count += 1
    return count
