"""Frame sources: video files, camera indices, and image directories.

Every source yields (frame_index, timestamp_s, rgb_image) with monotone
indices and non-decreasing timestamps. Video timestamps come from the
container clock where available, otherwise from the configured fps.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import cv2
import numpy as np

from .errors import AdapterError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

Frame = tuple[int, float, np.ndarray]


def _iter_capture(capture: cv2.VideoCapture, fps: float, use_clock: bool) -> Iterator[Frame]:
    index = 0
    last_ts = -1.0
    try:
        while True:
            ok, frame_bgr = capture.read()
            if not ok:
                break
            ts = capture.get(cv2.CAP_PROP_POS_MSEC) / 1000.0 if use_clock else 0.0
            if not use_clock or (ts <= 0.0 and index > 0) or ts < last_ts:
                ts = index / fps
            ts = max(ts, last_ts)
            last_ts = ts
            yield index, ts, cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
            index += 1
    finally:
        capture.release()


def _iter_image_dir(directory: Path, fps: float) -> Iterator[Frame]:
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    for index, path in enumerate(paths):
        image = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if image is None:
            raise AdapterError(f"cannot decode image {path}")
        yield index, index / fps, cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def open_source(source: str, fps: float) -> Iterator[Frame]:
    if source.isdigit():
        capture = cv2.VideoCapture(int(source))
        if not capture.isOpened():
            raise AdapterError(f"cannot open camera index {source}")
        # cameras rarely report a usable clock; synthesize from fps
        return _iter_capture(capture, fps, use_clock=False)

    path = Path(source)
    if path.is_dir():
        return _iter_image_dir(path, fps)
    if not path.exists():
        raise AdapterError(f"source {source} does not exist")
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise AdapterError(f"cannot open video {source}")
    reported = capture.get(cv2.CAP_PROP_FPS)
    effective = reported if reported and reported > 0 else fps
    return _iter_capture(capture, effective, use_clock=True)
