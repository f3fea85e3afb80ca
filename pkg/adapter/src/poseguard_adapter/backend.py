"""Pose backend and conversion to stream-format person records.

The backend is torchvision's Keypoint R-CNN, a top-down estimator emitting
the 17 COCO keypoints. Any backend producing (boxes, scores, keypoints,
keypoint_scores) can replace it; the engine only sees the stream format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .config import MODEL_COCO, MODEL_RANDOM, AdapterConfig
from .errors import AdapterError

NUM_KEYPOINTS = 17


@dataclass(frozen=True)
class RawDetections:
    """One frame's backend output, as plain arrays."""

    boxes_xyxy: np.ndarray  # (n, 4)
    scores: np.ndarray  # (n,)
    keypoints: np.ndarray  # (n, 17, 3): x, y, visibility
    keypoint_scores: np.ndarray  # (n, 17): unbounded heatmap logits


class KeypointRcnnBackend:
    def __init__(self, model_id: str, seed: int = 0):
        from torchvision.models.detection import keypointrcnn_resnet50_fpn

        if model_id == MODEL_COCO:
            try:
                from torchvision.models.detection import KeypointRCNN_ResNet50_FPN_Weights

                self._model = keypointrcnn_resnet50_fpn(
                    weights=KeypointRCNN_ResNet50_FPN_Weights.COCO_V1
                )
            except Exception as exc:  # weight download/load failure
                raise AdapterError(f"cannot load pretrained pose model: {exc}") from exc
        elif model_id == MODEL_RANDOM:
            torch.manual_seed(seed)
            self._model = keypointrcnn_resnet50_fpn(
                weights=None, weights_backbone=None, num_classes=2, num_keypoints=NUM_KEYPOINTS
            )
        else:
            raise AdapterError(f"unknown model {model_id!r}")
        self._model.eval()

    @torch.no_grad()
    def detect(self, image_rgb: np.ndarray) -> RawDetections:
        tensor = torch.from_numpy(np.ascontiguousarray(image_rgb)).permute(2, 0, 1).float() / 255.0
        output = self._model([tensor])[0]
        return RawDetections(
            boxes_xyxy=output["boxes"].numpy(),
            scores=output["scores"].numpy(),
            keypoints=output["keypoints"].numpy(),
            keypoint_scores=output["keypoints_scores"].numpy(),
        )


def make_backend(config: AdapterConfig) -> KeypointRcnnBackend:
    return KeypointRcnnBackend(config.model, seed=config.seed)


def _sigmoid(value: float) -> float:
    if value >= 0:
        return 1.0 / (1.0 + math.exp(-value))
    e = math.exp(value)
    return e / (1.0 + e)


def detections_to_person_records(raw: RawDetections, min_score: float) -> list[dict]:
    """Convert backend output to schema person records.

    Detections below min_score or with non-positive box extent are dropped.
    Keypoint heatmap logits become [0, 1] confidences through a sigmoid;
    non-finite keypoints are marked undetected (confidence 0).
    """
    persons: list[dict] = []
    for i in range(len(raw.scores)):
        score = float(raw.scores[i])
        if not math.isfinite(score) or score < min_score:
            continue
        x1, y1, x2, y2 = (float(v) for v in raw.boxes_xyxy[i])
        width, height = x2 - x1, y2 - y1
        if not (width > 0 and height > 0 and all(math.isfinite(v) for v in (x1, y1, width, height))):
            continue
        flat: list[float] = []
        for k in range(NUM_KEYPOINTS):
            x, y = float(raw.keypoints[i, k, 0]), float(raw.keypoints[i, k, 1])
            confidence = _sigmoid(float(raw.keypoint_scores[i, k]))
            if not (math.isfinite(x) and math.isfinite(y)):
                x, y, confidence = 0.0, 0.0, 0.0
            flat.extend((x, y, confidence))
        persons.append(
            {
                "bbox": {"x": x1, "y": y1, "w": width, "h": height},
                "keypoints": flat,
                "detection_score": min(max(score, 0.0), 1.0),
            }
        )
    return persons
