"""Streaming conflict detection from human pose keypoints."""

from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    InsufficientKeypointsError,
    LabelingConflictError,
    ModelFormatError,
    NormalizationError,
    PersistenceError,
    PoseGuardError,
    StratificationError,
    StreamError,
    TrainingError,
)
from .keypoints import (
    COCO_KEYPOINT_NAMES,
    FEATURE_DIM,
    NUM_KEYPOINTS,
    BoundingBox,
    FeatureVector,
    FrameDetections,
    Keypoint,
    PersonDetection,
    Skeleton,
    ValidationIssue,
    bbox_from_skeleton,
    normalize_skeleton,
    validate_frame,
)
from .dataset import (
    IntervalLabelRow,
    LabeledSample,
    SplitSpec,
    expand_interval_labels,
    read_feature_csv,
    read_interval_labels,
    stratified_split,
    write_feature_csv,
)
from .metrics import ConfusionMatrix2, classification_report, confusion_matrix, render_report
from .mlp import MlpConfig, MlpModel, gradient_check, load_mlp, save_mlp, train_mlp
from .pipeline import (
    AlertEvent,
    PersonState,
    Pipeline,
    PipelineConfig,
    StateLabel,
    classify_state,
    run_stream,
    smooth_probability,
)
from .svm import SvmConfig, SvmModel, fit_platt, load_svm, save_svm, train_svm
from .synthgen import ActorSpec, ScenarioSpec, SyntheticStream, generate_dataset, generate_sequence
from .tracking import (
    IouTracker,
    Track,
    TrackerConfig,
    VelocityHint,
    VelocityRuleConfig,
    apply_velocity_rule,
    iou,
    keypoint_velocity,
)

__version__ = "0.1.0"
