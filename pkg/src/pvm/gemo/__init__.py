"""Gender/emotion similarity-feature extraction (GEMO-Match classifiers)."""

from .evaluation import EvalReport, confusion_report, evaluate
from .features import clip_features, extract_features, feature_dim
from .hierarchy import (
    EMOTION_LABELS,
    GENDER_LABELS,
    TARGETS,
    ClassificationTrace,
    GemoModelSet,
    classify_features,
    classify_hierarchical,
)
from .softmax import (
    Gradient,
    ModelError,
    SoftmaxModel,
    TrainConfig,
    TrainingError,
    TrainResult,
    gradient,
    load_model,
    predict,
    save_model,
    split_dataset,
    train,
)

__all__ = [
    "EMOTION_LABELS", "GENDER_LABELS", "TARGETS", "ClassificationTrace", "EvalReport", "GemoModelSet",
    "Gradient", "ModelError", "SoftmaxModel", "TrainConfig", "TrainResult", "TrainingError",
    "classify_features", "classify_hierarchical", "clip_features", "confusion_report", "evaluate",
    "extract_features", "feature_dim", "gradient", "load_model", "predict", "save_model",
    "split_dataset", "train",
]
