"""Two-stage gender -> gender-dependent emotion classification."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ..audio import AudioClip, StftConfig
from ..labels import EMOTIONS, FeatureCode, Gender, Emotion
from .features import clip_features
from .softmax import ModelError, SoftmaxModel, load_model, save_model

TARGETS = ("gender", "male-emotion", "female-emotion")
GENDER_LABELS = tuple(g.value for g in Gender)
EMOTION_LABELS = tuple(e.value for e in EMOTIONS)


@dataclass(frozen=True)
class GemoModelSet:
    gender_model: SoftmaxModel
    male_emotion_model: SoftmaxModel
    female_emotion_model: SoftmaxModel

    def __post_init__(self) -> None:
        if set(self.gender_model.labels) != set(GENDER_LABELS):
            raise ModelError(f"gender model labels must be {GENDER_LABELS}, got {self.gender_model.labels}")
        male, female = self.male_emotion_model.labels, self.female_emotion_model.labels
        if male != female:
            raise ModelError("male and female emotion models must share one label ordering")
        if set(male) != set(EMOTION_LABELS):
            raise ModelError(f"emotion models must cover {EMOTION_LABELS}, got {male}")

    def emotion_model_for(self, gender: Gender) -> tuple[str, SoftmaxModel]:
        if gender is Gender.FEMALE:
            return "female-emotion", self.female_emotion_model
        return "male-emotion", self.male_emotion_model

    def save(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, model in zip(TARGETS, (self.gender_model, self.male_emotion_model, self.female_emotion_model)):
            save_model(model, directory / f"{name}.smx")

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "GemoModelSet":
        directory = Path(directory)
        missing = [t for t in TARGETS if not (directory / f"{t}.smx").is_file()]
        if missing:
            raise ModelError(f"{directory} is missing model files for {missing}")
        return cls(*(load_model(directory / f"{t}.smx") for t in TARGETS))


@dataclass(frozen=True)
class ClassificationTrace:
    gender_probs: np.ndarray
    emotion_model: str  # "male-emotion" | "female-emotion"
    emotion_probs: np.ndarray
    invoked: tuple[str, ...]


def classify_features(models: GemoModelSet, features: np.ndarray) -> tuple[FeatureCode, ClassificationTrace]:
    gender_probs = models.gender_model.predict_proba(features)
    gender = Gender(models.gender_model.labels[int(np.argmax(gender_probs))])
    name, emotion_model = models.emotion_model_for(gender)
    emotion_probs = emotion_model.predict_proba(features)
    emotion = Emotion(emotion_model.labels[int(np.argmax(emotion_probs))])
    trace = ClassificationTrace(gender_probs, name, emotion_probs, ("gender", name))
    return FeatureCode(gender, emotion), trace


def classify_hierarchical(
    models: GemoModelSet, clip: AudioClip, config: StftConfig = StftConfig()
) -> tuple[FeatureCode, ClassificationTrace]:
    """Classify gender, then run only that gender's emotion model."""
    return classify_features(models, clip_features(clip, config))
