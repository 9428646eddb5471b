"""Label vocabularies shared across curation, classification and the library."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Gender(str, Enum):
    MALE = "Male"
    FEMALE = "Female"


class Emotion(str, Enum):
    HAPPY = "Happy"
    ANGRY = "Angry"
    SAD = "Sad"
    DISGUST = "Disgust"
    NEUTRAL = "Neutral"


class Intensity(str, Enum):
    NORMAL = "Normal"
    STRONG = "Strong"
    UNSPECIFIED = "Unspecified"


GENDERS: tuple[Gender, ...] = tuple(Gender)
EMOTIONS: tuple[Emotion, ...] = tuple(Emotion)

_GENDER_ALIASES = {
    "male": Gender.MALE,
    "m": Gender.MALE,
    "man": Gender.MALE,
    "female": Gender.FEMALE,
    "f": Gender.FEMALE,
    "woman": Gender.FEMALE,
}

# calm and neutral collapse onto Neutral; abbreviations cover CREMA-D / SAVEE / TESS naming.
_EMOTION_ALIASES = {
    "happy": Emotion.HAPPY,
    "hap": Emotion.HAPPY,
    "h": Emotion.HAPPY,
    "happiness": Emotion.HAPPY,
    "angry": Emotion.ANGRY,
    "ang": Emotion.ANGRY,
    "a": Emotion.ANGRY,
    "anger": Emotion.ANGRY,
    "sad": Emotion.SAD,
    "sa": Emotion.SAD,
    "sadness": Emotion.SAD,
    "disgust": Emotion.DISGUST,
    "dis": Emotion.DISGUST,
    "d": Emotion.DISGUST,
    "neutral": Emotion.NEUTRAL,
    "neu": Emotion.NEUTRAL,
    "n": Emotion.NEUTRAL,
    "calm": Emotion.NEUTRAL,
}

_INTENSITY_ALIASES = {
    "normal": Intensity.NORMAL,
    "strong": Intensity.STRONG,
    "": Intensity.UNSPECIFIED,
    "unspecified": Intensity.UNSPECIFIED,
}


def parse_gender(text: str) -> Gender:
    try:
        return _GENDER_ALIASES[text.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown gender {text!r}") from None


def parse_emotion(text: str) -> Emotion:
    try:
        return _EMOTION_ALIASES[text.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown emotion {text!r}") from None


def parse_intensity(text: str) -> Intensity:
    try:
        return _INTENSITY_ALIASES[text.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown intensity {text!r}") from None


@dataclass(frozen=True, order=True)
class FeatureCode:
    """A (gender, emotion) pair, written canonically as ``Female-Sad``."""

    gender: Gender
    emotion: Emotion

    def __str__(self) -> str:
        return f"{self.gender.value}-{self.emotion.value}"

    @classmethod
    def parse(cls, text: str) -> "FeatureCode":
        parts = [p.strip() for p in text.split("-")]
        if len(parts) != 2:
            raise ValueError(f"feature code must look like 'Female-Sad', got {text!r}")
        gender = Gender(parts[0]) if parts[0] in Gender._value2member_map_ else None
        emotion = Emotion(parts[1]) if parts[1] in Emotion._value2member_map_ else None
        if gender is None:
            raise ValueError(f"unknown gender {parts[0]!r} in feature code {text!r}")
        if emotion is None:
            raise ValueError(f"unknown emotion {parts[1]!r} in feature code {text!r}")
        return cls(gender, emotion)


ALL_CODES: tuple[FeatureCode, ...] = tuple(FeatureCode(g, e) for g in GENDERS for e in EMOTIONS)
