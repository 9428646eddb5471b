"""Preset-voice matching (PVM) for regulated speech-to-speech pipelines."""

__version__ = "0.1.0"

from .audio import AudioClip, MelSpectrogram, PitchEstimate, StftConfig
from .labels import Emotion, FeatureCode, Gender, Intensity
from .library import ConsentRecord, PresetLibrary, PresetVoiceEntry

__all__ = [
    "AudioClip", "ConsentRecord", "Emotion", "FeatureCode", "Gender", "Intensity", "MelSpectrogram",
    "PitchEstimate", "PresetLibrary", "PresetVoiceEntry", "StftConfig", "__version__",
]
