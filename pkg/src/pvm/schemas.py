"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class AudioIn(BaseModel):
    """Either a server-side WAV path or inline samples."""

    audio_path: Optional[str] = None
    samples: Optional[List[float]] = None
    sample_rate: Optional[int] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def one_source(self):
        if (self.audio_path is None) == (self.samples is None):
            raise ValueError("give exactly one of audio_path or samples")
        if self.samples is not None and self.sample_rate is None:
            raise ValueError("inline samples need sample_rate")
        return self


class MatchRequest(AudioIn):
    language: str


class ConsentOut(BaseModel):
    speaker_id: str
    consent_date: str
    scope: str
    revoked: bool


class PresetOut(BaseModel):
    id: str
    language: str
    code: str
    audio_path: str
    consent: ConsentOut
    quality_score: Optional[float] = None


class MatchResponse(BaseModel):
    code: str
    preset: PresetOut
    gender_probs: List[float]
    emotion_probs: List[float]
    emotion_model: Optional[str] = None
    matcher_seconds: float


class ValidateRequest(BaseModel):
    languages: List[str]
    check_audio: bool = True


class CoverageResponse(BaseModel):
    ok: bool
    missing: dict[str, List[str]]
    missing_audio: List[str]


class SegmentIn(AudioIn):
    speaker_tag: str
    text: str = Field(min_length=1)


class RunRequest(BaseModel):
    language: str
    mode: str = "pvm-cached"
    segments: List[SegmentIn] = Field(min_length=1)
    keep_going: bool = False
    include_audio: bool = False


class SegmentOut(BaseModel):
    index: int
    speaker_tag: str
    code: Optional[str] = None
    preset_id: Optional[str] = None
    sample_rate: Optional[int] = None
    n_samples: Optional[int] = None
    wav_base64: Optional[str] = None


class RunStatsOut(BaseModel):
    mode: str
    segments: int
    aux_runs: int
    tts_runs: int
    speaker_changes: int
    aux_seconds: float
    tts_seconds: float
    total_seconds: float
    errors: List[dict]
    disagreements: List[dict]


class RunResponse(BaseModel):
    stats: RunStatsOut
    outputs: List[SegmentOut]


class HealthResponse(BaseModel):
    status: str
    models_loaded: bool
    languages: List[str]
    entries: int
    tts: str
