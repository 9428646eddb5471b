"""HTTP service holding one model set and preset library in memory."""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException

from .audio import AudioClip, AudioError, read_wav, write_wav
from .gemo.hierarchy import GemoModelSet
from .labels import FeatureCode
from .library import LibraryError, MissingPreset, PresetLibrary, UnknownLanguage, entry_to_dict
from .pipeline import GemoMatcher, MatchResult, Segment, StreamError, run_stream
from .schemas import (
    AudioIn,
    CoverageResponse,
    HealthResponse,
    MatchRequest,
    MatchResponse,
    PresetOut,
    RunRequest,
    RunResponse,
    RunStatsOut,
    SegmentOut,
    ValidateRequest,
)
from .tts import MockTts, TtsBackend, TtsError


@dataclass
class ServiceState:
    lib: PresetLibrary
    models: Optional[GemoModelSet] = None
    backend: TtsBackend = field(default_factory=MockTts)
    backend_name: str = "mock"


def _clip(audio: AudioIn) -> AudioClip:
    try:
        if audio.audio_path is not None:
            return read_wav(audio.audio_path)
        return AudioClip(np.asarray(audio.samples, dtype=np.float64), audio.sample_rate)
    except AudioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _library_http_error(exc: LibraryError) -> HTTPException:
    status = 404 if isinstance(exc, (MissingPreset, UnknownLanguage)) else 422
    return HTTPException(status_code=status, detail=str(exc))


def _match_out(result: MatchResult) -> MatchResponse:
    return MatchResponse(
        code=str(result.code),
        preset=PresetOut(**entry_to_dict(result.preset)),
        gender_probs=result.gender_probs.tolist(),
        emotion_probs=result.emotion_probs.tolist(),
        emotion_model=result.trace.emotion_model if result.trace else None,
        matcher_seconds=result.matcher_seconds,
    )


def _wav_b64(clip: AudioClip) -> str:
    buffer = io.BytesIO()
    write_wav(buffer, clip)
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="pvm", version="0.1.0")
    app.state.pvm = state

    def matcher() -> GemoMatcher:
        if state.models is None:
            raise HTTPException(status_code=503, detail="no classifier models loaded")
        return GemoMatcher(state.models, state.lib)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", models_loaded=state.models is not None,
                              languages=sorted(state.lib.languages), entries=len(state.lib),
                              tts=state.backend_name)

    @app.get("/library/lookup", response_model=PresetOut)
    def lookup(language: str, code: str):
        try:
            parsed = FeatureCode.parse(code)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            return PresetOut(**entry_to_dict(state.lib.lookup(language, parsed)))
        except LibraryError as exc:
            raise _library_http_error(exc) from exc

    @app.post("/library/validate", response_model=CoverageResponse)
    def validate(req: ValidateRequest):
        report = state.lib.validate(req.languages, check_audio=req.check_audio)
        return CoverageResponse(**report.to_dict())

    @app.post("/match", response_model=MatchResponse)
    def match(req: MatchRequest):
        m = matcher()
        try:
            return _match_out(m(_clip(req), req.language))
        except LibraryError as exc:
            raise _library_http_error(exc) from exc

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        m = matcher()
        try:
            segments = [Segment(s.speaker_tag, _clip(s), s.text) for s in req.segments]
            result = run_stream(segments, req.language, req.mode, m, state.backend, keep_going=req.keep_going)
        except StreamError as exc:
            if isinstance(exc.cause, LibraryError):
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            status = 502 if isinstance(exc.cause, TtsError) else 422
            raise HTTPException(status_code=status, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        outputs = []
        for i, (seg, clip, match) in enumerate(zip(segments, result.outputs, result.matches)):
            out = SegmentOut(index=i, speaker_tag=seg.speaker_tag)
            if match is not None:
                out.code, out.preset_id = str(match.code), match.preset.id
            if clip is not None:
                out.sample_rate, out.n_samples = clip.sample_rate, len(clip)
                if req.include_audio:
                    out.wav_base64 = _wav_b64(clip)
            outputs.append(out)
        return RunResponse(stats=RunStatsOut(**result.stats.to_dict()), outputs=outputs)

    return app
