"""End-to-end preset-voice matching: match an input voice to a preset, then
synthesise target-language speech with it, re-matching only on speaker change."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .audio import AudioClip, StftConfig, read_wav, write_wav
from .gemo.hierarchy import ClassificationTrace, GemoModelSet, classify_hierarchical
from .labels import FeatureCode
from .library import PresetLibrary, PresetVoiceEntry
from .tts import TtsBackend

log = logging.getLogger(__name__)

PVM_CACHED = "pvm-cached"
BASELINE = "per-utterance-postprocess"
MODES = (PVM_CACHED, BASELINE)
_MODE_ALIASES = {"baseline": BASELINE, "pvm": PVM_CACHED}


def normalize_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES} or 'baseline'")
    return mode


@dataclass(frozen=True, eq=False)
class Segment:
    speaker_tag: str
    audio: AudioClip
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("segment text must be non-empty")
        if len(self.audio) == 0:
            raise ValueError("segment audio is empty")


@dataclass(frozen=True, eq=False)
class MatchResult:
    code: FeatureCode
    preset: PresetVoiceEntry
    gender_probs: np.ndarray
    emotion_probs: np.ndarray
    matcher_seconds: float = 0.0
    trace: Optional[ClassificationTrace] = None

    def same_outcome(self, other: "MatchResult") -> bool:
        """Equal apart from timing."""
        return (self.code == other.code and self.preset == other.preset
                and np.array_equal(self.gender_probs, other.gender_probs)
                and np.array_equal(self.emotion_probs, other.emotion_probs))

    def to_dict(self) -> dict:
        return {
            "code": str(self.code),
            "preset_id": self.preset.id,
            "gender_probs": self.gender_probs.tolist(),
            "emotion_probs": self.emotion_probs.tolist(),
            "matcher_seconds": self.matcher_seconds,
            "emotion_model": self.trace.emotion_model if self.trace else None,
        }


Matcher = Callable[[AudioClip, str], MatchResult]


def match_voice(
    models: GemoModelSet,
    lib: PresetLibrary,
    clip: AudioClip,
    target_language: str,
    config: StftConfig = StftConfig(),
) -> MatchResult:
    """Classify the input voice and fetch the preset for (target_language, code).

    MissingPreset / UnknownLanguage from the library propagate unchanged.
    """
    start = time.perf_counter()
    code, trace = classify_hierarchical(models, clip, config)
    preset = lib.lookup(target_language, code)
    elapsed = time.perf_counter() - start
    return MatchResult(code, preset, trace.gender_probs, trace.emotion_probs, elapsed, trace)


class GemoMatcher:
    """Callable matcher bound to one model set and library."""

    def __init__(self, models: GemoModelSet, lib: PresetLibrary, config: StftConfig = StftConfig()) -> None:
        self.models = models
        self.lib = lib
        self.config = config

    def __call__(self, clip: AudioClip, target_language: str) -> MatchResult:
        return match_voice(self.models, self.lib, clip, target_language, self.config)


# --------------------------------------------------------------------------- streams


@dataclass
class SegmentTiming:
    index: int
    aux_start: Optional[float] = None  # None when the cached match was reused
    aux_end: Optional[float] = None
    tts_start: Optional[float] = None
    tts_end: Optional[float] = None


@dataclass
class RunStats:
    mode: str
    segments: int = 0
    aux_runs: int = 0
    tts_runs: int = 0
    speaker_changes: int = 0
    aux_seconds: float = 0.0
    tts_seconds: float = 0.0
    total_seconds: float = 0.0
    timings: list[SegmentTiming] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    # re-matches of a returning speaker that disagree with that speaker's earlier match
    disagreements: list[dict] = field(default_factory=list)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "mode": self.mode,
            "segments": self.segments,
            "aux_runs": self.aux_runs,
            "tts_runs": self.tts_runs,
            "speaker_changes": self.speaker_changes,
            "aux_seconds": self.aux_seconds,
            "tts_seconds": self.tts_seconds,
            "total_seconds": self.total_seconds,
            "errors": self.errors,
            "disagreements": self.disagreements,
        }
        if include_timings:
            out["timings"] = [t.__dict__ for t in self.timings]
        return out


@dataclass
class StreamResult:
    outputs: list[Optional[AudioClip]]
    stats: RunStats
    matches: list[Optional[MatchResult]]


class StreamError(Exception):
    def __init__(self, index: int, stage: str, cause: Exception) -> None:
        super().__init__(f"segment {index} failed during {stage}: {cause}")
        self.index = index
        self.stage = stage
        self.cause = cause


def count_speaker_changes(tags: Sequence[str]) -> int:
    return sum(1 for a, b in zip(tags, tags[1:]) if a != b)


def run_stream(
    segments: Sequence[Segment],
    target_language: str,
    mode: str,
    matcher: Matcher,
    backend: TtsBackend,
    keep_going: bool = False,
    clock: Callable[[], float] = time.perf_counter,
) -> StreamResult:
    """Process segments in order.

    In ``pvm-cached`` mode the matcher runs for the first segment and whenever
    the speaker tag differs from the previous segment's; otherwise the previous
    MatchResult object is reused. In ``per-utterance-postprocess`` mode the
    auxiliary stage runs once per output. TTS runs once per segment in both.

    The first failure raises StreamError unless ``keep_going`` is set, in which
    case the failure is recorded in ``stats.errors`` and its output is None.
    """
    mode = normalize_mode(mode)
    if not segments:
        raise ValueError("stream is empty")
    stats = RunStats(mode, segments=len(segments),
                     speaker_changes=count_speaker_changes([s.speaker_tag for s in segments]))
    outputs: list[Optional[AudioClip]] = []
    matches: list[Optional[MatchResult]] = []
    cached: Optional[MatchResult] = None
    cached_tag: Optional[str] = None
    last_by_speaker: dict[str, MatchResult] = {}

    started = clock()
    for i, seg in enumerate(segments):
        timing = SegmentTiming(i)
        stats.timings.append(timing)
        stage = "aux"
        try:
            if mode == BASELINE or cached is None or seg.speaker_tag != cached_tag:
                cached = None
                stats.aux_runs += 1
                timing.aux_start = clock()
                result = matcher(seg.audio, target_language)
                timing.aux_end = clock()
                stats.aux_seconds += timing.aux_end - timing.aux_start
                previous = last_by_speaker.get(seg.speaker_tag)
                if previous is not None and previous.code != result.code:
                    stats.disagreements.append({
                        "segment": i, "speaker": seg.speaker_tag,
                        "previous": str(previous.code), "current": str(result.code),
                        "previous_preset": previous.preset.id, "current_preset": result.preset.id,
                    })
                last_by_speaker[seg.speaker_tag] = result
                cached, cached_tag = result, seg.speaker_tag
            match = cached
            stage = "tts"
            stats.tts_runs += 1
            timing.tts_start = clock()
            audio = backend.synthesize(match.preset, seg.text, target_language)
            timing.tts_end = clock()
            stats.tts_seconds += timing.tts_end - timing.tts_start
        except Exception as exc:
            if not keep_going:
                stats.total_seconds = clock() - started
                raise StreamError(i, stage, exc) from exc
            log.warning("segment %d failed during %s: %s", i, stage, exc)
            stats.errors.append({"segment": i, "stage": stage, "error": f"{type(exc).__name__}: {exc}"})
            if stage == "aux":
                cached, cached_tag = None, None
            outputs.append(None)
            matches.append(cached if stage == "tts" else None)
            continue
        outputs.append(audio)
        matches.append(match)
    stats.total_seconds = clock() - started
    return StreamResult(outputs, stats, matches)


# --------------------------------------------------------------------------- files


STREAM_COLUMNS = ("speaker_tag", "audio_path", "text")


def load_stream(manifest: Union[str, Path]) -> list[Segment]:
    """Read a ``speaker_tag,audio_path,text`` CSV; audio paths resolve against the CSV's directory."""
    manifest = Path(manifest)
    segments = []
    with manifest.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(STREAM_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{manifest}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            path = Path(row["audio_path"])
            if not path.is_absolute():
                path = manifest.parent / path
            try:
                segments.append(Segment(row["speaker_tag"], read_wav(path), row["text"]))
            except ValueError as exc:
                raise ValueError(f"{manifest}:{lineno}: {exc}") from exc
    return segments


def write_stream_outputs(result: StreamResult, out: Union[str, Path]) -> list[Optional[Path]]:
    """Write ``segment_NNNN.wav`` per produced output and ``stats.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Optional[Path]] = []
    for i, clip in enumerate(result.outputs):
        if clip is None:
            written.append(None)
            continue
        path = out / f"segment_{i:04d}.wav"
        write_wav(path, clip)
        written.append(path)
    doc = result.stats.to_dict()
    doc["matches"] = [m.to_dict() if m is not None else None for m in result.matches]
    (out / "stats.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return written
