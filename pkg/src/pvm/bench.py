"""Stage-separated run-time measurement for the matcher (aux) and TTS stages."""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from .audio import AudioClip
from .labels import FeatureCode, Gender, Emotion
from .library import ConsentRecord, PresetVoiceEntry
from .pipeline import MatchResult, RunStats, Segment, count_speaker_changes, normalize_mode, run_stream
from .tts import TtsBackend

REPORT_COLUMNS = (
    "workload", "mode", "segments", "speaker_changes", "aux_runs", "tts_runs", "aux_mean_s", "tts_mean_s",
)


class BenchError(Exception):
    pass


@dataclass(frozen=True)
class StageStats:
    mean: float
    std: float
    min: float
    max: float
    k: int
    samples: tuple[float, ...]

    @classmethod
    def of(cls, samples: Sequence[float]) -> "StageStats":
        if not samples:
            raise ValueError("no samples")
        return cls(statistics.fmean(samples), statistics.pstdev(samples), min(samples), max(samples),
                   len(samples), tuple(samples))


def time_stage(thunk: Callable[[], object], repetitions: int, warmup: int = 1,
               clock_ns: Callable[[], int] = time.perf_counter_ns) -> StageStats:
    """Run ``thunk`` ``warmup`` times unmeasured, then time ``repetitions`` runs (seconds).

    Any exception aborts the measurement; no partial statistics are returned.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples = []
    try:
        for _ in range(warmup):
            thunk()
        for _ in range(repetitions):
            start = clock_ns()
            thunk()
            samples.append((clock_ns() - start) / 1e9)
    except Exception as exc:
        raise BenchError(f"benchmarked stage failed after {len(samples)} measured runs: {exc}") from exc
    return StageStats.of(samples)


@dataclass(frozen=True)
class Workload:
    name: str
    segments: Sequence[Segment]

    @property
    def speaker_changes(self) -> int:
        return count_speaker_changes([s.speaker_tag for s in self.segments])


@dataclass(frozen=True)
class BenchReport:
    workload: str
    mode: str
    segments: int
    speaker_changes: int
    aux_runs: int
    tts_runs: int
    aux: StageStats  # per-run aux totals
    tts: StageStats  # per-run tts totals
    total: StageStats
    last_stats: RunStats

    def row(self) -> dict:
        return {
            "workload": self.workload,
            "mode": self.mode,
            "segments": self.segments,
            "speaker_changes": self.speaker_changes,
            "aux_runs": self.aux_runs,
            "tts_runs": self.tts_runs,
            "aux_mean_s": f"{self.aux.mean:.6f}",
            "tts_mean_s": f"{self.tts.mean:.6f}",
        }

    def counts(self) -> tuple:
        return (self.workload, self.mode, self.segments, self.speaker_changes, self.aux_runs, self.tts_runs)


def _bench_one(workload: Workload, mode: str, language: str, matcher, backend, reps: int, warmup: int) -> BenchReport:
    aux, tts, total = [], [], []
    last: Optional[RunStats] = None
    for rep in range(warmup + reps):
        stats = run_stream(workload.segments, language, mode, matcher, backend).stats
        if last is not None and (stats.aux_runs, stats.tts_runs) != (last.aux_runs, last.tts_runs):
            raise BenchError(f"non-deterministic invocation counts on workload {workload.name}")
        last = stats
        if rep >= warmup:
            aux.append(stats.aux_seconds)
            tts.append(stats.tts_seconds)
            total.append(stats.total_seconds)
    assert last is not None
    return BenchReport(workload.name, mode, last.segments, last.speaker_changes, last.aux_runs, last.tts_runs,
                       StageStats.of(aux), StageStats.of(tts), StageStats.of(total), last)


def bench_pipeline(
    workloads: Sequence[Workload],
    modes: Sequence[str],
    matcher: Callable[[AudioClip, str], MatchResult],
    backend: TtsBackend,
    language: str = "fr",
    reps: int = 3,
    warmup: int = 1,
    parallel: bool = False,
) -> list[BenchReport]:
    """One report per (workload, mode), in workload-major order.

    With ``parallel`` set, workloads run on separate threads; each run keeps
    its own timers, but contention will inflate absolute durations.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    modes = [normalize_mode(m) for m in modes]
    jobs = [(w, m) for w in workloads for m in modes]
    if parallel and len(jobs) > 1:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(lambda j: _bench_one(j[0], j[1], language, matcher, backend, reps, warmup), jobs))
    return [_bench_one(w, m, language, matcher, backend, reps, warmup) for w, m in jobs]


def report_csv(reports: Sequence[BenchReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buffer.getvalue()


def write_report_csv(reports: Sequence[BenchReport], path: Union[str, Path]) -> None:
    Path(path).write_text(report_csv(reports), encoding="utf-8")


def scaling_table(reports: Sequence[BenchReport]) -> list[dict]:
    """Plot-ready rows: aux invocations and aux time against stream length, per mode."""
    rows = [{"mode": r.mode, "segments": r.segments, "aux_runs": r.aux_runs, "aux_total_s": r.aux.mean}
            for r in reports]
    return sorted(rows, key=lambda row: (row["mode"], row["segments"]))


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, r_squared)."""
    fit = sps.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def stages_disjoint(stats: RunStats) -> bool:
    """True when no segment's aux interval overlaps its TTS interval."""
    for t in stats.timings:
        if t.aux_start is None or t.tts_start is None:
            continue
        if not (t.aux_end <= t.tts_start or t.tts_end <= t.aux_start):
            return False
    return True


# --------------------------------------------------------------------------- stubs


def spin(seconds: float) -> None:
    """Busy-wait; steadier than sleep for sub-millisecond costs."""
    deadline = time.perf_counter() + seconds
    while time.perf_counter() < deadline:
        pass


def placeholder_preset(language: str = "fr", code: Optional[FeatureCode] = None) -> PresetVoiceEntry:
    return PresetVoiceEntry(
        id="stub-preset", language=language, code=code or FeatureCode(Gender.FEMALE, Emotion.NEUTRAL),
        audio_path="stub.wav", consent=ConsentRecord("stub", "2024-01-01", "benchmark stub"), quality_score=None,
    )


class StubMatcher:
    """Matcher with a fixed per-invocation cost and a fixed result."""

    def __init__(self, cost_seconds: float, result: Optional[MatchResult] = None) -> None:
        self.cost_seconds = cost_seconds
        self.calls = 0
        self.result = result

    def __call__(self, clip: AudioClip, target_language: str) -> MatchResult:
        self.calls += 1
        spin(self.cost_seconds)
        if self.result is not None:
            return self.result
        preset = placeholder_preset(target_language)
        return MatchResult(preset.code, preset, np.array([0.0, 1.0]), np.full(5, 0.2), self.cost_seconds)


def isolated_aux(matcher: Callable[[AudioClip, str], MatchResult], clip: AudioClip, language: str,
                 repetitions: int = 10) -> StageStats:
    """Average matcher run-time on one repeated input."""
    return time_stage(lambda: matcher(clip, language), repetitions)


def format_summary(reports: Sequence[BenchReport], isolated: Optional[StageStats] = None) -> str:
    lines = []
    for r in reports:
        lines.append(f"{r.workload:<16} {r.mode:<26} segments={r.segments:<4} aux_runs={r.aux_runs:<4} "
                     f"tts_runs={r.tts_runs:<4} aux={r.aux.mean:.4f}s tts={r.tts.mean:.4f}s")
    if isolated is not None:
        lines.append(f"isolated aux stage: mean {isolated.mean:.4f}s (std {isolated.std:.4f}s, k={isolated.k})")
    return "\n".join(lines) + "\n"

