from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pvm.audio import AudioClip, level_to_dbfs, sine, write_wav
from pvm.gemo.features import feature_dim
from pvm.gemo.hierarchy import EMOTION_LABELS, GENDER_LABELS, GemoModelSet
from pvm.gemo.softmax import SoftmaxModel
from pvm.labels import ALL_CODES, FeatureCode
from pvm.library import ConsentRecord, PresetLibrary, PresetVoiceEntry

DIM = feature_dim(128)


def rigged_model(labels, winner: str, dim: int = DIM) -> SoftmaxModel:
    """Zero weights; the bias alone makes ``winner`` the prediction for any input."""
    bias = np.array([5.0 if label == winner else 0.0 for label in labels])
    return SoftmaxModel(np.zeros((len(labels), dim)), bias, tuple(labels), np.zeros(dim), np.ones(dim))


class CountingModel:
    """Wraps a model and records every prediction call."""

    def __init__(self, model: SoftmaxModel, name: str) -> None:
        self.model = model
        self.name = name
        self.labels = model.labels
        self.calls = 0

    def predict_proba(self, x):
        self.calls += 1
        return self.model.predict_proba(x)


def rigged_set(code: FeatureCode, counting: bool = False):
    gender = rigged_model(GENDER_LABELS, code.gender.value)
    male = rigged_model(EMOTION_LABELS, code.emotion.value)
    female = rigged_model(EMOTION_LABELS, code.emotion.value)
    if counting:
        gender, male, female = (CountingModel(gender, "gender"), CountingModel(male, "male-emotion"),
                                CountingModel(female, "female-emotion"))
    return GemoModelSet(gender, male, female)


def make_entry(entry_id: str, language: str, code: FeatureCode, score=None, revoked=False,
               audio_path: str | None = None) -> PresetVoiceEntry:
    return PresetVoiceEntry(
        id=entry_id, language=language, code=code,
        audio_path=audio_path or f"{entry_id}.wav",
        consent=ConsentRecord(f"spk-{entry_id}", "2024-03-01", "research use", revoked),
        quality_score=score,
    )


def full_library(languages=("fr",), root: Path | None = None, per_cell: int = 1) -> PresetLibrary:
    entries = []
    for lang in languages:
        for code in ALL_CODES:
            for k in range(per_cell):
                entry_id = f"{lang}_{code.gender.value[0].lower()}_{code.emotion.value.lower()}_{k}"
                entries.append(make_entry(entry_id, lang, code, score=3.0 + k * 0.5))
    lib = PresetLibrary(entries, root=root)
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        for e in lib:
            write_wav(root / e.audio_path, sine(220.0, 0.1))
    return lib


def write_tone(path: Path, freq: float, dbfs: float, seconds: float = 1.0, rate: int = 22050) -> Path:
    clip = level_to_dbfs(sine(freq, seconds, rate), dbfs)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_wav(path, clip)
    return path


@pytest.fixture
def voice_clip() -> AudioClip:
    return level_to_dbfs(sine(220.0, 1.0), -21.5)



# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict[int, tuple[str, str, float, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title, limit = marker.args
    passed = report.passed and report.duration < limit
    _ACCEPTANCE[number] = (title, "PASS" if passed else "FAIL", report.duration, limit)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, duration, limit = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {title} ({duration:.2f}s, limit {limit:g}s)")
