"""Corpus curation: label normalisation, pitch/loudness filtering and the
gender-partitioned gender-emotion directory layout."""

from __future__ import annotations

import csv
import io
import json
import logging
import shutil
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .audio import (
    SILENCE_DBFS,
    AudioClip,
    AudioError,
    PathLike,
    StftConfig,
    estimate_pitch,
    mel_spectrogram,
    read_wav,
    rms_dbfs,
    spectrogram_to_image,
)
from .labels import (
    EMOTIONS,
    GENDERS,
    Emotion,
    FeatureCode,
    Gender,
    Intensity,
    parse_emotion,
    parse_gender,
    parse_intensity,
)

log = logging.getLogger(__name__)

LAYOUTS = ("ravdess-style", "flat-manifest")
FLAT_MANIFEST_NAME = "manifest.csv"
LAYOUT_MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = (
    "path", "corpus", "language", "gender", "emotion", "intensity",
    "pitch_hz", "rms_dbfs", "decision", "reason",
)

# RAVDESS filename field 3; fearful (06) and surprised (08) are outside the five-class set.
_RAVDESS_EMOTIONS = {
    "01": Emotion.NEUTRAL,
    "02": Emotion.NEUTRAL,  # calm
    "03": Emotion.HAPPY,
    "04": Emotion.SAD,
    "05": Emotion.ANGRY,
    "07": Emotion.DISGUST,
}
_RAVDESS_INTENSITIES = {"01": Intensity.NORMAL, "02": Intensity.STRONG}


class CurationError(Exception):
    pass


@dataclass(frozen=True)
class LabeledSample:
    path: Path
    language: str
    gender: Gender
    emotion: Emotion
    intensity: Intensity = Intensity.UNSPECIFIED
    corpus: str = ""

    @property
    def code(self) -> FeatureCode:
        return FeatureCode(self.gender, self.emotion)


@dataclass(frozen=True)
class LabelRejection:
    path: Path
    reason: str


@dataclass
class CorpusScan:
    """Result of scanning a corpus: labelled samples plus files that could not be labelled."""

    samples: list[LabeledSample] = field(default_factory=list)
    rejected: list[LabelRejection] = field(default_factory=list)

    @property
    def rejected_label(self) -> int:
        return len(self.rejected)

    @property
    def scanned(self) -> int:
        return len(self.samples) + len(self.rejected)


@dataclass(frozen=True)
class FilterPolicy:
    pitch_min: float = 75.0
    pitch_max: float = 3000.0
    loudness_min: float = -23.0
    loudness_max: float = -20.0
    require_strong_intensity: bool = False

    def __post_init__(self) -> None:
        if not self.pitch_min < self.pitch_max:
            raise ValueError("pitch_min must be below pitch_max")
        if not self.loudness_min < self.loudness_max:
            raise ValueError("loudness_min must be below loudness_max")

    def search_range(self, sample_rate: int) -> tuple[float, float]:
        return self.pitch_min / 2, min(2 * self.pitch_max, sample_rate / 2)


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: Optional[str]  # "pitch" | "loudness" | None
    pitch_hz: Optional[float]
    rms_dbfs: float


@dataclass
class CurationReport:
    kept: int = 0
    rejected_pitch: int = 0
    rejected_loudness: int = 0
    rejected_label: int = 0
    per_class: dict[str, int] = field(default_factory=dict)

    @property
    def scanned(self) -> int:
        return self.kept + self.rejected_pitch + self.rejected_loudness + self.rejected_label

    def merge(self, other: "CurationReport") -> "CurationReport":
        per_class = Counter(self.per_class)
        per_class.update(other.per_class)
        return CurationReport(
            self.kept + other.kept,
            self.rejected_pitch + other.rejected_pitch,
            self.rejected_loudness + other.rejected_loudness,
            self.rejected_label + other.rejected_label,
            dict(sorted(per_class.items())),
        )

    def to_dict(self) -> dict:
        return {
            "scanned": self.scanned,
            "kept": self.kept,
            "rejected_pitch": self.rejected_pitch,
            "rejected_loudness": self.rejected_loudness,
            "rejected_label": self.rejected_label,
            "per_class": dict(self.per_class),
        }


# --------------------------------------------------------------------------- scanning


def parse_ravdess_name(name: str) -> tuple[Gender, Emotion, Intensity]:
    """Decode ``MM-VV-EE-II-SS-RR-AA.wav`` (modality, channel, emotion, intensity,
    statement, repetition, actor). Odd actor numbers are male."""
    stem = name.rsplit(".", 1)[0]
    fields = stem.split("-")
    if len(fields) != 7 or not all(f.isdigit() and len(f) == 2 for f in fields):
        raise ValueError(f"not a RAVDESS-style name: {name}")
    emotion = _RAVDESS_EMOTIONS.get(fields[2])
    if emotion is None:
        raise ValueError(f"emotion code {fields[2]} outside the five-class subset")
    intensity = _RAVDESS_INTENSITIES.get(fields[3])
    if intensity is None:
        raise ValueError(f"unknown intensity code {fields[3]}")
    actor = int(fields[6])
    if actor == 0:
        raise ValueError("actor number 00 is invalid")
    gender = Gender.MALE if actor % 2 == 1 else Gender.FEMALE
    return gender, emotion, intensity


def _wav_files(root: Path) -> list[Path]:
    return sorted((p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".wav"),
                  key=lambda p: p.relative_to(root).as_posix())


def _scan_ravdess(root: Path, language: str, corpus: str, require_strong: bool) -> CorpusScan:
    scan = CorpusScan()
    for path in _wav_files(root):
        try:
            gender, emotion, intensity = parse_ravdess_name(path.name)
        except ValueError as exc:
            scan.rejected.append(LabelRejection(path, str(exc)))
            continue
        if require_strong and intensity is not Intensity.STRONG:
            scan.rejected.append(LabelRejection(path, "intensity filter: not strong"))
            continue
        scan.samples.append(LabeledSample(path, language, gender, emotion, intensity, corpus))
    return scan


def _scan_flat(root: Path, language: str, corpus: str, require_strong: bool) -> CorpusScan:
    """Read ``manifest.csv`` with columns path,gender,emotion and optional
    intensity,language,corpus. Paths are relative to the corpus root."""
    manifest = root / FLAT_MANIFEST_NAME
    if not manifest.is_file():
        raise CurationError(f"flat-manifest layout needs {manifest}")
    rows: list[tuple[str, dict]] = []
    with manifest.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"path", "gender", "emotion"} - set(reader.fieldnames or ())
        if missing:
            raise CurationError(f"{manifest}: missing columns {sorted(missing)}")
        for row in reader:
            rows.append((Path(row["path"]).as_posix(), row))

    scan = CorpusScan()
    for rel, row in sorted(rows, key=lambda r: r[0]):
        path = root / rel
        if not path.is_file():
            scan.rejected.append(LabelRejection(path, "file not found"))
            continue
        try:
            gender = parse_gender(row["gender"])
            emotion = parse_emotion(row["emotion"])
            intensity = parse_intensity(row.get("intensity") or "")
        except ValueError as exc:
            scan.rejected.append(LabelRejection(path, str(exc)))
            continue
        if require_strong and intensity is not Intensity.STRONG:
            scan.rejected.append(LabelRejection(path, "intensity filter: not strong"))
            continue
        scan.samples.append(LabeledSample(
            path, (row.get("language") or language).strip().lower(), gender, emotion, intensity,
            (row.get("corpus") or corpus).strip(),
        ))
    return scan


def scan_corpus(
    root: PathLike,
    layout: str,
    language: str = "en",
    corpus: Optional[str] = None,
    require_strong_intensity: Optional[bool] = None,
) -> CorpusScan:
    """Label every WAV file under ``root``.

    ``require_strong_intensity`` defaults to on for the ravdess-style layout and
    off otherwise. Order is lexicographic by path relative to ``root``.
    """
    root = Path(root)
    if not root.is_dir():
        raise CurationError(f"corpus root {root} is not a readable directory")
    corpus = corpus if corpus is not None else root.name
    if layout == "ravdess-style":
        strong = True if require_strong_intensity is None else require_strong_intensity
        return _scan_ravdess(root, language, corpus, strong)
    if layout == "flat-manifest":
        strong = bool(require_strong_intensity)
        return _scan_flat(root, language, corpus, strong)
    raise CurationError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


# --------------------------------------------------------------------------- filtering


def filter_sample(clip: AudioClip, policy: FilterPolicy = FilterPolicy()) -> FilterDecision:
    """Pitch first, then loudness. Unvoiced clips fail on pitch."""
    loudness = rms_dbfs(clip)
    if loudness == SILENCE_DBFS:
        return FilterDecision(False, "pitch", None, loudness)
    lo, hi = policy.search_range(clip.sample_rate)
    try:
        f0 = estimate_pitch(clip, lo, hi).median_f0
    except AudioError:
        # too short to analyse, or a sample rate too low for the search range
        f0 = None
    if f0 is None or not policy.pitch_min <= f0 <= policy.pitch_max:
        return FilterDecision(False, "pitch", f0, loudness)
    if not policy.loudness_min <= loudness <= policy.loudness_max:
        return FilterDecision(False, "loudness", f0, loudness)
    return FilterDecision(True, None, f0, loudness)


def _assess(sample: LabeledSample, policy: FilterPolicy) -> FilterDecision:
    try:
        clip = read_wav(sample.path)
        return filter_sample(clip, policy)
    except AudioError as exc:
        log.warning("unreadable audio %s: %s", sample.path, exc)
        return FilterDecision(False, "pitch", None, SILENCE_DBFS)


# --------------------------------------------------------------------------- layout


def layout_dirs(out: PathLike) -> list[Path]:
    out = Path(out)
    return [out / g.value.lower() / e.value.lower() for g in GENDERS for e in EMOTIONS]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    if value == SILENCE_DBFS:
        return "-inf"
    return f"{value:.3f}"


def build_gender_dependent_layout(
    scan: CorpusScan | Sequence[LabeledSample],
    out: PathLike,
    policy: FilterPolicy = FilterPolicy(),
    jobs: int = 1,
) -> CurationReport:
    """Filter samples and copy the kept ones into ``out/<gender>/<emotion>/``.

    All ten gender-emotion directories are always created. A CSV manifest
    (``out/manifest.csv``) records one row per labelled or label-rejected file,
    and ``out/report.json`` carries the counts.
    """
    if not isinstance(scan, CorpusScan):
        scan = CorpusScan(list(scan))
    out = Path(out)
    try:
        for d in layout_dirs(out):
            d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CurationError(f"cannot create layout under {out}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            decisions = list(pool.map(lambda s: _assess(s, policy), scan.samples))
    else:
        decisions = [_assess(s, policy) for s in scan.samples]

    report = CurationReport(rejected_label=scan.rejected_label)
    per_class: Counter[str] = Counter()
    rows: list[dict[str, str]] = []
    taken: set[Path] = set()
    for sample, decision in zip(scan.samples, decisions):
        row = {
            "corpus": sample.corpus,
            "language": sample.language,
            "gender": sample.gender.value,
            "emotion": sample.emotion.value,
            "intensity": sample.intensity.value,
            "pitch_hz": _fmt(decision.pitch_hz),
            "rms_dbfs": _fmt(decision.rms_dbfs),
        }
        if decision.keep:
            dest_dir = out / sample.gender.value.lower() / sample.emotion.value.lower()
            dest = _unique_destination(dest_dir, sample, taken)
            try:
                shutil.copyfile(sample.path, dest)
            except OSError as exc:
                raise CurationError(f"cannot write {dest}: {exc}") from exc
            report.kept += 1
            per_class[str(sample.code)] += 1
            row.update(path=dest.relative_to(out).as_posix(), decision="keep", reason="")
        else:
            if decision.reason == "pitch":
                report.rejected_pitch += 1
            else:
                report.rejected_loudness += 1
            row.update(path=str(sample.path), decision="reject", reason=decision.reason or "")
        rows.append(row)
    for rejection in scan.rejected:
        rows.append({
            "path": str(rejection.path), "corpus": "", "language": "", "gender": "", "emotion": "",
            "intensity": "", "pitch_hz": "", "rms_dbfs": "", "decision": "reject",
            "reason": f"label: {rejection.reason}",
        })
    report.per_class = dict(sorted(per_class.items()))

    _write_manifest(out / LAYOUT_MANIFEST_NAME, rows)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


def _unique_destination(dest_dir: Path, sample: LabeledSample, taken: set[Path]) -> Path:
    stem = f"{sample.corpus}_{sample.path.stem}" if sample.corpus else sample.path.stem
    candidate = dest_dir / f"{stem}.wav"
    n = 1
    while candidate in taken:
        candidate = dest_dir / f"{stem}_{n}.wav"
        n += 1
    taken.add(candidate)
    return candidate


def _write_manifest(path: Path, rows: Iterable[dict[str, str]]) -> None:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=MANIFEST_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def read_layout_manifest(out: PathLike) -> list[dict[str, str]]:
    with (Path(out) / LAYOUT_MANIFEST_NAME).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def layout_samples(layout: PathLike, gender: Optional[Gender] = None) -> list[tuple[Path, Gender, Emotion]]:
    """List (path, gender, emotion) for every WAV in a built layout, sorted by path."""
    layout = Path(layout)
    found = []
    for g in GENDERS:
        if gender is not None and g is not gender:
            continue
        for e in EMOTIONS:
            d = layout / g.value.lower() / e.value.lower()
            if d.is_dir():
                found.extend((p, g, e) for p in sorted(d.glob("*.wav")))
    return sorted(found, key=lambda t: t[0].as_posix())


# --------------------------------------------------------------------------- images


@dataclass(frozen=True)
class ExportResult:
    count: int
    skipped: int
    out: Path


def export_spectrograms(
    layout: PathLike, config: StftConfig = StftConfig(), out: Optional[PathLike] = None
) -> ExportResult:
    """Write one grayscale PNG per WAV in the layout, mirroring its directory tree.

    Images go to ``out`` (default: sibling directory ``<layout>_png``). Existing
    images are overwritten; unreadable audio is skipped and counted.
    """
    layout = Path(layout)
    out = Path(out) if out is not None else layout.with_name(layout.name + "_png")
    count = skipped = 0
    for path, _, _ in layout_samples(layout):
        try:
            clip = read_wav(path)
            png = spectrogram_to_image(mel_spectrogram(clip, config))
        except AudioError as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped += 1
            continue
        dest = out / path.relative_to(layout).with_suffix(".png")
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(png)
        count += 1
    return ExportResult(count, skipped, out)
