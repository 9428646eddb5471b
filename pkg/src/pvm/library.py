"""Preset-voice library: a consent-carrying codebook keyed by (language, gender, emotion)."""

from __future__ import annotations

import datetime as dt
import json
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .labels import ALL_CODES, FeatureCode

MANIFEST_VERSION = "pvm-lib/1"
_LANGUAGE_RE = re.compile(r"^[a-z]{2}$")


class LibraryError(Exception):
    pass


class DuplicateEntry(LibraryError):
    pass


class InvalidEntry(LibraryError):
    pass


class MissingPreset(LibraryError):
    def __init__(self, language: str, code: FeatureCode, detail: str = "no consented preset") -> None:
        super().__init__(f"{detail} for ({language}, {code})")
        self.language = language
        self.code = code


class UnknownLanguage(LibraryError):
    def __init__(self, language: str) -> None:
        super().__init__(f"library has no entries for language {language!r}")
        self.language = language


class ManifestError(LibraryError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None) -> None:
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


class RevokedEntryWarning(UserWarning):
    pass


class DanglingAudioWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConsentRecord:
    speaker_id: str
    consent_date: str  # ISO-8601 date
    scope: str = ""
    revoked: bool = False


@dataclass(frozen=True)
class PresetVoiceEntry:
    id: str
    language: str
    code: FeatureCode
    audio_path: str
    consent: ConsentRecord
    quality_score: Optional[float] = None

    def rank_key(self) -> tuple:
        # best first: higher score, unscored last, then smallest id
        score = self.quality_score
        return (score is None, -(score or 0.0), self.id)


def check_entry(entry: PresetVoiceEntry) -> None:
    if not entry.id:
        raise InvalidEntry("entry id is empty")
    if not _LANGUAGE_RE.match(entry.language):
        raise InvalidEntry(f"{entry.id}: language must be a lowercase ISO-639-1 code, got {entry.language!r}")
    if not isinstance(entry.code, FeatureCode):
        raise InvalidEntry(f"{entry.id}: code must be a FeatureCode")
    if not entry.consent.speaker_id:
        raise InvalidEntry(f"{entry.id}: consent.speaker_id is empty")
    if not entry.consent.consent_date:
        raise InvalidEntry(f"{entry.id}: consent.consent_date is empty")
    try:
        dt.date.fromisoformat(entry.consent.consent_date)
    except ValueError:
        raise InvalidEntry(f"{entry.id}: consent_date {entry.consent.consent_date!r} is not an ISO-8601 date") from None
    if entry.quality_score is not None and not 0.0 <= entry.quality_score <= 5.0:
        raise InvalidEntry(f"{entry.id}: quality_score must lie in [0, 5]")


@dataclass(frozen=True)
class CoverageReport:
    ok: bool
    missing: dict[str, list[FeatureCode]]
    missing_audio: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "missing": {lang: [str(c) for c in codes] for lang, codes in self.missing.items()},
            "missing_audio": list(self.missing_audio),
        }


class PresetLibrary:
    """Immutable collection of preset entries with a (language, code) index.

    ``add_entry`` returns a new library; the original is left unchanged.
    Relative ``audio_path`` values resolve against ``root``.
    """

    def __init__(self, entries: Iterable[PresetVoiceEntry] = (), root: Union[str, Path, None] = None) -> None:
        self._entries: dict[str, PresetVoiceEntry] = {}
        self._index: dict[tuple[str, FeatureCode], tuple[str, ...]] = {}
        self.root = Path(root) if root is not None else None
        for entry in entries:
            self._insert(entry)

    def _insert(self, entry: PresetVoiceEntry) -> None:
        check_entry(entry)
        if entry.id in self._entries:
            raise DuplicateEntry(f"duplicate preset id {entry.id!r}")
        if entry.consent.revoked:
            warnings.warn(f"preset {entry.id!r} is revoked; it is stored but never returned by lookup",
                          RevokedEntryWarning, stacklevel=3)
        self._entries[entry.id] = entry
        key = (entry.language, entry.code)
        self._index[key] = tuple(sorted(self._index.get(key, ()) + (entry.id,)))

    # ------------------------------------------------------------------ basics

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def __contains__(self, entry_id: object) -> bool:
        return entry_id in self._entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PresetLibrary):
            return NotImplemented
        return self._entries == other._entries and self._index == other._index

    def __repr__(self) -> str:
        return f"PresetLibrary({len(self)} entries, languages={sorted(self.languages)})"

    @property
    def entries(self) -> list[PresetVoiceEntry]:
        return sorted(self._entries.values(), key=lambda e: e.id)

    @property
    def index(self) -> Mapping[tuple[str, FeatureCode], tuple[str, ...]]:
        return dict(self._index)

    @property
    def languages(self) -> set[str]:
        return {lang for lang, _ in self._index}

    def get(self, entry_id: str) -> PresetVoiceEntry:
        return self._entries[entry_id]

    def cell(self, language: str, code: FeatureCode) -> list[PresetVoiceEntry]:
        return [self._entries[i] for i in self._index.get((language, code), ())]

    def audio_file(self, entry: PresetVoiceEntry) -> Path:
        path = Path(entry.audio_path)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return path

    # ------------------------------------------------------------------ operations

    def add_entry(self, entry: PresetVoiceEntry) -> "PresetLibrary":
        lib = PresetLibrary(root=self.root)
        lib._entries = dict(self._entries)
        lib._index = dict(self._index)
        lib._insert(entry)
        return lib

    def revoke(self, entry_id: str) -> "PresetLibrary":
        """A copy of the library with one entry's consent marked revoked."""
        entry = self._entries[entry_id]
        revoked = replace(entry, consent=replace(entry.consent, revoked=True))
        lib = PresetLibrary(root=self.root)
        lib._entries = {**self._entries, entry_id: revoked}
        lib._index = dict(self._index)
        return lib

    def lookup(self, language: str, code: FeatureCode) -> PresetVoiceEntry:
        """Best consented entry in the cell: highest quality_score, then smallest id."""
        if language not in self.languages:
            raise UnknownLanguage(language)
        candidates = [e for e in self.cell(language, code) if not e.consent.revoked]
        if not candidates:
            detail = "all presets revoked" if self.cell(language, code) else "no preset"
            raise MissingPreset(language, code, detail)
        return min(candidates, key=PresetVoiceEntry.rank_key)

    def validate(self, required_languages: Sequence[str], check_audio: bool = True) -> CoverageReport:
        missing: dict[str, list[FeatureCode]] = {}
        for language in required_languages:
            empty = [code for code in ALL_CODES
                     if not any(not e.consent.revoked for e in self.cell(language, code))]
            if empty:
                missing[language] = empty
        missing_audio = []
        if check_audio:
            missing_audio = [e.id for e in self.entries if not self.audio_file(e).is_file()]
        return CoverageReport(not missing and not missing_audio, missing, missing_audio)

    # ------------------------------------------------------------------ persistence

    def to_manifest(self) -> dict:
        return {"version": MANIFEST_VERSION, "entries": [entry_to_dict(e) for e in self.entries]}

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_manifest(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path], root: Union[str, Path, None] = None) -> "PresetLibrary":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_json(text, root=root if root is not None else path.parent)

    @classmethod
    def from_json(cls, text: str, root: Union[str, Path, None] = None) -> "PresetLibrary":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(exc.msg, line=exc.lineno) from exc
        lib = cls.from_manifest(doc, root=root, _lines=_entry_lines(text))
        if root is not None:
            for entry in lib.entries:
                if not lib.audio_file(entry).is_file():
                    warnings.warn(f"preset {entry.id!r}: audio file {lib.audio_file(entry)} not found",
                                  DanglingAudioWarning, stacklevel=3)
        return lib

    @classmethod
    def from_manifest(cls, doc: object, root: Union[str, Path, None] = None, _lines: Sequence[int] = ()) -> "PresetLibrary":
        if not isinstance(doc, dict):
            raise ManifestError("manifest must be a JSON object")
        if doc.get("version") != MANIFEST_VERSION:
            raise ManifestError(f"unsupported manifest version {doc.get('version')!r}, expected {MANIFEST_VERSION!r}",
                                field="version")
        raw = doc.get("entries")
        if not isinstance(raw, list):
            raise ManifestError("'entries' must be a list", field="entries")
        entries = []
        for i, item in enumerate(raw):
            line = _lines[i] if i < len(_lines) else None
            entries.append(entry_from_dict(item, f"entries[{i}]", line))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RevokedEntryWarning)
            try:
                return cls(entries, root=root)
            except LibraryError as exc:
                raise ManifestError(str(exc), field="entries") from exc


def _entry_lines(text: str) -> list[int]:
    """Best-effort line numbers of each entry object, for diagnostics."""
    lines = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if re.match(r'\s*"id"\s*:', line):
            lines.append(lineno)
    return lines


def entry_to_dict(entry: PresetVoiceEntry) -> dict:
    return {
        "id": entry.id,
        "language": entry.language,
        "code": str(entry.code),
        "audio_path": entry.audio_path,
        "consent": {
            "speaker_id": entry.consent.speaker_id,
            "consent_date": entry.consent.consent_date,
            "scope": entry.consent.scope,
            "revoked": entry.consent.revoked,
        },
        "quality_score": entry.quality_score,
    }


def entry_from_dict(item: object, where: str = "entry", line: Optional[int] = None) -> PresetVoiceEntry:
    def fail(msg: str, name: str):
        raise ManifestError(msg, field=f"{where}.{name}", line=line)

    if not isinstance(item, dict):
        raise ManifestError("entry must be an object", field=where, line=line)
    for name in ("id", "language", "code", "audio_path"):
        if not isinstance(item.get(name), str) or not item.get(name):
            fail("required non-empty string", name)
    try:
        code = FeatureCode.parse(item["code"])
    except ValueError as exc:
        fail(str(exc), "code")
    consent = item.get("consent")
    if not isinstance(consent, dict):
        fail("required object", "consent")
    for name in ("speaker_id", "consent_date"):
        if not isinstance(consent.get(name), str) or not consent.get(name):
            fail("required non-empty string", f"consent.{name}")
    revoked = consent.get("revoked", False)
    if not isinstance(revoked, bool):
        fail("must be true or false", "consent.revoked")
    score = item.get("quality_score")
    if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
        fail("must be a number or null", "quality_score")
    entry = PresetVoiceEntry(
        id=item["id"],
        language=item["language"],
        code=code,
        audio_path=item["audio_path"],
        consent=ConsentRecord(consent["speaker_id"], consent["consent_date"], str(consent.get("scope", "")), revoked),
        quality_score=None if score is None else float(score),
    )
    try:
        check_entry(entry)
    except InvalidEntry as exc:
        raise ManifestError(str(exc), field=where, line=line) from exc
    return entry
