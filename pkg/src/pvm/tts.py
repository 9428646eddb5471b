"""TTS backends: a deterministic mock for tests and an external-command adapter."""

from __future__ import annotations

import hashlib
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Union

import numpy as np

from .audio import DEFAULT_RATE, AudioClip, AudioError, read_wav
from .library import PresetVoiceEntry

MOCK_MAGIC = b"PVMK"
_SEP = "\x1f"


class TtsBackend(Protocol):
    # whether distinct streams may call synthesize concurrently
    parallel_safe: bool

    def synthesize(self, preset: PresetVoiceEntry, text: str, language: str) -> AudioClip:
        ...


class TtsError(Exception):
    pass


class ExternalFailure(TtsError):
    def __init__(self, message: str, returncode: Optional[int] = None, stdout: str = "", stderr: str = "",
                 command: Optional[list[str]] = None) -> None:
        super().__init__(message)
        self.returncode = returncode
        self.stdout = stdout
        self.stderr = stderr
        self.command = command


class ExternalTimeout(TtsError):
    def __init__(self, message: str, timeout: float, command: list[str]) -> None:
        super().__init__(message)
        self.timeout = timeout
        self.command = command


class ExternalOutputError(TtsError):
    pass


# --------------------------------------------------------------------------- mock backend


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def tone_frequency(preset_id: str) -> float:
    """Tone pitch for a preset id: 200..800 Hz in whole hertz, from SHA-256."""
    digest = hashlib.sha256(preset_id.encode("utf-8")).digest()
    return 200.0 + int.from_bytes(digest[:4], "big") % 601


@dataclass(frozen=True)
class MockPayload:
    preset_id: str
    text_hash: str
    language: str


def _bytes_to_samples(data: bytes) -> np.ndarray:
    # multiples of 1/256 survive 16-bit PCM and float32 exactly
    return (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 256.0


def _samples_to_bytes(samples: np.ndarray) -> bytes:
    values = np.round(np.asarray(samples) * 256.0 + 128.0)
    if np.any(values < 0) or np.any(values > 255):
        raise AudioError("samples do not carry a mock header")
    return values.astype(np.uint8).tobytes()


def synthesize_mock(preset: PresetVoiceEntry, text: str, language: str, rate: int = DEFAULT_RATE) -> AudioClip:
    """Deterministic stand-in for a TTS model.

    The first samples encode ``PVMK``, a 2-byte payload length and the payload
    ``preset_id \\x1f text_hash \\x1f language``, one byte per sample. A tone at
    ``tone_frequency(preset.id)`` follows, lasting 0.25 s plus 10 ms per
    character of text (capped at 2 s).
    """
    if not text:
        raise ValueError("text must be non-empty")
    payload = _SEP.join((preset.id, text_hash(text), language)).encode("utf-8")
    if len(payload) > 0xFFFF:
        raise ValueError("preset id too long for the mock header")
    header = MOCK_MAGIC + len(payload).to_bytes(2, "big") + payload
    seconds = min(2.0, 0.25 + 0.01 * len(text))
    t = np.arange(int(seconds * rate), dtype=np.float64) / rate
    tone = 0.5 * np.sin(2 * np.pi * tone_frequency(preset.id) * t)
    return AudioClip(np.concatenate([_bytes_to_samples(header), tone]), rate, f"mock:{preset.id}")


def decode_mock(clip: AudioClip) -> MockPayload:
    head = _samples_to_bytes(clip.samples[:6])
    if head[:4] != MOCK_MAGIC:
        raise AudioError("clip has no mock TTS header")
    size = int.from_bytes(head[4:6], "big")
    payload = _samples_to_bytes(clip.samples[6:6 + size])
    if len(payload) != size:
        raise AudioError("truncated mock TTS header")
    parts = payload.decode("utf-8").split(_SEP)
    if len(parts) != 3:
        raise AudioError("malformed mock TTS payload")
    return MockPayload(*parts)


def mock_tone(clip: AudioClip) -> np.ndarray:
    """The tone part of a mock clip (everything after the header)."""
    head = _samples_to_bytes(clip.samples[:6])
    return clip.samples[6 + int.from_bytes(head[4:6], "big"):]


class MockTts:
    parallel_safe = True

    def __init__(self, rate: int = DEFAULT_RATE) -> None:
        self.rate = rate

    def synthesize(self, preset: PresetVoiceEntry, text: str, language: str) -> AudioClip:
        return synthesize_mock(preset, text, language, self.rate)


# --------------------------------------------------------------------------- external command


PLACEHOLDERS = ("{preset_audio}", "{text}", "{language}", "{out}")


def render_command(template: str, values: dict[str, str]) -> list[str]:
    """Split the template shell-style, then substitute placeholders inside each
    argument. Substituted values never get re-split, so text with spaces or
    quotes stays one argument."""
    argv = shlex.split(template)
    if not argv:
        raise ValueError("empty command template")
    out = []
    for arg in argv:
        for key, value in values.items():
            arg = arg.replace("{" + key + "}", value)
        out.append(arg)
    return out


def synthesize_external(
    command_template: str,
    preset: PresetVoiceEntry,
    text: str,
    language: str,
    timeout: float = 120.0,
    preset_audio: Union[str, Path, None] = None,
) -> AudioClip:
    """Run an external TTS program and read the WAV it writes to ``{out}``.

    Raises ExternalFailure (missing program or nonzero exit, with captured
    output), ExternalTimeout, or ExternalOutputError (no readable WAV).
    """
    audio = str(preset_audio if preset_audio is not None else preset.audio_path)
    with tempfile.TemporaryDirectory(prefix="pvm-tts-") as tmp:
        out = Path(tmp) / "out.wav"
        argv = render_command(command_template, {
            "preset_audio": audio, "text": text, "language": language, "out": str(out),
        })
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, stdin=subprocess.DEVNULL)
        except subprocess.TimeoutExpired as exc:
            raise ExternalTimeout(f"TTS command exceeded {timeout:g}s: {shlex.join(argv)}", timeout, argv) from exc
        except OSError as exc:
            raise ExternalFailure(f"cannot start TTS command {argv[0]!r}: {exc}", command=argv) from exc
        if proc.returncode != 0:
            raise ExternalFailure(
                f"TTS command exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}",
                proc.returncode, proc.stdout, proc.stderr, argv,
            )
        if not out.is_file():
            raise ExternalOutputError(f"TTS command produced no file at {{out}} ({shlex.join(argv)})")
        try:
            return read_wav(out, label=f"external:{preset.id}")
        except AudioError as exc:
            raise ExternalOutputError(f"TTS output is not a readable WAV: {exc}") from exc


class ExternalTts:
    def __init__(
        self,
        command_template: str,
        timeout: float = 120.0,
        resolve_audio: Optional[Callable[[PresetVoiceEntry], Path]] = None,
        parallel_safe: bool = False,
    ) -> None:
        self.command_template = command_template
        self.timeout = timeout
        self.resolve_audio = resolve_audio
        self.parallel_safe = parallel_safe

    def synthesize(self, preset: PresetVoiceEntry, text: str, language: str) -> AudioClip:
        audio = self.resolve_audio(preset) if self.resolve_audio is not None else None
        return synthesize_external(self.command_template, preset, text, language, self.timeout, audio)
