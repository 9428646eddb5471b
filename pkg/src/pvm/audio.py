"""Deterministic DSP primitives: resampling, STFT, mel spectrograms, loudness, pitch.

Everything here is a pure function of its inputs. Arrays are float64 throughout.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image
from scipy.io import wavfile

PathLike = Union[str, Path]

DEFAULT_RATE = 22050
SILENCE_DBFS = float("-inf")
YIN_THRESHOLD = 0.15
UNVOICED_BELOW = 0.1


class AudioError(ValueError):
    """Raised for empty or malformed audio and invalid analysis settings."""


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    label: Optional[str] = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples contain non-finite values")
        if int(self.sample_rate) <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, factor: float) -> "AudioClip":
        return AudioClip(self.samples * factor, self.sample_rate, self.label)


def _require_samples(clip: AudioClip) -> None:
    if len(clip) == 0:
        raise AudioError("clip is empty")


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 2048
    hop: int = 512
    window: str = "hann"
    mel_bands: int = 128
    fmin: float = 0.0
    fmax: Optional[float] = None  # None means target_rate / 2
    target_rate: int = DEFAULT_RATE

    @property
    def upper_freq(self) -> float:
        return self.target_rate / 2 if self.fmax is None else float(self.fmax)

    def validate(self) -> None:
        if self.fft_size <= 0 or not 0 < self.hop <= self.fft_size:
            raise AudioError(f"need 0 < hop <= fft_size, got hop={self.hop} fft_size={self.fft_size}")
        if self.window != "hann":
            raise AudioError(f"unsupported window {self.window!r}")
        if self.mel_bands < 1:
            raise AudioError("mel_bands must be >= 1")
        if self.target_rate <= 0:
            raise AudioError("target_rate must be positive")
        if not 0 <= self.fmin < self.upper_freq <= self.target_rate / 2:
            raise AudioError(
                f"need 0 <= fmin < fmax <= target_rate/2, got fmin={self.fmin} fmax={self.upper_freq}"
            )

    def frame_count(self, n_samples: int) -> int:
        padded = n_samples + 2 * (self.fft_size // 2)
        return 1 + (padded - self.fft_size) // self.hop


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    values: np.ndarray  # [frames x mel_bands]
    config: StftConfig = field(default_factory=StftConfig)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def bands(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PitchEstimate:
    median_f0: Optional[float]  # None when unvoiced
    voiced_fraction: float

    @property
    def voiced(self) -> bool:
        return self.median_f0 is not None


# --------------------------------------------------------------------------- I/O


def read_wav(path, label: Optional[str] = None) -> AudioClip:
    """Load a WAV file (path or binary file object) as a mono float clip.

    Integer PCM is scaled to [-1, 1); float data is taken as-is. Multichannel
    audio is downmixed by averaging channels.
    """
    try:
        rate, data = wavfile.read(path if hasattr(path, "read") else str(path))
    except (ValueError, EOFError, OSError, struct.error) as exc:
        raise AudioError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif np.issubdtype(data.dtype, np.floating):
        samples = data.astype(np.float64)
    else:
        raise AudioError(f"unsupported WAV sample type {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"WAV file {path} has no samples")
    return AudioClip(samples, rate, label if label is not None else str(path))


def write_wav(path, clip: AudioClip, float32: bool = False) -> None:
    """Write a clip as 16-bit PCM (default) or 32-bit float WAV to a path or binary file object."""
    if float32:
        data = clip.samples.astype(np.float32)
    else:
        data = np.round(np.clip(clip.samples, -1.0, 32767 / 32768) * 32768.0).astype(np.int16)
    wavfile.write(path if hasattr(path, "write") else str(path), clip.sample_rate, data)


# --------------------------------------------------------------------------- resampling


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampler.

    Output sample k sits at time k / target_rate; samples past the last input
    sample hold the final value.
    """
    _require_samples(clip)
    if target_rate <= 0:
        raise AudioError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), target_rate, clip.label)
    n_out = max(1, int(round(len(clip) * target_rate / clip.sample_rate)))
    positions = np.arange(n_out, dtype=np.float64) * (clip.sample_rate / target_rate)
    out = np.interp(positions, np.arange(len(clip), dtype=np.float64), clip.samples)
    return AudioClip(out, target_rate, clip.label)


# --------------------------------------------------------------------------- STFT / mel


def hann_window(size: int) -> np.ndarray:
    """Periodic Hann window."""
    n = np.arange(size, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


def frame_signal(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    """Reflect-pad by fft_size // 2 on both ends and slice into overlapping frames."""
    pad = config.fft_size // 2
    padded = np.pad(samples, pad, mode="reflect") if samples.size > 1 else np.pad(samples, pad, mode="edge")
    n_frames = config.frame_count(samples.size)
    idx = np.arange(config.fft_size)[None, :] + config.hop * np.arange(n_frames)[:, None]
    return padded[idx]


def _at_target_rate(clip: AudioClip, config: StftConfig) -> AudioClip:
    return clip if clip.sample_rate == config.target_rate else resample(clip, config.target_rate)


def stft(clip: AudioClip, config: StftConfig = StftConfig(), window: Optional[np.ndarray] = None) -> np.ndarray:
    """One-sided STFT, shape [frames x (fft_size // 2 + 1)], complex128.

    The clip is first resampled to ``config.target_rate``. ``window`` overrides
    the configured Hann window (used by tests to probe a rectangular window).
    """
    config.validate()
    _require_samples(clip)
    clip = _at_target_rate(clip, config)
    if window is None:
        window = hann_window(config.fft_size)
    elif window.shape != (config.fft_size,):
        raise AudioError(f"window must have length {config.fft_size}")
    frames = frame_signal(clip.samples, config) * window
    return np.fft.rfft(frames, n=config.fft_size, axis=1)


def hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    mel = freq / f_sp
    above = freq >= min_log_hz
    return np.where(above, min_log_mel + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mel)


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    freq = mel * f_sp
    above = mel >= min_log_mel
    return np.where(above, min_log_hz * np.exp(logstep * (np.maximum(mel, min_log_mel) - min_log_mel)), freq)


def mel_filterbank(config: StftConfig) -> np.ndarray:
    """Triangular, area-normalised mel filters, shape [mel_bands x (fft_size // 2 + 1)]."""
    config.validate()
    n_bins = config.fft_size // 2 + 1
    fft_freqs = np.linspace(0.0, config.target_rate / 2, n_bins)
    mel_points = np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.upper_freq), config.mel_bands + 2)
    hz_points = mel_to_hz(mel_points)
    widths = np.diff(hz_points)
    ramps = hz_points[:, None] - fft_freqs[None, :]

    weights = np.zeros((config.mel_bands, n_bins))
    for i in range(config.mel_bands):
        lower = -ramps[i] / widths[i]
        upper = ramps[i + 2] / widths[i + 1]
        weights[i] = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (hz_points[2:] - hz_points[:-2]))[:, None]
    return weights


def mel_spectrogram(clip: AudioClip, config: StftConfig = StftConfig()) -> MelSpectrogram:
    power = np.abs(stft(clip, config)) ** 2
    values = power @ mel_filterbank(config).T
    return MelSpectrogram(np.maximum(values, 0.0), config)


# --------------------------------------------------------------------------- loudness


def rms_dbfs(clip: AudioClip) -> float:
    """Whole-clip RMS level in dBFS; ``-inf`` for digital silence."""
    _require_samples(clip)
    rms = math.sqrt(float(np.mean(clip.samples ** 2)))
    if rms == 0.0:
        return SILENCE_DBFS
    return 20.0 * math.log10(rms)


# --------------------------------------------------------------------------- pitch


def _cmnd(frames: np.ndarray, tau_max: int) -> np.ndarray:
    """Cumulative mean normalised difference for each frame, shape [frames x (tau_max + 1)]."""
    length = frames.shape[1] - tau_max
    head = frames[:, :length]
    diff = np.zeros((frames.shape[0], tau_max + 1))
    for tau in range(1, tau_max + 1):
        delta = head - frames[:, tau:tau + length]
        diff[:, tau] = np.einsum("ij,ij->i", delta, delta)
    cumulative = np.cumsum(diff[:, 1:], axis=1)
    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    out = np.ones_like(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = diff[:, 1:] * taus / cumulative
    out[:, 1:] = np.where(cumulative > 0, ratio, 1.0)
    return out


def _pick_period(curve: np.ndarray, tau_min: int, tau_max: int, threshold: float) -> Optional[float]:
    tau = tau_min
    while tau <= tau_max:
        if curve[tau] < threshold:
            while tau + 1 <= tau_max and curve[tau + 1] < curve[tau]:
                tau += 1
            break
        tau += 1
    else:
        return None
    if tau_min < tau < tau_max:
        a, b, c = curve[tau - 1], curve[tau], curve[tau + 1]
        denom = a - 2 * b + c
        if denom > 0:
            return tau + 0.5 * (a - c) / denom
    return float(tau)


def estimate_pitch(
    clip: AudioClip,
    fmin: float = 75.0,
    fmax: float = 3000.0,
    frame_size: int = 2048,
    hop: int = 512,
    threshold: float = YIN_THRESHOLD,
) -> PitchEstimate:
    """Median F0 over voiced frames using a YIN-style difference function.

    A frame is voiced when its normalised difference dips below ``threshold``
    somewhere in the lag range implied by [fmin, fmax]. The clip counts as
    unvoiced when fewer than 10% of frames are voiced.
    """
    if not 0 < fmin < fmax <= clip.sample_rate / 2:
        raise AudioError(f"need 0 < fmin < fmax <= sample_rate/2, got [{fmin}, {fmax}] at {clip.sample_rate} Hz")
    tau_min = max(2, int(math.ceil(clip.sample_rate / fmax)))
    tau_max = int(math.floor(clip.sample_rate / fmin))
    if tau_max + 1 >= frame_size:
        raise AudioError(f"fmin={fmin} Hz needs lags beyond the {frame_size}-sample frame")
    n = len(clip)
    if n < frame_size + hop:
        raise AudioError(f"clip of {n} samples is shorter than two analysis frames")

    n_frames = 1 + (n - frame_size) // hop
    idx = np.arange(frame_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = clip.samples[idx]
    curves = _cmnd(frames, tau_max)

    f0s = []
    for curve in curves:
        period = _pick_period(curve, tau_min, tau_max, threshold)
        if period is not None:
            f0s.append(clip.sample_rate / period)
    voiced_fraction = len(f0s) / n_frames
    if voiced_fraction < UNVOICED_BELOW:
        return PitchEstimate(None, voiced_fraction)
    median = float(np.median(f0s))
    return PitchEstimate(min(max(median, fmin), fmax), voiced_fraction)


# --------------------------------------------------------------------------- images


def quantize_spectrogram(mel: MelSpectrogram) -> np.ndarray:
    """Map log10(1 + cell) linearly onto 0..255, per-file min-max.

    Returns a uint8 image [mel_bands x frames] with the lowest band on the
    bottom row. A constant matrix maps to all zeros.
    """
    if mel.values.size == 0:
        raise AudioError("spectrogram is empty")
    logged = np.log10(1.0 + mel.values)
    lo, hi = float(logged.min()), float(logged.max())
    if hi > lo:
        scaled = np.round((logged - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(logged)
    return np.flipud(scaled.T).astype(np.uint8)


def spectrogram_to_image(mel: MelSpectrogram) -> bytes:
    """Encode a spectrogram as an 8-bit grayscale PNG."""
    buffer = io.BytesIO()
    Image.fromarray(quantize_spectrogram(mel), mode="L").save(buffer, format="PNG")
    return buffer.getvalue()


def decode_image(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        if img.mode != "L":
            raise AudioError(f"expected 8-bit grayscale PNG, got mode {img.mode}")
        return np.asarray(img, dtype=np.uint8).copy()


def sine(freq: float, seconds: float, rate: int = DEFAULT_RATE, amplitude: float = 1.0, phase: float = 0.0) -> AudioClip:
    """Convenience tone generator for fixtures and the mock TTS backend."""
    t = np.arange(int(round(seconds * rate)), dtype=np.float64) / rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t + phase), rate)


def level_to_dbfs(clip: AudioClip, target_dbfs: float) -> AudioClip:
    """Scale a clip so its whole-file RMS lands on ``target_dbfs``."""
    current = rms_dbfs(clip)
    if current == SILENCE_DBFS:
        raise AudioError("cannot level a silent clip")
    return clip.scaled(10 ** ((target_dbfs - current) / 20.0))
