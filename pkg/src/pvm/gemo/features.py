from __future__ import annotations

import numpy as np

from ..audio import AudioClip, AudioError, MelSpectrogram, StftConfig, mel_spectrogram


def feature_dim(mel_bands: int) -> int:
    return 2 * mel_bands + 2


def extract_features(mel: MelSpectrogram) -> np.ndarray:
    """Summary statistics of log(1 + energy).

    Layout: per-band means (B), per-band standard deviations (B), then the
    mean and standard deviation over every cell. Standard deviations are
    population (ddof=0), so a single frame gives zeros.
    """
    values = np.asarray(mel.values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise AudioError("spectrogram has no frames")
    logged = np.log1p(values)
    return np.concatenate([
        logged.mean(axis=0),
        logged.std(axis=0),
        [logged.mean(), logged.std()],
    ])


def clip_features(clip: AudioClip, config: StftConfig = StftConfig()) -> np.ndarray:
    return extract_features(mel_spectrogram(clip, config))
