"""Feature datasets built from a curated gender-emotion layout."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ..audio import AudioError, StftConfig, read_wav
from ..curation import layout_samples
from ..labels import Gender
from .features import clip_features
from .hierarchy import EMOTION_LABELS, GENDER_LABELS, TARGETS

log = logging.getLogger(__name__)


@dataclass
class FeatureDataset:
    x: np.ndarray
    y: list[str]
    paths: list[Path]
    labels: tuple[str, ...]

    def subset(self, idx: np.ndarray) -> "FeatureDataset":
        return FeatureDataset(self.x[idx], [self.y[i] for i in idx], [self.paths[i] for i in idx], self.labels)


def load_target_dataset(
    layout: Union[str, Path], target: str, config: StftConfig = StftConfig()
) -> FeatureDataset:
    """Featurise the files a given classifier trains on.

    ``gender`` uses every file labelled by its gender directory; the emotion
    targets use only that gender's files, labelled by emotion directory.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    gender = {"male-emotion": Gender.MALE, "female-emotion": Gender.FEMALE}.get(target)
    rows, labels_out, paths = [], [], []
    for path, g, e in layout_samples(layout, gender):
        try:
            rows.append(clip_features(read_wav(path), config))
        except AudioError as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        labels_out.append(g.value if target == "gender" else e.value)
        paths.append(path)
    dim = 2 * config.mel_bands + 2
    x = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    labels = GENDER_LABELS if target == "gender" else EMOTION_LABELS
    return FeatureDataset(x, labels_out, paths, labels)
