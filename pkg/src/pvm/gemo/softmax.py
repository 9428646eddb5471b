"""Multinomial logistic regression trained by mini-batch gradient descent.

Features are z-scored with training-set statistics stored inside the model, so
callers always pass raw feature vectors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

MODEL_MAGIC = b"PVM-SMX1"
DEFAULT_L2 = 1e-4


class ModelError(ValueError):
    pass


class TrainingError(ValueError):
    pass


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


@dataclass(eq=False)
class SoftmaxModel:
    weights: np.ndarray  # [classes x dim]
    bias: np.ndarray  # [classes]
    labels: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(self.feature_std, dtype=np.float64)
        self.labels = tuple(self.labels)
        if not self.labels or len(set(self.labels)) != len(self.labels):
            raise ModelError("class labels must be non-empty and unique")
        c, d = self.weights.shape
        if c != len(self.labels) or self.bias.shape != (c,):
            raise ModelError("weights/bias do not match the label count")
        if self.feature_mean.shape != (d,) or self.feature_std.shape != (d,):
            raise ModelError("normalisation stats do not match the feature dimension")
        for arr in (self.weights, self.bias, self.feature_mean, self.feature_std):
            if not np.all(np.isfinite(arr)):
                raise ModelError("model parameters must be finite")

    @classmethod
    def zeros(cls, labels: Sequence[str], dim: int) -> "SoftmaxModel":
        return cls(np.zeros((len(labels), dim)), np.zeros(len(labels)), tuple(labels),
                   np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ModelError(f"feature dimension {x.shape[-1]} does not match model dimension {self.dim}")
        return x

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (self._check(x) - self.feature_mean) / self.feature_std

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.normalize(x) @ self.weights.T + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def predict_index(self, x: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest-index tie-break
        return np.argmax(self.logits(x), axis=-1)

    def predict_labels(self, x: np.ndarray) -> list[str]:
        return [self.labels[i] for i in np.atleast_1d(self.predict_index(x))]

    def copy(self) -> "SoftmaxModel":
        return SoftmaxModel(self.weights.copy(), self.bias.copy(), self.labels,
                            self.feature_mean.copy(), self.feature_std.copy(), dict(self.meta))

    def same_parameters(self, other: "SoftmaxModel") -> bool:
        """Bit-identical parameters and labels."""
        return (self.labels == other.labels
                and all(np.array_equal(a, b) for a, b in (
                    (self.weights, other.weights), (self.bias, other.bias),
                    (self.feature_mean, other.feature_mean), (self.feature_std, other.feature_std))))


def predict(model: SoftmaxModel, x: np.ndarray) -> tuple[str, np.ndarray]:
    """Label and class-probability vector for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ModelError("predict expects a single feature vector")
    logits = model.logits(x)
    return model.labels[int(np.argmax(logits))], softmax(logits)


# --------------------------------------------------------------------------- loss / gradient


@dataclass
class Gradient:
    loss: float
    weights: np.ndarray
    bias: np.ndarray


def gradient(model: SoftmaxModel, x: np.ndarray, y: np.ndarray, l2: float = DEFAULT_L2) -> Gradient:
    """Mean cross-entropy plus ``0.5 * l2 * ||W||^2`` and its exact gradient.

    ``y`` holds integer class indices. The bias is not penalised.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] == 0:
        raise ModelError("gradient needs a non-empty batch")
    if y.shape != (x.shape[0],):
        raise ModelError("labels must be one index per row")
    z = model.normalize(x)
    logits = z @ model.weights.T + model.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    n = x.shape[0]
    rows = np.arange(n)
    loss = -log_probs[rows, y].mean() + 0.5 * l2 * float(np.sum(model.weights ** 2))

    delta = np.exp(log_probs)
    delta[rows, y] -= 1.0
    delta /= n
    return Gradient(float(loss), delta.T @ z + l2 * model.weights, delta.sum(axis=0))


def loss(model: SoftmaxModel, x: np.ndarray, y: np.ndarray, l2: float = DEFAULT_L2) -> float:
    return gradient(model, x, y, l2).loss


# --------------------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    split: tuple[int, int, int] = (60, 20, 20)  # train, test, validation
    batch_size: int = 32
    epochs: int = 30
    learning_rate: float = 0.01
    lr_drop_epoch: int = 20
    lr_after_drop: float = 0.001
    l2: float = DEFAULT_L2
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" | "adam"

    def __post_init__(self) -> None:
        if len(self.split) != 3 or sum(self.split) != 100 or min(self.split) < 0:
            raise ValueError(f"split must be three non-negative parts summing to 100, got {self.split}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def rate(self, epoch: int) -> float:
        return self.learning_rate if epoch < self.lr_drop_epoch else self.lr_after_drop

    @classmethod
    def for_target(cls, target: str, **overrides) -> "TrainConfig":
        epochs = 20 if target == "gender" else 30
        return cls(**{"epochs": epochs, **overrides})


@dataclass
class TrainResult:
    model: SoftmaxModel
    initial_loss: float
    train_loss: list[float]
    val_loss: list[float]

    @property
    def final_train_loss(self) -> float:
        return self.train_loss[-1]

    @property
    def final_val_loss(self) -> Optional[float]:
        return self.val_loss[-1] if self.val_loss else None


def encode_labels(y: Sequence[str], labels: Sequence[str]) -> np.ndarray:
    lookup = {label: i for i, label in enumerate(labels)}
    try:
        return np.array([lookup[v] for v in y], dtype=np.intp)
    except KeyError as exc:
        raise TrainingError(f"label {exc.args[0]!r} not among {list(labels)}") from None


def split_dataset(y: Sequence[str], split: tuple[int, int, int] = (60, 20, 20), seed: int = 0):
    """Stratified (train, test, validation) index arrays, deterministic in ``seed``.

    Every class keeps at least one training sample.
    """
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    parts: tuple[list, list, list] = ([], [], [])
    for label in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(idx.size * split[1] / 100))
        n_val = int(round(idx.size * split[2] / 100))
        n_train = max(1, idx.size - n_test - n_val)
        n_test = min(n_test, idx.size - n_train)
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_test])
        parts[2].extend(idx[n_train + n_test:])
    return tuple(np.sort(np.array(p, dtype=np.intp)) for p in parts)


def train(
    x: np.ndarray,
    y: Sequence[str],
    config: TrainConfig = TrainConfig(),
    labels: Optional[Sequence[str]] = None,
    validation: Optional[tuple[np.ndarray, Sequence[str]]] = None,
) -> TrainResult:
    """Fit a softmax model on all of ``x``.

    Parameters start at zero; the only randomness is the per-epoch shuffle
    drawn from ``config.seed``, so identical inputs give identical parameters.
    ``validation`` is scored after each epoch but never drives updates.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(y):
        raise TrainingError("x must be [samples x dim] with one label per row")
    labels = tuple(labels) if labels is not None else tuple(sorted(set(y)))
    targets = encode_labels(y, labels)
    present = np.bincount(targets, minlength=len(labels))
    if len(labels) < 2 or np.count_nonzero(present) < 2:
        raise TrainingError("training needs at least two classes")
    if np.any(present == 0):
        missing = [labels[i] for i in np.flatnonzero(present == 0)]
        raise TrainingError(f"no training samples for classes {missing}")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    model = SoftmaxModel(np.zeros((len(labels), x.shape[1])), np.zeros(len(labels)), labels, mean, std)

    val = None
    if validation is not None and len(validation[1]) > 0:
        val = (np.asarray(validation[0], dtype=np.float64), encode_labels(validation[1], labels))

    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    initial = loss(model, x, targets, config.l2)
    train_hist: list[float] = []
    val_hist: list[float] = []
    adam = _Adam(model) if config.optimizer == "adam" else None
    for epoch in range(config.epochs):
        lr = config.rate(epoch)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            grad = gradient(model, x[batch], targets[batch], config.l2)
            if adam is not None:
                adam.step(model, grad, lr)
            else:
                model.weights -= lr * grad.weights
                model.bias -= lr * grad.bias
        train_hist.append(loss(model, x, targets, config.l2))
        if val is not None:
            val_hist.append(loss(model, val[0], val[1], config.l2))
    model.meta = {"epochs": config.epochs, "seed": config.seed, "l2": config.l2,
                  "batch_size": config.batch_size, "optimizer": config.optimizer}
    return TrainResult(model, initial, train_hist, val_hist)


class _Adam:
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    def __init__(self, model: SoftmaxModel) -> None:
        self.t = 0
        self.m = [np.zeros_like(model.weights), np.zeros_like(model.bias)]
        self.v = [np.zeros_like(model.weights), np.zeros_like(model.bias)]

    def step(self, model: SoftmaxModel, grad: Gradient, lr: float) -> None:
        self.t += 1
        for i, (param, g) in enumerate(((model.weights, grad.weights), (model.bias, grad.bias))):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1 - self.beta2 ** self.t)
            param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


# --------------------------------------------------------------------------- persistence


def dumps_model(model: SoftmaxModel) -> bytes:
    """Serialise as ``PVM-SMX1`` | u32 header length | JSON header | float64 LE arrays.

    Arrays follow the header in this order: feature mean [D], feature std [D],
    weights [C x D] row-major, bias [C].
    """
    header = json.dumps({
        "labels": list(model.labels),
        "classes": model.n_classes,
        "dim": model.dim,
        "meta": model.meta,
    }, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (
        model.feature_mean, model.feature_std, model.weights, model.bias))
    return MODEL_MAGIC + struct.pack("<I", len(header)) + header + body


def loads_model(data: bytes) -> SoftmaxModel:
    if data[:8] != MODEL_MAGIC:
        raise ModelError("not a PVM-SMX1 model file (bad magic)")
    if len(data) < 12:
        raise ModelError("truncated model header")
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
        c, d, labels = int(header["classes"]), int(header["dim"]), header["labels"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ModelError(f"corrupt model header: {exc}") from exc
    expected = 8 * (2 * d + c * d + c)
    body = data[12 + hlen:]
    if len(body) != expected:
        raise ModelError(f"model body has {len(body)} bytes, expected {expected}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    mean, std = flat[:d], flat[d:2 * d]
    weights = flat[2 * d:2 * d + c * d].reshape(c, d)
    bias = flat[2 * d + c * d:]
    return SoftmaxModel(weights, bias, tuple(labels), mean, std, header.get("meta", {}))


def save_model(model: SoftmaxModel, path: Union[str, Path]) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path: Union[str, Path]) -> SoftmaxModel:
    return loads_model(Path(path).read_bytes())
