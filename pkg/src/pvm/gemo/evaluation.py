"""Confusion-matrix evaluation and the per-emotion precision / per-classifier
accuracy tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .hierarchy import EMOTION_LABELS
from .softmax import SoftmaxModel


@dataclass(frozen=True)
class EvalReport:
    labels: tuple[str, ...]
    confusion: np.ndarray  # rows = true class, columns = predicted class
    accuracy: float  # percent
    precision: np.ndarray  # fraction per class; 0 where the class was never predicted
    recall: np.ndarray  # fraction per class; 0 where the class never occurs

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def precision_of(self, label: str) -> float:
        return float(self.precision[self.labels.index(label)])

    def recall_of(self, label: str) -> float:
        return float(self.recall[self.labels.index(label)])

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "accuracy": self.accuracy,
            "precision": dict(zip(self.labels, self.precision.tolist())),
            "recall": dict(zip(self.labels, self.recall.tolist())),
            "confusion": self.confusion.tolist(),
        }


def confusion_report(y_true: Sequence[str], y_pred: Sequence[str], labels: Sequence[str]) -> EvalReport:
    labels = tuple(labels)
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    if not y_true:
        raise ValueError("cannot evaluate an empty test set")
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[index[t], index[p]] += 1
    diag = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0)
    actual = confusion.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, diag / predicted, 0.0)
        recall = np.where(actual > 0, diag / actual, 0.0)
    accuracy = 100.0 * diag.sum() / confusion.sum()
    return EvalReport(labels, confusion, float(accuracy), precision, recall)


def evaluate(model: SoftmaxModel, x: np.ndarray, y: Sequence[str]) -> EvalReport:
    return confusion_report(list(y), model.predict_labels(np.atleast_2d(x)), model.labels)


# --------------------------------------------------------------------------- tables


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    fmt = lambda r: " | ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule, *(fmt(r) for r in rows)]) + "\n"


def precision_rows(columns: Mapping[str, EvalReport], emotions: Sequence[str] = EMOTION_LABELS) -> list[list[str]]:
    """One row per emotion, one precision column per report (two decimals)."""
    return [[emotion, *(f"{report.precision_of(emotion):.2f}" for report in columns.values())]
            for emotion in emotions]


def accuracy_rows(classifiers: Mapping[str, EvalReport]) -> list[list[str]]:
    return [[name, f"{report.accuracy:.2f}"] for name, report in classifiers.items()]


def render_precision_table(columns: Mapping[str, EvalReport]) -> str:
    """Emotion-by-classifier precision table, e.g. columns ``Male-Emo`` / ``Female-Emo``."""
    return _table(["Emotions", *columns.keys()], precision_rows(columns))


def render_accuracy_table(classifiers: Mapping[str, EvalReport]) -> str:
    return _table(["Classifier", "Accuracy"], accuracy_rows(classifiers))


def render_class_report(report: EvalReport) -> str:
    rows = [[label, f"{p:.2f}", f"{r:.2f}", str(int(n))]
            for label, p, r, n in zip(report.labels, report.precision, report.recall, report.confusion.sum(axis=1))]
    body = _table(["Class", "Precision", "Recall", "Support"], rows)
    return body + f"Accuracy: {report.accuracy:.2f} ({report.total} samples)\n"


def precision_csv(columns: Mapping[str, EvalReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["emotion", *columns.keys()])
    writer.writerows(precision_rows(columns))
    return buffer.getvalue()


def accuracy_csv(classifiers: Mapping[str, EvalReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["classifier", "accuracy"])
    writer.writerows(accuracy_rows(classifiers))
    return buffer.getvalue()


def class_report_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["class", "precision", "recall", "support"])
    for label, p, r, n in zip(report.labels, report.precision, report.recall, report.confusion.sum(axis=1)):
        writer.writerow([label, f"{p:.4f}", f"{r:.4f}", int(n)])
    writer.writerow(["accuracy", f"{report.accuracy:.4f}", "", report.total])
    return buffer.getvalue()
