"""Classification accuracy and confusion summaries."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def accuracy(predictions: Sequence[int], truths: Sequence[int]) -> float:
    if len(predictions) != len(truths):
        raise ValueError(f"accuracy: {len(predictions)} predictions for {len(truths)} truths")
    if not truths:
        raise ValueError("accuracy: empty input")
    return float(np.mean(np.asarray(predictions) == np.asarray(truths)))


def confusion_matrix(predictions: Sequence[int], truths: Sequence[int], num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predictions; a prediction of -1 (no output) is dropped."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(predictions, truths):
        if 0 <= p < num_classes:
            cm[t, p] += 1
    return cm


def format_confusion(cm: np.ndarray) -> str:
    lines = ["topic  total  correct  acc"]
    for k, row in enumerate(cm):
        total = int(row.sum())
        acc = row[k] / total if total else float("nan")
        lines.append(f"{k:5d}  {total:5d}  {int(row[k]):7d}  {acc:.4f}")
    return "\n".join(lines)
