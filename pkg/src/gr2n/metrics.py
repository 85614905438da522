"""Relation recognition metrics: top-1 accuracy, per-class recall and mAP.

All functions take flat arrays over labeled pairs, in a fixed pair order.
That order only matters for mAP tie-breaking: pairs with equal scores keep
their given order (stable sort).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)


def accuracy(predicted, gold) -> float:
    predicted = np.asarray(predicted)
    gold = np.asarray(gold)
    if gold.size == 0:
        raise ValueError("accuracy of an empty label set is undefined")
    if predicted.shape != gold.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {gold.shape}")
    return float(np.mean(predicted == gold))


def per_class_recall(predicted, gold, num_classes: int) -> np.ndarray:
    """Recall per class; NaN for classes absent from ``gold``."""
    predicted = np.asarray(predicted)
    gold = np.asarray(gold)
    out = np.full(num_classes, np.nan)
    for k in range(num_classes):
        pos = gold == k
        if pos.any():
            out[k] = float(np.mean(predicted[pos] == k))
    return out


def average_precision(scores, positive) -> float:
    """Mean of precision@rank over the ranks of the positives, scores descending."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if not positive.any():
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = positive[order]
    ranks = np.flatnonzero(hits) + 1
    precision_at_hits = np.arange(1, len(ranks) + 1) / ranks
    return float(precision_at_hits.mean())


def mean_average_precision(probabilities, gold) -> float:
    """mAP over classes with at least one positive; ``probabilities`` is (P, K)."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    gold = np.asarray(gold)
    if probabilities.ndim != 2 or probabilities.shape[0] != gold.shape[0]:
        raise ValueError(f"expected ({gold.shape[0]}, K) scores, got {probabilities.shape}")
    aps = []
    for k in range(probabilities.shape[1]):
        positive = gold == k
        if not positive.any():
            log.info("class %d has no positives; excluded from mAP", k)
            continue
        aps.append(average_precision(probabilities[:, k], positive))
    if not aps:
        raise ValueError("no class has a positive example")
    return float(np.mean(aps))


@dataclass
class MetricsReport:
    accuracy: float
    per_class_recall: list[float | None]
    mean_average_precision: float
    consistency_violation_rate: float | None = None
    loss_curve: list[tuple[int, float]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    extra: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_curve"] = [[int(i), float(v)] for i, v in self.loss_curve]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["loss_curve"] = [(int(i), float(v)) for i, v in d.get("loss_curve", [])]
        return cls(**d)

    def write(self, out_dir: str) -> None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        with open(os.path.join(out_dir, "metrics.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            w.writerow(["accuracy", repr(self.accuracy)])
            w.writerow(["mAP", repr(self.mean_average_precision)])
            if self.consistency_violation_rate is not None:
                w.writerow(["consistency_violation_rate", repr(self.consistency_violation_rate)])
            for k, r in enumerate(self.per_class_recall):
                w.writerow([f"recall_{k}", "" if r is None else repr(r)])
            for name, v in self.timings.items():
                w.writerow([f"time_{name}", repr(v)])
            for name, v in self.extra.items():
                w.writerow([name, repr(v)])
        with open(os.path.join(out_dir, "loss_curve.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "loss"])
            for i, v in self.loss_curve:
                w.writerow([i, repr(v)])


def recall_list(recall: np.ndarray) -> list[float | None]:
    return [None if math.isnan(r) else float(r) for r in recall]
