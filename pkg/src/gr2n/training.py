"""Model construction, the training loop, evaluation and checkpoints."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import KINDS as BASELINE_KINDS
from .baselines import BaselineConfig, GcnModel, GgnnModel, PairModel
from .core import tensor as T
from .core.adam import AdamState
from .data import Batch, Scene, class_weights, collate, make_batches, pad_scene
from .metrics import MetricsReport, accuracy, mean_average_precision, per_class_recall, recall_list
from .model import Gr2nConfig, Gr2nModel, argmax_classes, batch_loss, train_step
from .synth import ScenarioSpec, check_consistency

log = logging.getLogger(__name__)

MODEL_KINDS = ("gr2n",) + BASELINE_KINDS
LOSS_GRID = (0, 10, 50, 100, 500, 1000, 5000)
CHECKPOINT_VERSION = 1

_BASELINES = {"pair": PairModel, "gcn": GcnModel, "ggnn": GgnnModel}


def build_model(kind: str, F: int, K: int, seed: int, **options):
    """A fresh model of ``kind``; ``options`` go to its config (T, hidden, layers, ...)."""
    if kind == "gr2n":
        return Gr2nModel(Gr2nConfig(F=F, K=K, **options), seed)
    if kind in _BASELINES:
        return _BASELINES[kind](BaselineConfig(F=F, K=K, **options), seed)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# --------------------------------------------------------------------------
# checkpoints


def checkpoint_dict(model) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "config": model.config_dict(),
        "parameters": {
            name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()} for name, t in model.params.items()
        },
    }


def save_checkpoint(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(model), fh)


def model_from_checkpoint(doc: dict):
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    cfg = dict(doc["config"])
    kind = doc.get("kind", "gr2n")
    F, K = cfg.pop("F"), cfg.pop("K")
    model = build_model(kind, F, K, seed=0, **cfg)
    params = doc["parameters"]
    if set(params) != set(model.params.names()):
        raise ValueError(f"checkpoint parameters {sorted(params)} do not match {kind} model")
    for name, entry in params.items():
        shape = tuple(entry["shape"])
        if shape != model.params[name].shape:
            raise ValueError(f"parameter {name}: checkpoint shape {shape} != config shape {model.params[name].shape}")
        model.params.set(name, np.array(entry["data"], dtype=np.float64).reshape(shape))
    return model


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_checkpoint(json.load(fh))


# --------------------------------------------------------------------------
# training


@dataclass
class TrainLog:
    batch_loss: list[tuple[int, float]] = field(default_factory=list)
    train_loss: list[tuple[int, float]] = field(default_factory=list)
    iterations: int = 0
    seconds: float = 0.0


def dataset_loss(model, scenes: Sequence[Scene], n_max: int, weights=None, chunk: int = 256) -> float:
    """Loss over a whole scene list: mean over scenes of each scene's pair-averaged loss."""
    total, count = 0.0, 0
    for start in range(0, len(scenes), chunk):
        part = [s for s in scenes[start : start + chunk] if s.labels]
        if not part:
            continue
        batch = collate([pad_scene(s, n_max) for s in part])
        total += batch_loss(model, batch, weights).item() * len(part)
        count += len(part)
    return total / count


def fit(
    model,
    train: Sequence[Scene],
    *,
    epochs: int = 10,
    iterations: int | None = None,
    batch_size: int = 32,
    n_max: int | None = None,
    lr: float = 1e-2,
    seed: int = 0,
    reweight: bool = True,
    log_grid: Sequence[int] = LOSS_GRID,
    track_train_loss: bool = True,
) -> TrainLog:
    """Adam training over shuffled padded batches.

    Runs ``iterations`` updates when given (cycling epochs), else ``epochs``
    passes. The full-training-set loss is recorded at each iteration in
    ``log_grid`` (the value after that many updates); the pre-update batch
    loss is recorded at every iteration.
    """
    if n_max is None:
        n_max = max(s.n_real for s in train)
    weights = class_weights(train, model.num_classes) if reweight else None
    adam = AdamState(lr=lr)
    grid = set(log_grid)
    out = TrainLog()
    total = iterations if iterations is not None else None
    it = 0
    epoch = 0
    t0 = time.perf_counter()
    while True:
        if total is None and epoch >= epochs:
            break
        for padded in make_batches(train, batch_size, n_max, seed + epoch):
            if total is not None and it >= total:
                break
            if track_train_loss and it in grid:
                out.train_loss.append((it, dataset_loss(model, train, n_max, weights)))
            batch = collate(padded)
            if batch.n_labeled() == 0:
                continue
            out.batch_loss.append((it, train_step(model, batch, weights, adam)))
            it += 1
        epoch += 1
        if total is not None and it >= total:
            break
    if track_train_loss and it in grid:
        out.train_loss.append((it, dataset_loss(model, train, n_max, weights)))
    out.iterations = it
    out.seconds = time.perf_counter() - t0
    return out


# --------------------------------------------------------------------------
# evaluation


@dataclass
class Predictions:
    """Flattened labeled-pair outputs plus dense per-scene class maps."""

    probabilities: np.ndarray  # (P, K) over labeled pairs
    predicted: np.ndarray  # (P,)
    gold: np.ndarray  # (P,)
    scene_classes: list[np.ndarray]  # per scene (n, n) predicted classes, -1 on the diagonal


def predict_scenes(model, scenes: Sequence[Scene], n_max: int | None = None, chunk: int = 256) -> Predictions:
    if n_max is None:
        n_max = max(s.n_real for s in scenes)
    probs, pred, gold, per_scene = [], [], [], []
    for start in range(0, len(scenes), chunk):
        part = scenes[start : start + chunk]
        batch = collate([pad_scene(s, n_max) for s in part])
        p = model.probabilities(batch)
        classes = argmax_classes(p, batch.valid_pairs)
        b, i, j = np.nonzero(batch.pair_mask)  # row-major: scene, then i, then j
        probs.append(p[b, i, j])
        pred.append(classes[b, i, j])
        gold.append(batch.labels[b, i, j])
        for k, s in enumerate(part):
            per_scene.append(classes[k, : s.n_real, : s.n_real])
    K = model.num_classes
    return Predictions(
        np.concatenate(probs) if probs else np.zeros((0, K)),
        np.concatenate(pred) if pred else np.zeros(0, dtype=np.int64),
        np.concatenate(gold) if gold else np.zeros(0, dtype=np.int64),
        per_scene,
    )


def consistency_rate(scene_classes: Sequence[np.ndarray], spec: ScenarioSpec) -> float:
    """Violated implications / checked implications, pooled over scenes."""
    bad = checked = 0
    for classes in scene_classes:
        rep = check_consistency(classes, spec)
        bad += rep.violations
        checked += rep.checked
    return bad / checked if checked else 0.0


def evaluate(model, scenes: Sequence[Scene], spec: ScenarioSpec | None = None, n_max: int | None = None) -> MetricsReport:
    t0 = time.perf_counter()
    out = predict_scenes(model, scenes, n_max)
    elapsed = time.perf_counter() - t0
    K = model.num_classes
    return MetricsReport(
        accuracy=accuracy(out.predicted, out.gold),
        per_class_recall=recall_list(per_class_recall(out.predicted, out.gold, K)),
        mean_average_precision=mean_average_precision(out.probabilities, out.gold),
        consistency_violation_rate=consistency_rate(out.scene_classes, spec) if spec is not None else None,
        timings={"eval_seconds": elapsed},
    )


def as_batch_of(scenes: Sequence[Scene], n_max: int) -> Batch:
    return collate([pad_scene(s, n_max) for s in scenes])


def gradient_check(model, batch: Batch, weights=None, eps: float = 1e-5) -> float:
    """Max norm-wise relative error between tape gradients and central differences."""
    from .core.gradcheck import finite_diff_grad, max_relative_error

    model.params.zero_grad()
    with T.Tape() as tape:
        value = batch_loss(model, batch, weights)
    T.backward(tape, value, model.params)
    analytic = {name: t.grad.copy() for name, t in model.params.items()}
    numeric = finite_diff_grad(lambda _: batch_loss(model, batch, weights).item(), model.params, eps)
    return max_relative_error(analytic, numeric)
