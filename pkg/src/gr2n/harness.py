"""Experiment configs and the gen-data / train / eval / gradcheck / bench commands.

Configs are JSON documents. A training config looks like::

    {
      "model": {"kind": "gr2n", "T": 1},
      "optimizer": {"lr": 0.01},
      "epochs": 20,
      "batch_size": 32,
      "n_max": 8,
      "seed": 0,
      "reweight": false,
      "data": {"train": "data/train.jsonl", "test": "data/test.jsonl"},
      "scenario": "data/scenario.json"
    }

``iterations`` may replace ``epochs``; ``data.val`` and ``scenario`` are
optional (the scenario enables the consistency metric).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bench import run_bench
from .data import Scene, as_batch, read_dataset, write_dataset
from .metrics import MetricsReport
from .synth import ScenarioSpec, default_scenario, generate_dataset
from .training import (
    MODEL_KINDS,
    build_model,
    evaluate,
    fit,
    gradient_check,
    load_checkpoint,
    save_checkpoint,
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_MODEL_OPTIONS = {
    "gr2n": {"T": int, "include_self_loops": bool},
    "pair": {"hidden": int},
    "gcn": {"hidden": int, "layers": int},
    "ggnn": {"hidden": int, "T": int},
}


def _get(d: dict, key: str, path: str, kind, default: Any = ..., check=None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}{key}", "required field missing")
        return default
    value = d[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{path}{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    if check is not None and not check(value):
        raise ConfigError(f"{path}{key}", f"invalid value {value!r}")
    return value


@dataclass
class ExperimentConfig:
    kind: str
    model_options: dict
    lr: float
    epochs: int
    iterations: int | None
    batch_size: int
    n_max: int | None
    seed: int
    reweight: bool
    train_path: str | None
    val_path: str | None
    test_path: str | None
    scenario_path: str | None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        model = _get(d, "model", "", dict, {"kind": "gr2n"})
        kind = _get(model, "kind", "model.", str, "gr2n", lambda k: k in MODEL_KINDS)
        options = {}
        for key, typ in _MODEL_OPTIONS[kind].items():
            if key in model:
                options[key] = _get(model, key, "model.", typ, check=lambda v: not isinstance(v, int) or v >= 0)
        unknown = set(model) - set(_MODEL_OPTIONS[kind]) - {"kind"}
        if unknown:
            raise ConfigError(f"model.{sorted(unknown)[0]}", f"unknown option for model kind {kind!r}")
        opt = _get(d, "optimizer", "", dict, {})
        data = _get(d, "data", "", dict, {})

        def path_of(key):
            p = _get(data, key, "data.", str, None)
            return None if p is None else os.path.join(base_dir, p)

        scenario = _get(d, "scenario", "", str, None)
        iterations = d.get("iterations")
        if iterations is not None:
            iterations = _get(d, "iterations", "", int, check=lambda v: v >= 0)
        return cls(
            kind=kind,
            model_options=options,
            lr=_get(opt, "lr", "optimizer.", float, 1e-2, lambda v: v > 0),
            epochs=_get(d, "epochs", "", int, 10, lambda v: v >= 0),
            iterations=iterations,
            batch_size=_get(d, "batch_size", "", int, 32, lambda v: v >= 1),
            n_max=_get(d, "n_max", "", int, None, lambda v: v >= 1) if d.get("n_max") is not None else None,
            seed=_get(d, "seed", "", int, check=lambda v: v >= 0),
            reweight=_get(d, "reweight", "", bool, False),
            train_path=path_of("train"),
            val_path=path_of("val"),
            test_path=path_of("test"),
            scenario_path=None if scenario is None else os.path.join(base_dir, scenario),
        )

    @classmethod
    def load(cls, path: str, seed: int | None = None) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<root>", f"invalid JSON: {exc.msg}") from None
        if seed is not None:
            doc["seed"] = seed
        return cls.from_dict(doc, os.path.dirname(os.path.abspath(path)))

    def require(self, attr: str, field_path: str) -> str:
        value = getattr(self, attr)
        if value is None:
            raise ConfigError(field_path, "required for this command")
        if not os.path.exists(value):
            raise ConfigError(field_path, f"file not found: {value}")
        return value

    def scenario(self) -> ScenarioSpec | None:
        if self.scenario_path is None:
            return None
        with open(self.require("scenario_path", "scenario"), encoding="utf-8") as fh:
            return ScenarioSpec.from_json(fh.read())


# --------------------------------------------------------------------------
# commands


def cmd_gendata(spec: ScenarioSpec | None, n: int, seed: int, out: str) -> dict[str, str]:
    """Write train/val/test JSONL files and the scenario document into ``out``."""
    spec = spec or default_scenario()
    splits = generate_dataset(spec, n, seed)
    os.makedirs(out, exist_ok=True)
    paths = {}
    for name, scenes in zip(("train", "val", "test"), splits):
        paths[name] = os.path.join(out, f"{name}.jsonl")
        write_dataset(scenes, paths[name], spec.num_classes, spec.class_names)
    paths["scenario"] = os.path.join(out, "scenario.json")
    with open(paths["scenario"], "w", encoding="utf-8") as fh:
        fh.write(spec.to_json())
    return paths


def _n_max(cfg: ExperimentConfig, *datasets) -> int:
    if cfg.n_max is not None:
        return cfg.n_max
    return max(s.n_real for ds in datasets if ds for s in ds)


def cmd_train(cfg: ExperimentConfig, out: str) -> MetricsReport:
    train = read_dataset(cfg.require("train_path", "data.train"))
    if not train:
        raise ConfigError("data.train", "training set is empty")
    test = read_dataset(cfg.require("test_path", "data.test")) if cfg.test_path else None
    n_max = _n_max(cfg, train, test)
    model = build_model(cfg.kind, train.feature_dim, train.num_classes, cfg.seed, **cfg.model_options)
    log = fit(
        model,
        train,
        epochs=cfg.epochs,
        iterations=cfg.iterations,
        batch_size=cfg.batch_size,
        n_max=n_max,
        lr=cfg.lr,
        seed=cfg.seed,
        reweight=cfg.reweight,
    )
    report = evaluate(model, test if test else train, cfg.scenario(), n_max)
    report.loss_curve = list(log.train_loss)
    report.timings["train_seconds"] = log.seconds
    report.extra["iterations"] = float(log.iterations)
    os.makedirs(out, exist_ok=True)
    save_checkpoint(model, os.path.join(out, "checkpoint.json"))
    report.write(out)
    with open(os.path.join(out, "batch_loss.csv"), "w", encoding="utf-8") as fh:
        fh.write("iteration,loss\n")
        for i, v in log.batch_loss:
            fh.write(f"{i},{v!r}\n")
    return report


def cmd_eval(cfg: ExperimentConfig, checkpoint: str, out: str | None = None) -> MetricsReport:
    model = load_checkpoint(checkpoint)
    test = read_dataset(cfg.require("test_path", "data.test"))
    if not test:
        raise ConfigError("data.test", "test set is empty")
    report = evaluate(model, test, cfg.scenario(), _n_max(cfg, test))
    if out is not None:
        report.write(out)
    return report


def random_gradcheck_cases(n_cases: int, seed: int):
    """Random (N, F, K, T) settings from N in {2,3,4}, F in {3,5}, K in {1,2,3}, T in {1,2}."""
    rng = np.random.default_rng(seed)
    for case in range(n_cases):
        N = int(rng.choice([2, 3, 4]))
        F = int(rng.choice([3, 5]))
        K = int(rng.choice([1, 2, 3]))
        steps = int(rng.choice([1, 2]))
        feats = rng.normal(size=(N, F))
        pairs = [(i, j) for i in range(N) for j in range(N) if i != j]
        labels = {p: int(rng.integers(K)) for p in pairs if rng.random() < 0.8} or {pairs[0]: 0}
        yield case, N, F, K, steps, Scene(f"gradcheck-{case}", feats, labels)


def cmd_gradcheck(n_cases: int = 20, seed: int = 0, kinds=("gr2n",), eps: float = 1e-5) -> dict:
    """Max relative error of tape gradients vs central differences over random small models."""
    worst = 0.0
    cases = []
    for case, N, F, K, steps, scene in random_gradcheck_cases(n_cases, seed):
        for kind in kinds:
            opts = {"T": steps} if kind in ("gr2n", "ggnn") else {}
            model = build_model(kind, F, K, seed + case, **opts)
            # move off the zero-bias initialisation so every parameter is exercised
            rng = np.random.default_rng(seed + 1000 + case)
            for name, t in model.params.items():
                model.params.set(name, t.data + 0.1 * rng.normal(size=t.shape))
            err = gradient_check(model, as_batch(scene, N + 1), None, eps)
            worst = max(worst, err)
            cases.append({"kind": kind, "N": N, "F": F, "K": K, "T": steps, "relative_error": err})
    return {"max_relative_error": worst, "cases": cases}


def cmd_bench(model_path: str | None = None, n_people=(2, 4, 6, 8), batch_sizes=(1, 2, 4, 8), repeats: int = 5, seed: int = 0) -> dict:
    model = load_checkpoint(model_path) if model_path else None
    rows = run_bench(model, n_people, batch_sizes, repeats, seed)
    return {"rows": [r.to_dict() for r in rows]}


BENCHMARK_SEEDS = (1, 2, 3, 4, 5)


@dataclass
class SeedResult:
    kind: str
    seed: int
    accuracy: float
    consistency_violation_rate: float
    seconds: float


def compare_models(
    kinds=MODEL_KINDS,
    seeds=BENCHMARK_SEEDS,
    spec: ScenarioSpec | None = None,
    n_scenes: int = 2500,
    epochs: int = 20,
    lr: float = 1e-2,
    batch_size: int = 32,
    model_options: dict | None = None,
) -> list[SeedResult]:
    """Train and test every model kind on the synthetic benchmark, once per seed.

    Each seed draws its own dataset (80/10/10 split, so 2000 train and 250
    test scenes for the default size) and its own initialisation. Models are
    tested on the test split; the validation split is unused.
    """
    spec = spec or default_scenario()
    model_options = model_options or {}
    out = []
    for seed in seeds:
        splits = generate_dataset(spec, n_scenes, seed)
        for kind in kinds:
            model = build_model(kind, spec.feature_dim, spec.num_classes, seed, **model_options.get(kind, {}))
            log = fit(
                model,
                splits.train,
                epochs=epochs,
                batch_size=batch_size,
                n_max=spec.max_people,
                lr=lr,
                seed=seed,
                reweight=False,
                track_train_loss=False,
            )
            report = evaluate(model, splits.test, spec, spec.max_people)
            out.append(SeedResult(kind, seed, report.accuracy, report.consistency_violation_rate, log.seconds))
    return out


def summarize(results: list[SeedResult]) -> dict[str, dict[str, float]]:
    """Per-kind means of accuracy and consistency violation rate."""
    kinds = dict.fromkeys(r.kind for r in results)
    summary = {}
    for kind in kinds:
        rows = [r for r in results if r.kind == kind]
        summary[kind] = {
            "accuracy": float(np.mean([r.accuracy for r in rows])),
            "consistency_violation_rate": float(np.mean([r.consistency_violation_rate for r in rows])),
            "seconds": float(np.sum([r.seconds for r in rows])),
        }
    return summary
