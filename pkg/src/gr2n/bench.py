"""Forward-time comparison of the per-scene and per-pair paradigms.

Per-scene: one forward over a batch of scenes yields every ordered pair.
Per-pair: every ordered pair (i, j) becomes its own two-node sample holding
only persons i and j, and those samples are pushed through the same model in
batches of the same size. Only model compute is timed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import Scene, as_batch, collate, pad_scene
from .model import Gr2nConfig, Gr2nModel


@dataclass
class BenchRow:
    n_people: int
    batch_size: int
    joint_seconds_per_scene: float
    pair_seconds_per_scene: float

    @property
    def speedup(self) -> float:
        return self.pair_seconds_per_scene / self.joint_seconds_per_scene

    def to_dict(self) -> dict:
        return {
            "n_people": self.n_people,
            "batch_size": self.batch_size,
            "joint_seconds_per_scene": self.joint_seconds_per_scene,
            "pair_seconds_per_scene": self.pair_seconds_per_scene,
            "speedup": self.speedup,
        }


def _best_of(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def random_scenes(n_scenes: int, n_people: int, F: int, seed: int) -> list[Scene]:
    rng = np.random.default_rng(seed)
    return [Scene(f"bench-{n_people}-{i}", rng.normal(size=(n_people, F))) for i in range(n_scenes)]


def pair_samples(scene: Scene) -> list[Scene]:
    n = scene.n_real
    return [
        Scene(f"{scene.id}:{i},{j}", scene.features[[i, j]])
        for i in range(n)
        for j in range(n)
        if i != j
    ]


def time_paradigms(model, n_people: int, batch_size: int, repeats: int = 5, seed: int = 0) -> BenchRow:
    F = model.config.F
    scenes = random_scenes(batch_size, n_people, F, seed)
    joint = as_batch(scenes)
    pair_batches = []
    samples = [p for s in scenes for p in pair_samples(s)]
    for start in range(0, len(samples), batch_size):
        pair_batches.append(collate([pad_scene(s, 2) for s in samples[start : start + batch_size]]))

    def run_joint():
        model.probabilities(joint)

    def run_pairs():
        for b in pair_batches:
            model.probabilities(b)

    t_joint = _best_of(run_joint, repeats) / batch_size
    t_pair = _best_of(run_pairs, repeats) / batch_size
    return BenchRow(n_people, batch_size, t_joint, t_pair)


def run_bench(
    model=None,
    n_people=(2, 4, 6, 8),
    batch_sizes=(1, 2, 4, 8),
    repeats: int = 5,
    seed: int = 0,
    F: int = 16,
    K: int = 5,
) -> list[BenchRow]:
    if model is None:
        model = Gr2nModel(Gr2nConfig(F=F, K=K, T=1), seed)
    # warm-up so the first cell does not pay for lazy imports and allocator growth
    time_paradigms(model, 2, 1, repeats=1, seed=seed)
    return [time_paradigms(model, n, b, repeats, seed) for n in n_people for b in batch_sizes]
