"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary by
conftest.py) before asserting, so a failing criterion still reports its
measured values.
"""

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import ACCEPTANCE, random_scene
from gr2n.baselines import (
    BaselineConfig,
    gcn_forward,
    ggnn_forward,
    init_gcn_params,
    init_ggnn_params,
    init_pair_params,
    pair_baseline_forward,
)
from gr2n.data import Scene, as_batch, pad_scene
from gr2n.harness import cmd_bench, cmd_gradcheck, compare_models, summarize
from gr2n.metrics import accuracy, average_precision, mean_average_precision, per_class_recall
from gr2n.model import Gr2nConfig, edge_embedding, forward, init_params, propagate, readout, soft_edge
from gr2n.synth import default_scenario, generate_dataset
from gr2n.training import LOSS_GRID, build_model, fit


def report(number, name, ok, detail):
    line = f"criterion {number} ({name}): {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def _jitter(params, rng, scale=0.3):
    for name, t in params.items():
        params.set(name, t.data + scale * rng.normal(size=t.shape))
    return params


# --------------------------------------------------------------------------
# 1. gradient exactness


def test_1_gradient_exactness():
    t0 = time.perf_counter()
    result = cmd_gradcheck(n_cases=20, seed=0)
    elapsed = time.perf_counter() - t0
    cases = result["cases"]
    covered = {(c["N"], c["F"], c["K"], c["T"]) for c in cases}
    err = result["max_relative_error"]
    ok = len(cases) >= 20 and err < 1e-4 and elapsed < 60
    report(1, "gradient exactness", ok, f"{len(cases)} cases ({len(covered)} distinct), max rel err {err:.2e}, {elapsed:.1f}s")
    assert ok


# --------------------------------------------------------------------------
# 2. forward oracle equivalence


def test_2_forward_oracles():
    rng = np.random.default_rng(2024)
    worst = {"gr2n": 0.0, "gcn": 0.0, "ggnn": 0.0, "pair": 0.0}
    for _ in range(100):
        n = int(rng.integers(1, 7))
        F = int(rng.integers(1, 5))
        K = int(rng.integers(1, 4))
        steps = int(rng.integers(0, 3))
        feats = rng.normal(size=(n, F))
        scene = Scene("x", feats)
        x = feats.tolist()

        cfg = Gr2nConfig(F=F, K=K, T=steps)
        p = _jitter(init_params(cfg, int(rng.integers(1 << 30))), rng)
        got = forward(p, scene, cfg).probabilities
        worst["gr2n"] = max(worst["gr2n"], np.max(np.abs(got - np.array(oracles.gr2n_forward(p, x, steps)))))

        bcfg = BaselineConfig(F=F, K=K, layers=max(steps, 1), T=steps)
        p = _jitter(init_gcn_params(bcfg, int(rng.integers(1 << 30))), rng)
        got = gcn_forward(p, scene).probabilities
        worst["gcn"] = max(worst["gcn"], np.max(np.abs(got - np.array(oracles.gcn_forward(p, x, bcfg.layers)))))

        p = _jitter(init_ggnn_params(bcfg, int(rng.integers(1 << 30))), rng)
        got = ggnn_forward(p, scene, steps).probabilities
        worst["ggnn"] = max(worst["ggnn"], np.max(np.abs(got - np.array(oracles.ggnn_forward(p, x, steps)))))

        p = _jitter(init_pair_params(bcfg, int(rng.integers(1 << 30))), rng)
        got = pair_baseline_forward(p, scene).probabilities
        worst["pair"] = max(worst["pair"], np.max(np.abs(got - np.array(oracles.pair_forward(p, x)))))
    ok = max(worst.values()) <= 1e-10
    report(2, "forward oracle equivalence", ok, "max abs diff " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# --------------------------------------------------------------------------
# 3. structural invariants (property tests)

_INVARIANTS = {}


@st.composite
def _instances(draw, max_n=6):
    seed = draw(st.integers(0, 2**31 - 1))
    n = draw(st.integers(1, max_n))
    F = draw(st.integers(1, 4))
    K = draw(st.integers(1, 3))
    T = draw(st.integers(0, 2))
    return np.random.default_rng(seed), n, F, K, T


def _gr2n(rng, F, K, T, self_loops=False):
    cfg = Gr2nConfig(F=F, K=K, T=T, include_self_loops=self_loops)
    return cfg, _jitter(init_params(cfg, int(rng.integers(1 << 30))), rng)


@settings(max_examples=60, deadline=None)
@given(_instances())
def test_3a_permutation_equivariance(inst):
    rng, n, F, K, T = inst
    cfg, params = _gr2n(rng, F, K, T)
    feats = rng.normal(size=(n, F))
    perm = rng.permutation(n)
    x = forward(params, Scene("x", feats), cfg).probabilities
    y = forward(params, Scene("y", feats[perm]), cfg).probabilities
    err = float(np.max(np.abs(y - x[np.ix_(perm, perm)]), initial=0.0))
    _INVARIANTS["permutation"] = max(_INVARIANTS.get("permutation", 0.0), err)
    assert err <= 1e-9


@settings(max_examples=60, deadline=None)
@given(_instances(), st.integers(1, 4))
def test_3b_padding_invariance(inst, extra):
    rng, n, F, K, T = inst
    cfg, params = _gr2n(rng, F, K, T)
    scene = random_scene(rng, n, F, K)
    x = forward(params, scene, cfg).probabilities
    y = forward(params, pad_scene(scene, n + extra), cfg).probabilities
    err = float(np.max(np.abs(x - y), initial=0.0))
    _INVARIANTS["padding"] = max(_INVARIANTS.get("padding", 0.0), err)
    assert err <= 1e-12


@settings(max_examples=40, deadline=None)
@given(_instances(), st.integers(0, 3))
def test_3c_readout_soft_edge_identity(inst, extra):
    rng, n, F, K, T = inst
    cfg, params = _gr2n(rng, F, K, T)
    batch = as_batch(pad_scene(Scene("x", rng.normal(size=(n, F))), n + extra))
    H = batch.features
    for _ in range(T):
        H = propagate(params, H, batch).data
    out = readout(params, H).data[0]
    mismatches = 0
    for i in range(n):
        for j in range(n):
            for k in range(K):
                e = edge_embedding(params, H[0, i], H[0, j], k)
                mismatches += soft_edge(params, e, k).item() != out[i, j, k]
    _INVARIANTS["readout"] = _INVARIANTS.get("readout", 0) + mismatches
    assert mismatches == 0


@settings(max_examples=60, deadline=None)
@given(_instances(max_n=5), st.integers(1, 3))
def test_3d_pair_third_node_independence(inst, extra):
    rng, n, F, K, _ = inst
    n = max(n, 2)
    params = _jitter(init_pair_params(BaselineConfig(F=F, K=K), int(rng.integers(1 << 30))), rng)
    feats = rng.normal(size=(n, F))
    base = pair_baseline_forward(params, Scene("a", feats)).probabilities
    more = pair_baseline_forward(params, Scene("b", np.vstack([feats, rng.normal(size=(extra, F))]))).probabilities
    same = bool(np.array_equal(base, more[:n, :n]))
    _INVARIANTS["third_node"] = _INVARIANTS.get("third_node", True) and same
    assert same


def test_3_structural_invariants_summary():
    needed = {"permutation", "padding", "readout", "third_node"}
    ok = (
        needed <= set(_INVARIANTS)
        and _INVARIANTS["permutation"] <= 1e-9
        and _INVARIANTS["padding"] <= 1e-12
        and _INVARIANTS["readout"] == 0
        and _INVARIANTS["third_node"] is True
    )
    detail = (
        f"perm {_INVARIANTS.get('permutation', float('nan')):.1e}, pad {_INVARIANTS.get('padding', float('nan')):.1e}, "
        f"readout mismatches {_INVARIANTS.get('readout')}, third-node exact {_INVARIANTS.get('third_node')}"
    )
    report(3, "structural invariants", ok, detail)
    assert ok


# --------------------------------------------------------------------------
# 4, 5, 8. synthetic benchmark, shared five-seed run


@pytest.fixture(scope="module")
def benchmark():
    t0 = time.perf_counter()
    results = compare_models()
    return summarize(results), results, time.perf_counter() - t0


def test_4_joint_reasoning_gain(benchmark):
    summary, _, elapsed = benchmark
    gain = summary["gr2n"]["accuracy"] - summary["pair"]["accuracy"]
    ok = gain >= 0.05 and elapsed < 600
    report(
        4,
        "joint-reasoning gain",
        ok,
        f"GR2N {summary['gr2n']['accuracy']:.4f} vs pair {summary['pair']['accuracy']:.4f} "
        f"(+{100 * gain:.2f} points), suite {elapsed:.0f}s",
    )
    assert ok


def test_5_ablation_ordering(benchmark):
    summary, _, _ = benchmark
    acc = {k: v["accuracy"] for k, v in summary.items()}
    ok = acc["gr2n"] >= acc["ggnn"] and acc["gr2n"] >= acc["gcn"]
    report(5, "ablation ordering", ok, f"GCN {acc['gcn']:.4f}, GGNN {acc['ggnn']:.4f}, GR2N {acc['gr2n']:.4f}")
    assert ok


def test_8_consistency(benchmark):
    summary, _, _ = benchmark
    g, p = summary["gr2n"]["consistency_violation_rate"], summary["pair"]["consistency_violation_rate"]
    ok = g < p
    report(8, "consistency", ok, f"violation rate GR2N {g:.4f} vs pair {p:.4f}")
    assert ok


# --------------------------------------------------------------------------
# 6. convergence


def test_6_convergence():
    spec = default_scenario()
    train = generate_dataset(spec, 2500, 0).train
    model = build_model("gr2n", spec.feature_dim, spec.num_classes, 0)
    log = fit(model, train, iterations=5000, n_max=spec.max_people, seed=0, reweight=False)
    curve = dict(log.train_loss)
    ratio = curve[5000] / curve[0]
    ok = [i for i, _ in log.train_loss] == list(LOSS_GRID) and ratio < 0.2
    grid = ", ".join(f"{i}:{v:.3f}" for i, v in log.train_loss)
    report(6, "convergence", ok, f"loss[5000]/loss[0] = {ratio:.3f}; grid {grid}")
    assert ok


# --------------------------------------------------------------------------
# 7. paradigm speed


def test_7_paradigm_speed():
    rows = cmd_bench(n_people=(2, 4, 6, 8), batch_sizes=(1, 2, 4, 8), repeats=5, seed=0)["rows"]
    ok = True
    parts = []
    for b in (1, 2, 4, 8):
        speed = {r["n_people"]: r["speedup"] for r in rows if r["batch_size"] == b}
        mono = speed[4] <= speed[6] <= speed[8]
        ok = ok and speed[4] >= 2.0 and mono
        parts.append(f"B={b}: " + "/".join(f"{speed[n]:.1f}" for n in (2, 4, 6, 8)))
    report(7, "paradigm speed", ok, "speedup at N=2/4/6/8, " + "; ".join(parts))
    assert ok


# --------------------------------------------------------------------------
# 9. metric correctness


def test_9_metric_correctness():
    checks = [
        accuracy([0, 1, 2], [0, 1, 2]) == 1.0,
        accuracy([0, 1, 1, 2], [0, 1, 2, 2]) == 0.75,
        per_class_recall([0, 1, 1], [0, 0, 1], 2).tolist() == [0.5, 1.0],
        per_class_recall([0, 0, 0], [0, 1, 1], 2).tolist() == [1.0, 0.0],
        average_precision([0.9, 0.5, 0.1], [True, False, True]) == (1 + 2 / 3) / 2,
        round(average_precision([0.9, 0.5, 0.1], [True, False, True]), 4) == 0.8333,
        mean_average_precision(np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7]]), [0, 0, 1]) == 1.0,
        average_precision([0.5, 0.5, 0.5], [False, True, True]) == (1 / 2 + 2 / 3) / 2,
    ]
    ok = all(checks)
    report(9, "metric correctness", ok, f"{sum(checks)}/{len(checks)} hand-computed values exact")
    assert ok
