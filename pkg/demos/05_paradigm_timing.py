"""
One forward per scene versus one forward per pair
==================================================

A scene with N people has N(N-1) ordered pairs. The per-scene paradigm
scores all of them in one forward pass; the per-pair paradigm runs a
two-person sample for each. The gap grows with N.
"""

from gr2n.bench import run_bench

for row in run_bench(n_people=(2, 4, 6, 8), batch_sizes=(1, 8), repeats=5):
    print(
        f"N={row.n_people} batch={row.batch_size}: per scene {1e3 * row.joint_seconds_per_scene:.3f} ms, "
        f"per pair {1e3 * row.pair_seconds_per_scene:.3f} ms, speedup {row.speedup:.1f}x"
    )
