"""
Joint reasoning versus pairwise classification
===============================================

The relation network, GGNN and GCN all see the whole scene; the pair
baseline sees one pair of people at a time. When a role cue is occluded the
pair baseline can only guess, while the scene models can reason from the
other relations. Two seeds keep this quick; the acceptance suite uses five.
"""

from gr2n.harness import compare_models, summarize

results = compare_models(seeds=(1, 2))
for r in results:
    print(f"seed {r.seed} {r.kind:5s} accuracy {r.accuracy:.4f} violations {r.consistency_violation_rate:.4f}")

for kind, s in summarize(results).items():
    print(f"{kind:5s} mean accuracy {s['accuracy']:.4f}  mean violation rate {s['consistency_violation_rate']:.4f}")
