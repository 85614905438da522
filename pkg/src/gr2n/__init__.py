"""Graph relational reasoning for social relation recognition, on numpy.

Subpackages and modules:

- ``gr2n.core``: float64 tensors with a reverse-mode tape, GRU cell, Adam, finite differences
- ``gr2n.data``: scenes, padding, batching, class weights, JSONL datasets
- ``gr2n.model``: the relation-typed message-passing network
- ``gr2n.baselines``: pair classifier, residual GCN, GGNN
- ``gr2n.synth``: logically constrained synthetic scenes and the consistency checker
- ``gr2n.metrics``, ``gr2n.training``, ``gr2n.bench``, ``gr2n.harness``: evaluation and experiments
"""

from .data import Scene, pad_scene, read_dataset, write_dataset
from .model import Gr2nConfig, Gr2nModel

__version__ = "0.1.0"

__all__ = ["Scene", "pad_scene", "read_dataset", "write_dataset", "Gr2nConfig", "Gr2nModel"]
