"""Graph relational reasoning network over per-relation virtual graphs.

For every relation type ``k`` the model keeps a projection ``W[k]`` (F x F) and
an edge scorer ``a[k]`` (2F). One message-passing step is::

    e[k, i, j]     = [W[k] h_i || W[k] h_j]
    alpha[k, i, j] = sigmoid(a[k] . e[k, i, j])
    m_i            = sum_{j != i} sum_k alpha[k, i, j] * W[k] h_j
    h_i'           = GRU(m_i, h_i)

After ``T`` steps the same edge scorer is read out as the per-class relation
probability ``x[i, j, k] = sigmoid(a[k] . e[k, i, j])``. The readout and the
soft edges are one function; see :func:`edge_probabilities`.

All batched functions work on a :class:`~gr2n.data.Batch` of padded scenes.
Empty (padding) nodes get no soft edges, send and receive no messages and keep
their state, so real-pair outputs do not depend on the padding size.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import tensor as T
from .core.adam import AdamState, adam_step
from .core.gru import gru_cell, gru_params, init_gru
from .data import UNLABELED, Batch, as_batch

DELTA = 1e-7


class NoLabelsError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Gr2nConfig:
    F: int
    K: int
    T: int = 1
    include_self_loops: bool = False

    def __post_init__(self):
        if self.F < 1 or self.K < 1 or self.T < 0:
            raise ValueError(f"invalid config: F={self.F}, K={self.K}, T={self.T}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RelationPrediction:
    """Per-scene class probabilities for ordered pairs; ``valid`` marks real i != j."""

    probabilities: np.ndarray  # (n, n, K)
    valid: np.ndarray  # (n, n) bool


def init_params(config: Gr2nConfig, seed: int) -> T.ParamStore:
    rng = np.random.default_rng(seed)
    F, K = config.F, config.K
    store = T.ParamStore()
    s = 1.0 / math.sqrt(F)
    store.add("W", rng.uniform(-s, s, size=(K, F, F)))
    s2 = 1.0 / math.sqrt(2 * F)
    store.add("a", rng.uniform(-s2, s2, size=(K, 2 * F)))
    init_gru(store, "gru", F, rng)
    return store


# --------------------------------------------------------------------------
# single-pair primitives


def _rowdot(W, x) -> T.Tensor:
    """``W @ x`` contracted along the last axis.

    BLAS picks different accumulation orders for different matrix shapes;
    ``rowdot`` gives bitwise-identical entries whatever the batch layout,
    which keeps the readout exactly equal to the per-pair soft edge.
    """
    return T.rowdot(W, x)


def edge_embedding(params: T.ParamStore, h_i, h_j, k: int) -> T.Tensor:
    """``[W[k] h_i || W[k] h_j]``."""
    W = params["W"]
    F = W.shape[1]
    h_i, h_j = T.as_tensor(h_i), T.as_tensor(h_j)
    if h_i.shape != (F,) or h_j.shape != (F,):
        raise T.ShapeError(f"edge_embedding: expected vectors of length {F}, got {h_i.shape}, {h_j.shape}")
    Wk = T.slice_(W, k)
    return T.concat([_rowdot(Wk, h_i), _rowdot(Wk, h_j)])


def soft_edge(params: T.ParamStore, e, k: int) -> T.Tensor:
    """Edge probability ``sigmoid(a[k] . e)``."""
    a = params["a"]
    e = T.as_tensor(e)
    if e.shape != (a.shape[1],):
        raise T.ShapeError(f"soft_edge: embedding shape {e.shape}, expected ({a.shape[1]},)")
    F = a.shape[1] // 2
    ak = T.slice_(a, k)
    left = T.rowdot(T.slice_(e, slice(0, F)), T.slice_(ak, slice(0, F)))
    right = T.rowdot(T.slice_(e, slice(F, 2 * F)), T.slice_(ak, slice(F, 2 * F)))
    return T.sigmoid(T.add(left, right))


# --------------------------------------------------------------------------
# batched phases


def _project(params: T.ParamStore, H: T.Tensor) -> T.Tensor:
    """(B, N, F) states -> (B, K, N, F) with P[b, k, i] = W[k] h_i."""
    B, N, F = H.shape
    K = params["W"].shape[0]
    return _rowdot(T.reshape(params["W"], (K, 1, F, F)), T.reshape(H, (B, 1, N, 1, F)))


def _edge_scores(params: T.ParamStore, P: T.Tensor) -> T.Tensor:
    """(B, K, N, F) projections -> (B, K, N, N) logits a[k] . [P_i || P_j]."""
    K, twoF = params["a"].shape
    F = twoF // 2
    a = params["a"]
    left = T.slice_(a, (slice(None), slice(0, F)))
    right = T.slice_(a, (slice(None), slice(F, twoF)))
    B, _, N, _ = P.shape
    u = T.rowdot(P, T.reshape(left, (K, 1, F)))  # (B, K, N)
    v = T.rowdot(P, T.reshape(right, (K, 1, F)))
    return T.add(T.reshape(u, (B, K, N, 1)), T.reshape(v, (B, K, 1, N)))


def edge_probabilities(params: T.ParamStore, H: T.Tensor, P: T.Tensor | None = None) -> T.Tensor:
    """Soft edges for every ordered pair and type, shape (B, K, N, N).

    Used by both the message phase and the readout.
    """
    if P is None:
        P = _project(params, H)
    return T.sigmoid(_edge_scores(params, P))


def message_mask(batch: Batch, include_self_loops: bool = False) -> np.ndarray:
    """(B, 1, N, N) float mask of pairs allowed to exchange messages."""
    m = batch.node_mask
    mask = m[:, :, None] & m[:, None, :]
    if not include_self_loops:
        mask = mask & ~np.eye(batch.n_max, dtype=bool)[None]
    return mask[:, None].astype(np.float64)


def aggregate_messages(params: T.ParamStore, H, batch: Batch, include_self_loops: bool = False, alpha=None):
    """Messages ``m_i = sum_j sum_k alpha[k,i,j] W[k] h_j``, shape (B, N, F).

    ``alpha`` (B, K, N, N) overrides the computed soft edges; it is still masked.
    """
    H = T.as_tensor(H)
    P = _project(params, H)
    if alpha is None:
        alpha = edge_probabilities(params, H, P)
    gated = T.mul(alpha, message_mask(batch, include_self_loops))
    return T.sum(T.matmul(gated, P), axis=1)


def propagate(params: T.ParamStore, H, batch: Batch, include_self_loops: bool = False) -> T.Tensor:
    """One GRU step on real nodes; empty-node states are carried over unchanged."""
    H = T.as_tensor(H)
    m = aggregate_messages(params, H, batch, include_self_loops)
    new = gru_cell(gru_params(params, "gru"), m, H)
    keep = batch.node_mask[:, :, None].astype(np.float64)
    return T.add(T.mul(new, keep), T.mul(H, 1.0 - keep))


def readout(params: T.ParamStore, H) -> T.Tensor:
    """Per-pair class probabilities, shape (B, N, N, K)."""
    return T.transpose(edge_probabilities(params, T.as_tensor(H)), (0, 2, 3, 1))


def forward_batch(params: T.ParamStore, batch: Batch, config: Gr2nConfig) -> T.Tensor:
    if batch.features.shape[-1] != config.F:
        raise T.ShapeError(f"scene feature dimension {batch.features.shape[-1]} != model F={config.F}")
    H = T.Tensor(batch.features)
    for _ in range(config.T):
        H = propagate(params, H, batch, config.include_self_loops)
    return readout(params, H)


def split_predictions(probs: np.ndarray, batch: Batch) -> list[RelationPrediction]:
    valid = batch.valid_pairs
    out = []
    for b in range(batch.size):
        n = int(batch.node_mask[b].sum())
        out.append(RelationPrediction(probs[b, :n, :n].copy(), valid[b, :n, :n].copy()))
    return out


def forward(params: T.ParamStore, scene, config: Gr2nConfig) -> RelationPrediction:
    """Forward one (padded) scene; the prediction covers its real nodes only."""
    batch = as_batch(scene)
    probs = forward_batch(params, batch, config).data
    return split_predictions(probs, batch)[0]


# --------------------------------------------------------------------------
# loss and prediction


def pair_weights(batch: Batch, class_weights=None) -> np.ndarray:
    """(B, N, N) per-pair weights: class weight / labeled pairs in the scene / scenes.

    Summing ``weight * per-pair loss`` gives the mean over each scene's labeled
    pairs, averaged over scenes that have any labels.
    """
    mask = batch.pair_mask
    per_scene = mask.sum(axis=(1, 2))
    scenes = int((per_scene > 0).sum())
    if scenes == 0:
        raise NoLabelsError("no labeled pair in batch")
    labels = np.where(mask, batch.labels, 0)
    w = np.ones_like(labels, dtype=np.float64)
    if class_weights is not None:
        w = np.asarray(class_weights, dtype=np.float64)[labels]
    denom = np.maximum(per_scene, 1)[:, None, None] * scenes
    return np.where(mask, w / denom, 0.0)


def one_hot_targets(batch: Batch, num_classes: int) -> np.ndarray:
    y = np.zeros(batch.labels.shape + (num_classes,))
    b, i, j = np.nonzero(batch.pair_mask)
    y[b, i, j, batch.labels[b, i, j]] = 1.0
    return y


def loss(probs, batch: Batch, class_weights=None, delta: float = DELTA) -> T.Tensor:
    """Weighted one-hot binary cross-entropy summed over classes, averaged over labeled pairs."""
    probs = T.as_tensor(probs)
    K = probs.shape[-1]
    w = pair_weights(batch, class_weights)
    per_class = T.bce(probs, one_hot_targets(batch, K), delta)
    return T.sum(T.mul(per_class, w[..., None]))


def predict(prediction: RelationPrediction) -> dict[tuple[int, int], int]:
    """Argmax class per valid ordered pair; ties go to the lowest class index."""
    cls = np.argmax(prediction.probabilities, axis=-1)
    i, j = np.nonzero(prediction.valid)
    return {(int(a), int(b)): int(cls[a, b]) for a, b in zip(i, j)}


def argmax_classes(probs: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Vectorised :func:`predict`: class indices with UNLABELED outside ``valid``."""
    return np.where(valid, np.argmax(probs, axis=-1), UNLABELED)


# --------------------------------------------------------------------------
# model object shared with the baselines


class Gr2nModel:
    kind = "gr2n"

    def __init__(self, config: Gr2nConfig, seed: int = 0, params: T.ParamStore | None = None):
        self.config = config
        self.params = params if params is not None else init_params(config, seed)

    @property
    def num_classes(self) -> int:
        return self.config.K

    def scores(self, batch: Batch) -> T.Tensor:
        return forward_batch(self.params, batch, self.config)

    def probabilities(self, batch: Batch) -> np.ndarray:
        return self.scores(batch).data

    def loss(self, scores: T.Tensor, batch: Batch, class_weights=None) -> T.Tensor:
        return loss(scores, batch, class_weights)

    def config_dict(self) -> dict:
        return self.config.to_dict()


def batch_loss(model, batch: Batch, class_weights=None) -> T.Tensor:
    return model.loss(model.scores(batch), batch, class_weights)


def train_step(model, batch: Batch, class_weights, adam: AdamState) -> float:
    """Forward, loss, backward and one Adam update. Returns the pre-update loss."""
    if batch.n_labeled() == 0:
        raise NoLabelsError("no labeled pair in batch; parameters left untouched")
    with T.Tape() as tape:
        value = batch_loss(model, batch, class_weights)
    if not np.isfinite(value.data):
        raise TrainingError(f"non-finite loss {value.item()} on scenes {batch.scene_ids[:4]}...")
    model.params.zero_grad()
    T.backward(tape, value, model.params)
    for name, t in model.params.items():
        if not np.isfinite(t.grad).all():
            raise TrainingError(f"non-finite gradient for {name} on scenes {batch.scene_ids[:4]}...")
    adam_step(model.params, adam)
    return value.item()
