"""GraphSAGE node classifier with label-similarity weighted mean aggregation.

Implemented directly on numpy with hand-written backpropagation. Aggregators:

* ``mean``   -- plain mean over {centre} + sampled neighbours
* ``wmean1`` -- neighbours weighted 1 / 0.75 / 0.25 by label relation
* ``wmean2`` -- neighbours weighted 1 / (1 + distance to the labels' LCA)

The centre always joins the mean with weight 1. Hidden representations pass
through a linear map, ReLU, and per-node L2 normalization; a linear + softmax
head produces class scores. Training is mini-batch Adam on cross-entropy,
deterministic for a fixed seed in single-worker mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from .graph import Graph
from .hierarchy import LabelHierarchy, WeightPolicy, pair_weights
from .netfeat import FeatureMatrix

AGGREGATORS = ("mean", "wmean1", "wmean2")


class SageTrainingError(RuntimeError):
    """Raised when the loss stops being finite; carries diagnostics."""

    def __init__(self, message: str, epoch: int, batch: int, grad_norms: dict):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.grad_norms = grad_norms


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    aggregator: str = "mean"
    hidden: tuple[int, ...] = (128, 128)
    fanout: tuple[int, ...] = (10, 25)
    swap_fanout: bool = False
    unknown_label_weight: float = 0.5
    wmean2_from: str = "center"
    l2_normalize: bool = True

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if len(self.fanout) != len(self.hidden):
            raise ValueError("need one fanout entry per layer")
        if any(f < 1 for f in self.fanout):
            raise ValueError("fanout sizes must be >= 1")

    @property
    def effective_fanout(self) -> tuple[int, ...]:
        return tuple(reversed(self.fanout)) if self.swap_fanout else self.fanout


@dataclass
class SageModel:
    """Stacked aggregation layers plus a softmax classification head."""

    weights: list[np.ndarray]   # layer k: (hidden[k], prev_dim)
    biases: list[np.ndarray]
    head_w: np.ndarray          # (num_classes, hidden[-1])
    head_b: np.ndarray
    aggregator: str = "mean"
    unknown_label_weight: float = 0.5
    wmean2_from: str = "center"
    l2_normalize: bool = True

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_classes(self) -> int:
        return self.head_w.shape[0]

    def num_params(self) -> int:
        return sum(int(w.size) for w in self.param_list())

    def param_list(self) -> list[np.ndarray]:
        return self.weights + self.biases + [self.head_w, self.head_b]

    def policy(self) -> WeightPolicy:
        kind = "uniform" if self.aggregator == "mean" else self.aggregator
        return WeightPolicy(kind=kind, unknown_label_weight=self.unknown_label_weight,
                            wmean2_from=self.wmean2_from)

    @staticmethod
    def create(in_dim: int, hidden: Sequence[int], num_classes: int,
               aggregator: str = "mean", seed: int = 0,
               unknown_label_weight: float = 0.5, wmean2_from: str = "center",
               l2_normalize: bool = True) -> "SageModel":
        """Glorot-uniform weight init, zero biases."""
        if aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if len(hidden) < 1:
            raise ValueError("need at least one layer")
        rng = np.random.default_rng([seed, 0x1417])
        dims = [in_dim] + list(hidden)
        weights, biases = [], []
        for k in range(1, len(dims)):
            limit = np.sqrt(6.0 / (dims[k - 1] + dims[k]))
            weights.append(rng.uniform(-limit, limit, size=(dims[k], dims[k - 1])))
            biases.append(np.zeros(dims[k]))
        limit = np.sqrt(6.0 / (dims[-1] + num_classes))
        head_w = rng.uniform(-limit, limit, size=(num_classes, dims[-1]))
        return SageModel(weights=weights, biases=biases, head_w=head_w,
                         head_b=np.zeros(num_classes), aggregator=aggregator,
                         unknown_label_weight=unknown_label_weight,
                         wmean2_from=wmean2_from, l2_normalize=l2_normalize)


@dataclass(frozen=True)
class NeighbourhoodSample:
    """Layered with-replacement neighbour samples rooted at a batch.

    ``levels[0]`` is the batch; ``levels[k+1]`` holds fanout[k] sampled
    neighbours per node of ``levels[k]``, flattened. Isolated nodes sample
    themselves.
    """

    levels: list[np.ndarray]
    fanouts: tuple[int, ...]


def sample_neighbourhood(g: Graph, batch: np.ndarray, fanout: Sequence[int],
                         rng: np.random.Generator) -> NeighbourhoodSample:
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size and (batch.min() < 0 or batch.max() >= g.n):
        raise ValueError("batch contains out-of-range node ids")
    if any(f < 1 for f in fanout):
        raise ValueError("fanout sizes must be >= 1")
    levels = [batch]
    deg = g.degrees
    for f in fanout:
        frontier = levels[-1]
        safe_deg = np.maximum(deg[frontier], 1)
        pick = rng.integers(0, safe_deg[:, None], size=(len(frontier), f))
        isolated = deg[frontier] == 0
        if len(g.indices):
            offsets = g.indptr[frontier][:, None] + pick
            offsets[isolated] = 0  # placeholder rows are overwritten below
            nbrs = g.indices[offsets]
        else:
            nbrs = np.zeros((len(frontier), f), dtype=np.int64)
        if isolated.any():
            nbrs[isolated] = frontier[isolated][:, None]
        levels.append(nbrs.ravel())
    return NeighbourhoodSample(levels=levels, fanouts=tuple(fanout))


def aggregate(center: np.ndarray, nbr_reprs: np.ndarray,
              weights: Optional[np.ndarray] = None,
              center_weight: float = 1.0) -> np.ndarray:
    """Weighted mean of {centre (weight center_weight)} + neighbours.

    ``weights=None`` means all ones, i.e. the plain MEAN aggregator. With zero
    neighbours the centre representation comes back unchanged.
    """
    center = np.asarray(center, dtype=np.float64)
    nbr_reprs = np.asarray(nbr_reprs, dtype=np.float64).reshape(-1, center.shape[-1]) \
        if np.size(nbr_reprs) else np.zeros((0, center.shape[-1]))
    if weights is None:
        weights = np.ones(len(nbr_reprs))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(nbr_reprs),):
        raise ValueError("weights length must match the number of neighbours")
    if center_weight <= 0:
        raise ValueError("center weight must be positive")
    total = center_weight * center + weights @ nbr_reprs
    return total / (center_weight + weights.sum())


def _level_weights(model: SageModel, sample: NeighbourhoodSample,
                   labels: Optional[np.ndarray],
                   hierarchy: Optional[LabelHierarchy]) -> list[np.ndarray]:
    """Aggregation weights for each (level, level+1) pair; label-driven."""
    policy = model.policy()
    out = []
    for lvl, f in enumerate(sample.fanouts):
        centers = sample.levels[lvl]
        nbrs = sample.levels[lvl + 1].reshape(len(centers), f)
        if policy.kind == "uniform":
            out.append(np.ones((len(centers), f)))
        else:
            if labels is None or hierarchy is None:
                raise ValueError("weighted aggregation needs labels and a hierarchy")
            out.append(pair_weights(policy, hierarchy, labels[centers][:, None],
                                    labels[nbrs]))
    return out


def _normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 1e-30, norms, 1.0)
    return x / safe, safe


def _forward_cached(model: SageModel, sample: NeighbourhoodSample, x: np.ndarray,
                    labels: Optional[np.ndarray],
                    hierarchy: Optional[LabelHierarchy]) -> tuple[np.ndarray, dict]:
    k_layers = model.num_layers
    if len(sample.fanouts) != k_layers:
        raise ValueError("sample depth does not match the model's layer count")
    if x.shape[1] != model.in_dim:
        raise ValueError(f"feature dim {x.shape[1]} does not match model input {model.in_dim}")
    w_pairs = _level_weights(model, sample, labels, hierarchy)
    denoms = [1.0 + w.sum(axis=1, keepdims=True) for w in w_pairs]
    h = [x[ids] for ids in sample.levels]
    cache = {"w_pairs": w_pairs, "denoms": denoms, "layers": []}
    for k in range(k_layers):
        level_cache = []
        nxt = []
        for lvl in range(k_layers - k):
            centers = h[lvl]
            f = sample.fanouts[lvl]
            nbrs = h[lvl + 1].reshape(len(centers), f, -1)
            agg = (centers + np.einsum("bf,bfd->bd", w_pairs[lvl], nbrs)) / denoms[lvl]
            z = agg @ model.weights[k].T + model.biases[k]
            r = np.maximum(z, 0.0)
            if model.l2_normalize:
                out, norms = _normalize_rows(r)
            else:
                out, norms = r, None
            level_cache.append({"agg": agg, "relu_mask": z > 0, "r": r,
                                "norms": norms, "out": out})
            nxt.append(out)
        cache["layers"].append(level_cache)
        h = nxt
    logits = h[0] @ model.head_w.T + model.head_b
    cache["top"] = h[0]
    return logits, cache


def forward(model: SageModel, sample: NeighbourhoodSample, features: FeatureMatrix | np.ndarray,
            labels: Optional[np.ndarray] = None,
            hierarchy: Optional[LabelHierarchy] = None) -> np.ndarray:
    """Class logits for the sample's batch nodes."""
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    logits, _ = _forward_cached(model, sample, x, labels, hierarchy)
    return logits


def _softmax_xent(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """(mean loss, d loss / d logits); y holds class indices."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    b = len(y)
    loss = -float(log_p[np.arange(b), y].mean())
    grad = np.exp(log_p)
    grad[np.arange(b), y] -= 1.0
    return loss, grad / b


def softmax_probabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(model: SageModel, sample: NeighbourhoodSample, x: np.ndarray,
                   y: np.ndarray, labels: Optional[np.ndarray] = None,
                   hierarchy: Optional[LabelHierarchy] = None
                   ) -> tuple[float, dict[str, list[np.ndarray] | np.ndarray]]:
    """Cross-entropy over the batch and gradients for every parameter tensor."""
    logits, cache = _forward_cached(model, sample, x, labels, hierarchy)
    loss, g_logits = _softmax_xent(logits, y)
    grads = {
        "weights": [np.zeros_like(w) for w in model.weights],
        "biases": [np.zeros_like(b) for b in model.biases],
        "head_w": g_logits.T @ cache["top"],
        "head_b": g_logits.sum(axis=0),
    }
    k_layers = model.num_layers
    upstream = {0: g_logits @ model.head_w}
    for k in range(k_layers - 1, -1, -1):
        level_cache = cache["layers"][k]
        downstream: dict[int, np.ndarray] = {}
        for lvl in range(k_layers - k):
            g_out = upstream.get(lvl)
            if g_out is None:
                continue
            lc = level_cache[lvl]
            if model.l2_normalize:
                out, norms = lc["out"], lc["norms"]
                g_r = (g_out - out * (out * g_out).sum(axis=1, keepdims=True)) / norms
            else:
                g_r = g_out
            g_z = g_r * lc["relu_mask"]
            grads["weights"][k] += g_z.T @ lc["agg"]
            grads["biases"][k] += g_z.sum(axis=0)
            g_agg = g_z @ model.weights[k]
            g_center = g_agg / cache["denoms"][lvl]
            f = sample.fanouts[lvl]
            g_nbr = g_center[:, None, :] * cache["w_pairs"][lvl][:, :, None]
            downstream[lvl] = downstream.get(lvl, 0.0) + g_center
            flat = g_nbr.reshape(-1, g_nbr.shape[2])
            downstream[lvl + 1] = downstream.get(lvl + 1, 0.0) + flat
        upstream = downstream
    return loss, grads


class _Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas, eps: float):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1 ** self.t)
            v_hat = self.v[i] / (1 - self.b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _grad_list(model: SageModel, grads: dict) -> list[np.ndarray]:
    return grads["weights"] + grads["biases"] + [grads["head_w"], grads["head_b"]]


def class_targets(labels: np.ndarray, nodes: np.ndarray, h: LabelHierarchy) -> np.ndarray:
    """Leaf-index targets for the given nodes; every node must be labeled."""
    out = np.empty(len(nodes), dtype=np.int64)
    for i, u in enumerate(nodes):
        lab = int(labels[u])
        if lab < 0:
            raise ValueError(f"node {u} has no label")
        out[i] = h.leaf_index(lab)
    return out


def train(model: SageModel, g: Graph, train_nodes: np.ndarray,
          features: FeatureMatrix | np.ndarray, labels: np.ndarray,
          hierarchy: LabelHierarchy, cfg: TrainConfig) -> list[float]:
    """Mini-batch Adam on cross-entropy; returns the per-epoch mean loss.

    ``g`` should be the training graph (all its sampled neighbours of train
    nodes are train nodes under the split protocol).
    """
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    y_all = class_targets(labels, train_nodes, hierarchy)
    rng = np.random.default_rng([cfg.seed, 0x7a11])
    optimizer = _Adam(model.param_list(), cfg.lr, cfg.betas, cfg.adam_eps)
    fanout = cfg.effective_fanout
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_nodes))
        losses = []
        for bi, lo in enumerate(range(0, len(order), cfg.batch_size)):
            sel = order[lo:lo + cfg.batch_size]
            sample = sample_neighbourhood(g, train_nodes[sel], fanout, rng)
            loss, grads = loss_and_grads(model, sample, x, y_all[sel], labels, hierarchy)
            glist = _grad_list(model, grads)
            if not np.isfinite(loss) or any(not np.isfinite(gr).all() for gr in glist):
                norms = {f"param_{i}": float(np.linalg.norm(gr))
                         for i, gr in enumerate(glist)}
                raise SageTrainingError(
                    f"non-finite loss at epoch {epoch} batch {bi}",
                    epoch=epoch, batch=bi, grad_norms=norms)
            optimizer.step(model.param_list(), glist)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return history


@dataclass
class Metrics:
    micro_f1: float
    per_class: dict[str, dict[str, float]]
    confusion: np.ndarray  # (true, predicted) counts, leaf pre-order

    def to_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "per_class": self.per_class,
            "confusion": self.confusion.astype(int).tolist(),
        }


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray,
                             class_names: Sequence[str]) -> Metrics:
    """Pool TP/FP/FN over classes; micro-F1 = 2TP / (2TP + FP + FN)."""
    c = len(class_names)
    conf = np.zeros((c, c), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    tp = int(np.trace(conf))
    fp = int(conf.sum() - np.trace(conf))
    fn = fp  # single-label multiclass: every miss is one FP and one FN
    micro = 2 * tp / (2 * tp + fp + fn) if conf.sum() else 0.0
    per_class = {}
    for i, name in enumerate(class_names):
        tpi = int(conf[i, i])
        pred_i = int(conf[:, i].sum())
        true_i = int(conf[i, :].sum())
        precision = tpi / pred_i if pred_i else 0.0
        recall = tpi / true_i if true_i else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = {"precision": precision, "recall": recall, "f1": f1,
                           "support": true_i}
    return Metrics(micro_f1=float(micro), per_class=per_class, confusion=conf)


def predict(model: SageModel, g: Graph, nodes: np.ndarray,
            features: FeatureMatrix | np.ndarray, labels: Optional[np.ndarray],
            hierarchy: Optional[LabelHierarchy], seed: int = 0,
            fanout: Optional[Sequence[int]] = None,
            batch_size: int = 256) -> np.ndarray:
    """Argmax class index per node, sampling neighbourhoods from `g`."""
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    rng = np.random.default_rng([seed, 0xe7a1])
    if fanout is None:
        fanout = (10, 25) if model.num_layers == 2 else tuple([10] * model.num_layers)
    preds = np.empty(len(nodes), dtype=np.int64)
    nodes = np.asarray(nodes, dtype=np.int64)
    for lo in range(0, len(nodes), batch_size):
        chunk = nodes[lo:lo + batch_size]
        sample = sample_neighbourhood(g, chunk, fanout, rng)
        logits = forward(model, sample, x, labels, hierarchy)
        preds[lo:lo + batch_size] = logits.argmax(axis=1)
    return preds


def evaluate(model: SageModel, split_graph: Graph, features: FeatureMatrix | np.ndarray,
             labels: np.ndarray, eval_nodes: np.ndarray, hierarchy: LabelHierarchy,
             seed: int = 0, fanout: Optional[Sequence[int]] = None,
             batch_size: int = 256) -> Metrics:
    """Micro-F1 and per-class scores for eval_nodes on the given split graph."""
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    eval_nodes = np.asarray(eval_nodes, dtype=np.int64)
    y_true = class_targets(labels, eval_nodes, hierarchy)
    rng = np.random.default_rng([seed, 0xe7a1])
    if fanout is None:
        fanout = (10, 25) if model.num_layers == 2 else tuple([10] * model.num_layers)
    preds = np.empty(len(eval_nodes), dtype=np.int64)
    for lo in range(0, len(eval_nodes), batch_size):
        chunk = eval_nodes[lo:lo + batch_size]
        sample = sample_neighbourhood(split_graph, chunk, fanout, rng)
        logits = forward(model, sample, x, labels, hierarchy)
        preds[lo:lo + batch_size] = logits.argmax(axis=1)
    names = [hierarchy.names[c] for c in hierarchy.leaf_ids]
    return metrics_from_predictions(y_true, preds, names)


@dataclass
class GridSearchResult:
    leaderboard: list[dict]
    best_index: int
    best_config: TrainConfig
    test_metrics: Metrics


def grid_search(space: Sequence[TrainConfig], g_tr: Graph, g_va: Graph, g_te: Graph,
                train_nodes: np.ndarray, val_nodes: np.ndarray, test_nodes: np.ndarray,
                features: FeatureMatrix | np.ndarray, labels: np.ndarray,
                hierarchy: LabelHierarchy) -> GridSearchResult:
    """Train every config, rank by validation micro-F1, test the winner once.

    Ties break toward the smaller model, then the lower config index.
    """
    space = list(space)
    if not space:
        raise ValueError("empty grid")
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    num_classes = hierarchy.num_leaves
    rows = []
    models = []
    for i, cfg in enumerate(space):
        model = SageModel.create(x.shape[1], cfg.hidden, num_classes,
                                 aggregator=cfg.aggregator, seed=cfg.seed,
                                 unknown_label_weight=cfg.unknown_label_weight,
                                 wmean2_from=cfg.wmean2_from,
                                 l2_normalize=cfg.l2_normalize)
        history = train(model, g_tr, train_nodes, x, labels, hierarchy, cfg)
        val = evaluate(model, g_va, x, labels, val_nodes, hierarchy, seed=cfg.seed,
                       fanout=cfg.effective_fanout)
        rows.append({"index": i, "aggregator": cfg.aggregator,
                     "val_micro_f1": val.micro_f1, "params": model.num_params(),
                     "final_loss": history[-1] if history else None})
        models.append(model)
    order = sorted(range(len(rows)),
                   key=lambda i: (-rows[i]["val_micro_f1"], rows[i]["params"], i))
    best = order[0]
    cfg = space[best]
    test = evaluate(models[best], g_te, x, labels, test_nodes, hierarchy,
                    seed=cfg.seed, fanout=cfg.effective_fanout)
    leaderboard = [rows[i] for i in order]
    return GridSearchResult(leaderboard=leaderboard, best_index=best,
                            best_config=cfg, test_metrics=test)


CHECKPOINT_VERSION = 1


def save_checkpoint(model: SageModel, sink: TextIO) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "aggregator": model.aggregator,
        "unknown_label_weight": model.unknown_label_weight,
        "wmean2_from": model.wmean2_from,
        "l2_normalize": model.l2_normalize,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "head_w": model.head_w.tolist(),
        "head_b": model.head_b.tolist(),
    }
    json.dump(payload, sink)


def load_checkpoint(source: TextIO) -> SageModel:
    payload = json.load(source)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    return SageModel(
        weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
        head_w=np.asarray(payload["head_w"], dtype=np.float64),
        head_b=np.asarray(payload["head_b"], dtype=np.float64),
        aggregator=payload["aggregator"],
        unknown_label_weight=payload["unknown_label_weight"],
        wmean2_from=payload["wmean2_from"],
        l2_normalize=payload["l2_normalize"],
    )
