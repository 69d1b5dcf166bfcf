"""Unsupervised node embeddings: uniform random walks + skip-gram with
negative sampling, trained with plain SGD on numpy.

Walks are unbiased (every next step uniform over neighbours); negatives are
drawn proportionally to degree^0.75. Single-worker updates, bit-reproducible
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .netfeat import FeatureMatrix


@dataclass(frozen=True)
class WalkCorpus:
    walks: np.ndarray  # (num_walks, L) node ids
    walk_length: int
    walks_per_node: int


def random_walks(g: Graph, walk_length: int = 40, walks_per_node: int = 10,
                 seed: int = 0) -> WalkCorpus:
    """`walks_per_node` uniform walks from every non-isolated node.

    All walks advance in lockstep, drawing each step from one seeded stream,
    so the corpus is deterministic given (graph, seed).
    """
    if walk_length < 2:
        raise ValueError("walk_length must be >= 2")
    rng = np.random.default_rng([seed, 0x3a1])
    starts = np.flatnonzero(g.degrees >= 1)
    if starts.size == 0:
        return WalkCorpus(np.zeros((0, walk_length), dtype=np.int64),
                          walk_length, walks_per_node)
    cur = np.tile(starts, walks_per_node)
    walks = np.empty((len(cur), walk_length), dtype=np.int64)
    walks[:, 0] = cur
    deg = g.degrees
    for step in range(1, walk_length):
        # symmetric graph with deg >= 1 at the start: no dead ends possible
        pick = rng.integers(0, deg[cur])
        cur = g.indices[g.indptr[cur] + pick]
        walks[:, step] = cur
    return WalkCorpus(walks, walk_length, walks_per_node)


def _skipgram_pairs(corpus: WalkCorpus, window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (center, context) pairs within the window, over every walk."""
    centers, contexts = [], []
    walks = corpus.walks
    length = corpus.walk_length
    for off in range(1, window + 1):
        if off >= length:
            break
        centers.append(walks[:, :-off].ravel())
        contexts.append(walks[:, off:].ravel())
        centers.append(walks[:, off:].ravel())
        contexts.append(walks[:, :-off].ravel())
    if not centers:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _scatter_mean_update(table: np.ndarray, ids: np.ndarray, grads: np.ndarray,
                         lr: float) -> None:
    """One averaged SGD step per distinct row.

    A node can occur many times inside a vectorized batch; summing its pair
    gradients would scale the step with its multiplicity and diverge on small
    graphs, so each row moves by lr times its mean gradient instead.
    Segment sums run over sorted ids (reduceat), much faster than add.at.
    """
    counts = np.bincount(ids, minlength=table.shape[0]).astype(np.float64)
    scale = (lr / counts[ids])[:, None]
    np.add.at(table, ids, -scale * grads)


def train_skipgram(g: Graph, corpus: WalkCorpus, dim: int = 128, window: int = 5,
                   negatives: int = 5, epochs: int = 5, lr: float = 0.05,
                   seed: int = 0, batch_size: int = 512
                   ) -> tuple[np.ndarray, list[float]]:
    """Train node vectors on the walk corpus; returns (n x dim table, loss/epoch).

    Loss is the standard negative-sampling objective averaged per pair;
    epochs=0 returns the seeded random initialization unchanged.
    """
    if corpus.walks.size == 0:
        raise ValueError("empty walk corpus")
    rng = np.random.default_rng([seed, 0xe3b])
    w_in = (rng.random((g.n, dim)) - 0.5) / dim
    w_out = (rng.random((g.n, dim)) - 0.5) / dim
    if epochs == 0:
        return w_in, []
    centers, contexts = _skipgram_pairs(corpus, window)
    noise = g.degrees.astype(np.float64) ** 0.75
    if noise.sum() == 0:
        raise ValueError("graph has no edges to sample negatives from")
    noise_cdf = np.cumsum(noise / noise.sum())
    history = []
    n_pairs = len(centers)
    for _ in range(epochs):
        order = rng.permutation(n_pairs)
        total = 0.0
        for lo in range(0, n_pairs, batch_size):
            idx = order[lo:lo + batch_size]
            c, o = centers[idx], contexts[idx]
            neg = np.searchsorted(noise_cdf, rng.random((len(idx), negatives)))
            targets = np.concatenate([o[:, None], neg], axis=1)  # (B, 1+neg)
            vc = w_in[c]
            vt = w_out[targets]
            scores = np.einsum("bd,bkd->bk", vc, vt)
            total += float(_softplus(-scores[:, 0]).sum() + _softplus(scores[:, 1:]).sum())
            sign = np.full_like(scores, 0.0)
            sign[:, 0] = 1.0
            gscore = _sigmoid(scores) - sign
            gvc = np.einsum("bk,bkd->bd", gscore, vt)
            gvt = gscore[:, :, None] * vc[:, None, :]
            _scatter_mean_update(w_in, c, gvc, lr)
            _scatter_mean_update(w_out, targets.ravel(), gvt.reshape(-1, dim), lr)
        history.append(total / n_pairs)
    return w_in, history


def embedding_features(table: np.ndarray) -> FeatureMatrix:
    """Wrap an embedding table as a FeatureMatrix with emb_* column names."""
    dim = table.shape[1]
    return FeatureMatrix(table, [f"emb_{j}" for j in range(dim)])


def node_embeddings(g: Graph, dim: int = 128, walk_length: int = 40,
                    walks_per_node: int = 10, window: int = 5, negatives: int = 5,
                    epochs: int = 5, lr: float = 0.05, seed: int = 0) -> FeatureMatrix:
    """Walks + skip-gram in one call; rows of nodes never walked stay at their
    random initialization."""
    corpus = random_walks(g, walk_length, walks_per_node, seed=seed)
    if corpus.walks.size == 0:
        rng = np.random.default_rng([seed, 0xe3b])
        return embedding_features((rng.random((g.n, dim)) - 0.5) / dim)
    table, _ = train_skipgram(g, corpus, dim=dim, window=window, negatives=negatives,
                              epochs=epochs, lr=lr, seed=seed)
    return embedding_features(table)


def cosine_similarity_matrix(table: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(table, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = table / safe
    return unit @ unit.T
