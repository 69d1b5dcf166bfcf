"""Synthetic labeled graphs with hierarchy-aligned homophily.

A stochastic block model over the leaf classes of a taxonomy: the edge
probability of a node pair depends on how their labels relate (same leaf,
same group, different group). Optional "star" classes additionally attach to
every class, reproducing the ubiquitous-neighbour phenomenon seen in real
citation data. Class sizes are uniform or geometric (heavily skewed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import Graph, from_edges
from .hierarchy import LabelHierarchy, make_taxonomy
from .netfeat import FeatureMatrix


@dataclass(frozen=True)
class SynthConfig:
    groups: int = 2
    leaves_per_group: int = 3
    n: int = 1200
    size_distribution: str = "geometric"  # or "uniform"
    geometric_ratio: float = 0.6
    p_same: float = 0.04
    p_sibling: float = 0.008
    p_far: float = 0.002
    star_classes: int = 1
    p_star: float = 0.004
    feature_group_correlation: float = 0.8
    seed: int = 0
    strict: bool = False  # reject configs whose expected degree falls below 1

    def __post_init__(self):
        if not (1.0 >= self.p_same >= self.p_sibling >= self.p_far >= 0.0):
            raise ValueError("need 1 >= p_same >= p_sibling >= p_far >= 0")
        if self.size_distribution == "geometric" and not 0.0 < self.geometric_ratio <= 1.0:
            raise ValueError("geometric ratio must lie in (0, 1]")
        if self.size_distribution not in ("geometric", "uniform"):
            raise ValueError(f"unknown size distribution {self.size_distribution!r}")
        if self.n < self.groups * self.leaves_per_group:
            raise ValueError("need n >= number of leaf classes")
        if not 0 <= self.star_classes <= self.groups * self.leaves_per_group:
            raise ValueError("star_classes out of range")

    @property
    def num_classes(self) -> int:
        return self.groups * self.leaves_per_group

    def with_seed(self, seed: int) -> "SynthConfig":
        return replace(self, seed=seed)


def class_sizes(cfg: SynthConfig) -> np.ndarray:
    """Per-class node counts summing to n, monotone non-increasing.

    Geometric sizes follow normalized weights ratio**i; rounding by largest
    remainder, then sorted descending so monotonicity survives rounding.
    """
    c = cfg.num_classes
    if cfg.size_distribution == "uniform":
        weights = np.ones(c)
    else:
        weights = cfg.geometric_ratio ** np.arange(c)
    quota = cfg.n * weights / weights.sum()
    sizes = np.floor(quota).astype(np.int64)
    remainder = quota - sizes
    for i in np.argsort(-remainder)[: cfg.n - sizes.sum()]:
        sizes[i] += 1
    return np.sort(sizes)[::-1].copy()


def _pair_probability(cfg: SynthConfig, ci: int, cj: int) -> float:
    """Edge probability for a node pair with leaf-class indices ci, cj."""
    gi, gj = ci // cfg.leaves_per_group, cj // cfg.leaves_per_group
    if ci == cj:
        p = cfg.p_same
    elif gi == gj:
        p = cfg.p_sibling
    else:
        p = cfg.p_far
    if ci < cfg.star_classes or cj < cfg.star_classes:
        p = 1.0 - (1.0 - p) * (1.0 - cfg.p_star)  # independent extra attachment
    return p


def _sample_pairs(rng, count: int, total: int) -> np.ndarray:
    """`count` distinct pair codes drawn uniformly from range(total)."""
    return rng.choice(total, size=count, replace=False)


def generate(cfg: SynthConfig) -> tuple[Graph, np.ndarray, LabelHierarchy]:
    """Draw a labeled graph: (graph, per-node leaf class ids, taxonomy).

    Deterministic given cfg.seed. Class indices 0..C-1 follow the taxonomy's
    leaf pre-order; the first cfg.star_classes of them are the star classes.
    """
    h = make_taxonomy(cfg.groups, cfg.leaves_per_group)
    sizes = class_sizes(cfg)
    rng = np.random.default_rng([cfg.seed, 0x5b1])
    if cfg.strict:
        # expected degree of the smallest class under its own-block density
        exp_deg = (sizes[-1] - 1) * cfg.p_same
        if exp_deg < 1.0:
            raise ValueError(f"infeasible config: smallest class expected degree {exp_deg:.3f} < 1")

    block = np.repeat(np.arange(cfg.num_classes), sizes)
    class_idx = rng.permutation(cfg.n)  # scatter class membership over node ids
    labels_by_class = np.empty(cfg.n, dtype=np.int64)
    labels_by_class[class_idx] = block
    members = [np.flatnonzero(labels_by_class == c) for c in range(cfg.num_classes)]

    chunks = []
    for ci in range(cfg.num_classes):
        for cj in range(ci, cfg.num_classes):
            p = _pair_probability(cfg, ci, cj)
            if p <= 0.0:
                continue
            a, b = members[ci], members[cj]
            if ci == cj:
                total = len(a) * (len(a) - 1) // 2
                if total == 0:
                    continue
                k = rng.binomial(total, p)
                if k == 0:
                    continue
                codes = _sample_pairs(rng, k, total)
                # decode triangular index: code -> (row i, col j), i < j
                s = len(a)
                i = (s - 2 - np.floor(
                    np.sqrt(-8.0 * codes + 4.0 * s * (s - 1) - 7.0) / 2.0 - 0.5)).astype(np.int64)
                j = (codes + i + 1 - (s * (s - 1) - (s - i) * (s - i - 1)) // 2).astype(np.int64)
                chunks.append(np.column_stack([a[i], a[j]]))
            else:
                total = len(a) * len(b)
                if total == 0:
                    continue
                k = rng.binomial(total, p)
                if k == 0:
                    continue
                codes = _sample_pairs(rng, k, total)
                chunks.append(np.column_stack([a[codes // len(b)], b[codes % len(b)]]))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    g = from_edges(cfg.n, edges)
    leaf_ids = np.array(h.leaf_ids)
    return g, leaf_ids[labels_by_class], h


def coarse_group_features(labels: np.ndarray, h: LabelHierarchy,
                          correlation: float = 0.8, seed: int = 0) -> FeatureMatrix:
    """Noisy one-hot of each node's group (the leaf's parent).

    With probability ``correlation`` the indicated group is the true one,
    otherwise a uniformly random different group. Unlabeled nodes get a
    uniformly random group.
    """
    groups = sorted({int(h.parent[c]) for c in h.leaf_ids})
    gidx = {gid: i for i, gid in enumerate(groups)}
    rng = np.random.default_rng([seed, 0xc0a])
    n = len(labels)
    values = np.zeros((n, len(groups)))
    for i, lab in enumerate(labels):
        if lab < 0:
            col = int(rng.integers(len(groups)))
        else:
            true = gidx[int(h.parent[lab])]
            if rng.random() < correlation or len(groups) == 1:
                col = true
            else:
                col = int(rng.integers(len(groups) - 1))
                if col >= true:
                    col += 1
        values[i, col] = 1.0
    names = [f"attr_{h.names[gid]}" for gid in groups]
    return FeatureMatrix(values, names, onehot=np.ones(len(groups), dtype=bool))


def empirical_homophily(g: Graph, labels: np.ndarray,
                        h: LabelHierarchy) -> tuple[float, float]:
    """(mean same-leaf fraction, mean same-group fraction) over labeled nodes.

    Fractions are computed among labeled neighbours; nodes with none are
    skipped.
    """
    same_leaf, same_group, counted = [], [], 0
    for u in range(g.n):
        if labels[u] < 0:
            continue
        nbr = g.neighbors(u)
        nbr_labs = labels[nbr]
        nbr_labs = nbr_labs[nbr_labs >= 0]
        if len(nbr_labs) == 0:
            continue
        counted += 1
        same_leaf.append(np.mean(nbr_labs == labels[u]))
        same_group.append(np.mean(h.parent[nbr_labs] == h.parent[labels[u]]))
    if counted == 0:
        return 0.0, 0.0
    return float(np.mean(same_leaf)), float(np.mean(same_group))
