"""Hand-crafted graph descriptors: degree, assortativity, betweenness, communities.

All descriptors are pure functions of (graph, seed) and return per-node
vectors or a :class:`FeatureMatrix`. Betweenness uses Brandes' accumulation;
community detection is Louvain over Newman modularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from .graph import Graph


@dataclass
class FeatureMatrix:
    """Dense n x d feature block with unique column names.

    ``onehot`` marks indicator columns so standardization can skip them.
    """

    values: np.ndarray
    names: list[str]
    onehot: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if len(self.names) != self.values.shape[1]:
            raise ValueError("column-name count does not match d")
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")
        if self.onehot is None:
            self.onehot = np.zeros(self.values.shape[1], dtype=bool)
        self.onehot = np.asarray(self.onehot, dtype=bool)
        if self.onehot.shape != (self.values.shape[1],):
            raise ValueError("onehot flag length must match d")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class Partition:
    """Community id per node, ids dense in 0..k-1."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.size and (self.assignment.min() < 0
                                     or self.assignment.max() >= self.k):
            raise ValueError("community ids must be dense in 0..k-1")

    @staticmethod
    def from_labels(labels: Sequence[int]) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        return Partition(labels, int(labels.max()) + 1 if labels.size else 0)


def assortativity(g: Graph) -> np.ndarray:
    """Per-node mean of min(d(u),d(v))/max(d(u),d(v)) over neighbours v.

    Isolated nodes get 0. Values lie in [0, 1] and equal 1 on regular graphs.
    """
    deg = g.degrees.astype(np.float64)
    if g.n == 0:
        return np.zeros(0)
    src = np.repeat(np.arange(g.n), g.degrees)
    du, dv = deg[src], deg[g.indices]
    ratio = np.minimum(du, dv) / np.maximum(du, dv) if len(src) else np.zeros(0)
    sums = np.bincount(src, weights=ratio, minlength=g.n)
    out = np.zeros(g.n)
    nz = deg > 0
    out[nz] = sums[nz] / deg[nz]
    return out


def _frontier_neighbors(g: Graph, frontier: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sources-repeated, neighbour ids) for every adjacency entry of frontier."""
    counts = g.indptr[frontier + 1] - g.indptr[frontier]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    offs = np.repeat(g.indptr[frontier], counts) + np.arange(total) - np.repeat(
        np.cumsum(counts) - counts, counts)
    return np.repeat(frontier, counts), g.indices[offs]


def _brandes_from(g: Graph, s: int, acc: np.ndarray) -> None:
    """One Brandes source sweep: BFS sigma counts, then dependency accumulation."""
    dist = np.full(g.n, -1, dtype=np.int64)
    sigma = np.zeros(g.n)
    dist[s] = 0
    sigma[s] = 1.0
    levels = [np.array([s], dtype=np.int64)]
    d = 0
    while levels[-1].size:
        src, nbr = _frontier_neighbors(g, levels[-1])
        if not nbr.size:
            break
        fresh = np.unique(nbr[dist[nbr] < 0])
        dist[fresh] = d + 1
        onpath = dist[nbr] == dist[src] + 1
        np.add.at(sigma, nbr[onpath], sigma[src[onpath]])
        levels.append(fresh)
        d += 1
    delta = np.zeros(g.n)
    for level in reversed(levels[1:]):
        if not level.size:
            continue
        w, nbr = _frontier_neighbors(g, level)
        pred = dist[nbr] == dist[w] - 1
        np.add.at(delta, nbr[pred], (sigma[nbr[pred]] / sigma[w[pred]]) * (1.0 + delta[w[pred]]))
    delta[s] = 0.0
    acc += delta


def betweenness(g: Graph, normalized: bool = False,
                sample_sources: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Betweenness centrality over unordered node pairs, via Brandes.

    Unnormalized by default (the raw pair sum). ``normalized`` divides by
    C(n-1, 2). ``sample_sources`` switches to the pivot-sampling estimate
    (contributions of s sampled sources scaled by n/s), intended for graphs
    beyond ~50k nodes where the exact O(nm) sweep is too slow.
    """
    acc = np.zeros(g.n)
    if g.n == 0:
        return acc
    if sample_sources is not None and sample_sources < g.n:
        rng = np.random.default_rng(seed)
        sources = rng.choice(g.n, size=sample_sources, replace=False)
        scale = g.n / sample_sources
    else:
        sources = range(g.n)
        scale = 1.0
    for s in sources:
        _brandes_from(g, int(s), acc)
    acc *= scale / 2.0  # each unordered pair was counted from both endpoints
    if normalized:
        pairs = (g.n - 1) * (g.n - 2) / 2.0
        if pairs > 0:
            acc /= pairs
    return acc


def modularity(g: Graph, p: Partition) -> float:
    """Newman modularity Q = sum_c [e_c/m - (deg_c/(2m))^2]; requires m > 0."""
    if g.m == 0:
        raise ValueError("modularity is undefined on a graph with no edges")
    if len(p.assignment) != g.n:
        raise ValueError("partition size does not match graph")
    e = g.edges()
    same = p.assignment[e[:, 0]] == p.assignment[e[:, 1]]
    intra = np.bincount(p.assignment[e[:, 0]][same], minlength=p.k).astype(np.float64)
    deg_tot = np.bincount(p.assignment, weights=g.degrees.astype(np.float64), minlength=p.k)
    m = float(g.m)
    return float(np.sum(intra / m - (deg_tot / (2.0 * m)) ** 2))


class _LouvainLevel:
    """Weighted graph for one Louvain level (dict-of-dict adjacency)."""

    def __init__(self, n: int):
        self.n = n
        self.adj: list[dict[int, float]] = [dict() for _ in range(n)]
        self.self_w = np.zeros(n)

    @staticmethod
    def from_graph(g: Graph) -> "_LouvainLevel":
        lvl = _LouvainLevel(g.n)
        for u in range(g.n):
            for v in g.neighbors(u):
                lvl.adj[u][int(v)] = 1.0
        return lvl

    def strengths(self) -> np.ndarray:
        k = np.array([sum(nbrs.values()) for nbrs in self.adj])
        return k + 2.0 * self.self_w


def louvain(g: Graph, seed: int = 0) -> Partition:
    """Louvain community detection, deterministic given the seed.

    Local moves take the highest modularity gain (ties to the lowest community
    id); node visit order is a seeded shuffle per level. Returns the final
    (coarsest) level's partition mapped back to the original nodes.
    """
    if g.m == 0:
        return Partition(np.arange(g.n), g.n)
    rng = np.random.default_rng(seed)
    level = _LouvainLevel.from_graph(g)
    m_w = float(g.m)
    node_to_comm = np.arange(g.n)  # original node -> current community label chain
    while True:
        n = level.n
        comm = np.arange(n)
        k = level.strengths()
        tot = k.copy()
        order = rng.permutation(n)
        improved = False
        moved = True
        while moved:
            moved = False
            for u in order:
                cu = comm[u]
                # weights from u to each neighbouring community
                links: dict[int, float] = {}
                for v, w in level.adj[u].items():
                    links[comm[v]] = links.get(comm[v], 0.0) + w
                tot[cu] -= k[u]
                base = links.get(cu, 0.0) - tot[cu] * k[u] / (2.0 * m_w)
                best_c, best_gain = cu, 0.0
                for c in sorted(links):  # ascending ids: ties keep the lowest
                    if c == cu:
                        continue
                    gain = (links[c] - tot[c] * k[u] / (2.0 * m_w)) - base
                    if gain > best_gain + 1e-12:
                        best_c, best_gain = c, gain
                tot[best_c] += k[u]
                if best_c != cu:
                    comm[u] = best_c
                    moved = True
                    improved = True
        if not improved:
            break
        # renumber communities densely and aggregate
        uniq, dense = np.unique(comm, return_inverse=True)
        node_to_comm = dense[node_to_comm]
        k2 = len(uniq)
        nxt = _LouvainLevel(k2)
        for u in range(n):
            cu = dense[u]
            nxt.self_w[cu] += level.self_w[u]
            for v, w in level.adj[u].items():
                cv = dense[v]
                if cu == cv:
                    if u < v:
                        nxt.self_w[cu] += w
                else:
                    nxt.adj[cu][cv] = nxt.adj[cu].get(cv, 0.0) + w
        if k2 == n:
            break
        level = nxt
    uniq, dense = np.unique(node_to_comm, return_inverse=True)
    # stable renumbering by first appearance in node-id order
    first = {}
    out = np.empty(g.n, dtype=np.int64)
    for i, c in enumerate(dense):
        if c not in first:
            first[c] = len(first)
        out[i] = first[c]
    return Partition(out, len(first))


def one_hot_communities(p: Partition, max_k: int) -> FeatureMatrix:
    """One-hot encode communities into at most ``max_k`` columns.

    When k exceeds max_k, the max_k-1 largest communities keep their own
    column and everything else shares an "other" column. Exactly one 1 per row.
    """
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    n = len(p.assignment)
    sizes = np.bincount(p.assignment, minlength=p.k)
    if p.k <= max_k:
        cols = list(range(p.k))
        other = None
    else:
        ranked = sorted(range(p.k), key=lambda c: (-sizes[c], c))
        cols = sorted(ranked[: max_k - 1])
        other = max_k - 1
    col_of = np.full(p.k, -1, dtype=np.int64)
    for j, c in enumerate(cols):
        col_of[c] = j
    values = np.zeros((n, max_k))
    for i, c in enumerate(p.assignment):
        j = col_of[c]
        values[i, j if j >= 0 else other] = 1.0
    names = [f"community_{c}" for c in cols]
    if other is not None:
        names.append("community_other")
    names += [f"community_pad{j}" for j in range(max_k - len(names))]
    return FeatureMatrix(values, names, onehot=np.ones(max_k, dtype=bool))


def assemble_features(parts: Sequence[FeatureMatrix], standardize: bool = False,
                      train_nodes: Optional[np.ndarray] = None) -> FeatureMatrix:
    """Concatenate feature blocks horizontally, optionally standardizing.

    Standardization shifts/scales each non-one-hot column to zero mean and
    unit variance computed over ``train_nodes`` only (all nodes when None);
    columns with zero variance come out as all zeros.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("empty parts list")
    n = parts[0].n
    for part in parts:
        if part.n != n:
            raise ValueError(f"row-count mismatch: {part.n} != {n}")
    values = np.concatenate([p.values for p in parts], axis=1)
    names = [name for p in parts for name in p.names]
    onehot = np.concatenate([p.onehot for p in parts])
    fm = FeatureMatrix(values.copy(), names, onehot=onehot)
    if standardize:
        rows = np.arange(n) if train_nodes is None else np.asarray(train_nodes, dtype=np.int64)
        for j in range(fm.d):
            if fm.onehot[j]:
                continue
            col = fm.values[rows, j]
            mu, sd = col.mean(), col.std()
            if sd < 1e-12:
                fm.values[:, j] = fm.values[:, j] - mu
            else:
                fm.values[:, j] = (fm.values[:, j] - mu) / sd
    return fm


def graph_descriptor_features(g: Graph, seed: int = 0, max_communities: int = 8,
                              which: Sequence[str] = ("degree", "assortativity",
                                                      "louvain", "betweenness")) -> FeatureMatrix:
    """The four descriptors of the feature set, selectable by name."""
    parts = []
    for name in which:
        if name == "degree":
            parts.append(FeatureMatrix(g.degrees.astype(np.float64)[:, None], ["degree"]))
        elif name == "assortativity":
            parts.append(FeatureMatrix(assortativity(g)[:, None], ["assortativity"]))
        elif name == "betweenness":
            parts.append(FeatureMatrix(betweenness(g, normalized=True)[:, None], ["betweenness"]))
        elif name == "louvain":
            parts.append(one_hot_communities(louvain(g, seed=seed), max_communities))
        else:
            raise ValueError(f"unknown descriptor {name!r}")
    return assemble_features(parts)


def save_features(fm: FeatureMatrix, sink: TextIO) -> None:
    """TSV: header of column names, one row per node id, %.10g formatting."""
    sink.write("\t".join(fm.names) + "\n")
    for row in fm.values:
        sink.write("\t".join(f"{v:.10g}" for v in row) + "\n")


def load_features(source: TextIO) -> FeatureMatrix:
    header = source.readline().rstrip("\n")
    if not header:
        raise ValueError("feature file has no header")
    names = header.split("\t")
    rows = [[float(tok) for tok in line.rstrip("\n").split("\t")]
            for line in source if line.strip()]
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureMatrix(values, names)
