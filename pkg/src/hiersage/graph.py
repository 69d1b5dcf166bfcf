"""Undirected simple graph in CSR form, plus loaders for the on-disk formats.

Node ids are dense integers 0..n-1. External names live in :class:`NodeTable`.
Graphs are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np


class GraphFormatError(ValueError):
    """Raised when an edge-list or node-table stream is malformed."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph.

    ``indptr``/``indices`` form a CSR adjacency: the neighbours of ``u`` are
    ``indices[indptr[u]:indptr[u+1]]``, sorted ascending, without duplicates
    or self-loops. ``m`` counts unordered edges.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return self.indptr[1:] - self.indptr[:-1]

    def degree(self, u: int) -> int:
        if not 0 <= u < self.n:
            raise IndexError(f"node id {u} out of range for graph with n={self.n}")
        return int(self.indptr[u + 1] - self.indptr[u])

    def neighbors(self, u: int) -> np.ndarray:
        if not 0 <= u < self.n:
            raise IndexError(f"node id {u} out of range for graph with n={self.n}")
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edges(self) -> np.ndarray:
        """All unordered edges as an (m, 2) array with u < v, sorted."""
        u = np.repeat(np.arange(self.n), self.degrees)
        v = self.indices
        keep = u < v
        return np.column_stack([u[keep], v[keep]])

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


def from_edges(n: int, edges: np.ndarray | Iterable[tuple[int, int]]) -> Graph:
    """Build a Graph from (possibly duplicated, possibly self-looped) pairs.

    Self-loops are dropped; duplicate and reversed-duplicate pairs collapse to
    a single undirected edge.
    """
    edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    if len(lo):
        pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    # symmetrize, then sort by (row, col) to get sorted adjacency lists
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(n=n, indptr=indptr, indices=dst)


def check_invariants(g: Graph) -> None:
    """Full-scan validation of the Graph invariants; raises on violation."""
    if g.indptr[0] != 0 or g.indptr[-1] != len(g.indices):
        raise AssertionError("indptr does not frame indices")
    if np.any(np.diff(g.indptr) < 0):
        raise AssertionError("negative adjacency length")
    for u in range(g.n):
        row = g.neighbors(u)
        if len(row) and (np.any(np.diff(row) <= 0)):
            raise AssertionError(f"adjacency of {u} not strictly sorted (dup?)")
        if np.any(row == u):
            raise AssertionError(f"self-loop at {u}")
        for v in row:
            if not g.has_edge(int(v), u):
                raise AssertionError(f"edge ({u},{v}) not symmetric")
    if g.m * 2 != len(g.indices):
        raise AssertionError("m inconsistent with adjacency")


@dataclass
class NodeTable:
    """id <-> external name map plus an optional label name per node."""

    names: list[str]
    labels: list[Optional[str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = [None] * len(self.names)
        if len(self.labels) != len(self.names):
            raise ValueError("names/labels length mismatch")
        if len(set(self.names)) != len(self.names):
            raise GraphFormatError("node names are not unique")
        self._index = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown node name {name!r}") from None

    def label_ids(self, hierarchy) -> np.ndarray:
        """Labels as hierarchy node ids, -1 where unlabeled.

        Every present label must be a leaf of ``hierarchy``.
        """
        out = np.full(len(self.names), -1, dtype=np.int64)
        for i, lab in enumerate(self.labels):
            if lab is None:
                continue
            cid = hierarchy.id_of(lab)
            if not hierarchy.is_leaf(cid):
                raise ValueError(f"label {lab!r} of node {self.names[i]!r} is not a leaf class")
            out[i] = cid
        return out


def _lines(source: TextIO | Iterable[str]) -> Iterable[str]:
    for line in source:
        yield line.rstrip("\n")


def load_edge_list(source: TextIO | Iterable[str],
                   nodes: Optional[NodeTable] = None) -> tuple[Graph, NodeTable]:
    """Parse a `u<TAB>v` edge stream into a Graph.

    Lines starting with ``#`` and blank lines are skipped. Without a node
    table, ids are assigned in first-appearance order. Self-loops are dropped
    and duplicate/reversed edges merged.
    """
    name_to_id: dict[str, int] = {}
    order: list[str] = []
    pairs: list[tuple[int, int]] = []
    if nodes is not None:
        lookup = {name: i for i, name in enumerate(nodes.names)}
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise GraphFormatError(f"line {lineno}: expected `u<TAB>v`, got {raw!r}")
        a, b = parts
        if nodes is not None:
            try:
                ia, ib = lookup[a], lookup[b]
            except KeyError as exc:
                raise GraphFormatError(f"line {lineno}: unknown node name {exc.args[0]!r}") from None
        else:
            for name in (a, b):
                if name not in name_to_id:
                    name_to_id[name] = len(order)
                    order.append(name)
            ia, ib = name_to_id[a], name_to_id[b]
        pairs.append((ia, ib))
    if nodes is None:
        nodes = NodeTable(names=order)
    g = from_edges(len(nodes), np.array(pairs, dtype=np.int64).reshape(-1, 2))
    return g, nodes


def save_edge_list(g: Graph, sink: TextIO, names: Optional[list[str]] = None) -> None:
    """Emit edges with u < v, sorted lexicographically by pair."""
    for u, v in g.edges():
        if names is not None:
            sink.write(f"{names[u]}\t{names[v]}\n")
        else:
            sink.write(f"{u}\t{v}\n")


def load_node_table(source: TextIO | Iterable[str]) -> NodeTable:
    """Parse `id<TAB>name<TAB>label-or-"-"` lines; ids must be 0..n-1 in order."""
    names: list[str] = []
    labels: list[Optional[str]] = []
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise GraphFormatError(f"line {lineno}: expected `id<TAB>name<TAB>label`, got {raw!r}")
        idx, name, lab = parts
        try:
            idx = int(idx)
        except ValueError:
            raise GraphFormatError(f"line {lineno}: bad node id {parts[0]!r}") from None
        if idx != len(names):
            raise GraphFormatError(f"line {lineno}: ids must be consecutive from 0, got {idx}")
        names.append(name)
        labels.append(None if lab == "-" else lab)
    return NodeTable(names=names, labels=labels)


def save_node_table(nodes: NodeTable, sink: TextIO) -> None:
    for i, (name, lab) in enumerate(zip(nodes.names, nodes.labels)):
        sink.write(f"{i}\t{name}\t{lab if lab is not None else '-'}\n")


def connected_components(g: Graph) -> np.ndarray:
    """Component label per node, labels dense in discovery (smallest-id) order."""
    comp = np.full(g.n, -1, dtype=np.int64)
    next_label = 0
    for start in range(g.n):
        if comp[start] >= 0:
            continue
        comp[start] = next_label
        frontier = np.array([start], dtype=np.int64)
        while frontier.size:
            counts = g.indptr[frontier + 1] - g.indptr[frontier]
            total = int(counts.sum())
            if total == 0:
                break
            starts = g.indptr[frontier]
            offs = np.repeat(starts, counts) + np.arange(total) - np.repeat(
                np.cumsum(counts) - counts, counts)
            nbr = g.indices[offs]
            fresh = np.unique(nbr[comp[nbr] < 0])
            comp[fresh] = next_label
            frontier = fresh
        next_label += 1
    return comp


def is_connected_within(g: Graph, nodes: np.ndarray) -> bool:
    """True when ``nodes`` form one component using only edges inside the set."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        return True
    member = np.zeros(g.n, dtype=bool)
    member[nodes] = True
    seen = np.zeros(g.n, dtype=bool)
    seen[nodes[0]] = True
    frontier = nodes[:1]
    reached = 1
    while frontier.size:
        counts = g.indptr[frontier + 1] - g.indptr[frontier]
        total = int(counts.sum())
        if total == 0:
            break
        starts = g.indptr[frontier]
        offs = np.repeat(starts, counts) + np.arange(total) - np.repeat(
            np.cumsum(counts) - counts, counts)
        nbr = g.indices[offs]
        fresh = np.unique(nbr[member[nbr] & ~seen[nbr]])
        seen[fresh] = True
        reached += len(fresh)
        frontier = fresh
    return reached == nodes.size


def induced_subgraph(g: Graph, keep: np.ndarray | Iterable[int]) -> tuple[Graph, np.ndarray]:
    """Subgraph on ``keep`` with exactly the edges of g inside the set.

    Returns the new graph (ids 0..k-1 in ascending old-id order) and the
    old->new id map, -1 for dropped nodes.
    """
    keep = np.unique(np.asarray(list(keep) if not isinstance(keep, np.ndarray) else keep,
                                dtype=np.int64))
    if keep.size and (keep.min() < 0 or keep.max() >= g.n):
        raise ValueError("keep set contains out-of-range node ids")
    mapping = np.full(g.n, -1, dtype=np.int64)
    mapping[keep] = np.arange(keep.size)
    if keep.size == 0:
        return from_edges(0, np.zeros((0, 2), dtype=np.int64)), mapping
    e = g.edges()
    inside = (mapping[e[:, 0]] >= 0) & (mapping[e[:, 1]] >= 0)
    new_edges = mapping[e[inside]]
    return from_edges(keep.size, new_edges), mapping


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Largest component as a graph; ties keep the one with the smallest id.

    Returns (subgraph, old->new id map with -1 for dropped nodes).
    """
    if g.n == 0:
        return g, np.zeros(0, dtype=np.int64)
    comp = connected_components(g)
    sizes = np.bincount(comp)
    best = int(np.argmax(sizes))  # argmax returns first max: smallest-id component
    return induced_subgraph(g, np.flatnonzero(comp == best))
