"""Rooted label taxonomy and the label-similarity weights for weighted aggregation.

The taxonomy is a tree of label classes; only leaves are assignable to nodes.
Weight kinds:

* ``uniform``  -- every neighbour weighs 1 (plain mean aggregation)
* ``wmean1``   -- 1.0 same leaf, 0.75 same immediate parent, 0.25 otherwise
* ``wmean2``   -- 1 / (1 + edges from the centre's label up to the LCA)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np


class HierarchyFormatError(ValueError):
    """Raised for cyclic, multi-rooted, orphaned, or duplicated declarations."""


class LabelHierarchy:
    """Immutable rooted tree of label classes with LCA queries.

    Ids are dense 0..size-1 in declaration order. ``leaf_ids`` lists leaves in
    pre-order (children visited in declaration order), which fixes the class
    ordering used by analysis matrices and classifier heads.
    """

    def __init__(self, names: list[str], parents: list[int]):
        if len(names) != len(parents):
            raise ValueError("names/parents length mismatch")
        self.names = list(names)
        self.parent = np.asarray(parents, dtype=np.int64)
        self._index = {name: i for i, name in enumerate(self.names)}
        if len(self._index) != len(self.names):
            raise HierarchyFormatError("duplicate class names")
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) != 1:
            raise HierarchyFormatError(f"expected exactly one root, found {len(roots)}")
        self.root = int(roots[0])
        self._children: list[list[int]] = [[] for _ in self.names]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self._children[p].append(i)
        # depth by walking from the root; anything unreached sits on a cycle
        self.depth = np.full(len(self.names), -1, dtype=np.int64)
        stack = [self.root]
        self.depth[self.root] = 0
        preorder = []
        while stack:
            u = stack.pop()
            preorder.append(u)
            for c in reversed(self._children[u]):
                self.depth[c] = self.depth[u] + 1
                stack.append(c)
        if np.any(self.depth < 0):
            bad = [self.names[i] for i in np.flatnonzero(self.depth < 0)]
            raise HierarchyFormatError(f"cyclic declarations: {bad} unreachable from root")
        self.leaf_ids = [u for u in preorder if not self._children[u]]
        self._leaf_index = {cid: k for k, cid in enumerate(self.leaf_ids)}

    def __len__(self) -> int:
        return len(self.names)

    @property
    def num_leaves(self) -> int:
        return len(self.leaf_ids)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown class {name!r}") from None

    def is_leaf(self, cid: int) -> bool:
        self._check(cid)
        return len(self._children[cid]) == 0

    def children(self, cid: int) -> list[int]:
        self._check(cid)
        return list(self._children[cid])

    def leaf_index(self, cid: int) -> int:
        """Position of a leaf class in pre-order (the classifier target index)."""
        try:
            return self._leaf_index[int(cid)]
        except KeyError:
            raise ValueError(f"class id {cid} is not a leaf") from None

    def _check(self, cid: int) -> None:
        if not 0 <= cid < len(self.names):
            raise KeyError(f"unknown class id {cid}")

    def lca(self, a: int, b: int) -> int:
        """Lowest common ancestor; lca(a, a) = a."""
        self._check(a)
        self._check(b)
        while self.depth[a] > self.depth[b]:
            a = int(self.parent[a])
        while self.depth[b] > self.depth[a]:
            b = int(self.parent[b])
        while a != b:
            a = int(self.parent[a])
            b = int(self.parent[b])
        return a

    def depth_histogram(self) -> list[int]:
        counts = np.bincount(self.depth)
        return [int(c) for c in counts]


def load_hierarchy(source: TextIO | Iterable[str]) -> LabelHierarchy:
    """Parse `child<TAB>parent` lines; the root is declared with parent "-".

    Rejects duplicate declarations, multiple roots, orphan parents and cycles.
    """
    declared: dict[str, str] = {}
    order: list[str] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise HierarchyFormatError(f"line {lineno}: expected `child<TAB>parent`, got {line!r}")
        child, parent = parts
        if child in declared:
            raise HierarchyFormatError(f"line {lineno}: class {child!r} declared twice")
        declared[child] = parent
        order.append(child)
    for child, parent in declared.items():
        if parent != "-" and parent not in declared:
            raise HierarchyFormatError(f"orphan class: parent {parent!r} of {child!r} never declared")
    ids = {name: i for i, name in enumerate(order)}
    parents = [-1 if declared[name] == "-" else ids[declared[name]] for name in order]
    return LabelHierarchy(order, parents)


def save_hierarchy(h: LabelHierarchy, sink: TextIO) -> None:
    for i, name in enumerate(h.names):
        p = int(h.parent[i])
        sink.write(f"{name}\t{'-' if p < 0 else h.names[p]}\n")


def make_taxonomy(groups: int, leaves_per_group: int) -> LabelHierarchy:
    """Three-level tree: root, `groups` groups, `leaves_per_group` leaves each."""
    names = ["root"]
    parents = [-1]
    for gi in range(groups):
        names.append(f"G{gi}")
        parents.append(0)
    for gi in range(groups):
        for li in range(leaves_per_group):
            names.append(f"G{gi}.L{li}")
            parents.append(1 + gi)
    return LabelHierarchy(names, parents)


def make_tree(branching: int, depth: int) -> LabelHierarchy:
    """Complete `branching`-ary tree of the given depth (root at depth 0)."""
    if branching < 1 or depth < 0:
        raise ValueError("branching >= 1 and depth >= 0 required")
    names = ["root"]
    parents = [-1]
    level = [0]
    for d in range(1, depth + 1):
        nxt = []
        for p in level:
            for b in range(branching):
                names.append(f"{names[p]}.{b}" if p != 0 else f"n{b}")
                parents.append(p)
                nxt.append(len(names) - 1)
        level = nxt
    return LabelHierarchy(names, parents)


def default_taxonomy() -> LabelHierarchy:
    """The shipped toy taxonomy: 2 groups x 3 leaves."""
    return make_taxonomy(2, 3)


def wmean1_weight(h: LabelHierarchy, a: int, b: int) -> float:
    """1 when labels match, 0.75 for siblings (shared parent), 0.25 otherwise."""
    for c in (a, b):
        if not h.is_leaf(c):
            raise ValueError(f"class {h.names[c]!r} is not a leaf")
    if a == b:
        return 1.0
    if h.parent[a] == h.parent[b]:
        return 0.75
    return 0.25


def wmean2_weight(h: LabelHierarchy, a: int, b: int, measure_from: str = "center") -> float:
    """1 / (1 + tree distance from one label up to lca(a, b)).

    ``measure_from`` picks which side the distance is measured from:
    "center" (a, the default), "neighbour" (b), or "max" of the two.
    """
    for c in (a, b):
        if not h.is_leaf(c):
            raise ValueError(f"class {h.names[c]!r} is not a leaf")
    anc = h.lca(a, b)
    if measure_from == "center":
        d = int(h.depth[a] - h.depth[anc])
    elif measure_from == "neighbour":
        d = int(h.depth[b] - h.depth[anc])
    elif measure_from == "max":
        d = int(max(h.depth[a], h.depth[b]) - h.depth[anc])
    else:
        raise ValueError(f"unknown measure_from {measure_from!r}")
    return 1.0 / (1.0 + d)


VALID_POLICY_KINDS = ("uniform", "wmean1", "wmean2")


@dataclass(frozen=True)
class WeightPolicy:
    """How a neighbour's label modulates its aggregation weight."""

    kind: str = "uniform"
    unknown_label_weight: float = 0.5
    wmean2_from: str = "center"

    def __post_init__(self):
        if self.kind not in VALID_POLICY_KINDS:
            raise ValueError(f"kind must be one of {VALID_POLICY_KINDS}, got {self.kind!r}")
        if not 0.0 < self.unknown_label_weight <= 1.0:
            raise ValueError("unknown_label_weight must lie in (0, 1]")


def neighbour_weight(policy: WeightPolicy, h: Optional[LabelHierarchy],
                     center_label: Optional[int], nbr_label: Optional[int]) -> float:
    """Weight of a neighbour given the centre's and the neighbour's labels.

    Missing labels (None or negative id) fall back to the policy's
    unknown_label_weight; the uniform policy ignores labels entirely.
    """
    if policy.kind == "uniform":
        return 1.0
    if center_label is None or nbr_label is None or center_label < 0 or nbr_label < 0:
        return policy.unknown_label_weight
    if policy.kind == "wmean1":
        return wmean1_weight(h, int(center_label), int(nbr_label))
    return wmean2_weight(h, int(center_label), int(nbr_label), policy.wmean2_from)


def pair_weights(policy: WeightPolicy, h: Optional[LabelHierarchy],
                 center_labels: np.ndarray, nbr_labels: np.ndarray) -> np.ndarray:
    """Vectorized neighbour_weight over parallel label arrays (-1 = missing)."""
    center_labels = np.asarray(center_labels)
    nbr_labels = np.asarray(nbr_labels)
    if policy.kind == "uniform":
        return np.ones(np.broadcast_shapes(center_labels.shape, nbr_labels.shape))
    cl, nl = np.broadcast_arrays(center_labels, nbr_labels)
    out = np.empty(cl.shape, dtype=np.float64)
    flat_c, flat_n, flat_o = cl.ravel(), nl.ravel(), out.ravel()
    cache: dict[tuple[int, int], float] = {}
    for i in range(flat_c.size):
        key = (int(flat_c[i]), int(flat_n[i]))
        w = cache.get(key)
        if w is None:
            w = neighbour_weight(policy, h, key[0], key[1])
            cache[key] = w
        flat_o[i] = w
    return out
