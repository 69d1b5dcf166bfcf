"""Structural analyses: neighbourhood-label matrix and label distributions.

These quantify why link structure helps classification: rows of the
neighbourhood matrix show which classes co-cite which, and the distribution
of distinct neighbour labels is far less skewed than the raw class sizes.
Outputs are data (matrices and histograms), not rendered plots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .graph import Graph
from .hierarchy import LabelHierarchy


@dataclass(frozen=True)
class NeighbourhoodLabelMatrix:
    """Row-normalized class-to-class neighbourhood proportions.

    Rows and columns are indexed by leaf classes in hierarchy pre-order, so
    related classes sit next to each other. Entry (i, j) is the proportion of
    label-j nodes among the neighbours of label-i nodes; rows with support sum
    to ``row_sum``. Generally non-symmetric.
    """

    values: np.ndarray
    class_names: list[str]
    row_sum: float = 1.0


def neighbourhood_label_matrix(g: Graph, labels: np.ndarray, h: LabelHierarchy,
                               row_sum: float = 1.0) -> NeighbourhoodLabelMatrix:
    """Count label-j neighbours of label-i nodes and normalize each row.

    Unlabeled endpoints are skipped. Rows without any supporting edge stay
    all-zero rather than being dropped.
    """
    labels = np.asarray(labels, dtype=np.int64)
    c = h.num_leaves
    to_idx = np.full(len(h.names), -1, dtype=np.int64)
    for k, cid in enumerate(h.leaf_ids):
        to_idx[cid] = k
    idx = np.where(labels >= 0, to_idx[np.maximum(labels, 0)], -1)
    counts = np.zeros((c, c))
    src = np.repeat(np.arange(g.n), g.degrees)
    dst = g.indices
    both = (idx[src] >= 0) & (idx[dst] >= 0)
    np.add.at(counts, (idx[src[both]], idx[dst[both]]), 1.0)
    sums = counts.sum(axis=1, keepdims=True)
    values = np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0) * row_sum
    names = [h.names[cid] for cid in h.leaf_ids]
    return NeighbourhoodLabelMatrix(values=values, class_names=names, row_sum=row_sum)


def label_distribution(labels: np.ndarray) -> list[tuple[int, int]]:
    """(class id, count) pairs, descending by count, ties by class id."""
    labels = np.asarray(labels, dtype=np.int64)
    labeled = labels[labels >= 0]
    if labeled.size == 0:
        return []
    ids, counts = np.unique(labeled, return_counts=True)
    order = np.lexsort((ids, -counts))
    return [(int(ids[i]), int(counts[i])) for i in order]


def distinct_labels_per_node(g: Graph, labels: np.ndarray) -> np.ndarray:
    """Histogram of the number of distinct labels among each node's labeled
    neighbours; bin b counts nodes seeing exactly b distinct labels."""
    labels = np.asarray(labels, dtype=np.int64)
    per_node = np.zeros(g.n, dtype=np.int64)
    for u in range(g.n):
        nbr_labs = labels[g.neighbors(u)]
        per_node[u] = len(np.unique(nbr_labs[nbr_labs >= 0]))
    return np.bincount(per_node)


def save_matrix(m: NeighbourhoodLabelMatrix, sink: TextIO) -> None:
    """TSV with class names as header row and leading column."""
    sink.write("class\t" + "\t".join(m.class_names) + "\n")
    for name, row in zip(m.class_names, m.values):
        sink.write(name + "\t" + "\t".join(f"{v:.10g}" for v in row) + "\n")
