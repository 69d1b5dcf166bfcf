"""Connectivity-aware train/validation/test split and the three derived graphs.

Roles are drawn uniformly at random at the requested fractions and resampled
until the derived graphs are usable: the training graph must be connected and
no evaluation node may end up isolated (strict mode additionally demands the
validation and test graphs be single components). The three graphs share the
parent graph's node-id space so the edge sets nest directly:

* g_tr: only train-train edges (the subgraph induced by the training nodes)
* g_va: edges within train+val, minus val-val edges
* g_te: all edges minus test-test edges
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .graph import Graph, from_edges, is_connected_within

TRAIN, VAL, TEST = 0, 1, 2
ROLE_NAMES = ("train", "val", "test")


class SplitConnectivityError(RuntimeError):
    """Raised when no connected split is found within max_retries."""

    def __init__(self, message: str, best_attempt: int, stats: dict):
        super().__init__(message)
        self.best_attempt = best_attempt
        self.stats = stats


@dataclass(frozen=True)
class SplitAssignment:
    roles: np.ndarray
    fractions: tuple[float, float, float]
    seed: int
    attempt: int = 0

    def __post_init__(self):
        self.roles.setflags(write=False)

    def nodes_with_role(self, role: int) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    @property
    def sizes(self) -> dict[str, int]:
        return {name: int(np.sum(self.roles == r)) for r, name in enumerate(ROLE_NAMES)}


@dataclass(frozen=True)
class SplitGraphs:
    """The three evaluation graphs plus their node-set views."""

    g_tr: Graph
    g_va: Graph
    g_te: Graph
    train_nodes: np.ndarray
    val_nodes: np.ndarray
    test_nodes: np.ndarray


def role_counts(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Exact-rounding role sizes (train, val, test) summing to n."""
    f_tr, f_va, f_te = fractions
    if abs(f_tr + f_va + f_te - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n_te = int(round(n * f_te))
    n_va = int(round(n * f_va))
    n_tr = n - n_te - n_va
    if min(n_tr, n_va, n_te) < 0:
        raise ValueError("fractions produce a negative role size")
    return n_tr, n_va, n_te


def _assign(rng, n: int, counts: tuple[int, int, int]) -> np.ndarray:
    n_tr, n_va, n_te = counts
    perm = rng.permutation(n)
    roles = np.empty(n, dtype=np.int64)
    roles[perm[:n_te]] = TEST
    roles[perm[n_te:n_te + n_va]] = VAL
    roles[perm[n_te + n_va:]] = TRAIN
    return roles


def _eval_isolation(g: Graph, roles: np.ndarray, role: int, allowed: Iterable[int]) -> int:
    """Count nodes of `role` with no neighbour whose role is in `allowed`."""
    allowed = set(allowed)
    bad = 0
    for u in np.flatnonzero(roles == role):
        nbr_roles = roles[g.neighbors(u)]
        if not any(int(r) in allowed for r in nbr_roles):
            bad += 1
    return bad


def _connectivity_report(g: Graph, roles: np.ndarray, strict: bool) -> dict:
    train = np.flatnonzero(roles == TRAIN)
    report = {
        "train_connected": bool(is_connected_within(g, train)),
        "isolated_val": _eval_isolation(g, roles, VAL, (TRAIN,)),
        "isolated_test": _eval_isolation(g, roles, TEST, (TRAIN, VAL)),
    }
    if strict:
        trva = np.flatnonzero(roles != TEST)
        report["val_graph_connected"] = bool(
            _connected_after_removal(g, roles, trva, forbidden=VAL))
        report["test_graph_connected"] = bool(
            _connected_after_removal(g, roles, np.arange(g.n), forbidden=TEST))
    return report


def _connected_after_removal(g: Graph, roles: np.ndarray, nodes: np.ndarray,
                             forbidden: int) -> bool:
    """Connectivity of `nodes` after dropping edges between two `forbidden` roles."""
    if nodes.size == 0:
        return True
    member = np.zeros(g.n, dtype=bool)
    member[nodes] = True
    seen = {int(nodes[0])}
    stack = [int(nodes[0])]
    while stack:
        u = stack.pop()
        for v in g.neighbors(u):
            v = int(v)
            if not member[v] or v in seen:
                continue
            if roles[u] == forbidden and roles[v] == forbidden:
                continue
            seen.add(v)
            stack.append(v)
    return len(seen) == nodes.size


def _acceptable(report: dict) -> bool:
    ok = report["train_connected"] and report["isolated_val"] == 0 \
        and report["isolated_test"] == 0
    for key in ("val_graph_connected", "test_graph_connected"):
        if key in report:
            ok = ok and report[key]
    return ok


def make_split(g: Graph, fractions: tuple[float, float, float] = (0.7, 0.2, 0.1),
               seed: int = 0, max_retries: int = 1000,
               strict: bool = False) -> SplitAssignment:
    """Rejection-sample a role assignment until the derived graphs are usable.

    Deterministic given the seed: attempt i uses the substream (seed, i) and
    the first acceptable attempt wins. Raises SplitConnectivityError with the
    best attempt's statistics when max_retries is exhausted.
    """
    if g.n < 10:
        raise ValueError("split needs at least 10 nodes")
    counts = role_counts(g.n, fractions)
    best = None
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        roles = _assign(rng, g.n, counts)
        report = _connectivity_report(g, roles, strict)
        if _acceptable(report):
            return SplitAssignment(roles=roles, fractions=fractions, seed=seed,
                                   attempt=attempt)
        score = report["isolated_val"] + report["isolated_test"] + (
            0 if report["train_connected"] else 1)
        if best is None or score < best[0]:
            best = (score, attempt, report)
    raise SplitConnectivityError(
        f"no acceptable split in {max_retries} attempts (seed {seed}); "
        f"best attempt {best[1]} had {best[2]}",
        best_attempt=best[1], stats=best[2])


def build_split_graphs(g: Graph, s: SplitAssignment) -> SplitGraphs:
    """Materialize g_tr, g_va, g_te from a role assignment."""
    if len(s.roles) != g.n:
        raise ValueError("assignment does not match graph size")
    e = g.edges()
    ru, rv = s.roles[e[:, 0]], s.roles[e[:, 1]]
    tr_mask = (ru == TRAIN) & (rv == TRAIN)
    va_mask = (ru != TEST) & (rv != TEST) & ~((ru == VAL) & (rv == VAL))
    te_mask = ~((ru == TEST) & (rv == TEST))
    return SplitGraphs(
        g_tr=from_edges(g.n, e[tr_mask]),
        g_va=from_edges(g.n, e[va_mask]),
        g_te=from_edges(g.n, e[te_mask]),
        train_nodes=s.nodes_with_role(TRAIN),
        val_nodes=s.nodes_with_role(VAL),
        test_nodes=s.nodes_with_role(TEST),
    )


def save_split(s: SplitAssignment, sink: TextIO) -> None:
    for u, r in enumerate(s.roles):
        sink.write(f"{u}\t{ROLE_NAMES[r]}\n")


def load_split(source: TextIO, fractions=(0.7, 0.2, 0.1), seed: int = -1) -> SplitAssignment:
    roles = []
    lookup = {name: r for r, name in enumerate(ROLE_NAMES)}
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in lookup:
            raise ValueError(f"line {lineno}: expected `node_id<TAB>train|val|test`")
        if int(parts[0]) != len(roles):
            raise ValueError(f"line {lineno}: node ids must be consecutive from 0")
        roles.append(lookup[parts[1]])
    return SplitAssignment(roles=np.array(roles, dtype=np.int64),
                           fractions=fractions, seed=seed)
