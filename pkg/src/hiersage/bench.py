"""End-to-end aggregator comparison on the default synthetic benchmark.

One run: generate the synthetic graph, keep its largest component, build the
connectivity-aware split, assemble features (coarse attribute, graph
descriptors, node embeddings), then train and score MEAN / WMEAN-1 / WMEAN-2
under identical budgets. Descriptors and embeddings are computed on the full
graph (transductive features, as with precomputed per-page vectors); the
split protocol still controls which edges each phase may sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import node_embeddings
from .graph import largest_connected_component
from .hierarchy import LabelHierarchy
from .netfeat import (FeatureMatrix, assemble_features, assortativity,
                      betweenness, louvain, one_hot_communities)
from .sage import SageModel, TrainConfig, evaluate, train
from .splitter import build_split_graphs, make_split
from .synthgen import SynthConfig, coarse_group_features, generate

BENCH_AGGREGATORS = ("mean", "wmean1", "wmean2")


@dataclass(frozen=True)
class BenchParams:
    synth: SynthConfig = field(default_factory=SynthConfig)
    embedding_dim: int = 64
    walk_length: int = 12
    walks_per_node: int = 4
    window: int = 3
    negatives: int = 4
    embed_epochs: int = 3
    embed_batch: int = 4096
    max_communities: int = 8
    sage_epochs: int = 20
    sage_batch: int = 128
    lr: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    fanout: tuple[int, ...] = (10, 25)


def assemble_bench_features(g, labels: np.ndarray, h: LabelHierarchy,
                            train_nodes: np.ndarray, seed: int,
                            params: BenchParams) -> FeatureMatrix:
    coarse = coarse_group_features(labels, h, correlation=0.8, seed=seed)
    deg = FeatureMatrix(g.degrees.astype(np.float64)[:, None], ["degree"])
    asrt = FeatureMatrix(assortativity(g)[:, None], ["assortativity"])
    btw = FeatureMatrix(betweenness(g, normalized=True)[:, None], ["betweenness"])
    comm = one_hot_communities(louvain(g, seed=seed), params.max_communities)
    emb = node_embeddings(g, dim=params.embedding_dim, walk_length=params.walk_length,
                          walks_per_node=params.walks_per_node, window=params.window,
                          negatives=params.negatives, epochs=params.embed_epochs,
                          seed=seed)
    return assemble_features([coarse, deg, asrt, btw, comm, emb], standardize=True,
                             train_nodes=train_nodes)


def run_bench_seed(seed: int, params: BenchParams | None = None) -> dict:
    """Train the three aggregators on one seeded benchmark instance."""
    params = params or BenchParams()
    g0, labels0, h = generate(params.synth.with_seed(seed))
    g, mapping = largest_connected_component(g0)
    labels = labels0[mapping >= 0]
    split = make_split(g, seed=seed)
    graphs = build_split_graphs(g, split)
    feats = assemble_bench_features(g, labels, h, graphs.train_nodes, seed, params)
    rows = {}
    for agg in BENCH_AGGREGATORS:
        cfg = TrainConfig(epochs=params.sage_epochs, batch_size=params.sage_batch,
                          lr=params.lr, seed=seed, aggregator=agg,
                          hidden=params.hidden, fanout=params.fanout)
        model = SageModel.create(feats.d, cfg.hidden, h.num_leaves, aggregator=agg,
                                 seed=seed)
        history = train(model, graphs.g_tr, graphs.train_nodes, feats, labels, h, cfg)
        val = evaluate(model, graphs.g_va, feats, labels, graphs.val_nodes, h,
                       seed=seed, fanout=cfg.effective_fanout)
        test = evaluate(model, graphs.g_te, feats, labels, graphs.test_nodes, h,
                        seed=seed, fanout=cfg.effective_fanout)
        rows[agg] = {"val_micro_f1": val.micro_f1, "test_micro_f1": test.micro_f1,
                     "final_loss": history[-1] if history else None}
    return {"seed": seed, "n": g.n, "m": g.m, "aggregators": rows}


def run_bench(seed: int = 0, repeats: int = 1, params: BenchParams | None = None) -> dict:
    """Comparison table over `repeats` seeded runs (seeds seed..seed+repeats-1)."""
    runs = [run_bench_seed(seed + i, params) for i in range(repeats)]
    means = {}
    for agg in BENCH_AGGREGATORS:
        means[agg] = {
            "val_micro_f1": float(np.mean([r["aggregators"][agg]["val_micro_f1"]
                                           for r in runs])),
            "test_micro_f1": float(np.mean([r["aggregators"][agg]["test_micro_f1"]
                                            for r in runs])),
        }
    return {"seed": seed, "repeats": repeats, "runs": runs, "mean": means}


def format_bench_table(result: dict) -> str:
    """Plain-text comparison table, one row per aggregator."""
    lines = [f"aggregator comparison over {result['repeats']} run(s), base seed {result['seed']}",
             f"{'aggregator':<12}{'val micro-F1':>14}{'test micro-F1':>15}"]
    for agg in BENCH_AGGREGATORS:
        m = result["mean"][agg]
        lines.append(f"{agg:<12}{m['val_micro_f1']:>14.5f}{m['test_micro_f1']:>15.5f}")
    return "\n".join(lines)
