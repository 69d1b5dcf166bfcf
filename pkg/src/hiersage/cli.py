"""Command-line pipeline: synth, features, embed, split, train, eval, search,
analyze, hierarchy, bench.

Every command validates its inputs before writing anything, removes partial
outputs on failure, and drops a manifest (seed, config hash, versions) next to
its outputs so a run can be reproduced exactly. All randomness flows from the
user-supplied --seed through named substreams.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (distinct_labels_per_node, label_distribution,
                       neighbourhood_label_matrix, save_matrix)
from .bench import BenchParams, format_bench_table, run_bench
from .embed import node_embeddings, random_walks, train_skipgram, embedding_features
from .graph import (Graph, NodeTable, largest_connected_component, load_edge_list,
                    load_node_table, save_edge_list, save_node_table)
from .hierarchy import LabelHierarchy, load_hierarchy, save_hierarchy
from .netfeat import (FeatureMatrix, assemble_features, assortativity, betweenness,
                      load_features, louvain, one_hot_communities, save_features)
from .sage import (SageModel, TrainConfig, evaluate, grid_search, load_checkpoint,
                   save_checkpoint, train)
from .splitter import (ROLE_NAMES, SplitAssignment, build_split_graphs, load_split,
                       make_split, save_split)
from .synthgen import SynthConfig, generate


class CliError(RuntimeError):
    pass


class OutputSession:
    """Collects written paths; removes them all if the command fails."""

    def __init__(self):
        self.paths: list[Path] = []

    def write_text(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.paths.append(path)

    def write_with(self, path: Path, fn) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as sink:
            fn(sink)
        self.paths.append(path)

    def rollback(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _config_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_manifest(session: OutputSession, out: Path, command: str, params: dict) -> None:
    manifest = {
        "schema_version": 1,
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "config_hash": _config_hash(params),
        "versions": {
            "hiersage": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    session.write_text(out / f"manifest_{command}.json",
                       json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_config_file(path: str) -> dict:
    """JSON object or key=value lines; keys normalized to snake_case."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
        if not isinstance(cfg, dict):
            raise CliError(f"config file {path} must hold a JSON object")
    except json.JSONDecodeError:
        cfg = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            try:
                cfg[key.strip()] = json.loads(value.strip())
            except json.JSONDecodeError:
                cfg[key.strip()] = value.strip()
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def load_dataset(data_dir: str) -> tuple[Graph, NodeTable, np.ndarray, LabelHierarchy]:
    root = Path(data_dir)
    for name in ("edges.tsv", "nodes.tsv", "hierarchy.tsv"):
        if not (root / name).exists():
            raise CliError(f"dataset file missing: {root / name}")
    with open(root / "hierarchy.tsv", encoding="utf-8") as fh:
        hierarchy = load_hierarchy(fh)
    with open(root / "nodes.tsv", encoding="utf-8") as fh:
        nodes = load_node_table(fh)
    with open(root / "edges.tsv", encoding="utf-8") as fh:
        g, nodes = load_edge_list(fh, nodes=nodes)
    labels = nodes.label_ids(hierarchy)
    return g, nodes, labels, hierarchy


def _load_split_file(path: str, g: Graph) -> SplitAssignment:
    with open(path, encoding="utf-8") as fh:
        s = load_split(fh)
    if len(s.roles) != g.n:
        raise CliError(f"split file covers {len(s.roles)} nodes, graph has {g.n}")
    return s


def _feature_graph(args, g: Graph):
    """Resolve --graph auto|train|full into the graph descriptors run on."""
    mode = args.graph
    if mode == "auto":
        mode = "train" if args.split else "full"
    if mode == "full":
        return g, None
    if not args.split:
        raise CliError("--graph train needs --split")
    s = _load_split_file(args.split, g)
    graphs = build_split_graphs(g, s)
    return graphs.g_tr, s


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise CliError(f"expected comma-separated integers, got {text!r}") from None


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args, session: OutputSession) -> int:
    cfg = SynthConfig(groups=args.groups, leaves_per_group=args.leaves, n=args.n,
                      size_distribution=args.size_dist, geometric_ratio=args.ratio,
                      p_same=args.p_same, p_sibling=args.p_sibling, p_far=args.p_far,
                      star_classes=args.star_classes, p_star=args.p_star,
                      seed=args.seed, strict=args.strict)
    g, labels, h = generate(cfg)
    names = [f"v{i}" for i in range(g.n)]
    label_names = [h.names[c] for c in labels]
    nodes = NodeTable(names=names, labels=label_names)
    out = Path(args.out)
    session.write_with(out / "edges.tsv", lambda s: save_edge_list(g, s, names=names))
    session.write_with(out / "nodes.tsv", lambda s: save_node_table(nodes, s))
    session.write_with(out / "hierarchy.tsv", lambda s: save_hierarchy(h, s))
    write_manifest(session, out, "synth", vars_of(args, ["n", "groups", "leaves",
                   "size_dist", "ratio", "p_same", "p_sibling", "p_far",
                   "star_classes", "p_star", "seed"]))
    print(f"wrote dataset with n={g.n} m={g.m} classes={h.num_leaves} to {out}")
    return 0


def cmd_features(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fg, split = _feature_graph(args, g)
    which = [tok.strip() for tok in args.only.split(",") if tok.strip()]
    parts = []
    for name in which:
        if name == "degree":
            parts.append(FeatureMatrix(fg.degrees.astype(np.float64)[:, None], ["degree"]))
        elif name == "assortativity":
            parts.append(FeatureMatrix(assortativity(fg)[:, None], ["assortativity"]))
        elif name == "betweenness":
            parts.append(FeatureMatrix(
                betweenness(fg, normalized=True,
                            sample_sources=args.betweenness_samples,
                            seed=args.seed)[:, None], ["betweenness"]))
        elif name == "louvain":
            parts.append(one_hot_communities(louvain(fg, seed=args.seed),
                                             args.max_communities))
        else:
            raise CliError(f"unknown descriptor {name!r}")
    if not parts:
        raise CliError("--only selected no descriptors")
    train_nodes = split.nodes_with_role(0) if split is not None else None
    fm = assemble_features(parts, standardize=args.standardize, train_nodes=train_nodes)
    out = Path(args.out)
    _write_matrix(session, out / "features", fm, args.format)
    write_manifest(session, out, "features",
                   vars_of(args, ["data", "only", "graph", "split", "standardize",
                                  "max_communities", "seed", "format"]))
    print(f"wrote {fm.n}x{fm.d} feature matrix to {out}")
    return 0


def _write_matrix(session: OutputSession, stem: Path, fm: FeatureMatrix, fmt: str) -> None:
    if fmt == "tsv":
        session.write_with(stem.with_suffix(".tsv"), lambda s: save_features(fm, s))
    else:
        payload = {"names": fm.names, "values": fm.values.tolist()}
        session.write_text(stem.with_suffix(".json"), json.dumps(payload) + "\n")


def cmd_embed(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fg, _ = _feature_graph(args, g)
    fm = node_embeddings(fg, dim=args.dim, walk_length=args.walk_length,
                         walks_per_node=args.walks_per_node, window=args.window,
                         negatives=args.negatives, epochs=args.epochs, lr=args.lr,
                         seed=args.seed)
    out = Path(args.out)
    _write_matrix(session, out / "embeddings", fm, args.format)
    write_manifest(session, out, "embed",
                   vars_of(args, ["data", "dim", "walk_length", "walks_per_node",
                                  "window", "negatives", "epochs", "lr", "graph",
                                  "split", "seed", "format"]))
    print(f"wrote {fm.n}x{fm.d} embedding table to {out}")
    return 0


def cmd_split(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fractions = tuple(float(tok) for tok in args.frac.split(","))
    if len(fractions) != 3:
        raise CliError("--frac needs three comma-separated fractions")
    if args.lcc:
        g, _ = largest_connected_component(g)
    s = make_split(g, fractions=fractions, seed=args.seed,
                   max_retries=args.max_retries, strict=args.strict)
    graphs = build_split_graphs(g, s)
    report = {
        "sizes": s.sizes,
        "fractions": list(fractions),
        "seed": args.seed,
        "attempt": s.attempt,
        "edges": {"g_tr": graphs.g_tr.m, "g_va": graphs.g_va.m, "g_te": graphs.g_te.m,
                  "full": g.m},
    }
    out = Path(args.out)
    session.write_with(out / "split.tsv", lambda sk: save_split(s, sk))
    session.write_text(out / "split_report.json",
                       json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_manifest(session, out, "split",
                   vars_of(args, ["data", "frac", "seed", "max_retries", "strict", "lcc"]))
    print(json.dumps(report, sort_keys=True))
    return 0


def _train_config_from_args(args) -> TrainConfig:
    overrides = load_config_file(args.config) if args.config else {}
    merged = {
        "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
        "seed": args.seed, "aggregator": args.aggregator,
        "hidden": _parse_int_list(args.hidden), "fanout": _parse_int_list(args.fanout),
        "swap_fanout": args.swap_fanout,
        "unknown_label_weight": args.unknown_label_weight,
        "wmean2_from": args.wmean2_from,
    }
    for key, value in overrides.items():
        if key not in merged:
            raise CliError(f"unknown config key {key!r}")
        if key in ("hidden", "fanout") and isinstance(value, str):
            value = _parse_int_list(value)
        if key in ("hidden", "fanout") and isinstance(value, list):
            value = tuple(int(v) for v in value)
        merged[key] = value
    return TrainConfig(**merged)


def _load_features_file(path: str, g: Graph) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        fm = load_features(fh)
    if fm.n != g.n:
        raise CliError(f"feature file covers {fm.n} nodes, graph has {g.n}")
    return fm


def cmd_train(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fm = _load_features_file(args.features, g)
    s = _load_split_file(args.split, g)
    graphs = build_split_graphs(g, s)
    cfg = _train_config_from_args(args)
    model = SageModel.create(fm.d, cfg.hidden, h.num_leaves, aggregator=cfg.aggregator,
                             seed=cfg.seed, unknown_label_weight=cfg.unknown_label_weight,
                             wmean2_from=cfg.wmean2_from)
    history = train(model, graphs.g_tr, graphs.train_nodes, fm, labels, h, cfg)
    out = Path(args.out)
    session.write_with(out / "checkpoint.json", lambda sk: save_checkpoint(model, sk))
    session.write_text(out / "history.json", json.dumps({"loss": history}) + "\n")
    write_manifest(session, out, "train",
                   vars_of(args, ["data", "features", "split", "aggregator", "epochs",
                                  "batch_size", "lr", "hidden", "fanout", "swap_fanout",
                                  "unknown_label_weight", "wmean2_from", "seed"]))
    final = f"{history[-1]:.5f}" if history else "n/a"
    print(f"trained {cfg.aggregator} for {cfg.epochs} epochs, final loss {final}")
    return 0


def cmd_eval(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fm = _load_features_file(args.features, g)
    s = _load_split_file(args.split, g)
    graphs = build_split_graphs(g, s)
    with open(args.checkpoint, encoding="utf-8") as fh:
        model = load_checkpoint(fh)
    if args.phase == "val":
        graph, nodes_eval = graphs.g_va, graphs.val_nodes
    else:
        graph, nodes_eval = graphs.g_te, graphs.test_nodes
    metrics = evaluate(model, graph, fm, labels, nodes_eval, h, seed=args.seed,
                       fanout=_parse_int_list(args.fanout))
    out = Path(args.out)
    payload = metrics.to_dict()
    session.write_text(out / f"metrics_{args.phase}.json",
                       json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_manifest(session, out, "eval",
                   vars_of(args, ["data", "features", "split", "checkpoint", "phase",
                                  "fanout", "seed"]))
    print(json.dumps({"phase": args.phase, "micro_f1": metrics.micro_f1}, sort_keys=True))
    return 0


def cmd_search(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    fm = _load_features_file(args.features, g)
    s = _load_split_file(args.split, g)
    graphs = build_split_graphs(g, s)
    grid_raw = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    if not isinstance(grid_raw, list) or not grid_raw:
        raise CliError("grid file must hold a non-empty JSON list of config objects")
    space = []
    for entry in grid_raw:
        params = dict(entry)
        for key in ("hidden", "fanout"):
            if key in params and isinstance(params[key], list):
                params[key] = tuple(params[key])
        params.setdefault("seed", args.seed)
        space.append(TrainConfig(**params))
    result = grid_search(space, graphs.g_tr, graphs.g_va, graphs.g_te,
                         graphs.train_nodes, graphs.val_nodes, graphs.test_nodes,
                         fm, labels, h)
    out = Path(args.out)
    payload = {
        "leaderboard": result.leaderboard,
        "best_index": result.best_index,
        "test_metrics": result.test_metrics.to_dict(),
    }
    session.write_text(out / "leaderboard.json",
                       json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_manifest(session, out, "search",
                   vars_of(args, ["data", "features", "split", "grid", "seed"]))
    print(json.dumps({"best_index": result.best_index,
                      "test_micro_f1": result.test_metrics.micro_f1}, sort_keys=True))
    return 0


def cmd_analyze(args, session: OutputSession) -> int:
    g, nodes, labels, h = load_dataset(args.data)
    matrix = neighbourhood_label_matrix(g, labels, h)
    dist = label_distribution(labels)
    hist = distinct_labels_per_node(g, labels)
    out = Path(args.out)
    if args.format == "tsv":
        session.write_with(out / "neighbourhood_matrix.tsv",
                           lambda sk: save_matrix(matrix, sk))
    else:
        session.write_text(out / "neighbourhood_matrix.json", json.dumps(
            {"classes": matrix.class_names, "values": matrix.values.tolist()}) + "\n")
    session.write_text(out / "label_distribution.json", json.dumps(
        [{"class": h.names[cid], "count": count} for cid, count in dist]) + "\n")
    session.write_text(out / "distinct_labels_histogram.json",
                       json.dumps(hist.tolist()) + "\n")
    write_manifest(session, out, "analyze", vars_of(args, ["data", "format", "seed"]))
    print(f"wrote analysis artifacts for {len(matrix.class_names)} classes to {out}")
    return 0


def cmd_hierarchy(args, session: OutputSession) -> int:
    with open(args.file, encoding="utf-8") as fh:
        h = load_hierarchy(fh)
    print(json.dumps({
        "classes": len(h.names),
        "leaf_count": h.num_leaves,
        "depth_histogram": h.depth_histogram(),
    }, sort_keys=True))
    return 0


def cmd_bench(args, session: OutputSession) -> int:
    params = BenchParams()
    result = run_bench(seed=args.seed, repeats=args.repeats, params=params)
    out = Path(args.out)
    session.write_text(out / "bench.json",
                       json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_manifest(session, out, "bench", vars_of(args, ["seed", "repeats"]))
    print(format_bench_table(result))
    return 0


def vars_of(args, keys: list[str]) -> dict:
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiersage",
        description="hierarchy-aware GraphSAGE pipeline on citation graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1,
                       help="reserved; every operation currently runs deterministically "
                            "in a single process")
        if out:
            p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    common(p)
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--leaves", type=int, default=3)
    p.add_argument("--size-dist", choices=["geometric", "uniform"], default="geometric")
    p.add_argument("--ratio", type=float, default=0.6)
    p.add_argument("--p-same", type=float, default=0.04)
    p.add_argument("--p-sibling", type=float, default=0.008)
    p.add_argument("--p-far", type=float, default=0.002)
    p.add_argument("--star-classes", type=int, default=1)
    p.add_argument("--p-star", type=float, default=0.004)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("features", help="graph descriptor features -> TSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--only", default="degree,assortativity,louvain,betweenness")
    p.add_argument("--graph", choices=["auto", "train", "full"], default="auto",
                   help="descriptor graph: training graph when a split is given "
                        "(avoids leakage), else the full graph")
    p.add_argument("--split")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--max-communities", type=int, default=8)
    p.add_argument("--betweenness-samples", type=int, default=None,
                   help="pivot-sampled betweenness with this many sources")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("embed", help="random-walk skip-gram embeddings -> TSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--walk-length", type=int, default=40)
    p.add_argument("--walks-per-node", type=int, default=10)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--graph", choices=["auto", "train", "full"], default="auto")
    p.add_argument("--split")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("split", help="connectivity-aware train/val/test split")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--frac", default="0.7,0.2,0.1")
    p.add_argument("--max-retries", type=int, default=1000)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--lcc", action="store_true",
                   help="restrict to the largest connected component first")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="train a GraphSAGE classifier")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--aggregator", choices=["mean", "wmean1", "wmean2"], default="mean")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--hidden", default="128,128")
    p.add_argument("--fanout", default="10,25")
    p.add_argument("--swap-fanout", action="store_true")
    p.add_argument("--unknown-label-weight", type=float, default=0.5)
    p.add_argument("--wmean2-from", choices=["center", "neighbour", "max"],
                   default="center")
    p.add_argument("--config", help="JSON or key=value config file; flags win")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the val/test graph")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--phase", choices=["val", "test"], default="test")
    p.add_argument("--fanout", default="10,25")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("search", help="deterministic grid search over configs")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--grid", required=True, help="JSON list of train-config objects")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("analyze", help="neighbourhood-label matrix + distributions")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("hierarchy", help="validate a hierarchy file, print stats")
    common(p, out=False)
    p.add_argument("--file", required=True)
    p.set_defaults(fn=cmd_hierarchy)

    p = sub.add_parser("bench", help="end-to-end MEAN vs WMEAN comparison")
    common(p)
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    session = OutputSession()
    try:
        return args.fn(args, session)
    except (CliError, ValueError, RuntimeError, OSError, KeyError) as exc:
        session.rollback()
        print(json.dumps({"error": str(exc), "command": args.command}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
