"""Command-line surface: train, explain, eval, pick, generate-synthetic.

A single JSON config file carries per-command sections; command-line flags
override config keys (flag > config > default). Every run writes a
``run_manifest.json`` with the resolved config, seed, and package version;
re-running with ``--config run_manifest.json`` reproduces the outputs
byte-for-byte. Exit codes: 0 success, 2 usage/input error, 3 experiment
gate failure. Seeds are mandatory; nothing falls back to the clock.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (
    explanation_matrix,
    global_importance,
    run_model_selection,
    run_noise_experiment,
    run_trust_experiment,
    submodular_pick,
)
from .exceptions import (
    DegenerateProblemError,
    GateUnmetError,
    GraphFormatError,
    GraphLimeError,
    InsufficientNeighborsError,
    ModelFormatError,
)
from .explainers import VALID_METHODS, make_explainer
from .gnn import ReferenceGnn, load_model, save_model
from .graph import load_graph, save_graph
from .serialize import write_json_atomic, write_text_atomic
from .synthetic import generate_synthetic

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATE = 3

EXPERIMENTS = ("noise", "trust", "model-select")


# ------------------------------------------------------------------ config


def _load_config(path: str | None) -> tuple[dict, int | None]:
    """Read a config file; manifests are unwrapped to their resolved config."""
    if path is None:
        return {}, None
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    if "config" in raw and "command" in raw:  # a run manifest
        return dict(raw["config"]), raw.get("seed")
    return raw, raw.get("seed")


def _resolve(args) -> tuple[dict, int, Path]:
    config, config_seed = _load_config(args.config)
    seed = args.seed if args.seed is not None else config_seed
    if seed is None:
        raise ValueError("a seed is required (--seed or config 'seed')")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    out = Path(args.out) if args.out else Path(config.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return config, seed, out


def _write_manifest(out: Path, command: str, seed: int, config: dict) -> None:
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
    }
    write_json_atomic(out / "run_manifest.json", manifest)


def _dataset_graph(config: dict):
    section = config.get("dataset")
    if not section:
        raise ValueError("config is missing the 'dataset' section")
    for key in ("edges", "features"):
        if key not in section:
            raise ValueError(f"dataset section is missing '{key}'")
        if not Path(section[key]).exists():
            raise FileNotFoundError(f"dataset file not found: {section[key]}")
    labels = section.get("labels")
    if labels is not None and not Path(labels).exists():
        raise FileNotFoundError(f"dataset file not found: {labels}")
    return load_graph(section["edges"], section["features"], labels)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    write_text_atomic(path, buf.getvalue())


def _split(node_count: int, fraction: float, seed: int):
    order = np.random.default_rng([seed, 0]).permutation(node_count)
    cut = int(round(fraction * node_count))
    return np.sort(order[:cut]), np.sort(order[cut:])


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    config, seed, out = _resolve(args)
    graph = _dataset_graph(config)
    section = dict(config.get("train", {}))
    fraction = float(section.pop("train_fraction", 0.8))
    section.pop("seed", None)
    train_ids, test_ids = _split(graph.node_count, fraction, seed)
    model = ReferenceGnn(seed=seed, **section).fit(graph, train_ids, test_ids)
    save_model(model, out / "model.json")
    metrics = {
        "train_acc": model.train_accuracy_,
        "test_acc": model.test_accuracy_,
        "epochs": int(model.epochs),
        "seed": seed,
    }
    write_json_atomic(out / "metrics.json", metrics)
    _write_manifest(out, "train", seed, config)
    test_shown = "n/a" if metrics["test_acc"] is None else f"{metrics['test_acc']:.3f}"
    print(
        f"trained: train_acc={metrics['train_acc']:.3f} "
        f"test_acc={test_shown} epochs={metrics['epochs']}"
    )
    return EXIT_OK


def _parse_nodes(spec) -> list[int]:
    if spec is None:
        raise ValueError("no nodes given (--nodes or config 'explain.nodes')")
    if isinstance(spec, str):
        return [int(tok) for tok in spec.replace(",", " ").split()]
    return [int(v) for v in spec]


def cmd_explain(args) -> int:
    config, seed, out = _resolve(args)
    graph = _dataset_graph(config)
    section = dict(config.get("explain", {}))
    method = args.method or section.get("method", "graphlime")
    if method not in VALID_METHODS:
        raise ValueError(
            f"unknown method {method!r}; valid methods: {', '.join(VALID_METHODS)}"
        )
    nodes = _parse_nodes(args.nodes if args.nodes else section.get("nodes"))
    model_path = section.get("model")
    if model_path is None:
        raise ValueError("config 'explain.model' must point to a trained model file")
    model = load_model(model_path)
    params = {k: v for k, v in section.items() if k not in ("method", "nodes", "model")}
    params.setdefault("seed", seed)
    if args.top_k is not None:
        params["top_k"] = args.top_k
    explainer = make_explainer(method, **params).fit(graph, model)

    skipped = []
    print(f"{'node':>8}  {'top features (name=weight)'}")
    for v in nodes:
        try:
            expl = explainer.explain(v)
        except InsufficientNeighborsError as exc:
            skipped.append(v)
            print(f"warning: node {v}: {exc}", file=sys.stderr)
            continue
        payload = expl.to_dict(graph.feature_names)
        write_json_atomic(out / f"explanation_{method}_node{v}.json", payload)
        shown = " ".join(f"{e['name']}={e['weight']:.4g}" for e in payload["selected"])
        print(f"{v:>8}  {shown}")
    print(f"explained {len(nodes) - len(skipped)}/{len(nodes)} nodes ({len(skipped)} skipped)")
    _write_manifest(out, "explain", seed, config)
    return EXIT_OK


def cmd_eval(args) -> int:
    config, seed, out = _resolve(args)
    experiment = args.experiment or config.get("eval", {}).get("experiment")
    if experiment not in EXPERIMENTS:
        raise ValueError(
            f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}"
        )
    graph = _dataset_graph(config)
    section = dict(config.get("eval", {}))
    section.pop("experiment", None)

    if experiment == "noise":
        opts = dict(section.get("noise", {}))
        methods = opts.pop("methods", ["graphlime", "random"])
        report = run_noise_experiment(graph, methods, seed=seed, **opts)
        stem = f"noise_{'-'.join(methods)}_K{report.top_k}_seed{seed}"
        print(f"{'method':>12}  mean noisy count")
        for m in methods:
            print(f"{m:>12}  {report.mean(m):.3f}")
    elif experiment == "trust":
        opts = dict(section.get("trust", {}))
        methods = opts.pop("methods", ["graphlime", "random"])
        train_opts = opts.pop("train", {})
        fraction = float(opts.pop("train_fraction", 0.8))
        train_ids, test_ids = _split(graph.node_count, fraction, seed)
        model = ReferenceGnn(seed=seed, **train_opts).fit(graph, train_ids, test_ids)
        opts.setdefault("nodes", test_ids[: int(opts.pop("node_budget", 100))].tolist())
        report = run_trust_experiment(graph, model, methods, seed=seed, **opts)
        stem = f"trust_{'-'.join(methods)}_K{report.top_k}_seed{seed}"
        print(f"{'method':>12}  {'F1':>7}  {'precision':>9}  {'recall':>7}")
        for m in methods:
            print(
                f"{m:>12}  {report.mean_f1(m):7.3f}  "
                f"{report.mean_precision(m):9.3f}  {report.mean_recall(m):7.3f}"
            )
    else:
        opts = dict(section.get("model_select", {}))
        methods = opts.pop("methods", ["graphlime", "random_choice"])
        b_values = opts.pop("b_values", [5, 10, 15])
        report = run_model_selection(graph, methods, b_values, seed=seed, **opts)
        stem = f"model-select_{'-'.join(methods)}_K{opts.get('top_k', 10)}_seed{seed}"
        print(f"{'method':>15}  " + "  ".join(f"B={b:<4}" for b in report.b_values))
        for m in methods:
            accs = "  ".join(f"{report.accuracy[m][b]:.3f}" for b in report.b_values)
            print(f"{m:>15}  {accs}")

    write_json_atomic(out / f"{stem}.json", report.to_json_dict())
    header, rows = report.csv_rows()
    _write_csv(out / f"{stem}.csv", header, rows)
    _write_manifest(out, "eval", seed, config)
    return EXIT_OK


def cmd_pick(args) -> int:
    config, seed, out = _resolve(args)
    graph = _dataset_graph(config)
    section = dict(config.get("pick", {}))
    budget = args.budget if args.budget is not None else section.get("budget")
    if budget is None or int(budget) < 1:
        raise ValueError("a positive pick budget is required (--budget)")
    budget = int(budget)
    method = section.get("method", "graphlime")
    model_path = section.get("model")
    if model_path is None:
        raise ValueError("config 'pick.model' must point to a trained model file")
    model = load_model(model_path)
    nodes = _parse_nodes(section.get("nodes"))
    params = {
        k: v for k, v in section.items() if k not in ("method", "nodes", "model", "budget")
    }
    params.setdefault("seed", seed)
    explainer = make_explainer(method, **params).fit(graph, model)
    explanations = []
    for v in nodes:
        try:
            explanations.append(explainer.explain(v))
        except InsufficientNeighborsError as exc:
            print(f"warning: node {v}: {exc}", file=sys.stderr)
    if not explanations:
        raise ValueError("no explainable candidate nodes")
    W = explanation_matrix(explanations, graph.feature_count)
    importance = global_importance(W)
    picks = submodular_pick(W, importance, min(budget, len(explanations)))
    if budget > len(explanations):
        print(
            f"warning: budget {budget} exceeds {len(explanations)} candidates; picking all",
            file=sys.stderr,
        )
    picked_nodes = [W.instance_ids[i] for i in picks]
    print(" ".join(str(v) for v in picked_nodes))

    names = graph.feature_names or [f"x{i}" for i in range(graph.feature_count)]
    _write_csv(
        out / "explanation_matrix.csv",
        ["node_id", *names],
        [[nid, *row] for nid, row in zip(W.instance_ids, W.values.tolist())],
    )
    _write_csv(
        out / "global_importance.csv",
        ["feature", "importance"],
        [[name, val] for name, val in zip(names, importance.tolist())],
    )
    _write_manifest(out, "pick", seed, config)
    return EXIT_OK


def cmd_generate_synthetic(args) -> int:
    config, seed, out = _resolve(args)
    params = dict(config.get("synthetic", {}))
    params.pop("seed", None)
    graph = generate_synthetic(seed=seed, **params)
    save_graph(graph, out / "edges.tsv", out / "features.csv", out / "labels.txt")
    _write_manifest(out, "generate-synthetic", seed, config)
    print(
        f"wrote synthetic dataset: {graph.node_count} nodes, "
        f"{graph.edge_count} edges, {graph.feature_count} features, "
        f"{graph.class_count} classes -> {out}"
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphlime",
        description="Explain node predictions of black-box graph classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (or a run_manifest.json)")
        p.add_argument("--seed", type=int, help="RNG seed (mandatory; no clock fallback)")
        p.add_argument("--out", help="output directory (default: config 'out' or '.')")

    p = sub.add_parser("train", help="train the bundled reference classifier")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one or more nodes")
    common(p)
    p.add_argument("--method", choices=VALID_METHODS)
    p.add_argument("--nodes", help="comma-separated node ids")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="run a simulated-user experiment")
    common(p)
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pick", help="select instances by explanation coverage")
    common(p)
    p.add_argument("--budget", "-B", type=int)
    p.set_defaults(func=cmd_pick)

    p = sub.add_parser("generate-synthetic", help="emit the desk-scale synthetic dataset")
    common(p)
    p.set_defaults(func=cmd_generate_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GateUnmetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.achieved is not None:
            print(f"achieved: {exc.achieved}", file=sys.stderr)
        return EXIT_GATE
    except (
        GraphFormatError,
        ModelFormatError,
        DegenerateProblemError,
        GraphLimeError,
        FileNotFoundError,
        ValueError,
        KeyError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
