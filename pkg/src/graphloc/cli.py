"""Batch command line for the localization pipeline.

Subcommands cover the full experiment lifecycle: world/dataset
generation, graph statistics, classifier training, sequence
localization, planner training, ablation sweeps, and metric reports.
All configuration lives in one JSON file; `--seed` and `--out` override
the config without editing it. Every artifact embeds the seed and a
config hash so runs are attributable and repeatable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import (MANIFEST_SCHEMA_VERSION, PARAMS_SCHEMA_VERSION,
               QSTORE_SCHEMA_VERSION, REPORT_SCHEMA_VERSION, __version__)
from . import baselines, experiments, gcn, planner
from .dataset import (DomainSpec, PlaceGrid, WorldConfig, apply_domain,
                      generate_world, load_sequence, make_manifest,
                      place_class_of, render_label_map, sample_route_poses,
                      save_sequence, world_from_dict, world_to_dict)
from .descriptor import image_histogram
from .scene_graph import GraphParams, build_scene_graph, mean_graph_stats
from .sequence_filter import PfConfig, fuse_sequence, trace_rows


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _world_config(doc: dict, seed: int) -> WorldConfig:
    fields = dict(doc.get("world", {}))
    fields["seed"] = seed
    for key in ("extent", "render_dims", "speckle_area"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return WorldConfig(**fields)


def _grid(doc: dict, extent: tuple[float, float]) -> PlaceGrid:
    g = doc.get("grid", {})
    return PlaceGrid(0.0, 0.0, extent[0], extent[1],
                     g.get("rows", 5), g.get("cols", 5))


def _graph_params(doc: dict) -> GraphParams:
    return GraphParams(**doc.get("graph", {}))


def _pf_config(doc: dict, seed: int) -> PfConfig:
    fields = dict(doc.get("pf", {}))
    fields.setdefault("seed", seed)
    return PfConfig(**fields)


def _domain_spec(doc: dict, name: str) -> DomainSpec:
    spec = doc.get("domains", {}).get(name)
    if spec is None:
        return DomainSpec(tag=name)
    return DomainSpec(**spec)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _stamp(doc: dict, config: dict, seed: int) -> dict:
    doc["seed"] = seed
    doc["config_hash"] = experiments.config_hash_dict(config)
    doc["schema_version"] = REPORT_SCHEMA_VERSION
    return doc


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_generate(config: dict, seed: int, out: Path) -> int:
    """World + one rendered sequence per configured domain."""
    world_cfg = _world_config(config, seed)
    world = generate_world(world_cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "world.json", world_to_dict(world))

    n_frames = config.get("frames", 100)
    start = config.get("frame_start_frac", 0.0) * world.route.length
    spacing = config.get("frame_spacing")
    domains = config.get("domains", {"base": None})
    for name in domains:
        spec = _domain_spec(config, name)
        domain_world = apply_domain(world, spec) if name != "base" else world
        poses, _ = sample_route_poses(world.route, n_frames, start=start,
                                      spacing=spacing)
        maps = [render_label_map(domain_world, p) for p in poses]
        manifest = make_manifest(poses, domain_world.domain_tag,
                                 world_cfg.render_dims)
        save_sequence(manifest, maps, out / name)
    _write_json(out / "generate.json",
                _stamp({"domains": sorted(domains), "frames": n_frames,
                        "frame_start_frac": config.get("frame_start_frac",
                                                       0.0),
                        "frame_spacing": spacing}, config, seed))
    print(f"world + {len(domains)} domain sequence(s) under {out}")
    return 0


def _load_graphs(dataset_dir: Path, params: GraphParams):
    manifest, maps = load_sequence(dataset_dir)
    graphs = [build_scene_graph(m, params) for m in maps]
    poses = [f.pose for f in manifest.frames]
    return manifest, graphs, poses


def cmd_graphs(config: dict, seed: int, out: Path) -> int:
    """Graph statistics and bit costs for a rendered dataset."""
    params = _graph_params(config)
    dataset_dir = Path(config["dataset"])
    _, graphs, _ = _load_graphs(dataset_dir, params)
    stats = mean_graph_stats(graphs)
    node_bits, edge_bits = experiments.bit_cost_report(graphs)
    doc = _stamp({"dataset": str(dataset_dir), "n_graphs": len(graphs),
                  **stats, "bit_cost_node": node_bits,
                  "bit_cost_edge": edge_bits}, config, seed)
    _write_json(out / "graphs.json", doc)
    print(f"{len(graphs)} graphs: mean nodes {stats['mean_nodes']:.2f}, "
          f"mean bits {stats['mean_total_bits']:.1f}")
    return 0


def cmd_train(config: dict, seed: int, out: Path) -> int:
    """Train the classifier on a dataset directory; save parameters."""
    params = _graph_params(config)
    dataset_dir = Path(config["dataset"])
    manifest, graphs, poses = _load_graphs(dataset_dir, params)
    world = world_from_dict(json.loads(
        (dataset_dir.parent / "world.json").read_text()))
    grid = _grid(config, world.extent)
    labels = [place_class_of(p, grid) for p in poses]

    tc_fields = dict(config.get("train", {}))
    tc_fields.setdefault("seed", seed)
    tc = gcn.TrainConfig(**tc_fields)
    t0 = time.perf_counter()
    gcn_params, history = gcn.train(list(zip(graphs, labels)), tc,
                                    n_classes=grid.n_classes)
    elapsed = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    gcn.save_params(gcn_params, out / "gcn_params.bin",
                    meta={"seed": seed, "train_seconds": round(elapsed, 3),
                          "config_hash": experiments.config_hash_dict(config),
                          **{k: v for k, v in asdict(tc).items()}})
    _write_json(out / "train.json",
                _stamp({"final_loss": history[-1]["loss"],
                        "epochs": len(history),
                        "train_accuracy": gcn.accuracy(
                            list(zip(graphs, labels)), gcn_params)},
                       config, seed))
    print(f"trained {tc.epochs} epochs, final loss {history[-1]['loss']:.4f}")
    return 0


def cmd_localize(config: dict, seed: int, out: Path) -> int:
    """Fuse a query sequence; write per-frame trace CSV + metrics."""
    params = _graph_params(config)
    dataset_dir = Path(config["dataset"])
    manifest, graphs, poses = _load_graphs(dataset_dir, params)
    world = world_from_dict(json.loads(
        (dataset_dir.parent / "world.json").read_text()))
    grid = _grid(config, world.extent)
    truths = [place_class_of(p, grid) for p in poses]

    classifier = config.get("classifier", "gcn")
    t0 = time.perf_counter()
    if classifier == "gcn":
        gcn_params = gcn.load_params(Path(config["params"]))
        probs = [gcn.predict(g, gcn_params)[0] for g in graphs]
    else:
        train_dir = Path(config["train_dataset"])
        _, train_graphs, train_poses = _load_graphs(train_dir, params)
        train_labels = [place_class_of(p, grid) for p in train_poses]
        index = baselines.build_index(train_graphs, train_labels,
                                      grid.n_classes)
        probs = []
        for g in graphs:
            if classifier == "knn":
                scores = baselines.knn_class_scores(g, index)
            else:
                scores = baselines.nbnn_classify(g.brs_codes, index)[1]
            finite = np.isfinite(scores)
            z = np.where(finite, -scores, -np.inf)
            z -= z[finite].max()
            e = np.exp(z)
            probs.append(e / e.sum())
    pf = _pf_config(config, seed)
    steps = fuse_sequence(probs, poses, grid, pf)
    elapsed = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    rows = trace_rows(steps, truths)
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["frame", "top1", "truth", "belief_entropy",
                            "ess"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    fused = [s.fused_top1 for s in steps]
    single = [s.single_top1 for s in steps]
    _write_json(out / "localize.json", _stamp({
        "classifier": classifier,
        "per_viewpoint_top1": experiments.evaluate_top1(fused, truths),
        "single_view_top1": experiments.evaluate_top1(single, truths),
        "final_top1": float(fused[-1] == truths[-1]),
        "frames": len(steps),
        "per_frame_ms": elapsed * 1000.0 / len(steps),
    }, config, seed))
    print(f"localized {len(steps)} frames "
          f"(final top-1 {'hit' if fused[-1] == truths[-1] else 'miss'})")
    return 0


def cmd_plan(config: dict, seed: int, out: Path) -> int:
    """Train the viewpoint planner on a stored world; save the Q store."""
    params = _graph_params(config)
    world = world_from_dict(json.loads(
        Path(config["world"]).read_text()))
    grid = _grid(config, world.extent)
    gcn_params = gcn.load_params(Path(config["params"]))
    pf = _pf_config(config, seed)
    pc_fields = dict(config.get("planner", {}))
    for key in ("actions", "start_frac"):
        if key in pc_fields:
            pc_fields[key] = tuple(pc_fields[key])
    pc = planner.PlannerConfig(**pc_fields)
    episodes = config.get("episodes", 200)

    store, curve = planner.train_planner(world, grid, gcn_params, params,
                                         pf, pc, episodes, seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    store.save(out / "qstore.bin")
    with open(out / "curve.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["episode", "reward",
                                                "epsilon", "store_size"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(curve)
    _write_json(out / "plan.json", _stamp({
        "episodes": episodes, "store_size": len(store),
        "mean_last10_reward": float(np.mean([c["reward"]
                                             for c in curve[-10:]])),
    }, config, seed))
    print(f"{episodes} episodes, store size {len(store)}")
    return 0


def cmd_ablate(config: dict, seed: int, out: Path) -> int:
    """Cross-product sweep; deterministic CSV plus timing sidecar."""
    base = experiments.benchmark_config_from(config, seed)
    n_seeds = config.get("ablation_seeds", 3)
    seeds = [seed + i for i in range(n_seeds)]
    t0 = time.perf_counter()
    rows = experiments.run_ablation(base, seeds)
    elapsed = time.perf_counter() - t0
    out.mkdir(parents=True, exist_ok=True)
    experiments.write_ablation_csv(rows, out / "ablation.csv")
    _write_json(out / "ablation_meta.json", _stamp({
        "cells": len(rows), "seeds": seeds,
        "wall_seconds": round(elapsed, 3),
    }, config, seed))
    print(f"{len(rows)} cells over {n_seeds} seeds -> {out / 'ablation.csv'}")
    return 0


def cmd_report(config: dict, seed: int, out: Path) -> int:
    """Bit-cost and histogram summary for a rendered dataset."""
    params = _graph_params(config)
    dataset_dir = Path(config["dataset"])
    _, graphs, _ = _load_graphs(dataset_dir, params)
    node_bits, edge_bits = experiments.bit_cost_report(graphs)
    hist = np.sum([image_histogram(g) for g in graphs], axis=0)
    doc = _stamp({
        "dataset": str(dataset_dir),
        "n_graphs": len(graphs),
        "mean_node_bits": node_bits,
        "mean_edge_bits": edge_bits,
        "mean_total_bits": node_bits + edge_bits,
        "distinct_codes": int(np.count_nonzero(hist)),
    }, config, seed)
    _write_json(out / "report.json", doc)
    print(f"bit cost: nodes {node_bits:.1f} + edges {edge_bits:.1f} "
          f"= {node_bits + edge_bits:.1f} bits per graph")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "graphs": cmd_graphs,
    "train": cmd_train,
    "localize": cmd_localize,
    "plan": cmd_plan,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def _versions() -> str:
    return (f"graphloc {__version__} "
            f"(manifest v{MANIFEST_SCHEMA_VERSION}, "
            f"params v{PARAMS_SCHEMA_VERSION}, "
            f"qstore v{QSTORE_SCHEMA_VERSION}, "
            f"report v{REPORT_SCHEMA_VERSION})")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphloc",
        description="semantic scene-graph localization experiments")
    parser.add_argument("--version", action="version", version=_versions())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override config seed")
        p.add_argument("--out", default=None, help="override output dir")

    args = parser.parse_args(argv)
    config = _load_config(args.config)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    out = Path(args.out if args.out is not None
               else config.get("out", "runs/latest"))
    return _COMMANDS[args.command](config, seed, out)


if __name__ == "__main__":
    sys.exit(main())
