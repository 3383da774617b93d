"""Reproducible experiment harness: benchmarks, ablations, reports.

One seed of the cross-domain benchmark generates a world, trains a
classifier on in-domain graphs, then localizes a query trajectory
rendered under a shifted domain. Ablation cells rebuild node features
or graph structure from the same renders, so axis comparisons are
paired rather than confounded by world sampling.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import REPORT_SCHEMA_VERSION
from . import baselines, gcn
from .dataset import (DomainSpec, LabelMap, PlaceGrid, Pose, World,
                      WorldConfig, apply_domain, generate_world,
                      place_class_of, render_label_map, sample_route_poses)
from .descriptor import image_histogram, node_feature
from .scene_graph import (GraphParams, SceneGraph, build_scene_graph,
                          build_sequence_chain_graph, mean_graph_stats)
from .sequence_filter import PfConfig, fuse_sequence

CLASSIFIERS = ("gcn", "knn", "nbnn")
GRAPH_TYPES = ("region", "chain")


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything one benchmark seed needs, in memory.

    Defaults run at half render resolution with a merge band wide
    enough that the merging ablation has real work to do; the billboard
    renders fragment far less than real imagery, so thresholds differ
    from the full-scale GraphParams defaults.
    """

    seed: int = 0
    world: WorldConfig = WorldConfig(render_dims=(404, 308), speckle_count=10)
    grid_rows: int = 5
    grid_cols: int = 5
    graph_params: GraphParams = GraphParams(noise_area=16, min_area=1000)
    feature_mode: str = "one_hot_189"
    graph_type: str = "region"
    classifier: str = "gcn"
    train_frames: int = 120
    query_frames: int = 15
    query_spacing: float = 2.0
    query_start_frac: float = 0.45
    chain_window: int = 5
    knn_k: int = 5
    train_config: gcn.TrainConfig = gcn.TrainConfig(lr=5e-3, epochs=80)
    pf_config: PfConfig = PfConfig()
    query_domain: DomainSpec = DomainSpec(tag="shift", label_noise=0.3,
                                          jitter=0.4, horizon_shift=6, seed=1)

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.graph_type not in GRAPH_TYPES:
            raise ValueError(f"unknown graph type {self.graph_type!r}")

    def grid(self) -> PlaceGrid:
        w, h = self.world.extent
        return PlaceGrid(0.0, 0.0, w, h, self.grid_rows, self.grid_cols)


def config_hash(config) -> str:
    """Stable hash of a (nested) dataclass config."""
    doc = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def config_hash_dict(config: dict) -> str:
    """Stable hash of a raw JSON config dict."""
    doc = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def benchmark_config_from(doc: dict, seed: int) -> BenchmarkConfig:
    """Build a BenchmarkConfig from the CLI's JSON document."""
    kwargs: dict = {"seed": seed}
    if "world" in doc:
        wf = dict(doc["world"])
        for key in ("extent", "render_dims", "speckle_area"):
            if key in wf:
                wf[key] = tuple(wf[key])
        wf.setdefault("render_dims", (404, 308))
        wf.setdefault("speckle_count", 6)
        kwargs["world"] = WorldConfig(**wf)
    if "grid" in doc:
        kwargs["grid_rows"] = doc["grid"].get("rows", 5)
        kwargs["grid_cols"] = doc["grid"].get("cols", 5)
    if "graph" in doc:
        kwargs["graph_params"] = GraphParams(**doc["graph"])
    if "train" in doc:
        kwargs["train_config"] = gcn.TrainConfig(**doc["train"])
    if "pf" in doc:
        kwargs["pf_config"] = PfConfig(**doc["pf"])
    if "query_domain" in doc:
        kwargs["query_domain"] = DomainSpec(**doc["query_domain"])
    for key in ("classifier", "graph_type", "feature_mode", "train_frames",
                "query_frames", "query_spacing", "query_start_frac",
                "chain_window", "knn_k"):
        if key in doc:
            kwargs[key] = doc[key]
    return BenchmarkConfig(**kwargs)


@dataclass
class MetricsReport:
    """Per-run metrics; accuracies in [0, 1], bit costs non-negative."""

    label: str
    seed: int
    config_hash: str
    per_viewpoint_top1: float
    final_top1: float
    single_view_top1: float
    mean_nodes: float
    mean_node_bits: float
    mean_edge_bits: float
    frames: int
    per_frame_ms: float = 0.0

    def __post_init__(self):
        for a in (self.per_viewpoint_top1, self.final_top1,
                  self.single_view_top1):
            if not (0.0 <= a <= 1.0):
                raise ValueError(f"accuracy {a} outside [0, 1]")
        if self.mean_node_bits < 0 or self.mean_edge_bits < 0:
            raise ValueError("negative bit cost")


def evaluate_top1(predictions: Sequence[int], truths: Sequence[int]) -> float:
    if len(predictions) != len(truths) or not predictions:
        raise ValueError("need equal-length, non-empty prediction/truth lists")
    return float(np.mean([int(p) == int(t)
                          for p, t in zip(predictions, truths)]))


def bit_cost_report(graphs: list[SceneGraph]) -> tuple[float, float]:
    """(mean node bits, mean edge bits) over a non-empty graph set."""
    if not graphs:
        raise ValueError("need at least one graph")
    stats = mean_graph_stats(graphs)
    return stats["mean_node_bits"], stats["mean_edge_bits"]


# --------------------------------------------------------------------------
# One benchmark seed, with shared renders across ablation variants
# --------------------------------------------------------------------------

@dataclass
class SeedData:
    """Rendered frames and poses for one seed, reused across variants."""

    world: World
    grid: PlaceGrid
    train_maps: list[LabelMap]
    train_poses: list[Pose]
    train_labels: list[int]
    query_maps: list[LabelMap]
    query_poses: list[Pose]
    query_labels: list[int]
    graph_cache: dict = field(default_factory=dict)


def prepare_seed(config: BenchmarkConfig) -> SeedData:
    world_cfg = replace(config.world, seed=config.seed)
    world = generate_world(world_cfg)
    grid = config.grid()

    train_poses, _ = sample_route_poses(world.route, config.train_frames)
    train_maps = [render_label_map(world, p) for p in train_poses]
    train_labels = [place_class_of(p, grid) for p in train_poses]

    query_world = apply_domain(world, config.query_domain)
    start = config.query_start_frac * world.route.length
    query_poses, _ = sample_route_poses(world.route, config.query_frames,
                                        start=start,
                                        spacing=config.query_spacing)
    query_maps = [render_label_map(query_world, p) for p in query_poses]
    query_labels = [place_class_of(p, grid) for p in query_poses]
    return SeedData(world=world, grid=grid, train_maps=train_maps,
                    train_poses=train_poses, train_labels=train_labels,
                    query_maps=query_maps, query_poses=query_poses,
                    query_labels=query_labels)


def _region_graphs(maps: list[LabelMap], params: GraphParams) -> list[SceneGraph]:
    return [build_scene_graph(m, params) for m in maps]


def _graphs_for(data: SeedData,
                params: GraphParams) -> tuple[list[SceneGraph], list[SceneGraph]]:
    """Region graphs for train/query maps, cached by structural params."""
    key = (params.noise_area, params.min_area, params.merge,
           params.merge_strategy)
    if key not in data.graph_cache:
        base = replace(params, feature_mode="one_hot_189")
        data.graph_cache[key] = (_region_graphs(data.train_maps, base),
                                 _region_graphs(data.query_maps, base))
    return data.graph_cache[key]


def _refeature(graphs: list[SceneGraph], mode: str) -> list[SceneGraph]:
    """Swap node features without redoing region extraction."""
    if mode == "one_hot_189":
        return graphs
    return [replace(g, features=np.stack(
        [node_feature(r, g.image_dims, mode) for r in g.regions]))
        for g in graphs]


def _chain_windows(graphs: list[SceneGraph], window: int) -> list[SceneGraph]:
    """Sliding chain graph ending at each frame (shorter at the start)."""
    hists = [image_histogram(g) for g in graphs]
    out = []
    for i in range(len(hists)):
        lo = max(i - window + 1, 0)
        out.append(build_sequence_chain_graph(np.stack(hists[lo:i + 1])))
    return out


def _classifier_probs(train_graphs, train_labels, query_graphs, config,
                      n_classes: int) -> list[np.ndarray]:
    """Per-query class probability (or pseudo-probability) vectors."""
    if config.classifier == "gcn":
        tc = replace(config.train_config, seed=(config.seed * 1000
                                                + config.train_config.seed))
        params, _ = gcn.train(list(zip(train_graphs, train_labels)), tc,
                              n_classes=n_classes)
        return [gcn.predict(g, params)[0] for g in query_graphs]
    index = baselines.build_index(train_graphs, train_labels, n_classes)
    probs = []
    for g in query_graphs:
        if config.classifier == "knn":
            scores = baselines.knn_class_scores(g, index)
        else:
            scores = baselines.nbnn_classify(g.brs_codes, index)[1]
        finite = np.isfinite(scores)
        z = np.where(finite, -scores, -np.inf)
        z -= z[finite].max()
        e = np.exp(z)
        probs.append(e / e.sum())
    return probs


def run_benchmark_seed(config: BenchmarkConfig,
                       data: SeedData | None = None) -> MetricsReport:
    """Train in-domain, localize the shifted-domain query, report metrics."""
    if data is None:
        data = prepare_seed(config)
    t0 = time.perf_counter()

    if config.graph_type == "region":
        tg, qg = _graphs_for(data, config.graph_params)
        train_graphs = _refeature(tg, config.feature_mode)
        query_graphs = _refeature(qg, config.feature_mode)
    else:
        # The chain baseline aggregates each frame's descriptor histogram
        # as-is; merging is a region-graph refinement it does not get.
        tg, qg = _graphs_for(data, replace(config.graph_params, merge=False))
        train_graphs = _chain_windows(tg, config.chain_window)
        query_graphs = _chain_windows(qg, config.chain_window)

    n_classes = data.grid.n_classes
    probs = _classifier_probs(train_graphs, data.train_labels, query_graphs,
                              config, n_classes)
    single_preds = [int(np.argmax(p)) for p in probs]

    pf = replace(config.pf_config, seed=(config.seed, config.pf_config.seed))
    steps = fuse_sequence(probs, data.query_poses, data.grid, pf)
    fused_preds = [s.fused_top1 for s in steps]

    stats = mean_graph_stats(train_graphs + query_graphs)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    n_frames = len(data.train_maps) + len(data.query_maps)
    return MetricsReport(
        label=f"{config.graph_type}/{config.feature_mode}/"
              f"merge={'on' if config.graph_params.merge else 'off'}/"
              f"{config.classifier}",
        seed=config.seed,
        config_hash=config_hash(config),
        per_viewpoint_top1=evaluate_top1(fused_preds, data.query_labels),
        final_top1=float(fused_preds[-1] == data.query_labels[-1]),
        single_view_top1=evaluate_top1(single_preds, data.query_labels),
        mean_nodes=stats["mean_nodes"],
        mean_node_bits=stats["mean_node_bits"],
        mean_edge_bits=stats["mean_edge_bits"],
        frames=n_frames,
        per_frame_ms=elapsed_ms / n_frames,
    )


# --------------------------------------------------------------------------
# Multi-seed benchmark used by the acceptance harness
# --------------------------------------------------------------------------

BENCHMARK_VARIANTS = {
    "brs_merged": {},
    "brs_unmerged": {"graph_params_merge": False},
    "semantic_merged": {"feature_mode": "semantic_only_7"},
    "chain": {"graph_type": "chain"},
}


def _variant_config(base: BenchmarkConfig, overrides: dict) -> BenchmarkConfig:
    cfg = base
    if overrides.get("graph_params_merge") is False:
        cfg = replace(cfg, graph_params=replace(cfg.graph_params, merge=False))
    if "feature_mode" in overrides:
        cfg = replace(cfg, feature_mode=overrides["feature_mode"])
    if "graph_type" in overrides:
        cfg = replace(cfg, graph_type=overrides["graph_type"])
    return cfg


def run_benchmark(seeds: Sequence[int],
                  base: BenchmarkConfig = BenchmarkConfig(),
                  variants: dict[str, dict] | None = None
                  ) -> dict[str, list[MetricsReport]]:
    """Run every variant on every seed, sharing renders within a seed."""
    if variants is None:
        variants = BENCHMARK_VARIANTS
    results: dict[str, list[MetricsReport]] = {v: [] for v in variants}
    for seed in seeds:
        seed_cfg = replace(base, seed=seed)
        data = prepare_seed(seed_cfg)
        for name, overrides in variants.items():
            cfg = _variant_config(seed_cfg, overrides)
            results[name].append(run_benchmark_seed(cfg, data))
    return results


def summarize(reports: list[MetricsReport]) -> dict[str, float]:
    return {
        "mean_single_top1": float(np.mean([r.single_view_top1
                                           for r in reports])),
        "mean_fused_top1": float(np.mean([r.per_viewpoint_top1
                                          for r in reports])),
        "mean_final_top1": float(np.mean([r.final_top1 for r in reports])),
        "mean_nodes": float(np.mean([r.mean_nodes for r in reports])),
        "mean_node_bits": float(np.mean([r.mean_node_bits
                                         for r in reports])),
        "mean_edge_bits": float(np.mean([r.mean_edge_bits
                                         for r in reports])),
        "seeds": len(reports),
    }


# --------------------------------------------------------------------------
# Ablation sweeps -> deterministic CSV
# --------------------------------------------------------------------------

ABLATION_COLUMNS = (
    "schema_version", "cell", "graph_type", "feature_mode", "merging",
    "classifier", "seeds", "mean_single_top1", "mean_fused_top1",
    "mean_final_top1", "mean_nodes", "mean_node_bits", "mean_edge_bits",
    "error",
)


def default_ablation_cells() -> list[dict]:
    """Feature-mode x merging grid for region graphs, plus the chain row."""
    cells = []
    for mode in ("one_hot_189", "three_hot_19", "semantic_only_7"):
        for merge in (True, False):
            cells.append({"graph_type": "region", "feature_mode": mode,
                          "graph_params_merge": merge})
    cells.append({"graph_type": "chain", "feature_mode": "one_hot_189",
                  "graph_params_merge": True})
    return cells


def run_ablation(base: BenchmarkConfig, seeds: Sequence[int],
                 cells: list[dict] | None = None) -> list[dict]:
    """One summary row per cell; failures land in the error column.

    Timing is deliberately excluded so rows are byte-stable across
    reruns of the same config + seeds.
    """
    if cells is None:
        cells = default_ablation_cells()
    rows = []
    for cell in cells:
        merge_flag = cell.get("graph_params_merge", True)
        overrides = dict(cell)
        if merge_flag:
            overrides.pop("graph_params_merge", None)
        else:
            overrides["graph_params_merge"] = False
        row = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "cell": f"{cell['graph_type']}/{cell['feature_mode']}/"
                    f"merge={'on' if merge_flag else 'off'}",
            "graph_type": cell["graph_type"],
            "feature_mode": cell["feature_mode"],
            "merging": "on" if merge_flag else "off",
            "classifier": base.classifier,
            "seeds": len(seeds),
            "error": "",
        }
        try:
            reports = []
            for seed in seeds:
                cfg = _variant_config(replace(base, seed=seed), overrides)
                reports.append(run_benchmark_seed(cfg))
            summary = summarize(reports)
            row.update({k: summary[k] for k in
                        ("mean_single_top1", "mean_fused_top1",
                         "mean_final_top1", "mean_nodes", "mean_node_bits",
                         "mean_edge_bits")})
        except Exception as exc:  # noqa: BLE001 - record and continue
            row.update({k: "" for k in
                        ("mean_single_top1", "mean_fused_top1",
                         "mean_final_top1", "mean_nodes", "mean_node_bits",
                         "mean_edge_bits")})
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# Corridor toy world for planner evaluation
# --------------------------------------------------------------------------

def make_corridor_world(render_dims: tuple[int, int] = (202, 154),
                        seed: int = 0) -> World:
    """A 100 x 10 m corridor, blank except for one landmark strip.

    The route runs straight down the middle with a 25 m view cutoff.
    Only x in [62, 78] holds landmarks, each a few metres apart, so
    viewpoints elsewhere show nothing but sky and road and carry no
    position information. Good viewpoint planning rushes the blank
    stretch in big steps and then takes small confirming steps inside
    the strip, which no fixed step size can do.
    """
    from .dataset import Landmark, serpentine_route

    cfg = WorldConfig(extent=(100.0, 10.0), landmark_counts={},
                      seed=seed, render_dims=render_dims,
                      route_sweeps=1, route_margin=8.0,
                      max_view_distance=25.0)
    mk = Landmark
    landmarks = (
        mk("building", 2, 62.0, 0.3, 68.0, 2.2, height=10.0),
        mk("tree", 8, 68.5, 7.8, 71.5, 9.8, height=6.0),
        mk("pole", 5, 72.0, 1.8, 72.5, 2.3, height=6.5),
        mk("traffic_sign", 7, 74.0, 7.7, 74.8, 8.4, height=3.0),
        mk("building", 2, 75.5, 7.8, 78.0, 9.8, height=4.5),
    )
    route = serpentine_route(cfg.extent, 1, cfg.route_margin)
    return World(config=cfg, landmarks=landmarks, route=route)


CORRIDOR_GRAPH_PARAMS = GraphParams(noise_area=8, min_area=500)


def corridor_setup(seed: int = 0, train_frames: int = 160,
                   epochs: int = 60) -> tuple[World, PlaceGrid, "gcn.GcnParams"]:
    """Corridor world plus an in-domain classifier trained along its route."""
    from .dataset import render_label_map as render
    from .scene_graph import build_scene_graph as build

    world = make_corridor_world(seed=seed)
    grid = PlaceGrid(0.0, 0.0, 100.0, 10.0, 1, 20)
    poses, _ = sample_route_poses(world.route, train_frames)
    graphs = [build(render(world, p), CORRIDOR_GRAPH_PARAMS) for p in poses]
    labels = [place_class_of(p, grid) for p in poses]
    tc = gcn.TrainConfig(lr=5e-3, epochs=epochs, seed=seed)
    params, _ = gcn.train(list(zip(graphs, labels)), tc,
                          n_classes=grid.n_classes)
    return world, grid, params


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def ablation_csv(rows: list[dict]) -> str:
    """Render sweep rows with fixed columns and float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ABLATION_COLUMNS)
    for row in rows:
        writer.writerow([_format_cell(row[c]) for c in ABLATION_COLUMNS])
    return buf.getvalue()


def write_ablation_csv(rows: list[dict], path: Path) -> None:
    Path(path).write_text(ablation_csv(rows), encoding="utf-8")
