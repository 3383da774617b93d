"""Acceptance gate: ten go/no-go checks, one verdict line each.

Each criterion prints `[PASS|FAIL] criterion N: ...` with its measured
numbers (visible with `pytest -s` or in failure output) and asserts the
same condition, so `pytest -v` shows exactly one line per criterion.
The 20-seed benchmark and the corridor planner run are built once per
session and shared by the criteria that read them.
"""

import json
import time

import numpy as np
import pytest

from graphloc import cli, experiments as ex, gcn, planner as pl
from graphloc import scene_graph as sg
from graphloc.dataset import (PlaceGrid, Pose, WorldConfig, generate_world,
                              place_class_of, render_label_map,
                              sample_route_poses)
from graphloc.descriptor import (N_CODES, REFERENCE_PIXELS, brs_decompose,
                                 brs_index, quantize_range)
from graphloc.scene_graph import GraphParams, SceneGraph, build_scene_graph
from graphloc.sequence_filter import (PfConfig, fuse_sequence,
                                      pf_init, pf_measurement_update,
                                      pf_motion_update, systematic_resample,
                                      trace_rows)

from conftest import random_label_map
from test_gcn import make_params, random_graph, separable_toy_set
from test_planner import S0, S1, STAY, SWAP, mdp_reward, mdp_step, \
    mdp_value_iteration
from test_scene_graph import (oracle_adjacency, oracle_components,
                              pixels_of_regions)


def verdict(n: int, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, f"criterion {n}: {detail}"


# -- shared slow artifacts ---------------------------------------------------

@pytest.fixture(scope="session")
def benchmark20():
    """20-seed cross-domain benchmark, all four variants, one pass."""
    results = ex.run_benchmark(range(20))
    return results, {name: ex.summarize(reports)
                     for name, reports in results.items()}


@pytest.fixture(scope="session")
def corridor_policy():
    """Corridor world + trained planner + learned/fixed policy rewards."""
    t0 = time.perf_counter()
    world, grid, params = ex.corridor_setup(seed=0)
    pf = PfConfig(seed=0)
    cfg = pl.PlannerConfig(alpha=0.3)
    store, _ = pl.train_planner(world, grid, params, ex.CORRIDOR_GRAPH_PARAMS,
                                pf, cfg, n_episodes=500, seed=42)
    seeds = range(100, 110)
    learned = pl.evaluate_policy(world, grid, params,
                                 ex.CORRIDOR_GRAPH_PARAMS, pf, cfg, store,
                                 seeds)
    fixed = {a: pl.evaluate_policy(world, grid, params,
                                   ex.CORRIDOR_GRAPH_PARAMS, pf, cfg, None,
                                   seeds, forced_action=float(a))
             for a in range(1, 11)}
    return learned, fixed, time.perf_counter() - t0


# -- criteria ----------------------------------------------------------------

def test_criterion_01_region_and_adjacency_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    for trial in range(200):
        lm = random_label_map(rng, 32, 32,
                              n_values=int(rng.integers(2, 6)),
                              void_frac=0.15 if trial % 4 == 0 else 0.0)
        regions, pixel_ids = sg.extract_regions(lm, noise_area=1)
        assert (pixels_of_regions(pixel_ids, len(regions))
                == oracle_components(lm.labels))
        assert (sg.build_adjacency(pixel_ids, len(regions))
                == oracle_adjacency(pixel_ids))
    elapsed = time.perf_counter() - t0
    ok = elapsed < 10.0
    verdict(1, ok, f"200 random 32x32 maps: regions match the union-find "
                   f"oracle and adjacency matches the exhaustive pixel-pair "
                   f"oracle in {elapsed:.1f} s < 10 s")


def test_criterion_02_descriptor_bijection_and_range_boundaries():
    codes = set()
    ok = True
    for code in range(N_CODES):
        s, b, r = brs_decompose(code)
        ok &= brs_index(s, b, r) == code
        codes.add((s, b, r))
    ok &= len(codes) == N_CODES
    dims = (808, 616)
    assert dims[0] * dims[1] == REFERENCE_PIXELS
    bins = [quantize_range(a, dims) for a in (49_999, 50_000,
                                              150_000, 150_001)]
    names = {0: "short", 1: "medium", 2: "long"}
    ok &= bins == [2, 1, 1, 0]
    verdict(2, ok, "189 (s,b,r) triples round-trip; boundary areas "
                   "49999/50000/150000/150001 -> "
                   + "/".join(names[b] for b in bins))


def test_criterion_03_gcn_numerical_health():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)

    softmax_err = max(abs(gcn.softmax(rng.normal(0, 10, size=n)).sum() - 1.0)
                      for n in rng.integers(2, 40, size=30))

    perm_err = 0.0
    for _ in range(10):
        graph = random_graph(rng, n_nodes=6)
        params = make_params(rng)
        base = gcn.predict_proba(graph, params)
        perm = rng.permutation(graph.n_nodes)
        inv = np.argsort(perm)
        edges = tuple(sorted(tuple(sorted((int(inv[i]), int(inv[j]))))
                             for i, j in graph.edges))
        shuffled = SceneGraph(features=graph.features[perm], edges=edges,
                              image_dims=graph.image_dims)
        perm_err = max(perm_err,
                       np.abs(gcn.predict_proba(shuffled, params)
                              - base).max())

    eps = 1e-4
    grad_err = 0.0
    for _ in range(5):
        graph = random_graph(rng, n_nodes=int(rng.integers(2, 7)))
        params = make_params(rng, hidden=5, n_classes=3)
        y = int(rng.integers(3))
        _, grads = gcn.loss_and_grad([(graph, y)], params)
        for tensor, grad in zip(params.flat(), grads.flat()):
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + eps
                hi = gcn.loss([(graph, y)], params)
                tensor[idx] = orig - eps
                lo = gcn.loss([(graph, y)], params)
                tensor[idx] = orig
                num = (hi - lo) / (2 * eps)
                denom = max(abs(num), abs(grad[idx]), 1e-8)
                grad_err = max(grad_err, abs(num - grad[idx]) / denom)

    elapsed = time.perf_counter() - t0
    ok = (softmax_err < 1e-9 and perm_err < 1e-12 and grad_err < 1e-4
          and elapsed < 30.0)
    verdict(3, ok, f"gradient rel err {grad_err:.2e} < 1e-4, permutation "
                   f"{perm_err:.2e} < 1e-12, softmax {softmax_err:.2e} "
                   f"< 1e-9 in {elapsed:.1f} s")


def test_criterion_04_learnability():
    t0 = time.perf_counter()
    toy = separable_toy_set()
    toy_params, _ = gcn.train(
        toy, gcn.TrainConfig(hidden=8, lr=0.05, epochs=50, batch_size=4,
                             seed=0), n_classes=2)
    toy_acc = gcn.accuracy(toy, toy_params)

    world = generate_world(WorldConfig(seed=0))
    grid = PlaceGrid(0.0, 0.0, 100.0, 100.0, 5, 5)
    poses, _ = sample_route_poses(world.route, 300)
    gp = GraphParams()
    pairs = [(build_scene_graph(render_label_map(world, p), gp),
              place_class_of(p, grid)) for p in poses]
    test = [pair for i, pair in enumerate(pairs) if i % 3 == 2]
    train = [pair for i, pair in enumerate(pairs) if i % 3 != 2]
    assert len(train) == 200 and grid.n_classes == 25
    params, _ = gcn.train(train, gcn.TrainConfig(lr=5e-3, epochs=100, seed=0),
                          n_classes=grid.n_classes)
    world_acc = gcn.accuracy(test, params)

    elapsed = time.perf_counter() - t0
    ok = toy_acc == 1.0 and world_acc >= 0.50 and elapsed < 300.0
    verdict(4, ok, f"separable toy {toy_acc:.0%} within 50 epochs; default "
                   f"world (25 classes, 200 train frames) top-1 "
                   f"{world_acc:.2f} >= 0.50 in {elapsed:.0f} s")


def test_criterion_05_sequence_fusion_helps(benchmark20):
    _, summaries = benchmark20
    s = summaries["brs_merged"]
    ok = (s["seeds"] >= 20
          and s["mean_final_top1"] >= s["mean_single_top1"])
    verdict(5, ok, f"over {s['seeds']} seeds mean final PF top-1 "
                   f"{s['mean_final_top1']:.3f} >= single-view "
                   f"{s['mean_single_top1']:.3f}")


def test_criterion_06_ablation_directionality(benchmark20):
    _, summaries = benchmark20
    brs = summaries["brs_merged"]
    sem = summaries["semantic_merged"]
    chain = summaries["chain"]
    unmerged = summaries["brs_unmerged"]

    a_ok = brs["mean_fused_top1"] >= sem["mean_fused_top1"]
    b_ok = brs["mean_fused_top1"] >= chain["mean_fused_top1"]
    reduction = 1.0 - brs["mean_nodes"] / unmerged["mean_nodes"]
    drop = unmerged["mean_fused_top1"] - brs["mean_fused_top1"]
    c_ok = reduction >= 0.30 and drop < 0.05
    verdict(6, a_ok and b_ok and c_ok,
            f"(a) full descriptor {brs['mean_fused_top1']:.3f} >= "
            f"semantic-only {sem['mean_fused_top1']:.3f}; "
            f"(b) region graph >= chain {chain['mean_fused_top1']:.3f}; "
            f"(c) merging cuts nodes {reduction:.0%} >= 30% with top-1 "
            f"drop {drop * 100:+.1f} pp < 5 pp")


def test_criterion_07_particle_filter_contracts():
    grid = PlaceGrid(0.0, 0.0, 100.0, 100.0, 5, 5)
    cfg = PfConfig(n_particles=400, seed=3)
    rng = np.random.default_rng(9)

    ps = pf_init(cfg, grid)
    worst = 0.0
    for _ in range(30):
        pf_motion_update(ps, 2.0, grid, cfg)
        z = rng.random(grid.n_classes) + 0.05
        pf_measurement_update(ps, z, grid, cfg)
        worst = max(worst, abs(ps.weights.sum() - 1.0))
    norm_ok = worst < 1e-9

    before = ps.n
    systematic_resample(ps)
    n_ok = ps.n == before == cfg.n_particles
    uniform_ok = np.allclose(ps.weights, 1.0 / ps.n)

    probs = [rng.dirichlet(np.ones(grid.n_classes)) for _ in range(10)]
    route_poses = [Pose(10.0 + 3.0 * i, 50.0, 0.0) for i in range(10)]
    truths = [place_class_of(p, grid) for p in route_poses]
    runs = [trace_rows(fuse_sequence(probs, route_poses, grid,
                                     PfConfig(seed=11)), truths)
            for _ in range(2)]
    det_ok = runs[0] == runs[1]

    ok = norm_ok and n_ok and uniform_ok and det_ok
    verdict(7, ok, f"weights normalized to {worst:.1e} <= 1e-9 over 30 "
                   f"updates; resampling kept N={cfg.n_particles}; "
                   f"same-seed traces identical: {det_ok}")


def test_criterion_08_planner_sanity(corridor_policy):
    cfg = pl.PlannerConfig(actions=(STAY, SWAP), alpha=0.4, gamma=0.9,
                           k_neighbors=4, store_cap=200)
    store = pl.QStore(actions=cfg.actions, state_dim=2, cap=cfg.store_cap)
    rng = np.random.default_rng(5)
    states = {0: S0, 1: S1}
    s = 0
    for _ in range(6000):
        action = pl.select_action(store, states[s], 1.0, rng,
                                  cfg.k_neighbors)
        nxt = mdp_step(s, action)
        pl.nnql_update(store, states[s], action, mdp_reward(s, action),
                       states[nxt], cfg)
        s = nxt
    oracle_policy, _ = mdp_value_iteration(gamma=cfg.gamma)
    learned_policy = {
        sid: cfg.actions[int(np.argmax(store.q_values(states[sid],
                                                      cfg.k_neighbors)))]
        for sid in (0, 1)}
    mdp_ok = learned_policy == oracle_policy

    learned, fixed, elapsed = corridor_policy
    best_fixed = max(fixed.values())
    corridor_ok = all(learned > r for r in fixed.values())
    ok = mdp_ok and corridor_ok and elapsed < 300.0
    verdict(8, ok, f"NNQL greedy policy == value-iteration optimum "
                   f"{oracle_policy}; corridor learned reward "
                   f"{learned:.3f} > best fixed {best_fixed:.3f} "
                   f"(all 10 fixed steps, 10 eval seeds) in {elapsed:.0f} s")


def test_criterion_09_compression_accounting(benchmark20):
    results, summaries = benchmark20
    exact = all(r.mean_node_bits == 8.0 * r.mean_nodes
                for reports in results.values() for r in reports)
    s = summaries["brs_merged"]
    total_bits = s["mean_node_bits"] + s["mean_edge_bits"]
    ok = exact and s["mean_nodes"] <= 12.0 and total_bits < 200.0
    verdict(9, ok, f"node bits == 8 x nodes on all "
                   f"{sum(len(v) for v in results.values())} reports; "
                   f"merged benchmark mean nodes {s['mean_nodes']:.2f} <= 12, "
                   f"bits per graph {total_bits:.1f} < 200")


def test_criterion_10_ablate_determinism(tmp_path):
    doc = {
        "world": {"extent": [50.0, 50.0],
                  "landmark_counts": {"building": 3, "tree": 4, "pole": 2},
                  "render_dims": [101, 77], "route_sweeps": 2},
        "grid": {"rows": 2, "cols": 2},
        "graph": {"noise_area": 4, "min_area": 200},
        "train": {"epochs": 4, "hidden": 16, "batch_size": 8},
        "pf": {"n_particles": 200},
        "train_frames": 10,
        "query_frames": 3,
        "ablation_seeds": 2,
        "seed": 0,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(doc), encoding="utf-8")
    blobs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert cli.main(["ablate", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        blobs.append((out / "ablation.csv").read_bytes())
    ok = blobs[0] == blobs[1] and len(blobs[0]) > 0
    verdict(10, ok, f"ablate run twice -> byte-identical CSV "
                    f"({len(blobs[0])} bytes, {blobs[0] == blobs[1]})")
