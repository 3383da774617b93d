"""Viewpoint planning with nearest-neighbor Q-learning.

The planner decides how far to drive between observations. Its state is
the reciprocal-rank vector of the current localization belief (a
C-vector capturing how peaked the belief is and where), its actions are
forward steps of 1..10 m along the route, and its reward is how highly
the true place ranks in the final fused belief. Q-values over the
continuous state space are estimated non-parametrically: the mean of
the k nearest stored samples per action.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import QSTORE_SCHEMA_VERSION
from .dataset import PlaceGrid, World, place_class_of
from .gcn import GcnParams, predict
from .scene_graph import GraphParams, build_scene_graph
from .sequence_filter import (PfConfig, pf_belief, pf_init,
                              pf_measurement_update, pf_motion_update,
                              reciprocal_rank_vector)
from .dataset import render_label_map

STATE_SOURCES = ("belief", "probs")


@dataclass(frozen=True)
class PlannerConfig:
    actions: tuple[float, ...] = tuple(float(a) for a in range(1, 11))
    horizon: int = 10
    gamma: float = 0.9
    alpha: float = 0.1
    epsilon_start: float = 0.5
    epsilon_end: float = 0.05
    k_neighbors: int = 4
    store_cap: int = 50_000
    start_frac: tuple[float, float] = (0.0, 0.2)
    state_source: str = "belief"

    def __post_init__(self):
        if not self.actions or any(a <= 0 for a in self.actions):
            raise ValueError("actions must be positive distances")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0, 1]")
        if self.k_neighbors < 1 or self.store_cap < 1:
            raise ValueError("bad k_neighbors/store_cap")
        if self.state_source not in STATE_SOURCES:
            raise ValueError(f"unknown state source {self.state_source!r}")


class QStore:
    """Bounded store of (state, action, q) samples with kNN queries.

    Eviction is oldest-first across all actions once the cap is hit.
    Per-action arrays are stacked lazily so repeated queries against an
    unchanged store stay vectorized.
    """

    def __init__(self, actions: tuple[float, ...], state_dim: int,
                 cap: int = 50_000):
        self.actions = tuple(actions)
        self.state_dim = state_dim
        self.cap = cap
        self._states: dict[float, list[np.ndarray]] = {a: [] for a in actions}
        self._qs: dict[float, list[float]] = {a: [] for a in actions}
        self._order: list[float] = []  # action of each insert, oldest first
        self._stacked: dict[float, tuple[np.ndarray, np.ndarray] | None] = {
            a: None for a in actions}

    def __len__(self) -> int:
        return len(self._order)

    def add(self, state: np.ndarray, action: float, q: float) -> None:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.state_dim,):
            raise ValueError(f"state must have {self.state_dim} entries")
        if action not in self._states:
            raise ValueError(f"unknown action {action}")
        if len(self._order) >= self.cap:
            oldest = self._order.pop(0)
            self._states[oldest].pop(0)
            self._qs[oldest].pop(0)
            self._stacked[oldest] = None
        self._states[action].append(state)
        self._qs[action].append(float(q))
        self._order.append(action)
        self._stacked[action] = None

    def _stack(self, action: float) -> tuple[np.ndarray, np.ndarray]:
        cached = self._stacked[action]
        if cached is None:
            states = self._states[action]
            if states:
                cached = (np.stack(states), np.asarray(self._qs[action]))
            else:
                cached = (np.empty((0, self.state_dim)), np.empty(0))
            self._stacked[action] = cached
        return cached

    def q_value(self, state: np.ndarray, action: float, k: int = 4) -> float:
        """Mean q of the k nearest stored states for this action.

        Distance ties keep insertion order (stable sort). An empty
        bucket scores 0, which also sets the optimistic initial value.
        """
        states, qs = self._stack(action)
        if states.shape[0] == 0:
            return 0.0
        d = np.linalg.norm(states - np.asarray(state, dtype=np.float64),
                           axis=1)
        nearest = np.argsort(d, kind="stable")[:k]
        return float(qs[nearest].mean())

    def q_values(self, state: np.ndarray, k: int = 4) -> np.ndarray:
        return np.array([self.q_value(state, a, k) for a in self.actions])

    def save(self, path: Path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(b"GLOCQSTR")
            fh.write(struct.pack("<III", QSTORE_SCHEMA_VERSION,
                                 len(self.actions), self.state_dim))
            fh.write(struct.pack(f"<{len(self.actions)}d", *self.actions))
            fh.write(struct.pack("<Q", len(self._order)))
            for action in self._order:
                fh.write(struct.pack("<d", action))
            # replay inserts in order so eviction state round-trips
            cursor = {a: 0 for a in self.actions}
            for action in self._order:
                i = cursor[action]
                cursor[action] += 1
                fh.write(self._states[action][i].astype("<f8").tobytes())
                fh.write(struct.pack("<d", self._qs[action][i]))
        meta = {"schema_version": QSTORE_SCHEMA_VERSION, "cap": self.cap,
                "size": len(self._order), "state_dim": self.state_dim}
        with open(path.with_suffix(path.suffix + ".meta.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: Path, cap: int = 50_000) -> "QStore":
        path = Path(path)
        with open(path, "rb") as fh:
            if fh.read(8) != b"GLOCQSTR":
                raise ValueError(f"{path}: not a q-store file")
            version, n_actions, state_dim = struct.unpack("<III", fh.read(12))
            if version != QSTORE_SCHEMA_VERSION:
                raise ValueError(f"{path}: unsupported schema {version}")
            actions = struct.unpack(f"<{n_actions}d", fh.read(8 * n_actions))
            (size,) = struct.unpack("<Q", fh.read(8))
            order = [struct.unpack("<d", fh.read(8))[0] for _ in range(size)]
            store = cls(actions, state_dim, cap=cap)
            for action in order:
                state = np.frombuffer(fh.read(8 * state_dim), dtype="<f8")
                (q,) = struct.unpack("<d", fh.read(8))
                store.add(state.copy(), action, q)
        return store


def select_action(store: QStore, state: np.ndarray, epsilon: float,
                  rng: np.random.Generator, k: int = 4) -> float:
    """Epsilon-greedy over kNN Q-values; greedy ties pick the smallest action."""
    if rng.random() < epsilon:
        return store.actions[rng.integers(len(store.actions))]
    qs = store.q_values(state, k)
    return store.actions[int(np.argmax(qs))]


def epsilon_at(episode: int, n_episodes: int, start: float, end: float) -> float:
    """Linear decay from start to end over the training run."""
    if n_episodes <= 1:
        return end
    frac = min(episode / (n_episodes - 1), 1.0)
    return start + (end - start) * frac


def nnql_update(store: QStore, state: np.ndarray, action: float,
                reward: float, next_state: np.ndarray | None,
                config: PlannerConfig) -> float:
    """One Q-learning backup; the blended value becomes a new sample.

    target = r                                  if terminal
           = r + gamma * max_a' Q(s', a')       otherwise
    q_new  = (1 - alpha) * Q(s, a) + alpha * target
    """
    old = store.q_value(state, action, config.k_neighbors)
    if next_state is None:
        target = reward
    else:
        target = reward + config.gamma * float(
            np.max(store.q_values(next_state, config.k_neighbors)))
    q_new = (1.0 - config.alpha) * old + config.alpha * target
    store.add(state, action, q_new)
    return q_new


# --------------------------------------------------------------------------
# Episodes on a world
# --------------------------------------------------------------------------

@dataclass
class EpisodeResult:
    reward: float
    final_top1: int
    truth: int
    actions: list[float] = field(default_factory=list)
    route_end_hits: int = 0


def run_episode(world: World, grid: PlaceGrid, gcn_params: GcnParams,
                graph_params: GraphParams, pf_config: PfConfig,
                store: QStore, config: PlannerConfig,
                rng: np.random.Generator, epsilon: float = 0.0,
                train: bool = True,
                forced_action: float | None = None) -> EpisodeResult:
    """One planning episode along the world's route.

    The robot starts at a random arc length, observes, then for
    `horizon` steps picks a travel distance, drives, and observes again.
    Intermediate rewards are zero; the terminal reward is the reciprocal
    rank of the true final place in the fused belief. `forced_action`
    evaluates a fixed-step policy through the identical loop.
    """
    seed_pf = replace(pf_config, seed=int(rng.integers(2 ** 31)))
    ps = pf_init(seed_pf, grid)
    lo, hi = config.start_frac
    s = float(rng.uniform(lo, hi) * world.route.length)

    def observe(arc: float) -> np.ndarray:
        pose = world.route.pose_at(arc)
        graph = build_scene_graph(render_label_map(world, pose), graph_params)
        probs, _ = predict(graph, gcn_params)
        if pf_config.measurement_mode == "additive":
            measurement = reciprocal_rank_vector(probs)
        else:
            measurement = np.asarray(probs)
        pf_measurement_update(ps, measurement, grid, pf_config)
        if config.state_source == "probs":
            return np.asarray(probs)
        return pf_belief(ps, grid)

    belief = observe(s)
    state = reciprocal_rank_vector(belief)
    result = EpisodeResult(reward=0.0, final_top1=-1, truth=-1)

    for step in range(config.horizon):
        if forced_action is not None:
            action = forced_action
        else:
            action = select_action(store, state, epsilon, rng,
                                   config.k_neighbors)
        result.actions.append(action)
        s_next = s + action
        if s_next > world.route.length:
            s_next = world.route.length
            result.route_end_hits += 1
        pf_motion_update(ps, s_next - s, grid, pf_config)
        belief = observe(s_next)
        next_state = reciprocal_rank_vector(belief)

        terminal = step == config.horizon - 1
        if terminal:
            truth = place_class_of(world.route.pose_at(s_next), grid)
            fused = pf_belief(ps, grid)
            reward = float(reciprocal_rank_vector(fused)[truth])
            result.reward = reward
            result.final_top1 = int(np.argmax(fused))
            result.truth = truth
            if train:
                nnql_update(store, state, action, reward, None, config)
        else:
            if train:
                nnql_update(store, state, action, 0.0, next_state, config)
        state = next_state
        s = s_next
    return result


def train_planner(world: World, grid: PlaceGrid, gcn_params: GcnParams,
                  graph_params: GraphParams, pf_config: PfConfig,
                  config: PlannerConfig, n_episodes: int,
                  seed: int = 0) -> tuple[QStore, list[dict]]:
    """Run `n_episodes` training episodes; returns the store and a curve."""
    rng = np.random.default_rng(seed)
    store = QStore(config.actions, grid.n_classes, cap=config.store_cap)
    curve: list[dict] = []
    for episode in range(n_episodes):
        eps = epsilon_at(episode, n_episodes, config.epsilon_start,
                         config.epsilon_end)
        result = run_episode(world, grid, gcn_params, graph_params,
                             pf_config, store, config, rng, epsilon=eps,
                             train=True)
        curve.append({"episode": episode, "reward": result.reward,
                      "epsilon": eps, "store_size": len(store)})
    return store, curve


def evaluate_policy(world: World, grid: PlaceGrid, gcn_params: GcnParams,
                    graph_params: GraphParams, pf_config: PfConfig,
                    config: PlannerConfig, store: QStore | None,
                    seeds: list[int],
                    forced_action: float | None = None) -> float:
    """Mean episode reward of a greedy (or fixed-step) policy over seeds."""
    if store is None:
        store = QStore(config.actions, grid.n_classes, cap=1)
    rewards = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        result = run_episode(world, grid, gcn_params, graph_params,
                             pf_config, store, config, rng, epsilon=0.0,
                             train=False, forced_action=forced_action)
        rewards.append(result.reward)
    return float(np.mean(rewards))
