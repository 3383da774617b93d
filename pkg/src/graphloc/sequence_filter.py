"""Rank-based particle filtering over place classes.

Single-view classifier outputs are fused along a trajectory by a
particle filter on continuous pose. The default measurement model is
additive: each particle's weight is bumped by the reciprocal rank of
its cell in the classifier's ranking, which is robust to overconfident
softmax outputs across domain shift. A conventional multiplicative
likelihood update over the raw probabilities is available behind a
flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import warnings

import numpy as np

from .dataset import PlaceGrid, Pose

MEASUREMENT_MODES = ("additive", "multiplicative")


@dataclass(frozen=True)
class PfConfig:
    n_particles: int = 1000
    sigma_trans: float = 0.1   # translation noise per meter of motion
    sigma_head: float = 0.02   # heading noise per step (rad)
    measurement_mode: str = "additive"
    resample_threshold: float = 0.5  # resample when ESS < threshold * N
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.sigma_trans < 0 or self.sigma_head < 0:
            raise ValueError("noise scales must be non-negative")
        if self.measurement_mode not in MEASUREMENT_MODES:
            raise ValueError(f"unknown measurement mode {self.measurement_mode!r}")
        if not (0.0 <= self.resample_threshold <= 1.0):
            raise ValueError("resample threshold must be in [0, 1]")


@dataclass
class ParticleSet:
    """Weighted particles plus the generator that drives their noise."""

    xs: np.ndarray
    ys: np.ndarray
    headings: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))


def reciprocal_rank_vector(probs: np.ndarray) -> np.ndarray:
    """Element i becomes 1/rank(i) under descending sort of probs.

    Ranks are 1-based; ties rank the lower index first (stable sort), so
    the output is deterministic for any input.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a non-empty 1-D vector")
    order = np.argsort(-p, kind="stable")
    out = np.empty_like(p)
    out[order] = 1.0 / np.arange(1, p.size + 1)
    return out


def pf_init(config: PfConfig, grid: PlaceGrid) -> ParticleSet:
    """Uniform particles over the workspace, uniform headings, equal weight."""
    rng = np.random.default_rng(config.seed)
    n = config.n_particles
    return ParticleSet(
        xs=rng.uniform(grid.x0, grid.x1, n),
        ys=rng.uniform(grid.y0, grid.y1, n),
        headings=rng.uniform(-math.pi, math.pi, n),
        weights=np.full(n, 1.0 / n),
        rng=rng,
    )


def pf_motion_update(ps: ParticleSet, action: float, grid: PlaceGrid,
                     config: PfConfig) -> None:
    """Advance each particle by a noisy forward step of `action` meters.

    Heading noise is injected first, then the noisy step is taken along
    the new heading. Positions are clamped into the workspace, never
    reaching the open upper bound.
    """
    ps.headings += ps.rng.normal(0.0, config.sigma_head, ps.n)
    ps.headings = (ps.headings + math.pi) % (2.0 * math.pi) - math.pi
    steps = action + ps.rng.normal(0.0, config.sigma_trans * abs(action), ps.n)
    ps.xs += steps * np.cos(ps.headings)
    ps.ys += steps * np.sin(ps.headings)
    ps.xs, ps.ys = grid.clamp(ps.xs, ps.ys)


def systematic_resample(ps: ParticleSet) -> None:
    """Low-variance resampling; keeps N and resets weights to uniform."""
    n = ps.n
    positions = (ps.rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(ps.weights)
    cumulative[-1] = 1.0  # guard against rounding
    idx = np.searchsorted(cumulative, positions)
    ps.xs = ps.xs[idx].copy()
    ps.ys = ps.ys[idx].copy()
    ps.headings = ps.headings[idx].copy()
    ps.weights = np.full(n, 1.0 / n)


def pf_measurement_update(ps: ParticleSet, measurement: np.ndarray,
                          grid: PlaceGrid, config: PfConfig) -> None:
    """Reweight particles by their cell's measurement value, then normalize.

    additive mode expects reciprocal-rank values (strictly positive);
    multiplicative mode expects a probability vector, and recovers from
    total weight collapse by resetting to uniform with a warning.
    Resampling triggers when ESS falls below the configured fraction.
    """
    m = np.asarray(measurement, dtype=np.float64)
    if m.shape != (grid.n_classes,):
        raise ValueError(f"measurement must have {grid.n_classes} entries")
    cells = grid.classes_of(ps.xs, ps.ys)
    if config.measurement_mode == "additive":
        ps.weights = ps.weights + m[cells]
    else:
        ps.weights = ps.weights * m[cells]
        total = ps.weights.sum()
        if total <= 0.0 or not np.isfinite(total):
            warnings.warn("weight collapse; resetting to uniform")
            ps.weights = np.full(ps.n, 1.0 / ps.n)
    ps.weights = ps.weights / ps.weights.sum()
    if ps.ess() < config.resample_threshold * ps.n:
        systematic_resample(ps)


def pf_belief(ps: ParticleSet, grid: PlaceGrid) -> np.ndarray:
    """Per-class belief: sum of particle weights per grid cell."""
    cells = grid.classes_of(ps.xs, ps.ys)
    return np.bincount(cells, weights=ps.weights, minlength=grid.n_classes)


def pf_estimate(ps: ParticleSet, grid: PlaceGrid) -> tuple[np.ndarray, int]:
    belief = pf_belief(ps, grid)
    return belief, int(np.argmax(belief))


def belief_entropy(belief: np.ndarray) -> float:
    p = belief[belief > 0]
    return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class FusionStep:
    """Per-viewpoint record of a fused localization run."""

    index: int
    single_probs: np.ndarray
    single_top1: int
    belief: np.ndarray
    fused_top1: int
    ess: float
    entropy: float


def fuse_sequence(class_probs: list[np.ndarray], poses: list[Pose],
                  grid: PlaceGrid, config: PfConfig) -> list[FusionStep]:
    """Run the filter over per-viewpoint classifier outputs.

    Odometry between consecutive poses is reduced to the forward
    distance along the previous heading (the filter never sees ground
    truth position, only relative motion). The first viewpoint applies a
    measurement only.
    """
    if len(class_probs) != len(poses) or not poses:
        raise ValueError("need matching, non-empty probs and poses")
    ps = pf_init(config, grid)
    steps: list[FusionStep] = []
    for i, (probs, pose) in enumerate(zip(class_probs, poses)):
        if i > 0:
            prev = poses[i - 1]
            forward = ((pose.x - prev.x) * math.cos(prev.heading)
                       + (pose.y - prev.y) * math.sin(prev.heading))
            pf_motion_update(ps, max(forward, 0.0), grid, config)
        if config.measurement_mode == "additive":
            measurement = reciprocal_rank_vector(probs)
        else:
            measurement = np.asarray(probs, dtype=np.float64)
        pf_measurement_update(ps, measurement, grid, config)
        belief, fused_top1 = pf_estimate(ps, grid)
        steps.append(FusionStep(
            index=i,
            single_probs=np.asarray(probs, dtype=np.float64),
            single_top1=int(np.argmax(probs)),
            belief=belief,
            fused_top1=fused_top1,
            ess=ps.ess(),
            entropy=belief_entropy(belief),
        ))
    return steps


def trace_rows(steps: list[FusionStep], truths: list[int]) -> list[dict]:
    """Flat per-frame records for CSV trace output."""
    if len(steps) != len(truths):
        raise ValueError("need one truth label per step")
    return [
        {"frame": s.index, "top1": s.fused_top1, "truth": int(t),
         "belief_entropy": s.entropy, "ess": s.ess}
        for s, t in zip(steps, truths)
    ]
