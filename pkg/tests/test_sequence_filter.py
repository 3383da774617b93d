"""Reciprocal-rank measurements and the particle filter contracts."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from graphloc.dataset import PlaceGrid, Pose
from graphloc import sequence_filter as sf

GRID = PlaceGrid(0.0, 0.0, 100.0, 100.0, 10, 10)

probs_vectors = st.lists(
    st.floats(1e-6, 1.0, allow_nan=False), min_size=2, max_size=30
).map(lambda xs: np.array(xs) / np.sum(xs))


# -- reciprocal rank vector ---------------------------------------------------

def test_reciprocal_rank_examples():
    out = sf.reciprocal_rank_vector(np.array([0.5, 0.3, 0.2]))
    assert np.allclose(out, [1.0, 0.5, 1 / 3])
    uniform = sf.reciprocal_rank_vector(np.ones(3) / 3)
    assert np.allclose(uniform, [1.0, 0.5, 1 / 3])


@given(probs_vectors)
def test_reciprocal_rank_values_are_reciprocal_ranks(probs):
    out = sf.reciprocal_rank_vector(probs)
    c = len(probs)
    assert sorted(out.tolist()) == pytest.approx(
        sorted(1.0 / r for r in range(1, c + 1)))
    assert (out == 1.0).sum() == 1


@given(probs_vectors)
def test_reciprocal_rank_invariant_under_monotone_transform(probs):
    # ranking depends on order only: squaring keeps the order
    a = sf.reciprocal_rank_vector(probs)
    b = sf.reciprocal_rank_vector(probs ** 2)
    assert np.array_equal(a, b)


@given(probs_vectors)
def test_reciprocal_rank_max_at_argmax(probs):
    out = sf.reciprocal_rank_vector(probs)
    assert out[np.argmax(probs)] == 1.0


def test_reciprocal_rank_rejects_empty():
    with pytest.raises(ValueError):
        sf.reciprocal_rank_vector(np.array([]))


# -- init ---------------------------------------------------------------------

def test_pf_init_uniform_weights_and_determinism():
    cfg = sf.PfConfig(n_particles=1000, seed=5)
    a = sf.pf_init(cfg, GRID)
    b = sf.pf_init(cfg, GRID)
    assert np.allclose(a.weights, 0.001)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    assert np.array_equal(a.headings, b.headings)


def test_pf_init_cell_occupancy_roughly_uniform():
    cfg = sf.PfConfig(n_particles=100_000, seed=0)
    ps = sf.pf_init(cfg, GRID)
    counts = np.bincount(GRID.classes_of(ps.xs, ps.ys), minlength=100)
    _, p_value = stats.chisquare(counts)
    assert p_value > 1e-4


# -- motion -------------------------------------------------------------------

def test_motion_zero_action_zero_noise_is_identity():
    cfg = sf.PfConfig(n_particles=100, sigma_trans=0.0, sigma_head=0.0,
                      seed=1)
    ps = sf.pf_init(cfg, GRID)
    xs, ys = ps.xs.copy(), ps.ys.copy()
    sf.pf_motion_update(ps, 0.0, GRID, cfg)
    assert np.allclose(ps.xs, xs) and np.allclose(ps.ys, ys)


def test_motion_exact_forward_step():
    cfg = sf.PfConfig(n_particles=3, sigma_trans=0.0, sigma_head=0.0, seed=1)
    ps = sf.pf_init(cfg, GRID)
    ps.xs = np.array([10.0, 20.0, 30.0])
    ps.ys = np.array([50.0, 50.0, 50.0])
    ps.headings = np.zeros(3)
    sf.pf_motion_update(ps, 5.0, GRID, cfg)
    assert np.allclose(ps.xs, [15.0, 25.0, 35.0])
    assert np.allclose(ps.ys, 50.0)


def test_motion_mean_displacement_matches_action():
    cfg = sf.PfConfig(n_particles=10_000, sigma_trans=0.1, sigma_head=0.0,
                      seed=2)
    ps = sf.pf_init(cfg, GRID)
    ps.xs = np.full(ps.n, 40.0)
    ps.ys = np.full(ps.n, 50.0)
    ps.headings = np.zeros(ps.n)
    action = 5.0
    sf.pf_motion_update(ps, action, GRID, cfg)
    disp = ps.xs - 40.0
    sigma = cfg.sigma_trans * action
    assert abs(disp.mean() - action) < 3 * sigma / math.sqrt(ps.n)


def test_motion_clamps_to_workspace():
    cfg = sf.PfConfig(n_particles=50, sigma_trans=0.0, sigma_head=0.0, seed=3)
    ps = sf.pf_init(cfg, GRID)
    ps.xs = np.full(ps.n, 99.0)
    ps.headings = np.zeros(ps.n)
    sf.pf_motion_update(ps, 50.0, GRID, cfg)
    assert (ps.xs < 100.0).all()
    GRID.classes_of(ps.xs, ps.ys)  # never indexes out of the grid


# -- measurement --------------------------------------------------------------

def two_particle_set(cells_x, weights):
    cfg = sf.PfConfig(n_particles=2, seed=0, resample_threshold=0.0)
    ps = sf.pf_init(cfg, GRID)
    ps.xs = np.asarray(cells_x, dtype=float)
    ps.ys = np.array([5.0, 5.0])
    ps.weights = np.asarray(weights, dtype=float)
    return cfg, ps


def test_additive_update_example():
    # particles in cells 0 and 1 with rank values 1.0 and 0.25
    cfg, ps = two_particle_set([5.0, 15.0], [0.5, 0.5])
    ranks = np.full(100, 1e-9)
    ranks[0], ranks[1] = 1.0, 0.25
    sf.pf_measurement_update(ps, ranks, GRID, cfg)
    assert np.allclose(ps.weights, [2 / 3, 1 / 3], atol=1e-6)


def test_constant_measurement_keeps_equal_weights():
    cfg, ps = two_particle_set([5.0, 15.0], [0.5, 0.5])
    sf.pf_measurement_update(ps, np.full(100, 0.7), GRID, cfg)
    assert np.allclose(ps.weights, [0.5, 0.5])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_weights_normalized_and_n_preserved(seed):
    rng = np.random.default_rng(seed)
    cfg = sf.PfConfig(n_particles=500, seed=seed)
    ps = sf.pf_init(cfg, GRID)
    for _ in range(5):
        sf.pf_motion_update(ps, float(rng.uniform(0, 5)), GRID, cfg)
        probs = rng.dirichlet(np.ones(100))
        sf.pf_measurement_update(ps, sf.reciprocal_rank_vector(probs),
                                 GRID, cfg)
        assert ps.n == 500
        assert abs(ps.weights.sum() - 1.0) < 1e-9
        assert (ps.weights >= 0).all()


def test_resampling_triggers_and_preserves_n():
    cfg = sf.PfConfig(n_particles=400, seed=4, resample_threshold=0.5)
    ps = sf.pf_init(cfg, GRID)
    ranks = np.full(100, 1e-12)
    ranks[0] = 1.0
    sf.pf_measurement_update(ps, ranks, GRID, cfg)
    assert ps.n == 400
    assert abs(ps.weights.sum() - 1.0) < 1e-9
    # systematic resampling resets to uniform weights
    assert np.allclose(ps.weights, 1 / 400)


def test_systematic_resample_concentrates_on_heavy_particle():
    cfg = sf.PfConfig(n_particles=100, seed=5)
    ps = sf.pf_init(cfg, GRID)
    ps.weights = np.full(100, 1e-9)
    ps.weights[7] = 1.0
    ps.weights /= ps.weights.sum()
    marker = ps.xs[7]
    sf.systematic_resample(ps)
    assert (ps.xs == marker).mean() > 0.95


def test_multiplicative_collapse_reinitializes_with_warning():
    cfg = sf.PfConfig(n_particles=100, seed=6,
                      measurement_mode="multiplicative")
    ps = sf.pf_init(cfg, GRID)
    with pytest.warns(UserWarning, match="collapse"):
        sf.pf_measurement_update(ps, np.zeros(100), GRID, cfg)
    assert np.allclose(ps.weights, 0.01)


def test_measurement_shape_validated():
    cfg = sf.PfConfig(n_particles=10, seed=0)
    ps = sf.pf_init(cfg, GRID)
    with pytest.raises(ValueError):
        sf.pf_measurement_update(ps, np.ones(5), GRID, cfg)


# -- estimate -----------------------------------------------------------------

def test_estimate_one_hot_when_concentrated():
    cfg = sf.PfConfig(n_particles=64, seed=7)
    ps = sf.pf_init(cfg, GRID)
    ps.xs = np.full(64, 25.0)
    ps.ys = np.full(64, 35.0)
    belief, top1 = sf.pf_estimate(ps, GRID)
    cell = GRID.classes_of(np.array([25.0]), np.array([35.0]))[0]
    assert top1 == cell
    assert belief[cell] == pytest.approx(1.0)
    assert abs(belief.sum() - 1.0) < 1e-9


def test_estimate_tie_breaks_low_class():
    cfg, ps = two_particle_set([5.0, 15.0], [0.5, 0.5])
    belief, top1 = sf.pf_estimate(ps, GRID)
    assert belief[0] == belief[1] == 0.5
    assert top1 == 0


def test_belief_entropy_bounds():
    assert sf.belief_entropy(np.array([1.0, 0.0])) == pytest.approx(0.0)
    assert sf.belief_entropy(np.ones(4) / 4) == pytest.approx(math.log(4))


# -- sequence fusion ----------------------------------------------------------

def test_fuse_single_frame_matches_closed_form():
    """One frame: belief = fraction of reweighted uniform particles per cell."""
    cfg = sf.PfConfig(n_particles=2000, seed=8, resample_threshold=0.0)
    probs = np.random.default_rng(1).dirichlet(np.ones(100))
    steps = sf.fuse_sequence([probs], [Pose(50.0, 50.0)], GRID, cfg)
    ps = sf.pf_init(cfg, GRID)
    ranks = sf.reciprocal_rank_vector(probs)
    cells = GRID.classes_of(ps.xs, ps.ys)
    w = 1.0 / ps.n + ranks[cells]
    w /= w.sum()
    expected = np.bincount(cells, weights=w, minlength=100)
    assert np.allclose(steps[0].belief, expected, atol=1e-12)
    assert steps[0].fused_top1 == int(np.argmax(expected))


def test_repeated_informative_frame_grows_true_mass():
    cfg = sf.PfConfig(n_particles=2000, seed=9)
    true_class = 42
    probs = np.full(100, 1e-4)
    probs[true_class] = 1.0
    probs /= probs.sum()
    pose = Pose(25.0, 45.0)  # cell 42 = row 4, col 2
    steps = sf.fuse_sequence([probs] * 10, [pose] * 10, GRID, cfg)
    mass = [s.belief[true_class] for s in steps]
    assert mass[-1] > mass[0]
    assert all(b >= a - 1e-6 for a, b in zip(mass, mass[1:]))
    assert steps[-1].fused_top1 == true_class


def test_fuse_deterministic_per_seed():
    rng = np.random.default_rng(10)
    probs = [rng.dirichlet(np.ones(100)) for _ in range(4)]
    poses = [Pose(10.0 + 3 * i, 20.0, 0.0) for i in range(4)]
    cfg = sf.PfConfig(n_particles=500, seed=11)
    a = sf.fuse_sequence(probs, poses, GRID, cfg)
    b = sf.fuse_sequence(probs, poses, GRID, cfg)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.belief, sb.belief)
        assert sa.fused_top1 == sb.fused_top1 and sa.ess == sb.ess


def test_fuse_rejects_empty_or_mismatched():
    cfg = sf.PfConfig(n_particles=10, seed=0)
    with pytest.raises(ValueError):
        sf.fuse_sequence([], [], GRID, cfg)
    with pytest.raises(ValueError):
        sf.fuse_sequence([np.ones(100) / 100], [], GRID, cfg)


def test_trace_rows_fields():
    cfg = sf.PfConfig(n_particles=200, seed=12)
    probs = np.ones(100) / 100
    steps = sf.fuse_sequence([probs, probs],
                             [Pose(10.0, 10.0), Pose(12.0, 10.0)], GRID, cfg)
    rows = sf.trace_rows(steps, [3, 3])
    assert len(rows) == 2
    for row in rows:
        assert set(row) == {"frame", "top1", "truth", "belief_entropy", "ess"}
    with pytest.raises(ValueError):
        sf.trace_rows(steps, [3])


def test_pf_config_validation():
    with pytest.raises(ValueError):
        sf.PfConfig(n_particles=0)
    with pytest.raises(ValueError):
        sf.PfConfig(measurement_mode="bogus")
