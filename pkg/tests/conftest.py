"""Shared fixtures and map-building helpers for the test suite."""

import numpy as np
import pytest

from graphloc.dataset import LabelMap, PlaceGrid, WorldConfig, generate_world
from graphloc.descriptor import SOURCE_ID, VOID_ID

SKY = SOURCE_ID["sky"]
ROAD = SOURCE_ID["road"]
BUILDING = SOURCE_ID["building"]
TREE = SOURCE_ID["vegetation"]
POLE = SOURCE_ID["pole"]


def random_label_map(rng: np.random.Generator, width: int = 32,
                     height: int = 32, n_values: int = 4,
                     void_frac: float = 0.0) -> LabelMap:
    """A random map over a few source labels, optionally with void pixels."""
    palette = rng.choice(list(SOURCE_ID.values()), size=n_values, replace=False)
    labels = palette[rng.integers(0, n_values, size=(height, width))]
    if void_frac > 0.0:
        mask = rng.random((height, width)) < void_frac
        labels = np.where(mask, VOID_ID, labels)
    return LabelMap(labels.astype(np.uint8))


def blocky_label_map(rng: np.random.Generator, width: int = 32,
                     height: int = 32, n_values: int = 4,
                     block: int = 4) -> LabelMap:
    """Random map with block structure so regions exceed a few pixels."""
    palette = rng.choice(list(SOURCE_ID.values()), size=n_values, replace=False)
    coarse = palette[rng.integers(0, n_values,
                                  size=(height // block, width // block))]
    labels = np.kron(coarse, np.ones((block, block), dtype=np.uint8))
    return LabelMap(labels[:height, :width].astype(np.uint8))


@pytest.fixture(scope="session")
def tiny_world():
    """Small deterministic world shared by renderer-heavy tests."""
    cfg = WorldConfig(extent=(60.0, 60.0),
                      landmark_counts={"building": 4, "tree": 6,
                                       "pole": 3, "traffic_sign": 3,
                                       "other": 3},
                      seed=11, render_dims=(202, 154), route_sweeps=3)
    return generate_world(cfg)


@pytest.fixture(scope="session")
def tiny_grid():
    return PlaceGrid(0.0, 0.0, 60.0, 60.0, 3, 3)
