"""Bearing-range-semantic region descriptors.

A scene-graph node is summarized by three quantized observables of its
image region:

* semantics: one of seven coarse categories remapped from the 19-label
  source palette,
* bearing: which cell of a 3x3 image grid contains the region centroid,
* range: a three-way split of pixel area, a monocular stand-in for
  distance (large regions are near).

The triple packs into a single code in [0, 189), so a node descriptor
fits in one byte. Area thresholds are calibrated for a 616x808 image and
scale with pixel count for other sizes.
"""

from __future__ import annotations

import warnings

import numpy as np

# 19-label source palette, in segmentation training-label order.
SOURCE_LABELS = (
    "road", "sidewalk", "building", "wall", "fence", "pole",
    "traffic_light", "traffic_sign", "vegetation", "terrain", "sky",
    "person", "rider", "car", "truck", "bus", "train", "motorcycle",
    "bicycle",
)
SOURCE_ID = {name: i for i, name in enumerate(SOURCE_LABELS)}
VOID_ID = 255

# Coarse categories, fixed index order (frozen: codes are serialized).
CATEGORIES = ("sky", "tree", "building", "pole", "road", "traffic_sign", "others")
N_SEMANTIC = len(CATEGORIES)
N_BEARING = 9
N_RANGE = 3
N_CODES = N_SEMANTIC * N_BEARING * N_RANGE  # 189

# Pixel-area range thresholds, valid at the reference image size.
REFERENCE_PIXELS = 616 * 808
RANGE_SHORT_OVER = 150_000   # scaled area above this: short range (bin 0)
RANGE_LONG_UNDER = 50_000    # scaled area below this: long range (bin 2)

FEATURE_MODES = ("one_hot_189", "three_hot_19", "semantic_only_7")
FEATURE_DIMS = {"one_hot_189": N_CODES, "three_hot_19": 19, "semantic_only_7": N_SEMANTIC}

_REMAP = {
    "sky": "sky",
    "vegetation": "tree",
    "building": "building",
    "pole": "pole",
    "road": "road",
    "sidewalk": "road",
    "traffic_light": "traffic_sign",
    "traffic_sign": "traffic_sign",
}
# Everything not listed above falls into "others"; the table is total.
SEMANTIC_OF_SOURCE = tuple(
    CATEGORIES.index(_REMAP.get(name, "others")) for name in SOURCE_LABELS
)


def remap_semantic(source_label: int) -> int:
    """Map a source-palette label ID to one of the 7 category IDs."""
    if not 0 <= source_label < len(SOURCE_LABELS):
        raise ValueError(f"unknown source label ID {source_label}")
    return SEMANTIC_OF_SOURCE[source_label]


def quantize_bearing(centroid: tuple[float, float], image_dims: tuple[int, int]) -> int:
    """Bearing bin of a pixel centroid: 3x3 grid, row-major, top-left = 0.

    Cells are half-open, so a centroid exactly on a grid line lands in
    the higher row/column.
    """
    w, h = image_dims
    x, y = centroid
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"centroid {centroid} outside image {image_dims}")
    col = int(x * 3 // w)
    row = int(y * 3 // h)
    return row * 3 + col


def quantize_range(area: float, image_dims: tuple[int, int]) -> int:
    """Range bin from region area: 0 short, 1 medium, 2 long.

    The area is rescaled to the reference pixel count before thresholding;
    both 50K and 150K are inclusive medium bounds.
    """
    w, h = image_dims
    scaled = area * REFERENCE_PIXELS / (w * h)
    if scaled > RANGE_SHORT_OVER:
        return 0
    if scaled >= RANGE_LONG_UNDER:
        return 1
    return 2


def brs_index(semantic: int, bearing: int, range_bin: int) -> int:
    """Pack (semantic, bearing, range) into a single code in [0, 189)."""
    if not 0 <= semantic < N_SEMANTIC:
        raise ValueError(f"semantic ID {semantic} out of range")
    if not 0 <= bearing < N_BEARING:
        raise ValueError(f"bearing ID {bearing} out of range")
    if not 0 <= range_bin < N_RANGE:
        raise ValueError(f"range ID {range_bin} out of range")
    return semantic * (N_BEARING * N_RANGE) + bearing * N_RANGE + range_bin


def brs_decompose(index: int) -> tuple[int, int, int]:
    """Inverse of :func:`brs_index`."""
    if not 0 <= index < N_CODES:
        raise ValueError(f"descriptor code {index} out of range")
    semantic, rest = divmod(index, N_BEARING * N_RANGE)
    bearing, range_bin = divmod(rest, N_RANGE)
    return semantic, bearing, range_bin


def region_code(region, image_dims: tuple[int, int]) -> int:
    """Descriptor code of a region-like object (needs label, centroid, area)."""
    return brs_index(
        remap_semantic(region.label),
        quantize_bearing(region.centroid, image_dims),
        quantize_range(region.area, image_dims),
    )


def node_feature(region, image_dims: tuple[int, int], mode: str = "one_hot_189") -> np.ndarray:
    """Feature vector for a region node.

    one_hot_189: unit basis vector at the packed code (L1 norm 1).
    three_hot_19: concatenated 7/9/3-dim one-hots (L1 norm 3).
    semantic_only_7: category one-hot, the semantics-only ablation.
    """
    s = remap_semantic(region.label)
    b = quantize_bearing(region.centroid, image_dims)
    r = quantize_range(region.area, image_dims)
    if mode == "one_hot_189":
        vec = np.zeros(N_CODES)
        vec[brs_index(s, b, r)] = 1.0
    elif mode == "three_hot_19":
        vec = np.zeros(N_SEMANTIC + N_BEARING + N_RANGE)
        vec[s] = 1.0
        vec[N_SEMANTIC + b] = 1.0
        vec[N_SEMANTIC + N_BEARING + r] = 1.0
    elif mode == "semantic_only_7":
        vec = np.zeros(N_SEMANTIC)
        vec[s] = 1.0
    else:
        raise ValueError(f"unknown feature mode {mode!r}")
    return vec


def image_histogram(graph) -> np.ndarray:
    """189-bin histogram of a graph's node codes (bin sum = node count)."""
    codes = getattr(graph, "brs_codes", None)
    if codes is None:
        raise ValueError("graph carries no descriptor codes")
    if len(codes) == 0:
        warnings.warn("empty graph: returning a zero histogram")
        return np.zeros(N_CODES)
    return np.bincount(np.asarray(codes), minlength=N_CODES).astype(float)
