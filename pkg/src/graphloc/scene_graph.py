"""Semantic scene graphs from label maps.

A label map is decomposed into 4-connected same-label regions, tiny
noise regions are dropped, small regions are optionally merged into a
neighbor, and the survivors become graph nodes with region-adjacency
edges. Node features come from the bearing-range-semantic descriptor,
so a whole image compresses to a handful of byte-sized codes plus an
edge list.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import descriptor
from .dataset import LabelMap

# 4-connectivity: edges between horizontal/vertical pixel neighbors only.
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class EmptyGraphError(Exception):
    """No region survived extraction and filtering."""


@dataclass(frozen=True)
class Region:
    """One maximal 4-connected same-label pixel component.

    centroid is the (x, y) mean pixel coordinate; bbox is half-open
    (x0, y0, x1, y1) in pixel indices.
    """

    id: int
    label: int
    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]


@dataclass(frozen=True)
class GraphParams:
    """Knobs for graph extraction.

    noise_area: components strictly smaller than this are deleted.
    min_area: regions strictly smaller than this (scaled to the actual
        image size) are merged or deleted, per merge_strategy.
    merge_strategy: "absorb" folds a small region into the neighbor with
        the longest shared boundary; "delete" just removes it.
    """

    noise_area: int = 100
    min_area: int = 1000
    merge: bool = True
    merge_strategy: str = "absorb"
    feature_mode: str = "one_hot_189"

    def __post_init__(self):
        if self.noise_area < 0 or self.min_area < 0:
            raise ValueError("area thresholds must be non-negative")
        if self.merge_strategy not in ("absorb", "delete"):
            raise ValueError(f"unknown merge strategy {self.merge_strategy!r}")
        if self.feature_mode not in descriptor.FEATURE_MODES:
            raise ValueError(f"unknown feature mode {self.feature_mode!r}")


@dataclass(frozen=True)
class SceneGraph:
    """Undirected graph over regions with per-node feature vectors.

    Edges are canonical (i, j) pairs with i < j, sorted. For region
    graphs `regions` and `brs_codes` are populated; sequence-chain
    graphs built from per-frame descriptors leave them as None.
    """

    features: np.ndarray  # (n, d) float64
    edges: tuple[tuple[int, int], ...]
    image_dims: tuple[int, int]
    regions: tuple[Region, ...] | None = None
    brs_codes: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 2:
            raise ValueError("features must be (n, d)")
        n = feats.shape[0]
        for i, j in self.edges:
            if not (0 <= i < j < n):
                raise ValueError(f"bad edge ({i}, {j}) for {n} nodes")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")
        if self.brs_codes is not None:
            codes = np.asarray(self.brs_codes, dtype=np.int64)
            object.__setattr__(self, "brs_codes", codes)
            if codes.shape != (n,):
                raise ValueError("brs_codes must be one code per node")

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency, no self loops."""
        n = self.n_nodes
        a = np.zeros((n, n), dtype=np.float64)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a


# --------------------------------------------------------------------------
# Region extraction
# --------------------------------------------------------------------------

@dataclass
class _Partition:
    """Mutable intermediate: pixel -> region id plus per-region stats."""

    pixel_ids: np.ndarray  # (h, w) int, -1 for void / deleted
    labels: dict[int, int] = field(default_factory=dict)
    areas: dict[int, int] = field(default_factory=dict)
    sum_x: dict[int, float] = field(default_factory=dict)
    sum_y: dict[int, float] = field(default_factory=dict)
    bbox: dict[int, tuple[int, int, int, int]] = field(default_factory=dict)


def _partition(label_map: LabelMap, noise_area: int) -> _Partition:
    """Flood-fill every distinct label value; drop sub-noise components.

    Region ids are assigned in raster order of each component's first
    pixel, which makes extraction independent of label values and stable
    across runs.
    """
    arr = label_map.labels
    h, w = arr.shape

    # Components of different label values never share pixels, so all
    # flood fills combine into one id map by offsetting each value's ids.
    comp_all = np.zeros((h, w), dtype=np.int64)
    comp_label = [0]  # label value per global component id; id 0 unused
    for value in np.unique(arr):
        if value == label_map.void_id:
            continue
        comp, n_comp = ndimage.label(arr == value, structure=_STRUCTURE_4)
        if n_comp == 0:
            continue
        offset = len(comp_label) - 1
        nz = comp > 0
        comp_all[nz] = comp[nz] + offset
        comp_label.extend([int(value)] * n_comp)

    flat = comp_all.ravel()
    counts = np.bincount(flat, minlength=len(comp_label))
    present, first_idx = np.unique(flat, return_index=True)
    keep = [(int(fi), int(cid)) for cid, fi in zip(present, first_idx)
            if cid != 0 and counts[cid] >= noise_area]
    keep.sort()

    remap = np.full(len(comp_label), -1, dtype=np.int64)
    for rid, (_, cid) in enumerate(keep):
        remap[cid] = rid
    pixel_ids = remap[comp_all]

    part = _Partition(pixel_ids=pixel_ids)
    if not keep:
        return part
    n = len(keep)
    fids = pixel_ids.ravel()
    inside = fids >= 0
    xs = np.tile(np.arange(w, dtype=np.float64), h)[inside]
    ys = np.repeat(np.arange(h, dtype=np.float64), w)[inside]
    rids = fids[inside]
    areas = np.bincount(rids, minlength=n)
    sx = np.bincount(rids, weights=xs, minlength=n)
    sy = np.bincount(rids, weights=ys, minlength=n)
    slices = ndimage.find_objects(pixel_ids + 1, max_label=n)
    for rid, (_, cid) in enumerate(keep):
        part.labels[rid] = comp_label[cid]
        part.areas[rid] = int(areas[rid])
        part.sum_x[rid] = float(sx[rid])
        part.sum_y[rid] = float(sy[rid])
        sl = slices[rid]
        part.bbox[rid] = (sl[1].start, sl[0].start, sl[1].stop, sl[0].stop)
    return part


def _boundary_counts(pixel_ids: np.ndarray) -> dict[tuple[int, int], int]:
    """Shared-boundary length (in pixel adjacencies) per region pair."""
    pairs = []
    a, b = pixel_ids[:, :-1].ravel(), pixel_ids[:, 1:].ravel()
    m = (a != b) & (a >= 0) & (b >= 0)
    pairs.append(np.stack([np.minimum(a[m], b[m]), np.maximum(a[m], b[m])], 1))
    a, b = pixel_ids[:-1, :].ravel(), pixel_ids[1:, :].ravel()
    m = (a != b) & (a >= 0) & (b >= 0)
    pairs.append(np.stack([np.minimum(a[m], b[m]), np.maximum(a[m], b[m])], 1))
    allp = np.concatenate(pairs, axis=0)
    if allp.size == 0:
        return {}
    uniq, counts = np.unique(allp, axis=0, return_counts=True)
    return {(int(i), int(j)): int(c) for (i, j), c in zip(uniq, counts)}


def _regions_from_partition(part: _Partition) -> tuple[Region, ...]:
    out = []
    for new_id, rid in enumerate(sorted(part.labels)):
        area = part.areas[rid]
        out.append(Region(
            id=new_id,
            label=part.labels[rid],
            area=area,
            centroid=(part.sum_x[rid] / area, part.sum_y[rid] / area),
            bbox=part.bbox[rid],
        ))
    return tuple(out)


def extract_regions(label_map: LabelMap,
                    noise_area: int = 100) -> tuple[tuple[Region, ...], np.ndarray]:
    """All 4-connected same-label regions of at least `noise_area` pixels.

    Returns the regions (ids 0..n-1 in raster order of first pixel) and
    the (h, w) pixel-to-region-id map, -1 where void or deleted.
    """
    part = _partition(label_map, noise_area)
    regions = _regions_from_partition(part)
    # _partition already assigns ids in sorted(first_pixel) order == raster
    return regions, part.pixel_ids


def merge_small_regions(
        regions: tuple[Region, ...], pixel_ids: np.ndarray,
        image_dims: tuple[int, int], min_area: int = 1000,
        strategy: str = "absorb") -> tuple[tuple[Region, ...], np.ndarray]:
    """Fold sub-threshold regions into neighbors (or delete them).

    The threshold scales with image size so the same parameter means the
    same fraction of the frame at any resolution. Small regions are
    processed smallest-first; the absorber is the neighbor sharing the
    longest boundary (ties to the lower region id). Merging can make a
    previously safe region absorbable, so the loop re-checks sizes until
    stable. Inputs are not mutated.
    """
    w, h = image_dims
    threshold = min_area * (w * h) / descriptor.REFERENCE_PIXELS
    pixel_ids = pixel_ids.copy()
    areas = {r.id: r.area for r in regions}
    labels = {r.id: r.label for r in regions}
    sum_x = {r.id: r.centroid[0] * r.area for r in regions}
    sum_y = {r.id: r.centroid[1] * r.area for r in regions}
    bbox = {r.id: r.bbox for r in regions}

    boundary = _boundary_counts(pixel_ids)
    neighbors: dict[int, dict[int, int]] = {r.id: {} for r in regions}
    for (i, j), c in boundary.items():
        neighbors[i][j] = c
        neighbors[j][i] = c

    while True:
        small = [rid for rid, a in areas.items() if a < threshold]
        if not small:
            break
        rid = min(small, key=lambda r: (areas[r], r))
        nbrs = neighbors[rid]
        if strategy == "delete" or not nbrs:
            pixel_ids[pixel_ids == rid] = -1
            for other in nbrs:
                del neighbors[other][rid]
            for table in (areas, labels, sum_x, sum_y, bbox, neighbors):
                del table[rid]
            continue
        target = max(nbrs, key=lambda n: (nbrs[n], -n))
        pixel_ids[pixel_ids == rid] = target
        areas[target] += areas[rid]
        sum_x[target] += sum_x[rid]
        sum_y[target] += sum_y[rid]
        bx = bbox[rid]
        tx = bbox[target]
        bbox[target] = (min(bx[0], tx[0]), min(bx[1], tx[1]),
                        max(bx[2], tx[2]), max(bx[3], tx[3]))
        for other, cnt in nbrs.items():
            if other == target:
                continue
            merged = neighbors[target].get(other, 0) + cnt
            neighbors[target][other] = merged
            neighbors[other][target] = merged
            del neighbors[other][rid]
        del neighbors[target][rid]
        for table in (areas, labels, sum_x, sum_y, bbox, neighbors):
            del table[rid]

    # Compact surviving ids to 0..n-1, ascending, and rewrite the pixel map.
    survivors = sorted(areas)
    remap = np.full(int(pixel_ids.max()) + 2, -1, dtype=np.int64)
    for new_id, rid in enumerate(survivors):
        remap[rid] = new_id
    mask = pixel_ids >= 0
    pixel_ids[mask] = remap[pixel_ids[mask]]

    out = tuple(Region(
        id=new_id, label=labels[rid], area=areas[rid],
        centroid=(sum_x[rid] / areas[rid], sum_y[rid] / areas[rid]),
        bbox=bbox[rid],
    ) for new_id, rid in enumerate(survivors))
    return out, pixel_ids


def build_adjacency(pixel_ids: np.ndarray,
                    n_regions: int) -> tuple[tuple[int, int], ...]:
    """Edges between regions that touch along a 4-neighbor pixel pair."""
    edges = set()
    for (i, j) in _boundary_counts(pixel_ids):
        if i < n_regions and j < n_regions:
            edges.add((i, j))
    return tuple(sorted(edges))


def build_scene_graph(label_map: LabelMap,
                      params: GraphParams = GraphParams()) -> SceneGraph:
    """Full pipeline: regions -> optional merging -> adjacency -> features."""
    regions, pixel_ids = extract_regions(label_map, params.noise_area)
    if params.merge:
        regions, pixel_ids = merge_small_regions(
            regions, pixel_ids, label_map.dims, params.min_area,
            params.merge_strategy)
    if not regions:
        raise EmptyGraphError("no region survived filtering")
    edges = build_adjacency(pixel_ids, len(regions))
    feats = np.stack([
        descriptor.node_feature(r, label_map.dims, params.feature_mode)
        for r in regions])
    codes = np.array([descriptor.region_code(r, label_map.dims)
                      for r in regions], dtype=np.int64)
    return SceneGraph(features=feats, edges=edges, image_dims=label_map.dims,
                      regions=regions, brs_codes=codes)


def build_sequence_chain_graph(frame_features: np.ndarray) -> SceneGraph:
    """Path graph over per-frame descriptors: frame t connects to t+1.

    The ablation baseline that keeps the temporal chain but throws away
    within-image region structure.
    """
    feats = np.asarray(frame_features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ValueError("need a (frames, d) feature matrix")
    edges = tuple((i, i + 1) for i in range(feats.shape[0] - 1))
    return SceneGraph(features=feats, edges=edges, image_dims=(0, 0))


def graph_bit_cost(graph: SceneGraph) -> tuple[int, int]:
    """(node_bits, edge_bits) for the one-byte-per-node encoding.

    Each node costs 8 bits; each undirected edge stores two node ids of
    ceil(log2(n)) bits each.
    """
    n = graph.n_nodes
    node_bits = 8 * n
    id_bits = max(int(np.ceil(np.log2(n))), 1) if n > 1 else 1
    edge_bits = len(graph.edges) * 2 * id_bits
    return node_bits, edge_bits


def mean_graph_stats(graphs: list[SceneGraph]) -> dict[str, float]:
    """Average node count and bit costs over a set of graphs."""
    if not graphs:
        warnings.warn("no graphs to summarize")
        return {"mean_nodes": 0.0, "mean_node_bits": 0.0,
                "mean_edge_bits": 0.0, "mean_total_bits": 0.0}
    nodes = [g.n_nodes for g in graphs]
    costs = [graph_bit_cost(g) for g in graphs]
    node_bits = [c[0] for c in costs]
    edge_bits = [c[1] for c in costs]
    return {
        "mean_nodes": float(np.mean(nodes)),
        "mean_node_bits": float(np.mean(node_bits)),
        "mean_edge_bits": float(np.mean(edge_bits)),
        "mean_total_bits": float(np.mean(node_bits) + np.mean(edge_bits)),
    }
