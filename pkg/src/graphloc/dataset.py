"""Synthetic desk-scale worlds, label-map rendering, and dataset I/O.

The perceptual input of the whole system is a per-pixel semantic label
map. Instead of real imagery plus a segmentation network, this module
renders label maps from a procedurally generated world: landmarks are
axis-aligned boxes on a flat ground plane, projected as "semantic
billboards" through a pinhole-style panel camera. The goal is plausible
region topology, not photorealism.

A world also carries a 1-D route (the road the robot drives), used to
sample trajectories and as the action axis of the viewpoint planner.
"""

from __future__ import annotations

import json
import math
import re
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .descriptor import REFERENCE_PIXELS, SOURCE_ID, SOURCE_LABELS, VOID_ID
from . import MANIFEST_SCHEMA_VERSION


class DatasetError(Exception):
    """Base class for dataset-layer failures."""


class WorldTooCrowdedError(DatasetError):
    """Landmark placement failed after bounded retries."""


class ManifestError(DatasetError):
    """Malformed or inconsistent sequence manifest."""


class MissingFrameError(DatasetError):
    """Manifest references a label-map file that does not exist."""


class DimensionMismatchError(DatasetError):
    """A frame's dimensions disagree with the manifest."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# --------------------------------------------------------------------------
# Core value types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    """Per-pixel semantic labels, row-major, one byte per pixel."""

    labels: np.ndarray  # (h, w) uint8
    void_id: int = VOID_ID

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.uint8)
        object.__setattr__(self, "labels", arr)
        if arr.ndim != 2 or arr.shape[0] < 3 or arr.shape[1] < 3:
            raise ValueError(f"label map must be at least 3x3, got {arr.shape}")
        valid = (arr < len(SOURCE_LABELS)) | (arr == self.void_id)
        if not valid.all():
            bad = np.unique(arr[~valid])
            raise ValueError(f"labels outside the source palette: {bad.tolist()}")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)


@dataclass(frozen=True)
class Pose:
    """Planar robot pose; heading is wrapped to [-pi, pi) on construction."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class PlaceGrid:
    """Regular partition of the workspace into rows x cols place classes.

    Cells are half-open in both axes, so every pose in
    [x0, x1) x [y0, y1) maps to exactly one class, and a pose exactly on
    an interior cell edge belongs to the higher cell.
    """

    x0: float
    y0: float
    x1: float
    y1: float
    rows: int
    cols: int

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError("grid bounds are empty")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and column")

    @property
    def n_classes(self) -> int:
        return self.rows * self.cols

    def class_of(self, pose: Pose) -> int:
        return place_class_of(pose, self)

    def classes_of(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized cell lookup; inputs must already lie inside bounds."""
        cw = (self.x1 - self.x0) / self.cols
        ch = (self.y1 - self.y0) / self.rows
        cols = np.minimum(((xs - self.x0) // cw).astype(int), self.cols - 1)
        rws = np.minimum(((ys - self.y0) // ch).astype(int), self.rows - 1)
        return rws * self.cols + cols

    def clamp(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clamp coordinates into the half-open workspace box."""
        hix = np.nextafter(self.x1, self.x0)
        hiy = np.nextafter(self.y1, self.y0)
        return np.clip(xs, self.x0, hix), np.clip(ys, self.y0, hiy)


def place_class_of(pose: Pose, grid: PlaceGrid) -> int:
    """Row-major place class of a pose; raises if the pose is outside."""
    if not (grid.x0 <= pose.x < grid.x1 and grid.y0 <= pose.y < grid.y1):
        raise ValueError(f"pose ({pose.x}, {pose.y}) outside grid bounds")
    cw = (grid.x1 - grid.x0) / grid.cols
    ch = (grid.y1 - grid.y0) / grid.rows
    col = min(int((pose.x - grid.x0) // cw), grid.cols - 1)
    row = min(int((pose.y - grid.y0) // ch), grid.rows - 1)
    return row * grid.cols + col


@dataclass(frozen=True)
class FrameRecord:
    file: str
    pose: Pose
    t: float


@dataclass(frozen=True)
class SequenceManifest:
    """Ordered frame records plus the metadata shared by all frames."""

    frames: tuple[FrameRecord, ...]
    domain_tag: str
    image_dims: tuple[int, int]

    def __post_init__(self):
        ts = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ManifestError("timestamps must be strictly increasing")


# --------------------------------------------------------------------------
# World model
# --------------------------------------------------------------------------

LANDMARK_CATEGORIES = ("building", "tree", "pole", "traffic_sign", "other")

# Footprint side and height ranges (meters) per category, desk scale.
_SIZE_RANGES = {
    "building": ((8.0, 18.0), (6.0, 14.0)),
    "tree": ((2.0, 5.0), (4.0, 9.0)),
    "pole": ((0.3, 0.6), (4.0, 7.0)),
    "traffic_sign": ((0.4, 0.9), (2.0, 3.2)),
    "other": ((1.5, 4.5), (1.0, 2.8)),
}

_CATEGORY_SOURCE = {
    "building": SOURCE_ID["building"],
    "tree": SOURCE_ID["vegetation"],
    "pole": SOURCE_ID["pole"],
    "traffic_sign": SOURCE_ID["traffic_sign"],
}
# "other" landmarks draw a concrete source label from this pool so the
# 19-to-7 remapping actually gets exercised.
_OTHER_SOURCE_POOL = tuple(
    SOURCE_ID[n]
    for n in ("wall", "fence", "terrain", "person", "rider", "car", "truck",
              "bus", "train", "motorcycle", "bicycle")
)

_SKY = SOURCE_ID["sky"]
_ROAD = SOURCE_ID["road"]

DEFAULT_LANDMARK_COUNTS = {
    "building": 12, "tree": 25, "pole": 10, "traffic_sign": 10, "other": 12,
}


@dataclass(frozen=True)
class DomainSpec:
    """Seeded per-domain perturbation standing in for season/weather shift.

    label_noise: probability that an "other" landmark's source label is
    re-drawn from the full palette (may cross category boundaries).
    jitter: stddev (m) of a per-landmark footprint translation.
    horizon_shift: vertical offset (px) of the rendered horizon row.
    """

    tag: str
    label_noise: float = 0.0
    jitter: float = 0.0
    horizon_shift: int = 0
    seed: int = 0


@dataclass(frozen=True)
class WorldConfig:
    extent: tuple[float, float] = (100.0, 100.0)
    landmark_counts: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_LANDMARK_COUNTS))
    seed: int = 0
    render_dims: tuple[int, int] = (808, 616)  # (width, height), landscape
    fov: float = math.pi / 2
    horizon_frac: float = 0.45
    cam_height: float = 1.5
    route_sweeps: int = 5
    route_margin: float = 8.0
    route_clearance: float = 2.5
    max_place_attempts: int = 5000
    # Landmarks farther than this (meters) are not drawn; None = no limit.
    max_view_distance: float | None = None
    # Segmentation-noise speckle: random small single-label blobs painted
    # over each render. Count is per frame; the area range is expressed
    # at the reference resolution and scales with render_dims. The blob
    # pattern is a pure function of (world seed, domain tag, pose).
    speckle_count: int = 0
    speckle_area: tuple[float, float] = (120.0, 800.0)

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("extent must be positive")
        w, h = self.render_dims
        if w < 3 or h < 3:
            raise ValueError("render dims too small")
        bad = set(self.landmark_counts) - set(LANDMARK_CATEGORIES)
        if bad:
            raise ValueError(f"unknown landmark categories: {sorted(bad)}")
        if self.speckle_count < 0 or self.speckle_area[0] <= 0 \
                or self.speckle_area[1] < self.speckle_area[0]:
            raise ValueError("bad speckle configuration")


@dataclass(frozen=True)
class Landmark:
    category: str
    source_label: int
    x0: float
    y0: float
    x1: float
    y1: float
    height: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def overlaps(self, other: "Landmark") -> bool:
        return not (self.x1 <= other.x0 or other.x1 <= self.x0
                    or self.y1 <= other.y0 or other.y1 <= self.y0)


@dataclass(frozen=True)
class Route:
    """Polyline with arc-length parameterization; poses face the tangent."""

    waypoints: np.ndarray  # (m, 2)

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        object.__setattr__(self, "waypoints", wp)
        if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != 2:
            raise ValueError("route needs at least two 2-D waypoints")
        seg = np.diff(wp, axis=0)
        lens = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lens <= 0):
            raise ValueError("route has a zero-length segment")
        object.__setattr__(self, "_seg_len", lens)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(lens)]))

    def __eq__(self, other):
        # numpy field: dataclass tuple equality would be elementwise
        if not isinstance(other, Route):
            return NotImplemented
        return np.array_equal(self.waypoints, other.waypoints)

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def pose_at(self, s: float) -> Pose:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        frac = (s - self._cum[i]) / self._seg_len[i]
        p = self.waypoints[i] + frac * (self.waypoints[i + 1] - self.waypoints[i])
        d = self.waypoints[i + 1] - self.waypoints[i]
        return Pose(float(p[0]), float(p[1]), math.atan2(d[1], d[0]))

    def sample_points(self, spacing: float = 0.25) -> np.ndarray:
        n = max(int(self.length / spacing) + 1, 2)
        return np.stack(
            [self.waypoints[0] * 0 + [self.pose_at(s).x, self.pose_at(s).y]
             for s in np.linspace(0.0, self.length, n)])


@dataclass(frozen=True)
class World:
    config: WorldConfig
    landmarks: tuple[Landmark, ...]
    route: Route
    domain_tag: str = "base"
    horizon_shift: int = 0

    @property
    def extent(self) -> tuple[float, float]:
        return self.config.extent


def serpentine_route(extent: tuple[float, float], sweeps: int, margin: float) -> Route:
    """Boustrophedon path covering the workspace with `sweeps` passes."""
    w, h = extent
    xs = (margin, w - margin)
    if sweeps < 2:
        y = h / 2.0
        return Route(np.array([[xs[0], y], [xs[1], y]]))
    ys = np.linspace(margin, h - margin, sweeps)
    pts = []
    for i, y in enumerate(ys):
        a, b = (xs if i % 2 == 0 else xs[::-1])
        pts.append([a, y])
        pts.append([b, y])
    return Route(np.array(pts))


def _route_samples(route: Route, spacing: float = 0.25) -> np.ndarray:
    n = max(int(route.length / spacing) + 1, 2)
    ss = np.linspace(0.0, route.length, n)
    return np.array([[route.pose_at(s).x, route.pose_at(s).y] for s in ss])


def _min_dist_to_points(pts: np.ndarray, x0, y0, x1, y1) -> float:
    dx = np.maximum(np.maximum(x0 - pts[:, 0], pts[:, 0] - x1), 0.0)
    dy = np.maximum(np.maximum(y0 - pts[:, 1], pts[:, 1] - y1), 0.0)
    return float(np.min(np.hypot(dx, dy)))


def generate_world(config: WorldConfig) -> World:
    """Deterministically place landmarks along a serpentine route.

    Footprints never overlap each other and keep a clearance corridor
    around the route so rendered poses are never inside an obstacle.
    """
    rng = np.random.default_rng(config.seed)
    w, h = config.extent
    route = serpentine_route(config.extent, config.route_sweeps, config.route_margin)
    route_pts = _route_samples(route)

    landmarks: list[Landmark] = []
    for category in LANDMARK_CATEGORIES:
        count = int(config.landmark_counts.get(category, 0))
        (s_lo, s_hi), (h_lo, h_hi) = _SIZE_RANGES[category]
        for _ in range(count):
            placed = False
            for _attempt in range(config.max_place_attempts):
                sx = rng.uniform(s_lo, s_hi)
                sy = rng.uniform(s_lo, s_hi)
                height = rng.uniform(h_lo, h_hi)
                if sx > w or sy > h:  # footprint cannot fit at all
                    continue
                cx = rng.uniform(sx / 2, w - sx / 2)
                cy = rng.uniform(sy / 2, h - sy / 2)
                cand = Landmark(
                    category=category,
                    source_label=_CATEGORY_SOURCE.get(
                        category,
                        _OTHER_SOURCE_POOL[rng.integers(len(_OTHER_SOURCE_POOL))]),
                    x0=cx - sx / 2, y0=cy - sy / 2,
                    x1=cx + sx / 2, y1=cy + sy / 2,
                    height=height,
                )
                if any(cand.overlaps(lm) for lm in landmarks):
                    continue
                if _min_dist_to_points(route_pts, cand.x0, cand.y0, cand.x1,
                                       cand.y1) < config.route_clearance:
                    continue
                landmarks.append(cand)
                placed = True
                break
            if not placed:
                raise WorldTooCrowdedError(
                    f"could not place {category} after "
                    f"{config.max_place_attempts} attempts")
    return World(config=config, landmarks=tuple(landmarks), route=route)


def apply_domain(world: World, spec: DomainSpec) -> World:
    """Derive a perturbed copy of a world for cross-domain experiments.

    Jittered footprints may overlap; the painter's algorithm tolerates
    that, mimicking segmentation drift rather than physical layout change.
    """
    rng = np.random.default_rng((world.config.seed, spec.seed))
    w, h = world.extent
    out = []
    for lm in world.landmarks:
        dx = dy = 0.0
        if spec.jitter > 0:
            dx, dy = rng.normal(0.0, spec.jitter, 2)
        label = lm.source_label
        if lm.category == "other" and spec.label_noise > 0:
            if rng.random() < spec.label_noise:
                label = int(rng.integers(len(SOURCE_LABELS)))
        sx, sy = lm.x1 - lm.x0, lm.y1 - lm.y0
        cx = min(max(lm.x0 + dx + sx / 2, sx / 2), w - sx / 2)
        cy = min(max(lm.y0 + dy + sy / 2, sy / 2), h - sy / 2)
        out.append(replace(lm, source_label=label,
                           x0=cx - sx / 2, y0=cy - sy / 2,
                           x1=cx + sx / 2, y1=cy + sy / 2))
    return replace(world, landmarks=tuple(out), domain_tag=spec.tag,
                   horizon_shift=spec.horizon_shift)


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def render_label_map(world: World, pose: Pose) -> LabelMap:
    """Project the world onto a semantic label image at the given pose.

    Flat billboard model: a horizon row splits sky from the road plane,
    landmarks in the field of view become axis-aligned rectangles whose
    size shrinks with 1/distance, and nearer landmarks occlude farther
    ones (painter's algorithm). The top and bottom image rows are never
    painted over, so every render keeps at least sky and road.
    """
    w_m, h_m = world.extent
    if not (0 <= pose.x <= w_m and 0 <= pose.y <= h_m):
        raise ValueError(f"pose ({pose.x}, {pose.y}) outside world extent")

    cfg = world.config
    W, H = cfg.render_dims
    half_fov = cfg.fov / 2.0
    focal = (W / 2.0) / math.tan(half_fov)
    horizon = int(round(cfg.horizon_frac * H)) + world.horizon_shift
    horizon = min(max(horizon, 2), H - 2)

    img = np.empty((H, W), dtype=np.uint8)
    img[:horizon, :] = _SKY
    img[horizon:, :] = _ROAD

    visible = []
    for idx, lm in enumerate(world.landmarks):
        corners = ((lm.x0, lm.y0), (lm.x0, lm.y1), (lm.x1, lm.y0), (lm.x1, lm.y1))
        angles = [wrap_angle(math.atan2(cy - pose.y, cx - pose.x) - pose.heading)
                  for cx, cy in corners]
        if all(math.cos(a) <= 0 for a in angles):
            continue  # fully behind the camera
        if min(angles) > half_fov or max(angles) < -half_fov:
            continue  # outside the view cone
        cx, cy = lm.center
        d = max(math.hypot(cx - pose.x, cy - pose.y), 0.5)
        if cfg.max_view_distance is not None and d > cfg.max_view_distance:
            continue
        visible.append((d, idx, angles, lm))

    eps = 1e-6
    for d, _idx, angles, lm in sorted(visible, key=lambda v: (-v[0], v[1])):
        us = [W / 2.0 + focal * math.tan(min(max(a, -half_fov + eps), half_fov - eps))
              for a in angles]
        c0 = max(int(math.floor(min(us))), 0)
        c1 = min(int(math.ceil(max(us))), W)
        if c1 <= c0:
            continue
        v_bottom = horizon + focal * cfg.cam_height / d
        v_top = v_bottom - focal * lm.height / d
        r0 = min(max(int(math.floor(v_top)), 1), H - 1)
        r1 = min(max(int(math.ceil(v_bottom)), 1), H - 1)
        if r1 <= r0:
            continue
        img[r0:r1, c0:c1] = lm.source_label

    if cfg.speckle_count > 0:
        _paint_speckle(img, world, pose)
    return LabelMap(img)


def _paint_speckle(img: np.ndarray, world: World, pose: Pose) -> None:
    """Overlay segmentation-noise blobs; pattern fixed by seed/domain/pose.

    Blobs never touch the first or last row, preserving the sky/road
    guarantee. Different domain tags produce different blobs at the same
    pose, which is exactly the cross-domain nuisance region merging is
    meant to absorb.
    """
    H, W = img.shape
    cfg = world.config
    pose_words = np.frombuffer(
        struct.pack("<3d", pose.x, pose.y, pose.heading),
        dtype=np.uint32)
    rng = np.random.default_rng(
        [cfg.seed, zlib.crc32(world.domain_tag.encode()), *pose_words])
    scale = (W * H) / REFERENCE_PIXELS
    lo, hi = cfg.speckle_area
    for _ in range(cfg.speckle_count):
        area = rng.uniform(lo, hi) * scale
        aspect = rng.uniform(0.5, 2.0)
        bw = max(int(round(math.sqrt(area * aspect))), 1)
        bh = max(int(round(area / bw)), 1)
        label = int(rng.integers(len(SOURCE_LABELS)))
        r0 = int(rng.integers(1, max(H - 1 - bh, 2)))
        c0 = int(rng.integers(0, max(W - bw, 1)))
        img[r0:min(r0 + bh, H - 1), c0:min(c0 + bw, W)] = label


def sample_route_poses(route: Route, count: int, start: float = 0.0,
                       spacing: float | None = None) -> tuple[list[Pose], np.ndarray]:
    """Poses along the route: evenly spread, or at a fixed spacing."""
    if count < 1:
        raise ValueError("need at least one pose")
    if spacing is None:
        ss = np.linspace(start, route.length, count, endpoint=False)
    else:
        ss = start + spacing * np.arange(count)
        ss = np.minimum(ss, route.length)
    return [route.pose_at(float(s)) for s in ss], ss


# --------------------------------------------------------------------------
# On-disk sequences: manifest.json + binary PGM label maps
# --------------------------------------------------------------------------

def write_pgm(path: Path, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # exactly one whitespace byte ends the header; the payload may itself
    # start with whitespace-valued bytes, so token splitting would eat them
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ManifestError(f"{path}: not a binary PGM")
    w, h, maxval = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if maxval != 255:
        raise ManifestError(f"{path}: expected 8-bit PGM, maxval {maxval}")
    payload = data[m.end():]
    if len(payload) != w * h:
        raise ManifestError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def save_sequence(manifest: SequenceManifest, maps: Sequence[LabelMap],
                  path: Path) -> None:
    """Write manifest.json plus one PGM per frame under `path`."""
    if len(manifest.frames) != len(maps):
        raise ManifestError("manifest frame count does not match label maps")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for frame, lm in zip(manifest.frames, maps):
        if lm.dims != manifest.image_dims:
            raise DimensionMismatchError(
                f"frame {frame.file}: dims {lm.dims} != manifest {manifest.image_dims}")
        target = path / frame.file
        target.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(target, lm.labels)
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "image_dims": list(manifest.image_dims),
        "domain_tag": manifest.domain_tag,
        "frames": [
            {"file": f.file, "x": f.pose.x, "y": f.pose.y,
             "heading": f.pose.heading, "t": f.t}
            for f in manifest.frames
        ],
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_sequence(path: Path) -> tuple[SequenceManifest, list[LabelMap]]:
    """Inverse of :func:`save_sequence`; round trips are bit-exact."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise ManifestError(f"no manifest.json under {path}")
    try:
        with open(mpath, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{mpath}: invalid JSON") from exc
    try:
        version = doc["schema_version"]
        dims = tuple(doc["image_dims"])
        tag = doc["domain_tag"]
        raw_frames = doc["frames"]
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{mpath}: missing field {exc}") from exc
    if version != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(f"unsupported manifest schema {version}")
    frames = []
    maps = []
    for rec in raw_frames:
        try:
            frame = FrameRecord(file=rec["file"],
                                pose=Pose(rec["x"], rec["y"], rec["heading"]),
                                t=rec["t"])
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"{mpath}: malformed frame record") from exc
        fpath = path / frame.file
        if not fpath.exists():
            raise MissingFrameError(f"missing frame file {frame.file}")
        labels = read_pgm(fpath)
        if (labels.shape[1], labels.shape[0]) != dims:
            raise DimensionMismatchError(
                f"{frame.file}: dims {(labels.shape[1], labels.shape[0])} "
                f"!= manifest {dims}")
        frames.append(frame)
        maps.append(LabelMap(labels))
    manifest = SequenceManifest(frames=tuple(frames), domain_tag=tag,
                                image_dims=dims)
    return manifest, maps


def make_manifest(poses: Sequence[Pose], domain_tag: str,
                  image_dims: tuple[int, int], t0: float = 0.0,
                  dt: float = 1.0) -> SequenceManifest:
    frames = tuple(
        FrameRecord(file=f"frames/{i:06d}.pgm", pose=p, t=t0 + i * dt)
        for i, p in enumerate(poses))
    return SequenceManifest(frames=frames, domain_tag=domain_tag,
                            image_dims=image_dims)


# --------------------------------------------------------------------------
# World (de)serialization, for the CLI
# --------------------------------------------------------------------------

def world_to_dict(world: World) -> dict:
    cfg = world.config
    return {
        "config": {
            "extent": list(cfg.extent),
            "landmark_counts": dict(cfg.landmark_counts),
            "seed": cfg.seed,
            "render_dims": list(cfg.render_dims),
            "fov": cfg.fov,
            "horizon_frac": cfg.horizon_frac,
            "cam_height": cfg.cam_height,
            "route_sweeps": cfg.route_sweeps,
            "route_margin": cfg.route_margin,
            "route_clearance": cfg.route_clearance,
        },
        "domain_tag": world.domain_tag,
        "horizon_shift": world.horizon_shift,
        "route": world.route.waypoints.tolist(),
        "landmarks": [
            {"category": lm.category, "source_label": lm.source_label,
             "x0": lm.x0, "y0": lm.y0, "x1": lm.x1, "y1": lm.y1,
             "height": lm.height}
            for lm in world.landmarks
        ],
    }


def world_from_dict(doc: dict) -> World:
    c = doc["config"]
    cfg = WorldConfig(
        extent=tuple(c["extent"]),
        landmark_counts=dict(c["landmark_counts"]),
        seed=c["seed"],
        render_dims=tuple(c["render_dims"]),
        fov=c["fov"],
        horizon_frac=c["horizon_frac"],
        cam_height=c["cam_height"],
        route_sweeps=c["route_sweeps"],
        route_margin=c["route_margin"],
        route_clearance=c["route_clearance"],
    )
    lms = tuple(Landmark(**d) for d in doc["landmarks"])
    return World(config=cfg, landmarks=lms, route=Route(np.array(doc["route"])),
                 domain_tag=doc["domain_tag"], horizon_shift=doc["horizon_shift"])
