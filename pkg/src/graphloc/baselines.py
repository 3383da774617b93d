"""Non-parametric place classifiers over descriptor histograms.

Two baselines that see exactly the same per-frame information as the
graph classifier, minus the edges: a k-nearest-neighbor vote over
189-bin code histograms, and naive-Bayes nearest neighbor over the sets
of one-hot codes present in each class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .descriptor import N_CODES, image_histogram
from .scene_graph import SceneGraph


@dataclass(frozen=True)
class TrainIndex:
    """Exemplar store shared by both baselines."""

    histograms: np.ndarray  # (n, 189) float64, raw counts
    classes: np.ndarray     # (n,) int
    class_codes: dict[int, np.ndarray]  # class -> sorted unique codes
    n_classes: int

    @property
    def n_exemplars(self) -> int:
        return self.histograms.shape[0]


def build_index(graphs: list[SceneGraph], labels: list[int],
                n_classes: int | None = None) -> TrainIndex:
    if len(graphs) != len(labels) or not graphs:
        raise ValueError("need matching, non-empty graphs and labels")
    if n_classes is None:
        n_classes = max(labels) + 1
    hists = np.stack([image_histogram(g) for g in graphs])
    classes = np.asarray(labels, dtype=int)
    class_codes = {}
    for c in range(n_classes):
        codes = [g.brs_codes for g, y in zip(graphs, labels)
                 if y == c and g.brs_codes is not None]
        class_codes[c] = (np.unique(np.concatenate(codes)) if codes
                          else np.empty(0, dtype=np.int64))
    return TrainIndex(histograms=hists, classes=classes,
                      class_codes=class_codes, n_classes=n_classes)


def _histogram_of(query, normalize: bool) -> np.ndarray:
    hist = (image_histogram(query) if isinstance(query, SceneGraph)
            else np.asarray(query, dtype=np.float64))
    if hist.shape != (N_CODES,):
        raise ValueError(f"histogram must have {N_CODES} bins")
    if normalize:
        total = hist.sum()
        if total > 0:
            hist = hist / total
    return hist


def knn_classify(query, index: TrainIndex, k: int = 5,
                 normalize: bool = False) -> tuple[int, np.ndarray]:
    """Majority vote of the k nearest exemplars by L2 histogram distance.

    Vote ties break to the candidate with the smaller mean distance,
    then to the lower class index. k larger than the index is clamped
    with a warning. Returns (class, distances to all exemplars).
    """
    if k < 1:
        raise ValueError("k must be positive")
    hist = _histogram_of(query, normalize)
    exemplars = index.histograms
    if normalize:
        sums = exemplars.sum(axis=1, keepdims=True)
        exemplars = np.divide(exemplars, np.where(sums > 0, sums, 1.0))
    dists = np.linalg.norm(exemplars - hist, axis=1)
    if k > len(dists):
        warnings.warn(f"k={k} larger than index ({len(dists)}); clamping")
        k = len(dists)
    nearest = np.argsort(dists, kind="stable")[:k]
    votes = np.bincount(index.classes[nearest], minlength=index.n_classes)
    best = votes.max()
    candidates = np.flatnonzero(votes == best)
    if len(candidates) == 1:
        return int(candidates[0]), dists
    means = []
    for c in candidates:
        mask = index.classes[nearest] == c
        means.append(dists[nearest][mask].mean())
    order = np.lexsort((candidates, np.asarray(means)))
    return int(candidates[order[0]]), dists


def knn_class_scores(query, index: TrainIndex,
                     normalize: bool = False) -> np.ndarray:
    """Per-class distance to the nearest exemplar (lower is better).

    Classes with no exemplar score +inf. This gives the baselines a
    full class ranking, which sequence fusion needs.
    """
    hist = _histogram_of(query, normalize)
    exemplars = index.histograms
    if normalize:
        sums = exemplars.sum(axis=1, keepdims=True)
        exemplars = np.divide(exemplars, np.where(sums > 0, sums, 1.0))
    dists = np.linalg.norm(exemplars - hist, axis=1)
    scores = np.full(index.n_classes, np.inf)
    for c in range(index.n_classes):
        mask = index.classes == c
        if mask.any():
            scores[c] = dists[mask].min()
    return scores


def nbnn_classify(query_codes: np.ndarray,
                  index: TrainIndex) -> tuple[int, np.ndarray]:
    """Per-class mean nearest-feature distance over one-hot codes.

    With one-hot descriptors the distance from a query code to a class
    is 0 if the class contains that exact code and sqrt(2) otherwise.
    Classes with no exemplars score +inf. Ties go to the lower class
    index. Returns (argmin class, per-class scores).
    """
    codes = np.asarray(query_codes, dtype=np.int64)
    if codes.ndim != 1 or codes.size == 0:
        raise ValueError("need a non-empty 1-D code array")
    if codes.min() < 0 or codes.max() >= N_CODES:
        raise ValueError("code out of range")
    scores = np.full(index.n_classes, np.inf)
    sqrt2 = np.sqrt(2.0)
    for c, class_codes in index.class_codes.items():
        if class_codes.size == 0:
            continue
        present = np.isin(codes, class_codes)
        scores[c] = float(np.where(present, 0.0, sqrt2).mean())
    return int(np.argmin(scores)), scores
