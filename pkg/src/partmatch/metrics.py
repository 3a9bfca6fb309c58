"""Evaluation metrics for named part segmentation.

Three related scores over labeled point partitions: class-agnostic mIoU
(best geometric overlap, labels ignored), strict label-aware mIoU (credit only
on exact label match), and relaxed label-aware mIoU (credit weighted by label
embedding cosine similarity, clamped to [0, 1]). Plus Pearson/Spearman
correlation for metric-agreement analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

Segment = tuple[str, frozenset[int]]


def _validate_parts(parts: list[Segment], what: str) -> None:
    seen: set[int] = set()
    for label, pts in parts:
        if not pts:
            raise ValueError(f"{what} contains an empty segment ({label!r})")
        if seen & set(pts):
            raise ValueError(f"{what} segments overlap")
        seen |= set(pts)


@dataclass
class LabeledPartition:
    """Disjoint labeled point-index sets; used for both ground truth and predictions."""

    parts: list[Segment]

    def __post_init__(self):
        self.parts = [(label, frozenset(pts)) for label, pts in self.parts]
        _validate_parts(self.parts, "partition")


def iou(a: frozenset[int] | set[int], b: frozenset[int] | set[int]) -> float:
    """Intersection over union of point-index sets; both empty gives 0."""
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def _best_overlap(gt_points: frozenset[int], pred: LabeledPartition) -> tuple[float, str | None]:
    """Highest-IoU predicted segment for a ground-truth part (first on ties)."""
    best_iou = 0.0
    best_label = None
    for label, pts in pred.parts:
        v = iou(gt_points, pts)
        if v > best_iou:
            best_iou = v
            best_label = label
    return best_iou, best_label


def class_agnostic_miou(gt: LabeledPartition, pred: LabeledPartition) -> float:
    """Mean over ground-truth parts of the max IoU with any predicted segment."""
    if not gt.parts:
        raise ValueError("ground truth has no parts")
    return float(np.mean([_best_overlap(pts, pred)[0] for _, pts in gt.parts]))


def la_miou(gt: LabeledPartition, pred: LabeledPartition, resolve=None) -> float:
    """Strict label-aware mIoU: best-overlap segment scores only on exact label match.

    `resolve` optionally canonicalizes labels (alias resolution) before
    comparison.
    """
    if not gt.parts:
        raise ValueError("ground truth has no parts")
    resolve = resolve or (lambda s: s)
    scores = []
    for label, pts in gt.parts:
        best_iou, best_label = _best_overlap(pts, pred)
        ok = best_label is not None and resolve(best_label) == resolve(label)
        scores.append(best_iou if ok else 0.0)
    return float(np.mean(scores))


def rla_miou(
    gt: LabeledPartition,
    pred: LabeledPartition,
    embeddings: dict[str, Array],
    resolve=None,
) -> float:
    """Relaxed label-aware mIoU: IoU weighted by label-embedding cosine, clamped to [0, 1]."""
    if not gt.parts:
        raise ValueError("ground truth has no parts")
    resolve = resolve or (lambda s: s)
    scores = []
    for label, pts in gt.parts:
        best_iou, best_label = _best_overlap(pts, pred)
        if best_label is None:
            scores.append(0.0)
            continue
        for name in (resolve(label), resolve(best_label)):
            if name not in embeddings:
                raise KeyError(f"no embedding for label {name!r}")
        a = np.asarray(embeddings[resolve(label)], dtype=np.float64)
        b = np.asarray(embeddings[resolve(best_label)], dtype=np.float64)
        cos = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        scores.append(best_iou * min(max(cos, 0.0), 1.0))
    return float(np.mean(scores))


def pearson(x, y) -> float:
    """Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("series must have equal length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0.0:
        raise ValueError("pearson undefined for zero-variance series")
    return float((xc * yc).sum() / denom)


def _average_ranks(x: Array) -> Array:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("series must have equal length >= 2")
    return pearson(_average_ranks(x), _average_ranks(y))
