# -*- coding: utf-8 -*-

"""
Curve and flow evaluation metrics: arc-length resampling, sliding alignment,
curve F-measure, modified Hausdorff distance and angular error
"""
from dataclasses import dataclass
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from newton_scenarios.errors import MetricError, ParameterError


DEFAULT_SAMPLES = 120
THRESHOLD_FRACTION = 0.05
MIN_THRESHOLD = 0.01


class Curve3D:
    """Ordered 3D polyline with at least two points"""

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise MetricError(f"Curve points must be 3-vectors, got shape {pts.shape}.")
        if pts.shape[0] < 2:
            raise MetricError(f"Curve needs at least 2 points, got {pts.shape[0]}.")
        if not np.all(np.isfinite(pts)):
            raise MetricError("Curve has non-finite coordinates.")
        pts.setflags(write=False)
        self._points = pts

    def __len__(self) -> int:
        return self._points.shape[0]

    def __repr__(self):
        return f"<Curve3D(points={len(self)}, arc_length={self.arc_length:.6g})>"

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self._points, axis=0), axis=1)

    @property
    def arc_length(self) -> float:
        return float(self.segment_lengths.sum())

    def translated(self, offset: Sequence[float]) -> "Curve3D":
        return Curve3D(self._points + np.asarray(offset, dtype=float))


@dataclass(frozen=True)
class FMeasureResult:
    precision: float
    recall: float
    f: float
    best_offset: int
    threshold: float


def resample(curve: Curve3D, n: int) -> Curve3D:
    """
    Resamples a polyline to n points evenly spaced by arc length

    Args:
        curve:                  Curve3D
        n:                      number of points, >= 2

    Returns:
        Curve3D with the original endpoints
    """
    if n < 2:
        raise ParameterError(f"Resampling needs at least 2 points, got {n}.")
    cum = np.concatenate([[0.0], np.cumsum(curve.segment_lengths)])
    total = cum[-1]
    if total <= 0.0:
        raise MetricError("Cannot resample a zero-length curve.")
    targets = np.linspace(0.0, total, n)
    pts = np.column_stack(
        [np.interp(targets, cum, curve.points[:, k]) for k in range(3)]
    )
    pts[0] = curve.points[0]
    pts[-1] = curve.points[-1]
    return Curve3D(pts)


def _as_points(c) -> np.ndarray:
    pts = c.points if isinstance(c, Curve3D) else np.asarray(c, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise MetricError("Cannot compare empty curves.")
    return pts


def slide_align(a: Curve3D, b: Curve3D) -> Tuple[int, float]:
    """
    Slides the shorter curve over the longer one and keeps the offset with
    the smallest mean pointwise distance; ties go to the smallest offset

    Args:
        a:                      Curve3D
        b:                      Curve3D

    Returns:
        offset into the longer curve, mean distance at that offset
    """
    pa, pb = _as_points(a), _as_points(b)
    short, long_ = (pa, pb) if len(pa) <= len(pb) else (pb, pa)
    m = len(short)
    best_offset, best = 0, math.inf
    for offset in range(len(long_) - m + 1):
        dist = float(
            np.mean(np.linalg.norm(long_[offset : offset + m] - short, axis=1))
        )
        if dist < best:
            best_offset, best = offset, dist
    return best_offset, best


def default_threshold(gt: Curve3D) -> float:
    return max(THRESHOLD_FRACTION * gt.arc_length, MIN_THRESHOLD)


def _common_spacing(
    pred: Curve3D, gt: Curve3D, samples: int
) -> Tuple[Curve3D, Curve3D]:
    lp, lg = pred.arc_length, gt.arc_length
    if lp <= 0.0 or lg <= 0.0:
        return pred, gt
    longer = max(lp, lg)

    def count(length: float) -> int:
        return max(2, int(round((samples - 1) * length / longer)) + 1)

    return resample(pred, count(lp)), resample(gt, count(lg))


def f_measure(
    pred: Curve3D,
    gt: Curve3D,
    threshold: Optional[float] = None,
    samples: Optional[int] = DEFAULT_SAMPLES,
) -> FMeasureResult:
    """
    Curve F-measure after sliding alignment. Points of the longer curve left
    outside the aligned window count as misses.

    Args:
        pred:                   predicted curve
        gt:                     ground-truth curve
        threshold:              distance in meters, default 5% of the gt
                                arc length (at least 1 cm)
        samples:                point count of the longer curve after
                                resampling, None compares the curves as given.
                                Curves sharing a point count are compared
                                point for point without resampling

    Returns:
        FMeasureResult with precision, recall and F in percent
    """
    if threshold is None:
        threshold = default_threshold(gt)
    if not threshold > 0:
        raise ParameterError(f"F-measure threshold must be positive, got {threshold}.")
    if samples is not None and len(pred) != len(gt):
        pred, gt = _common_spacing(pred, gt, samples)

    pp, pg = pred.points, gt.points
    offset, _ = slide_align(pred, gt)
    if len(pp) <= len(pg):
        window = pg[offset : offset + len(pp)]
        hits = int(np.count_nonzero(np.linalg.norm(window - pp, axis=1) <= threshold))
    else:
        window = pp[offset : offset + len(pg)]
        hits = int(np.count_nonzero(np.linalg.norm(window - pg, axis=1) <= threshold))

    precision = 100.0 * hits / len(pp)
    recall = 100.0 * hits / len(pg)
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return FMeasureResult(precision, recall, f, offset, float(threshold))


def mhd(a: Curve3D, b: Curve3D) -> float:
    """
    Modified Hausdorff distance: the larger of the two directed mean
    nearest-point distances
    """
    d = cdist(_as_points(a), _as_points(b))
    return float(max(d.min(axis=1).mean(), d.min(axis=0).mean()))


def angular_error(pred: Sequence[float], gt: Sequence[float]) -> float:
    """
    Angle between two 2D flow directions, radians in [0, pi]. A zero vector
    against a nonzero one scores pi / 2, two zero vectors score 0.

    Args:
        pred:                   predicted 2D direction
        gt:                     ground-truth 2D direction

    Returns:
        radians
    """
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    p_zero, g_zero = not np.any(p), not np.any(g)
    if p_zero and g_zero:
        return 0.0
    if p_zero or g_zero:
        return math.pi / 2
    cross = p[0] * g[1] - p[1] * g[0]
    return math.atan2(abs(cross), float(p @ g))
