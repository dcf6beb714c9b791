"""Geometric gesture scoring, 3D IoU and distance-bucketed accuracy reports."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gesture_imputer.errors import DegenerateRay, EmptyInput, LengthMismatch
from gesture_imputer.scene import BoundingBox3D

IOU_THRESHOLDS = (0.25, 0.5)


class HallBucket(str, enum.Enum):
    Intimate = "Intimate"
    Personal = "Personal"
    Social = "Social"
    Public = "Public"


# lower bound inclusive, upper exclusive (meters)
HALL_EDGES = ((0.46, HallBucket.Personal), (1.22, HallBucket.Social), (3.70, HallBucket.Public))


def hall_bucket(distance_m: float) -> HallBucket:
    bucket = HallBucket.Intimate
    for edge, name in HALL_EDGES:
        if distance_m >= edge:
            bucket = name
    return bucket


def _simplex_pair(a: float, b: float, what: str):
    a, b = float(a), float(b)
    if a < 0 or b < 0 or abs(a + b - 1.0) > 1e-9:
        raise ValueError(f"{what} must be non-negative and sum to 1, got ({a}, {b})")
    return a, b


@dataclass(frozen=True)
class HandednessWeights:
    w_left: float
    w_right: float

    def __post_init__(self):
        _simplex_pair(self.w_left, self.w_right, "handedness weights")

    @classmethod
    def one_hot(cls, hand: str) -> "HandednessWeights":
        return cls(1.0, 0.0) if hand == "left" else cls(0.0, 1.0)


@dataclass(frozen=True)
class FusionWeights:
    w_conf: float
    w_bias: float

    def __post_init__(self):
        _simplex_pair(self.w_conf, self.w_bias, "fusion weights")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "FusionWeights":
        """Uniform draw on the 2-simplex."""
        w = float(rng.uniform())
        return cls(w, 1.0 - w)


def pointing_bias(v1, v2, v3) -> float:
    """Cosine between the shoulder->fingertip and shoulder->candidate directions."""
    v1 = np.asarray(v1, dtype=np.float64)
    ray = np.asarray(v2, dtype=np.float64) - v1
    to_c = np.asarray(v3, dtype=np.float64) - v1
    nr, nc = np.linalg.norm(ray), np.linalg.norm(to_c)
    if nr == 0 or nc == 0:
        raise DegenerateRay("zero-length pointing or candidate vector")
    cos = float(ray @ to_c) / (nr * nc)
    return min(1.0, max(-1.0, cos))


def score_proposals(
    left_shoulder,
    left_fingertip,
    right_shoulder,
    right_fingertip,
    proposals: Sequence[BoundingBox3D],
    s_conf: Sequence[float],
    w_lr: HandednessWeights,
    w_score: FusionWeights,
):
    """Late fusion of language confidences with the pointing bias.

    Returns ``(s_final, argmax_index, parts)`` with ``parts`` holding the
    per-hand and combined bias vectors. Ties go to the lowest index.
    """
    s_conf = np.asarray(s_conf, dtype=np.float64).reshape(-1)
    if len(proposals) == 0:
        raise EmptyInput("no proposals to score")
    if len(s_conf) != len(proposals):
        raise LengthMismatch(f"{len(s_conf)} confidences for {len(proposals)} proposals")
    centers = [p.center for p in proposals]
    s_left = np.array([pointing_bias(left_shoulder, left_fingertip, c) for c in centers])
    s_right = np.array([pointing_bias(right_shoulder, right_fingertip, c) for c in centers])
    s_bias = w_lr.w_left * s_left + w_lr.w_right * s_right
    s_final = w_score.w_conf * s_conf + w_score.w_bias * s_bias
    parts = {"s_b_left": s_left, "s_b_right": s_right, "s_b_final": s_bias}
    return s_final, int(np.argmax(s_final)), parts


def iou3d(a: BoundingBox3D, b: BoundingBox3D) -> float:
    lo = np.maximum(a.min_corner, b.min_corner)
    hi = np.minimum(a.max_corner, b.max_corner)
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = a.volume + b.volume - inter
    if union <= 0:
        return 1.0 if a == b else 0.0
    return inter / union


def evaluate(samples, thresholds: Sequence[float] = IOU_THRESHOLDS) -> dict:
    """Accuracy at each IoU threshold, overall and per Hall distance bucket.

    ``samples`` is a sequence of ``(pred_box, gt_box, distance_m)``. Buckets
    without samples report ``None`` accuracies.
    """
    samples = list(samples)
    if not samples:
        raise EmptyInput("no samples to evaluate")
    ious = np.array([iou3d(p, g) for p, g, _ in samples])
    buckets = np.array([hall_bucket(d).value for _, _, d in samples])

    def acc(sel):
        if not sel.any():
            return {f"iou@{t:g}": None for t in thresholds}
        return {f"iou@{t:g}": float(np.mean(ious[sel] >= t)) for t in thresholds}

    everything = np.ones(len(samples), dtype=bool)
    report = {"overall": acc(everything), "n": len(samples), "buckets": {}}
    for b in HallBucket:
        sel = buckets == b.value
        report["buckets"][b.value] = {"n": int(sel.sum()), **acc(sel)}
    return report


def format_report(report: dict) -> str:
    keys = list(report["overall"])
    rows = [("bucket", "n", *keys)]
    rows.append(("overall", str(report["n"]), *(f"{report['overall'][k]:.4f}" for k in keys)))
    for name, entry in report["buckets"].items():
        cells = ["-" if entry[k] is None else f"{entry[k]:.4f}" for k in keys]
        rows.append((name, str(entry["n"]), *cells))
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) if c == 0 else cell.rjust(w)
                       for c, (cell, w) in enumerate(zip(row, widths))) for row in rows]
    return "\n".join(lines) + "\n"
