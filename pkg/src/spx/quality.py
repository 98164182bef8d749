"""Detection quality: Sorensen-Dice box overlap times classification score.

A detector returns many boxes; the one explaining the instance is picked
by maximum Dice overlap with the ground truth, and the scalar quality is
that overlap multiplied by the detection's classification score.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionMismatch


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DimensionMismatch(f"degenerate bbox {self}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    score: float
    label: str = "pedestrian"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DimensionMismatch(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class QualityScore:
    value: float
    matched_index: int | None = None


def dice(a: BBox, b: BBox) -> float:
    """2|A n B| / (|A| + |B|) over axis-aligned rectangle areas."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    return 2.0 * inter / (a.area + b.area)


def match_and_score(detections: list[Detection], gt: BBox,
                    min_score: float = 0.0, label: str | None = None) -> QualityScore:
    """Pick the max-Dice detection and return Dice * classification score.

    Ties on Dice go to the higher classification score, then the lower
    list index.  No detection (or none above ``min_score`` / matching
    ``label``) means quality 0.
    """
    best: tuple[float, float, int] | None = None  # (dice, score, -index) ordering key
    for idx, det in enumerate(detections):
        if det.score < min_score:
            continue
        if label is not None and det.label != label:
            continue
        d = dice(det.bbox, gt)
        key = (d, det.score, -idx)
        if best is None or key > best:
            best = key
    if best is None:
        return QualityScore(0.0, None)
    d, score, neg_idx = best
    return QualityScore(d * score, -neg_idx)
