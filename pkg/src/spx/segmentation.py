"""Body-part segmentation maps and abstraction-level remapping.

A segmentation map is a per-pixel grid of small integer labels (one byte
per pixel, 255 = background) plus a table mapping label ids to part names.
The canonical vocabulary is the 24-part BodyPix list; coarser vocabularies
(14 / 10 / 6 parts) are reached by applying the bundled merge tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import (
    DimensionMismatch,
    NonCanonicalLabel,
    UnknownLabel,
    UnsupportedLevel,
)

BACKGROUND = 255

# Canonical BodyPix part ids/names, level 0.  Ordering by id is the feature
# ordering used everywhere downstream.
BODYPIX_PARTS: tuple[tuple[int, str], ...] = (
    (0, "left_face"),
    (1, "right_face"),
    (2, "left_upper_arm_front"),
    (3, "left_upper_arm_back"),
    (4, "right_upper_arm_front"),
    (5, "right_upper_arm_back"),
    (6, "left_lower_arm_front"),
    (7, "left_lower_arm_back"),
    (8, "right_lower_arm_front"),
    (9, "right_lower_arm_back"),
    (10, "left_hand"),
    (11, "right_hand"),
    (12, "torso_front"),
    (13, "torso_back"),
    (14, "left_upper_leg_front"),
    (15, "left_upper_leg_back"),
    (16, "right_upper_leg_front"),
    (17, "right_upper_leg_back"),
    (18, "left_lower_leg_front"),
    (19, "left_lower_leg_back"),
    (20, "right_lower_leg_front"),
    (21, "right_lower_leg_back"),
    (22, "left_foot"),
    (23, "right_foot"),
)

# Merged vocabularies per abstraction level (id order = listing order).
LEVEL_VOCABULARY: dict[int, tuple[str, ...]] = {
    0: tuple(name for _, name in BODYPIX_PARTS),
    1: (
        "face",
        "left_upper_arm",
        "right_upper_arm",
        "left_lower_arm",
        "right_lower_arm",
        "left_hand",
        "right_hand",
        "torso",
        "left_upper_leg",
        "right_upper_leg",
        "left_lower_leg",
        "right_lower_leg",
        "left_foot",
        "right_foot",
    ),
    2: (
        "face",
        "left_arm",
        "right_arm",
        "left_hand",
        "right_hand",
        "torso",
        "left_leg",
        "right_leg",
        "left_foot",
        "right_foot",
    ),
    3: (
        "face",
        "torso",
        "left_arm",
        "right_arm",
        "left_leg",
        "right_leg",
    ),
}


@dataclass(frozen=True)
class PartLabel:
    id: int
    name: str

    def __post_init__(self):
        if not 0 <= self.id <= 254:
            raise UnknownLabel(f"part id {self.id} outside [0, 254]")


@dataclass(frozen=True)
class AbstractionLevel:
    level: int

    def __post_init__(self):
        if self.level not in (0, 1, 2, 3):
            raise UnsupportedLevel(f"abstraction level must be 0..3, got {self.level}")


@dataclass(frozen=True)
class SegmentationMap:
    """Immutable label grid plus id->name table."""

    labels: np.ndarray  # uint8, shape (H, W)
    table: dict[int, str] = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def part_pixels(self, part_id: int) -> np.ndarray:
        """Boolean mask of the pixels carrying ``part_id``."""
        return self.labels == part_id

    def background_pixels(self) -> np.ndarray:
        return self.labels == BACKGROUND


def load_segmentation(labels: np.ndarray, table: dict[int, str]) -> SegmentationMap:
    """Validate a raw label grid + table into a SegmentationMap."""
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
        raise DimensionMismatch(f"label grid must be 2-D and non-empty, got shape {labels.shape}")
    present = set(np.unique(labels).tolist()) - {BACKGROUND}
    missing = present - set(table)
    if missing:
        raise UnknownLabel(f"labels {sorted(missing)} present in grid but missing from table")
    names = list(table.values())
    if len(names) != len(set(names)):
        raise UnknownLabel("part names must be unique within a map")
    for part_id in table:
        PartLabel(part_id, table[part_id])  # range check
    grid = labels.copy()
    grid.setflags(write=False)
    return SegmentationMap(labels=grid, table=dict(table))


def read_segmentation(png_path: str | Path, json_path: str | Path | None = None) -> SegmentationMap:
    """Read the on-disk format: 8-bit single-channel PNG + sidecar JSON."""
    png_path = Path(png_path)
    if json_path is None:
        json_path = png_path.with_suffix(".json")
    labels = np.asarray(PILImage.open(png_path).convert("L"), dtype=np.uint8)
    with open(json_path) as fh:
        meta = json.load(fh)
    table = {int(k): v for k, v in meta["labels"].items()}
    return load_segmentation(labels, table)


def write_segmentation(seg: SegmentationMap, png_path: str | Path, json_path: str | Path | None = None) -> None:
    png_path = Path(png_path)
    if json_path is None:
        json_path = png_path.with_suffix(".json")
    PILImage.fromarray(np.asarray(seg.labels), mode="L").save(png_path, format="PNG")
    with open(json_path, "w") as fh:
        json.dump({"labels": {str(k): v for k, v in sorted(seg.table.items())}}, fh, indent=2)


def _load_merge_table(level: int) -> dict[str, str]:
    fname = f"merge_level{level}.json"
    with resources.files("spx.data").joinpath(fname).open() as fh:
        data = json.load(fh)
    return data["merge"]


def load_merge_table(path: str | Path) -> tuple[int, dict[str, str]]:
    """Load a user-supplied merge table JSON ({"level": n, "merge": {...}})."""
    with open(path) as fh:
        data = json.load(fh)
    return int(data["level"]), dict(data["merge"])


def remap_abstraction(
    seg: SegmentationMap,
    level: AbstractionLevel | int,
    merge: dict[str, str] | None = None,
) -> SegmentationMap:
    """Merge part labels down to the vocabulary of the given abstraction level.

    Pixel coverage is preserved exactly: a pixel is background after the
    remap iff it was background before.
    """
    if isinstance(level, int):
        level = AbstractionLevel(level)
    if level.level == 0:
        return seg
    if merge is None:
        merge = _load_merge_table(level.level)
    vocab = LEVEL_VOCABULARY[level.level]
    dst_id = {name: i for i, name in enumerate(vocab)}

    lut = np.full(256, BACKGROUND, dtype=np.uint8)
    new_table: dict[int, str] = {}
    for part_id, name in seg.table.items():
        if name in merge:
            dst = merge[name]
        elif name in dst_id:
            dst = name  # already in the target vocabulary (idempotence)
        else:
            raise NonCanonicalLabel(
                f"label {part_id} ({name!r}) is outside the canonical vocabulary for level {level.level}"
            )
        if dst not in dst_id:
            raise NonCanonicalLabel(f"merge target {dst!r} not in level-{level.level} vocabulary")
        lut[part_id] = dst_id[dst]
        new_table[dst_id[dst]] = dst
    new_labels = lut[seg.labels]
    return load_segmentation(new_labels, new_table)


def active_parts(seg: SegmentationMap) -> list[tuple[PartLabel, int]]:
    """Parts actually covering pixels, ascending by id, with pixel areas.

    This ordering defines the feature indexing of presence vectors.
    """
    ids, counts = np.unique(seg.labels, return_counts=True)
    out = []
    for part_id, area in zip(ids.tolist(), counts.tolist()):
        if part_id == BACKGROUND:
            continue
        out.append((PartLabel(part_id, seg.table[part_id]), area))
    return out


def adjacency(seg: SegmentationMap) -> set[tuple[int, int]]:
    """4-connected adjacency between part ids, as a set of (a, b) with a < b."""
    g = seg.labels
    pairs: set[tuple[int, int]] = set()
    for a, b in ((g[:, :-1], g[:, 1:]), (g[:-1, :], g[1:, :])):
        diff = (a != b) & (a != BACKGROUND) & (b != BACKGROUND)
        if not diff.any():
            continue
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return pairs


def neighbors_of(seg: SegmentationMap, part_id: int) -> set[int]:
    """Part ids 4-connected to ``part_id``."""
    out = set()
    for a, b in adjacency(seg):
        if a == part_id:
            out.add(b)
        elif b == part_id:
            out.add(a)
    return out
