"""Synthetic test instances: blocky geometric "pedestrians" carrying the
full 24-part vocabulary, a textured background, and a ground-truth box.

These stand in for real street-scene data so the whole pipeline runs with
zero external inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .quality import BBox
from .segmentation import BACKGROUND, BODYPIX_PARTS, SegmentationMap, load_segmentation, write_segmentation

WIDTH, HEIGHT = 64, 128

# blocky body layout: (name, x1, y1, x2, y2) in pixels on the 64x128 canvas
_LAYOUT = (
    ("left_face", 24, 8, 32, 24),
    ("right_face", 32, 8, 40, 24),
    ("torso_front", 22, 24, 42, 44),
    ("torso_back", 22, 44, 42, 64),
    ("left_upper_arm_front", 14, 24, 18, 40),
    ("left_upper_arm_back", 18, 24, 22, 40),
    ("right_upper_arm_front", 42, 24, 46, 40),
    ("right_upper_arm_back", 46, 24, 50, 40),
    ("left_lower_arm_front", 14, 40, 18, 56),
    ("left_lower_arm_back", 18, 40, 22, 56),
    ("right_lower_arm_front", 42, 40, 46, 56),
    ("right_lower_arm_back", 46, 40, 50, 56),
    ("left_hand", 14, 56, 22, 64),
    ("right_hand", 42, 56, 50, 64),
    ("left_upper_leg_front", 24, 64, 28, 88),
    ("left_upper_leg_back", 28, 64, 31, 88),
    ("right_upper_leg_front", 33, 64, 37, 88),
    ("right_upper_leg_back", 37, 64, 40, 88),
    ("left_lower_leg_front", 24, 88, 28, 112),
    ("left_lower_leg_back", 28, 88, 31, 112),
    ("right_lower_leg_front", 33, 88, 37, 112),
    ("right_lower_leg_back", 37, 88, 40, 112),
    ("left_foot", 24, 112, 31, 120),
    ("right_foot", 33, 112, 40, 120),
)

GT_BBOX = BBox(14.0, 8.0, 50.0, 120.0)


def make_instance(seed: int = 0) -> tuple[np.ndarray, SegmentationMap, BBox]:
    """One synthetic pedestrian: RGB image, 24-part map, ground-truth box."""
    rng = np.random.default_rng(seed)
    name_to_id = {name: pid for pid, name in BODYPIX_PARTS}

    labels = np.full((HEIGHT, WIDTH), BACKGROUND, dtype=np.uint8)
    image = np.clip(
        rng.normal(110.0, 12.0, size=(HEIGHT, WIDTH, 3)), 0, 255
    ).astype(np.uint8)

    for name, x1, y1, x2, y2 in _LAYOUT:
        pid = name_to_id[name]
        labels[y1:y2, x1:x2] = pid
        base = rng.integers(40, 230, size=3)
        block = rng.normal(base, 10.0, size=(y2 - y1, x2 - x1, 3))
        image[y1:y2, x1:x2] = np.clip(block, 0, 255).astype(np.uint8)

    seg = load_segmentation(labels, dict(BODYPIX_PARTS))
    return image, seg, GT_BBOX


def write_instance(out_dir: str | Path, name: str, seed: int = 0) -> dict:
    """Write image.png, seg.png + seg.json, and gt.json for one instance."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    image, seg, gt = make_instance(seed)
    image_path = out_dir / f"{name}.png"
    seg_path = out_dir / f"{name}_seg.png"
    gt_path = out_dir / f"{name}_gt.json"
    PILImage.fromarray(image).save(image_path, format="PNG")
    write_segmentation(seg, seg_path)
    with open(gt_path, "w") as fh:
        json.dump({"gt_bbox": gt.as_list()}, fh)
    return {
        "image": str(image_path),
        "segmentation": str(seg_path),
        "segmentation_labels": str(seg_path.with_suffix(".json")),
        "gt": str(gt_path),
    }


def read_gt(path: str | Path) -> BBox:
    with open(path) as fh:
        data = json.load(fh)
    return BBox(*[float(v) for v in data["gt_bbox"]])


def interaction_value_spec(M: int = 14, seed: int = 0, dominant: int = 0):
    """M-part value function with a dominant part, a secondary part, a
    pairwise interaction between them, and small weights elsewhere.

    Used as the desk-scale stand-in for the sample-efficiency experiment.
    Per-seed jitter makes distinct "instances".
    """
    from .detector import SyntheticDetectorSpec

    rng = np.random.default_rng(seed)
    weights = np.full(M, 0.04)
    weights[dominant] = 0.30
    weights[(dominant + 1) % M] = 0.15
    weights *= rng.uniform(0.8, 1.2, size=M)
    terms = [((i,), float(weights[i])) for i in range(M)]
    terms.append(((dominant, (dominant + 1) % M), 0.05))
    return SyntheticDetectorSpec(
        gt_bbox=GT_BBOX, product_terms=tuple(terms), bias=0.02,
    )
