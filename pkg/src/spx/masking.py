"""Per-part mask layers and presence-value blending.

Three hiding methods are supported: noise fitted to the remaining
(background) image, noise fitted to neighboring parts, and a deterministic
diffusion inpaint.  A layer holds the fully-hidden appearance of one part;
blending a layer with the original image according to a presence value
pi in [0, 1] realizes partial hiding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyPixelSet,
    LengthMismatch,
    NoBackgroundPixels,
    PartAbsent,
)
from .segmentation import BACKGROUND, SegmentationMap, active_parts, neighbors_of

COV_EPSILON = 1e-6
INPAINT_MAX_ITER = 500
INPAINT_TOL = 0.1


class MaskKind(enum.Enum):
    REMAINING_NOISE = "noise"
    NEIGHBOR_NOISE = "neighbor"
    INPAINT = "inpaint"


@dataclass(frozen=True)
class MaskingMethod:
    kind: MaskKind
    seed: int | None = None

    def __post_init__(self):
        needs_seed = self.kind in (MaskKind.REMAINING_NOISE, MaskKind.NEIGHBOR_NOISE)
        if needs_seed and self.seed is None:
            raise ConfigError("noise masking methods require a seed")
        if not needs_seed and self.seed is not None:
            object.__setattr__(self, "seed", None)


@dataclass(frozen=True)
class MaskLayer:
    """Replacement content for one part, defined on that part's pixels."""

    part_id: int
    values: np.ndarray  # uint8 (H, W, 3), meaningful only on part pixels


def _check_image(image: np.ndarray, seg: SegmentationMap | None = None) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise DimensionMismatch(f"image must be uint8 (H, W, 3), got {image.shape} {image.dtype}")
    if seg is not None and image.shape[:2] != seg.labels.shape:
        raise DimensionMismatch(
            f"image {image.shape[:2]} and segmentation {seg.labels.shape} dimensions differ"
        )
    return image


def fit_noise_model(image: np.ndarray, pixel_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and (regularized) covariance of RGB values over the masked pixels.

    Population statistics; covariance gets + eps*I so degenerate regions
    (flat color) still admit a Cholesky factor.
    """
    image = _check_image(image)
    pixel_mask = np.asarray(pixel_mask, dtype=bool)
    vals = image[pixel_mask].astype(np.float64)
    if vals.shape[0] == 0:
        raise EmptyPixelSet("noise model needs at least one pixel")
    mean = vals.mean(axis=0)
    centered = vals - mean
    cov = centered.T @ centered / vals.shape[0] + COV_EPSILON * np.eye(3)
    return mean, cov


def _sample_noise(mean, cov, n, rng) -> np.ndarray:
    chol = np.linalg.cholesky(cov)
    z = rng.standard_normal((n, 3))
    vals = mean + z @ chol.T
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8)


def diffusion_fill(image: np.ndarray, unknown: np.ndarray,
                   max_iter: int = INPAINT_MAX_ITER, tol: float = INPAINT_TOL) -> np.ndarray:
    """Fill the unknown pixels by iterative Laplacian diffusion.

    Known pixels act as a fixed boundary; unknown pixels relax to the
    average of their in-bounds 4-neighbors (Jacobi iteration) until the
    max per-channel change drops below ``tol`` or ``max_iter`` is hit.
    Fully deterministic.
    """
    image = _check_image(image)
    unknown = np.asarray(unknown, dtype=bool)
    out = image.astype(np.float64)
    if not unknown.any():
        return image.copy()
    known = ~unknown
    init = out[known].mean(axis=0) if known.any() else np.full(3, 127.5)
    out[unknown] = init

    h, w = unknown.shape
    count = np.zeros((h, w, 1))
    count[:-1] += 1
    count[1:] += 1
    count[:, :-1] += 1
    count[:, 1:] += 1

    for _ in range(max_iter):
        acc = np.zeros_like(out)
        acc[:-1] += out[1:]
        acc[1:] += out[:-1]
        acc[:, :-1] += out[:, 1:]
        acc[:, 1:] += out[:, :-1]
        new = acc / count
        delta = np.abs(new[unknown] - out[unknown]).max() if unknown.any() else 0.0
        out[unknown] = new[unknown]
        if delta < tol:
            break
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _noise_layer(image, seg, part_id, stats_mask, seed) -> MaskLayer:
    mean, cov = fit_noise_model(image, stats_mask)
    part_mask = seg.part_pixels(part_id)
    rng = np.random.default_rng([seed, part_id])
    vals = np.zeros_like(image)
    vals[part_mask] = _sample_noise(mean, cov, int(part_mask.sum()), rng)
    return MaskLayer(part_id, vals)


def build_mask_layer(image: np.ndarray, seg: SegmentationMap, part_id: int,
                     method: MaskingMethod) -> MaskLayer:
    """Build the fully-hidden replacement content for one part.

    For the inpaint method the diffusion fill is computed with all parts
    removed at once and then cropped to this part; prefer
    :func:`build_all_layers` to share that computation across parts.
    """
    image = _check_image(image, seg)
    if part_id not in {p.id for p, _ in active_parts(seg)}:
        raise PartAbsent(f"part {part_id} has no pixels in the map")

    if method.kind is MaskKind.REMAINING_NOISE:
        bg = seg.background_pixels()
        if not bg.any():
            raise NoBackgroundPixels("remaining-noise masking needs background pixels")
        return _noise_layer(image, seg, part_id, bg, method.seed)

    if method.kind is MaskKind.NEIGHBOR_NOISE:
        nbrs = neighbors_of(seg, part_id)
        if nbrs:
            stats_mask = np.isin(seg.labels, sorted(nbrs))
        else:
            # isolated part: fall back to the background statistics
            stats_mask = seg.background_pixels()
            if not stats_mask.any():
                raise NoBackgroundPixels(
                    f"part {part_id} has no neighbors and the map has no background"
                )
        return _noise_layer(image, seg, part_id, stats_mask, method.seed)

    # inpaint
    all_parts = seg.labels != BACKGROUND
    filled = diffusion_fill(image, all_parts)
    part_mask = seg.part_pixels(part_id)
    vals = np.zeros_like(image)
    vals[part_mask] = filled[part_mask]
    return MaskLayer(part_id, vals)


def build_all_layers(image: np.ndarray, seg: SegmentationMap,
                     method: MaskingMethod) -> dict[int, MaskLayer]:
    """One layer per active part; the inpaint fill is computed once."""
    image = _check_image(image, seg)
    parts = [p.id for p, _ in active_parts(seg)]
    if method.kind is MaskKind.INPAINT:
        filled = diffusion_fill(image, seg.labels != BACKGROUND)
        layers = {}
        for pid in parts:
            mask = seg.part_pixels(pid)
            vals = np.zeros_like(image)
            vals[mask] = filled[mask]
            layers[pid] = MaskLayer(pid, vals)
        return layers
    return {pid: build_mask_layer(image, seg, pid, method) for pid in parts}


def apply_presence(image: np.ndarray, seg: SegmentationMap,
                   layers: dict[int, MaskLayer], pi: np.ndarray) -> np.ndarray:
    """Blend image and layers: part pixels become round(pi*orig + (1-pi)*layer).

    ``pi`` is indexed by the active-parts ordering.  Background pixels are
    never touched; pi = 1 is the byte identity, pi = 0 yields the layer.
    """
    image = _check_image(image, seg)
    parts = active_parts(seg)
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (len(parts),):
        raise LengthMismatch(f"presence vector length {pi.shape} != {len(parts)} active parts")
    if ((pi < 0) | (pi > 1)).any():
        raise LengthMismatch("presence values must lie in [0, 1]")

    out = image.copy()
    for (part, _), p in zip(parts, pi.tolist()):
        if p == 1.0:
            continue
        mask = seg.part_pixels(part.id)
        layer = layers[part.id].values[mask].astype(np.float64)
        orig = image[mask].astype(np.float64)
        out[mask] = np.clip(np.rint(p * orig + (1.0 - p) * layer), 0, 255).astype(np.uint8)
    return out
