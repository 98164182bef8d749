"""Rendering, multi-instance aggregation, and the sample-efficiency harness.

Relevance maps tint each part of the instance image by its score on a
diverging colormap; error maps use a sequential colormap over bootstrap
stds.  "Global" summaries average per-part scores over many instances and
color a human pictogram.  The convergence harness sweeps power-of-two
sample budgets and records per-part means and cross-instance std bands.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import attribution
from .errors import (
    ConfigError,
    EmptyInput,
    MissingErrors,
    MixedAbstraction,
    PartMismatch,
    Underdetermined,
    UnsupportedLevel,
)
from .segmentation import LEVEL_VOCABULARY, SegmentationMap

ALPHA = 0.6
DEFAULT_LADDER = tuple(2 ** k for k in range(3, 13))  # 8 .. 4096


def _load_cmap(name: str) -> np.ndarray:
    with resources.files("spx.data").joinpath(f"cmap_{name}.json").open() as fh:
        return np.array(json.load(fh)["rgb"], dtype=np.uint8)


_DIVERGING = _load_cmap("diverging")
_SEQUENTIAL = _load_cmap("sequential")


def diverging_color(score: float, limit: float) -> np.ndarray:
    """Map a score in [-limit, limit] onto the 256-entry diverging table."""
    t = 0.5 if limit <= 0 else (score + limit) / (2 * limit)
    idx = int(round(np.clip(t, 0.0, 1.0) * 255))
    return _DIVERGING[idx]


def sequential_color(value: float, vmax: float) -> np.ndarray:
    t = 0.0 if vmax <= 0 else value / vmax
    idx = int(round(np.clip(t, 0.0, 1.0) * 255))
    return _SEQUENTIAL[idx]


@dataclass(frozen=True)
class RenderedMap:
    png: bytes
    vmin: float
    vmax: float


def _grayscale_base(image: np.ndarray) -> np.ndarray:
    gray = 0.299 * image[..., 0] + 0.587 * image[..., 1] + 0.114 * image[..., 2]
    return np.repeat(gray[..., None], 3, axis=2)


def _png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def _check_parts(report: dict, seg: SegmentationMap):
    map_ids = set(seg.table)
    for part in report["parts"]:
        if part["id"] not in map_ids:
            raise PartMismatch(f"report part {part['id']} ({part['name']}) not in map")


def render_relevance_map(image: np.ndarray, seg: SegmentationMap, report: dict) -> RenderedMap:
    """Tint part pixels by score: diverging colormap symmetric about zero,
    alpha 0.6 over the grayscale base.  Deterministic bytes."""
    _check_parts(report, seg)
    scores = {p["id"]: p["score"] for p in report["parts"]}
    limit = max((abs(s) for s in scores.values()), default=0.0)
    base = _grayscale_base(np.asarray(image, dtype=np.float64))
    out = base.copy()
    for pid, score in scores.items():
        mask = seg.part_pixels(pid)
        color = diverging_color(score, limit).astype(np.float64)
        out[mask] = (1 - ALPHA) * base[mask] + ALPHA * color
    png = _png_bytes(np.clip(np.rint(out), 0, 255).astype(np.uint8))
    return RenderedMap(png, -limit, limit)


def render_error_map(image: np.ndarray, seg: SegmentationMap, report: dict) -> RenderedMap:
    """Sequential (white -> purple) tint over bootstrap stds."""
    _check_parts(report, seg)
    errors = {p["id"]: p["error"] for p in report["parts"]}
    if any(e is None for e in errors.values()):
        raise MissingErrors("report carries no bootstrap errors")
    vmax = max(errors.values(), default=0.0)
    base = _grayscale_base(np.asarray(image, dtype=np.float64))
    out = base.copy()
    for pid, err in errors.items():
        mask = seg.part_pixels(pid)
        color = sequential_color(err, vmax).astype(np.float64)
        out[mask] = (1 - ALPHA) * base[mask] + ALPHA * color
    png = _png_bytes(np.clip(np.rint(out), 0, 255).astype(np.uint8))
    return RenderedMap(png, 0.0, vmax)


def aggregate_global(reports: list[dict], vocabulary: list[str] | None = None) -> dict:
    """Per-part-name mean score and contributing-instance count.

    Parts absent from an instance (fully occluded) simply do not
    contribute; names never active are reported with count 0 and no mean.
    """
    if not reports:
        raise EmptyInput("no reports to aggregate")
    levels = {r["abstraction"] for r in reports}
    if len(levels) > 1:
        raise MixedAbstraction(f"reports mix abstraction levels {sorted(levels)}")
    level = levels.pop()
    if vocabulary is None:
        vocabulary = list(LEVEL_VOCABULARY[level])
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for report in reports:
        for part in report["parts"]:
            sums[part["name"]] = sums.get(part["name"], 0.0) + part["score"]
            counts[part["name"]] = counts.get(part["name"], 0) + 1
    out = {"abstraction": level, "parts": {}}
    for name in vocabulary:
        n = counts.get(name, 0)
        out["parts"][name] = {
            "count": n,
            "mean": (sums[name] / n) if n else None,
        }
    return out


def render_pictogram(aggregates: dict, level: int) -> bytes:
    """Fill the bundled per-level pictogram's named regions with colors.

    Count-0 parts get the gray hatch pattern; a numeric legend with the
    actual mean extrema is appended.
    """
    if level not in (1, 2, 3):
        raise UnsupportedLevel(f"pictogram templates exist for levels 1-3, got {level}")
    parts = aggregates["parts"]
    means = [v["mean"] for v in parts.values() if v["mean"] is not None]
    limit = max((abs(m) for m in means), default=0.0)

    ET.register_namespace("", "http://www.w3.org/2000/svg")
    with resources.files("spx.data").joinpath(f"pictogram_level{level}.svg").open() as fh:
        tree = ET.parse(fh)
    root = tree.getroot()
    for elem in root.iter():
        pid = elem.get("id")
        if pid is None or pid not in parts:
            continue
        info = parts[pid]
        if info["count"] == 0 or info["mean"] is None:
            elem.set("fill", "url(#hatch)")
        else:
            r, g, b = diverging_color(info["mean"], limit).tolist()
            elem.set("fill", f"#{r:02x}{g:02x}{b:02x}")
    legend = ET.SubElement(root, "text", {
        "x": "100", "y": "385", "text-anchor": "middle",
        "font-size": "12", "font-family": "sans-serif",
    })
    legend.text = f"score range [{-limit:+.4f}, {limit:+.4f}]"
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# --- convergence harness ----------------------------------------------------


class SyntheticInstance:
    """Value-function instance for the harness; no image pipeline involved."""

    def __init__(self, name: str, spec, part_names: list[str] | None = None,
                 level: int = 0, masking: str = "synthetic"):
        self.name = name
        self.spec = spec
        self.n_parts = spec.n_parts
        self.part_ids = list(range(self.n_parts))
        self.part_names = part_names or [f"part_{i}" for i in range(self.n_parts)]
        self.level = level
        self.masking = masking

    def evaluate(self, P: np.ndarray) -> np.ndarray:
        return np.atleast_1d(self.spec.value(P))


class PipelineInstance:
    """Full image-path instance (mask -> detect -> quality) for the harness."""

    def __init__(self, name: str, image, seg, gt, detector, masking_method,
                 level: int = 0, min_score: float = 0.0):
        from .masking import apply_presence, build_all_layers
        from .quality import match_and_score
        from .segmentation import active_parts, remap_abstraction

        self.name = name
        self.seg = remap_abstraction(seg, level)
        self.image = image
        self.gt = gt
        self.detector = detector
        self.level = level
        self.masking = masking_method.kind.value
        self.min_score = min_score
        parts = active_parts(self.seg)
        self.n_parts = len(parts)
        self.part_ids = [p.id for p, _ in parts]
        self.part_names = [p.name for p, _ in parts]
        self._layers = build_all_layers(image, self.seg, masking_method)
        self._apply = apply_presence
        self._score = match_and_score

    def evaluate(self, P: np.ndarray) -> np.ndarray:
        out = np.empty(P.shape[0])
        for i, pi in enumerate(P):
            perturbed = self._apply(self.image, self.seg, self._layers, pi)
            dets = self.detector.detect(perturbed)
            out[i] = self._score(dets, self.gt, min_score=self.min_score).value
        return out


@dataclass(frozen=True)
class ConvergenceRow:
    method: str
    masking: str
    level: int
    n_samples: int
    part_id: int
    part_name: str
    mean_score: float
    std: float


def _fit_scores(instance, method: str, n: int, seed_key, beta_params) -> np.ndarray:
    M = instance.n_parts
    try:
        if method == "kernelshap":
            Z = attribution.sample_coalitions(M, n, seed_key)
            q = instance.evaluate(Z)
            f1 = float(instance.evaluate(np.ones((1, M)))[0])
            f0 = float(instance.evaluate(np.zeros((1, M)))[0])
            records = attribution.make_kernelshap_records(Z, q)
            return attribution.solve_kernelshap(records, f1=f1, f0=f0).scores
        if method == "beta":
            P = attribution.sample_beta(M, n, beta_params, seed_key)
            q = instance.evaluate(P)
            records = attribution.make_beta_records(P, q)
            return attribution.solve_beta(records).scores
    except Underdetermined:
        # tiny budgets cannot pin down M coefficients; the cell stays in the
        # table as NaN instead of aborting the sweep
        return np.full(M, np.nan)
    raise ConfigError(f"unknown method {method!r}")


def run_convergence(
    instances: list,
    methods: list[str],
    ladder: list[int],
    seeds: list[int],
    beta_params: attribution.BetaParams = attribution.BetaParams(),
    band: str = "instances",
) -> list[ConvergenceRow]:
    """Sweep (method x budget): explain every instance at every budget and
    seed, then record per-part mean and the requested std band.

    ``band="instances"``: std across instances of per-instance scores,
    averaged over seeds (the transparent bands of the efficiency plots).
    ``band="seeds"``: std across seeds of the per-seed instance means.
    """
    if not instances:
        raise EmptyInput("no instances")
    for n in ladder:
        if n < 2 or n & (n - 1):
            raise ConfigError(f"ladder entries must be powers of two >= 2, got {n}")
    if sorted(ladder) != list(ladder) or len(set(ladder)) != len(ladder):
        raise ConfigError("ladder must be strictly increasing")
    if band not in ("instances", "seeds"):
        raise ConfigError(f"band must be 'instances' or 'seeds', got {band!r}")
    names = {tuple(inst.part_names) for inst in instances}
    if len(names) > 1:
        raise MixedAbstraction("instances disagree on the part vocabulary")
    part_names = instances[0].part_names
    part_ids = instances[0].part_ids
    level = instances[0].level
    masking = instances[0].masking

    rows: list[ConvergenceRow] = []
    for method in sorted(methods):
        for n in ladder:
            # scores[seed, instance, part]
            scores = np.empty((len(seeds), len(instances), len(part_names)))
            for si, seed in enumerate(seeds):
                for ii, inst in enumerate(instances):
                    scores[si, ii] = _fit_scores(inst, method, n, [seed, ii], beta_params)
            with warnings.catch_warnings():
                # all-NaN cells (budgets too small for the solver) are fine
                warnings.simplefilter("ignore", RuntimeWarning)
                mean = np.nanmean(scores, axis=(0, 1))
                if band == "instances":
                    std = np.nanmean(np.nanstd(scores, axis=1), axis=0)
                else:
                    std = np.nanstd(np.nanmean(scores, axis=1), axis=0)
            for pi_, (pid, pname) in enumerate(zip(part_ids, part_names)):
                rows.append(ConvergenceRow(
                    method=method, masking=masking, level=level, n_samples=n,
                    part_id=pid, part_name=pname,
                    mean_score=float(mean[pi_]), std=float(std[pi_]),
                ))
    rows.sort(key=lambda r: (r.method, r.masking, r.level, r.n_samples, r.part_id))
    return rows


CSV_COLUMNS = ["method", "masking", "level", "n_samples", "part_id", "part_name",
               "mean_score", "std"]


def write_convergence_csv(rows: list[ConvergenceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([r.method, r.masking, r.level, r.n_samples,
                             r.part_id, r.part_name, repr(r.mean_score), repr(r.std)])


def read_convergence_csv(path: str | Path) -> list[ConvergenceRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ConvergenceRow(
                method=rec["method"], masking=rec["masking"], level=int(rec["level"]),
                n_samples=int(rec["n_samples"]), part_id=int(rec["part_id"]),
                part_name=rec["part_name"], mean_score=float(rec["mean_score"]),
                std=float(rec["std"]),
            ))
    return rows


def select_biggest(annotated: list[tuple[str, float]], top: int) -> list[str]:
    """Names of the ``top`` instances by ground-truth box area, descending;
    ties broken by name."""
    ranked = sorted(annotated, key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranked[:top]]
