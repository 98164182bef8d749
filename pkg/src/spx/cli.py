"""Command-line entry point.

Subcommands: explain (one instance -> report + maps), aggregate (reports
-> pictogram), convergence (sample-efficiency sweep), oracle (exact
Shapley values of a synthetic detector), fixtures generate.

Errors are emitted as single-line JSON on stderr with stable codes; exit
codes: 1 = config, 2 = solver/precondition, 3 = detector/protocol,
4 = I/O.
"""

from __future__ import annotations

import glob as globmod
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image as PILImage

from . import attribution, fixtures, reporting
from .detector import (
    ExternalDetector,
    PixelMeanDetector,
    SyntheticDetector,
    SyntheticDetectorSpec,
)
from .errors import ConfigError, EmptyInput, SpxError, TooManyParts
from .masking import MaskKind, MaskingMethod
from .quality import BBox
from .segmentation import read_segmentation


def _parse_detector(spec: str, gt: BBox | None):
    if not spec.startswith("synthetic:"):
        return ExternalDetector(spec)
    try:
        payload = json.loads(spec[len("synthetic:"):])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"synthetic detector spec is not valid JSON: {exc}") from exc
    form = payload.get("form")
    bbox = BBox(*payload["gt_bbox"]) if "gt_bbox" in payload else gt
    if bbox is None:
        raise ConfigError("synthetic detector needs a gt_bbox (inline or via --gt)")
    if form == "linear":
        return SyntheticDetector(SyntheticDetectorSpec(
            gt_bbox=bbox, weights=tuple(payload["weights"]),
            bias=float(payload.get("bias", 0.0)),
        ))
    if form == "product":
        terms = tuple((tuple(s), float(c)) for s, c in payload["terms"])
        return SyntheticDetector(SyntheticDetectorSpec(
            gt_bbox=bbox, product_terms=terms, bias=float(payload.get("bias", 0.0)),
        ))
    if form == "pixelmean":
        return PixelMeanDetector(bbox)
    raise ConfigError(f"unknown synthetic detector form {form!r}")


def _make_masking(name: str, seed: int) -> MaskingMethod:
    kind = {m.value: m for m in MaskKind}.get(name)
    if kind is None:
        raise ConfigError(f"unknown masking method {name!r}")
    return MaskingMethod(kind, None if kind is MaskKind.INPAINT else seed)


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
def cli():
    logging.basicConfig(level=os.environ.get("SPX_LOG", "WARNING").upper())


@cli.command("explain")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--segmentation", "seg_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--detector", "detector_spec", required=True)
@click.option("--method", type=click.Choice(["kernelshap", "beta"]), default="kernelshap")
@click.option("--masking", type=click.Choice(["noise", "neighbor", "inpaint"]), default="noise")
@click.option("--abstraction", type=click.IntRange(0, 3), default=0)
@click.option("--samples", type=int, default=64)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--workers", type=int, default=1)
@click.option("--min-score", type=float, default=0.0)
@click.option("--resample-noise", is_flag=True, default=False)
@click.option("--bootstrap-fits", type=int, default=attribution.BOOTSTRAP_FITS)
@click.option("--bootstrap-fraction", type=float, default=attribution.BOOTSTRAP_FRACTION)
def cmd_explain(image_path, seg_path, gt_path, detector_spec, method, masking,
                abstraction, samples, seed, out_dir, workers, min_score,
                resample_noise, bootstrap_fits, bootstrap_fraction):
    """Explain one instance: report JSON, relevance map PNG, error map PNG."""
    image = np.asarray(PILImage.open(image_path).convert("RGB"))
    seg = read_segmentation(seg_path)
    gt = fixtures.read_gt(gt_path)
    detector = _parse_detector(detector_spec, gt)
    config = attribution.ExplainConfig(
        method=method,
        masking=_make_masking(masking, seed),
        abstraction=abstraction,
        n_samples=samples,
        seed=seed,
        bootstrap=True,
        bootstrap_fits=bootstrap_fits,
        bootstrap_fraction=bootstrap_fraction,
        min_score=min_score,
        resample_noise=resample_noise,
        workers=workers,
    )
    try:
        _, report = attribution.explain_instance(image, seg, gt, detector, config)
    finally:
        detector.close()

    from .segmentation import remap_abstraction
    seg_view = remap_abstraction(seg, abstraction)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report)
    (out / "relevance_map.png").write_bytes(
        reporting.render_relevance_map(image, seg_view, report).png)
    (out / "error_map.png").write_bytes(
        reporting.render_error_map(image, seg_view, report).png)
    click.echo(str(out / "report.json"))


@cli.command("aggregate")
@click.option("--reports", "report_glob", required=True,
              help="Glob over report JSON files.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_aggregate(report_glob, out_dir):
    """Average per-part scores across reports; write aggregate JSON + pictogram SVG."""
    paths = sorted(globmod.glob(report_glob))
    if not paths:
        raise EmptyInput(f"no reports match {report_glob!r}")
    reports = []
    for path in paths:
        with open(path) as fh:
            reports.append(json.load(fh))
    agg = reporting.aggregate_global(reports)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "aggregate.json", agg)
    svg = reporting.render_pictogram(agg, agg["abstraction"])
    (out / "pictogram.svg").write_bytes(svg)
    click.echo(str(out / "aggregate.json"))


@cli.command("convergence")
@click.option("--parts", type=int, default=14)
@click.option("--instances", "n_instances", type=int, default=20)
@click.option("--ladder", default=",".join(str(n) for n in reporting.DEFAULT_LADDER),
              help="Comma-separated strictly increasing powers of two.")
@click.option("--seeds", "n_seeds", type=int, default=20)
@click.option("--seed", "base_seed", type=int, default=0)
@click.option("--band", type=click.Choice(["instances", "seeds"]), default="instances")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_convergence(parts, n_instances, ladder, n_seeds, base_seed, band, out_dir):
    """Sample-efficiency sweep on the synthetic interaction fixture."""
    try:
        budgets = [int(tok) for tok in ladder.split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad ladder {ladder!r}") from exc
    instances = [
        reporting.SyntheticInstance(
            f"inst{i:03d}", fixtures.interaction_value_spec(M=parts, seed=base_seed * 1000 + i))
        for i in range(n_instances)
    ]
    seeds = [base_seed + s for s in range(n_seeds)]
    rows = reporting.run_convergence(
        instances, ["beta", "kernelshap"], budgets, seeds, band=band)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reporting.write_convergence_csv(rows, out / "convergence.csv")

    summary: dict = {"band": band, "cells": []}
    for method in ("beta", "kernelshap"):
        bands_by_n = []
        for n in budgets:
            cell = [r.std for r in rows if r.method == method and r.n_samples == n]
            bands_by_n.append(float(np.mean(cell)))
            summary["cells"].append({"method": method, "n_samples": n,
                                     "mean_band": float(np.mean(cell))})
        if method == "beta":
            summary["beta_band_monotone_nonincreasing"] = all(
                b2 <= b1 + 1e-12 for b1, b2 in zip(bands_by_n, bands_by_n[1:]))
    _write_json(out / "summary.json", summary)
    click.echo(str(out / "convergence.csv"))


@cli.command("oracle")
@click.option("--detector", "detector_spec", required=True,
              help='Synthetic spec, e.g. \'synthetic:{"form":"linear",...}\'.')
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_oracle(detector_spec, out_path):
    """Exact Shapley values of a synthetic detector's value function."""
    if not detector_spec.startswith("synthetic:"):
        raise ConfigError("oracle only accepts synthetic detector specs")
    handle = _parse_detector(detector_spec, gt=fixtures.GT_BBOX)
    if not isinstance(handle, SyntheticDetector):
        raise ConfigError("oracle needs a linear or product synthetic spec")
    spec = handle.spec
    M = spec.n_parts
    if M > 20:
        raise TooManyParts(f"exact oracle capped at M = 20, got {M}")
    phi = attribution.exact_shapley(M, lambda z: spec.value(z))
    payload = {
        "n_parts": M,
        "scores": [float(v) for v in phi],
        "v_full": float(spec.value(np.ones(M))),
        "v_empty": float(spec.value(np.zeros(M))),
    }
    if out_path:
        _write_json(Path(out_path), payload)
        click.echo(out_path)
    else:
        click.echo(json.dumps(payload, sort_keys=True))


@cli.group("fixtures")
def cmd_fixtures():
    """Synthetic instance generation."""


@cmd_fixtures.command("generate")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--count", type=int, default=1)
@click.option("--seed", type=int, default=0)
def cmd_fixtures_generate(out_dir, count, seed):
    """Write synthetic pedestrian instances (image, segmentation, gt box)."""
    index = []
    for i in range(count):
        entry = fixtures.write_instance(out_dir, f"instance{i:03d}", seed=seed + i)
        index.append(entry)
    _write_json(Path(out_dir) / "index.json", index)
    click.echo(str(Path(out_dir) / "index.json"))


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except SpxError as exc:
        sys.stderr.write(json.dumps({"code": exc.code, "message": str(exc)}) + "\n")
        return exc.exit_code
    except click.ClickException as exc:
        sys.stderr.write(json.dumps({"code": "config", "message": exc.format_message()}) + "\n")
        return 1
    except click.Abort:
        return 1
    except (OSError, FileNotFoundError) as exc:
        sys.stderr.write(json.dumps({"code": "io_failure", "message": str(exc)}) + "\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
