"""Relevance-score estimators.

Three routes to per-part attribution scores:

* KernelSHAP: binary coalition sampling weighted by the Shapley kernel
  w(M, s) = (M - 1) / (C(M, s) * s * (M - s)), solved by weighted least
  squares with the two infinite-weight endpoints enforced as hard equality
  constraints (intercept = q at the empty coalition, intercept + sum of
  scores = q at the full coalition).
* Beta sampling: continuous presence values drawn i.i.d. per coordinate
  from Beta(alpha, beta), solved by plain ordinary least squares with a
  free intercept, no Shapley constraints.  Error bars come from 4
  bootstrap regressions on random 75% subsets.
* Exact oracle: full 2^M enumeration of the Shapley formula, for
  validating both estimators on synthetic value functions.
"""

from __future__ import annotations

import functools
import hashlib
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BudgetTooSmall,
    ConfigError,
    DegenerateCoalition,
    SingularSystem,
    TooManyParts,
    Underdetermined,
)
from .detector import SyntheticDetector
from .masking import MaskingMethod, apply_presence, build_all_layers
from .quality import BBox, match_and_score
from .segmentation import SegmentationMap, active_parts, remap_abstraction

RIDGE_LAMBDA = 1e-8
COND_LIMIT = 1e12
BOOTSTRAP_FITS = 4
BOOTSTRAP_FRACTION = 0.75


@dataclass(frozen=True)
class BetaParams:
    alpha: float = 0.2
    beta: float = 0.1

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("Beta concentration coefficients must be positive")


@dataclass(frozen=True)
class SampleRecord:
    pi: np.ndarray       # presence vector, length M
    weight: float        # kernel weight; math.inf marks an endpoint/constraint row
    q: float             # detection quality for this perturbation


@dataclass
class ExplanationResult:
    scores: np.ndarray
    intercept: float
    method: str
    n_samples: int
    seed: int | None = None
    errors: np.ndarray | None = None
    q_full: float | None = None
    q_empty: float | None = None
    regularized: bool = False


@functools.lru_cache(maxsize=None)
def shapley_kernel_weight(M: int, s: int) -> Fraction:
    """Exact Shapley kernel weight (M-1) / (C(M,s) * s * (M-s)) as a Fraction."""
    if M < 2:
        raise DegenerateCoalition(f"kernel weight needs M >= 2, got {M}")
    if s <= 0 or s >= M:
        raise DegenerateCoalition(f"coalition size {s} of {M} is an endpoint, not a weighted row")
    return Fraction(M - 1, math.comb(M, s) * s * (M - s))


def sample_coalitions(M: int, budget: int, seed: int) -> np.ndarray:
    """Binary presence vectors for KernelSHAP, shape (n, M).

    Always contains the all-zeros baseline and all-ones input exactly once.
    If 2^M <= budget the full coalition set is enumerated instead (exact
    mode); otherwise the remaining budget-2 rows draw a size s from the
    normalized kernel weights and then a uniform s-subset.
    """
    if budget < 2:
        raise BudgetTooSmall(f"need budget >= 2, got {budget}")
    if M >= 1 and 2 ** M <= budget:
        combos = np.array(list(itertools.product([0.0, 1.0], repeat=M)))
        return combos
    rng = np.random.default_rng(seed)
    sizes = np.arange(1, M)
    probs = np.array([float(shapley_kernel_weight(M, int(s))) for s in sizes])
    probs = probs / probs.sum()
    drawn = rng.choice(sizes, size=budget - 2, p=probs)
    rows = np.zeros((budget, M))
    rows[1] = 1.0
    for j, s in enumerate(drawn):
        idx = rng.choice(M, size=int(s), replace=False)
        rows[j + 2, idx] = 1.0
    return rows


def make_kernelshap_records(Z: np.ndarray, q: np.ndarray) -> list[SampleRecord]:
    """Attach kernel weights to evaluated coalitions; endpoints get weight inf."""
    M = Z.shape[1]
    records = []
    for row, val in zip(Z, q):
        s = int(row.sum())
        w = math.inf if s in (0, M) else float(shapley_kernel_weight(M, s))
        records.append(SampleRecord(pi=row.copy(), weight=w, q=float(val)))
    return records


def _weighted_constrained_fit(A: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, bool]:
    G = A.T @ (A * w[:, None])
    b = A.T @ (y * w)
    try:
        if np.linalg.cond(G) < COND_LIMIT:
            return np.linalg.solve(G, b), False
    except np.linalg.LinAlgError:
        pass
    G_r = G + RIDGE_LAMBDA * np.eye(G.shape[0])
    try:
        return np.linalg.solve(G_r, b), True
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("weighted system singular even after ridge fallback") from exc


def solve_kernelshap(samples: Sequence[SampleRecord], f1: float, f0: float) -> ExplanationResult:
    """Constrained weighted regression over coalition samples.

    The endpoint rows (infinite kernel weight) are enforced exactly:
    intercept = f0 and intercept + sum(scores) = f1.  The last feature is
    eliminated against the sum constraint, the reduced system is solved by
    weighted normal equations (ridge 1e-8 fallback on ill-conditioning).
    """
    M = len(samples[0].pi) if samples else 0
    if M == 0:
        raise Underdetermined("no samples")
    if M == 1:
        # fully determined by the two constraints
        return ExplanationResult(
            scores=np.array([f1 - f0]), intercept=f0, method="kernelshap",
            n_samples=len(samples), q_full=f1, q_empty=f0,
        )
    finite = [r for r in samples if math.isfinite(r.weight)]
    distinct = {tuple(r.pi.tolist()) for r in finite}
    if len(distinct) < M:
        raise Underdetermined(
            f"need >= {M} distinct weighted coalition samples, got {len(distinct)}"
        )
    Z = np.array([r.pi for r in finite])
    q = np.array([r.q for r in finite])
    w = np.array([r.weight for r in finite])

    # eliminate phi_M via phi_M = (f1 - f0) - sum_{i<M} phi_i
    zM = Z[:, -1]
    A = Z[:, :-1] - zM[:, None]
    y = q - f0 - zM * (f1 - f0)
    x, regularized = _weighted_constrained_fit(A, y, w)
    scores = np.empty(M)
    scores[:-1] = x
    scores[-1] = (f1 - f0) - x.sum()
    return ExplanationResult(
        scores=scores, intercept=f0, method="kernelshap", n_samples=len(samples),
        q_full=f1, q_empty=f0, regularized=regularized,
    )


def sample_beta(M: int, n: int, params: BetaParams = BetaParams(), seed: int = 0) -> np.ndarray:
    """(n, M) presence matrix, each coordinate i.i.d. Beta(alpha, beta)."""
    if n < 1:
        raise BudgetTooSmall(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return rng.beta(params.alpha, params.beta, size=(n, M))


def make_beta_records(P: np.ndarray, q: np.ndarray) -> list[SampleRecord]:
    return [SampleRecord(pi=row.copy(), weight=1.0, q=float(val)) for row, val in zip(P, q)]


def solve_beta(samples: Sequence[SampleRecord]) -> ExplanationResult:
    """Ordinary least squares of q on the presence matrix, free intercept."""
    n = len(samples)
    if n == 0:
        raise Underdetermined("no samples")
    M = len(samples[0].pi)
    if n < M + 1:
        raise Underdetermined(f"need >= {M + 1} samples for {M} parts + intercept, got {n}")
    P = np.array([r.pi for r in samples])
    q = np.array([r.q for r in samples])
    X = np.column_stack([np.ones(n), P])
    coef, _, rank, _ = np.linalg.lstsq(X, q, rcond=None)
    regularized = rank < M + 1
    return ExplanationResult(
        scores=coef[1:], intercept=float(coef[0]), method="beta",
        n_samples=n, regularized=regularized,
    )


def bootstrap_errors(
    samples: Sequence[SampleRecord],
    solver: Callable[[Sequence[SampleRecord]], ExplanationResult],
    seed: int,
    n_fits: int = BOOTSTRAP_FITS,
    fraction: float = BOOTSTRAP_FRACTION,
) -> tuple[np.ndarray, np.ndarray]:
    """Means and population stds of per-part scores across subset refits.

    Each fit uses a fresh uniform without-replacement subset of
    ``fraction`` of the records.
    """
    n = len(samples)
    M = len(samples[0].pi) if n else 0
    subset_size = int(round(fraction * n))
    if subset_size < M + 1:
        raise Underdetermined(
            f"{subset_size}-sample bootstrap subsets cannot fit {M} parts + intercept"
        )
    rng = np.random.default_rng(seed)
    fits = []
    for _ in range(n_fits):
        idx = rng.choice(n, size=subset_size, replace=False)
        fits.append(solver([samples[i] for i in idx]).scores)
    fits = np.array(fits)
    return fits.mean(axis=0), fits.std(axis=0)


def exact_shapley(M: int, value_function: Callable[[np.ndarray], float]) -> np.ndarray:
    """Exact Shapley values by full 2^M coalition enumeration.

    phi_i = sum over S not containing i of |S|!(M-|S|-1)!/M! *
    (v(S u {i}) - v(S)).
    """
    if M > 20:
        raise TooManyParts(f"exact enumeration capped at M = 20, got {M}")
    values = np.empty(2 ** M)
    for mask in range(2 ** M):
        z = np.array([(mask >> i) & 1 for i in range(M)], dtype=np.float64)
        values[mask] = float(value_function(z))
    fact = [math.factorial(k) for k in range(M + 1)]
    phi = np.zeros(M)
    for mask in range(2 ** M):
        s = bin(mask).count("1")
        coeff = fact[s] * fact[M - s - 1] / fact[M]
        for i in range(M):
            if not (mask >> i) & 1:
                phi[i] += coeff * (values[mask | (1 << i)] - values[mask])
    return phi


# --- instance-level orchestration ------------------------------------------


@dataclass
class ExplainConfig:
    method: str = "kernelshap"           # "kernelshap" | "beta"
    masking: MaskingMethod | None = None
    abstraction: int = 0
    n_samples: int = 64
    seed: int = 0
    beta_params: BetaParams = field(default_factory=BetaParams)
    bootstrap: bool = True
    bootstrap_fits: int = BOOTSTRAP_FITS
    bootstrap_fraction: float = BOOTSTRAP_FRACTION
    min_score: float = 0.0
    resample_noise: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.method not in ("kernelshap", "beta"):
            raise ConfigError(f"unknown method {self.method!r}")


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _evaluate_samples(P, evaluate_one, workers):
    """Evaluate rows of P in sample-index order; results are independent of
    the worker count because every row carries its own index."""
    indexed = list(enumerate(P))
    if workers <= 1:
        return np.array([evaluate_one(idx, row) for idx, row in indexed])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda item: evaluate_one(*item), indexed)))


def explain_instance(
    image: np.ndarray,
    seg: SegmentationMap,
    gt: BBox,
    detector,
    config: ExplainConfig,
) -> tuple[ExplanationResult, dict]:
    """Full pipeline for one instance: layers -> samples -> blend -> detect
    -> quality -> regression (+ bootstrap).  Returns the result and the
    report dictionary (the JSON artifact schema).
    """
    seg = remap_abstraction(seg, config.abstraction)
    parts = active_parts(seg)
    M = len(parts)
    if M == 0:
        raise Underdetermined("no active parts in the segmentation map")
    if config.masking is None:
        raise ConfigError("explain_instance needs a masking method")

    side_channel = isinstance(detector, SyntheticDetector)
    layers = None if side_channel else build_all_layers(image, seg, config.masking)
    can_resample = config.resample_noise and config.masking.seed is not None

    def evaluate_one(idx: int, pi: np.ndarray) -> float:
        if side_channel:
            dets = detector.detect(None, presence=pi)
        else:
            if can_resample:
                # per-sample layer seed derived from the sample index so
                # results do not depend on evaluation order
                per_sample = MaskingMethod(config.masking.kind, config.masking.seed + 1 + idx)
                sample_layers = build_all_layers(image, seg, per_sample)
            else:
                sample_layers = layers
            perturbed = apply_presence(image, seg, sample_layers, pi)
            dets = detector.detect(perturbed)
        return match_and_score(dets, gt, min_score=config.min_score).value

    q_full = evaluate_one(-1, np.ones(M))
    q_empty = evaluate_one(-2, np.zeros(M))

    if config.method == "kernelshap":
        Z = sample_coalitions(M, config.n_samples, config.seed)
        q = _evaluate_samples(Z, evaluate_one, config.workers)
        records = make_kernelshap_records(Z, q)
        result = solve_kernelshap(records, f1=q_full, f0=q_empty)
        solver = lambda subset: solve_kernelshap(subset, f1=q_full, f0=q_empty)
    else:
        P = sample_beta(M, config.n_samples, config.beta_params, config.seed)
        q = _evaluate_samples(P, evaluate_one, config.workers)
        records = make_beta_records(P, q)
        result = solve_beta(records)
        solver = solve_beta

    if config.bootstrap:
        means, stds = bootstrap_errors(
            records, solver, seed=config.seed,
            n_fits=config.bootstrap_fits, fraction=config.bootstrap_fraction,
        )
        result.scores = means
        result.errors = stds

    result.seed = config.seed
    result.q_full = q_full
    result.q_empty = q_empty
    result.n_samples = config.n_samples

    hash_payload = {
        "method": config.method,
        "masking": config.masking.kind.value,
        "masking_seed": config.masking.seed,
        "abstraction": config.abstraction,
        "n_samples": config.n_samples,
        "seed": config.seed,
        "beta": [config.beta_params.alpha, config.beta_params.beta],
        "bootstrap": [config.bootstrap, config.bootstrap_fits, config.bootstrap_fraction],
        "min_score": config.min_score,
        "resample_noise": config.resample_noise,
    }
    report = {
        "method": config.method,
        "abstraction": config.abstraction,
        "masking": config.masking.kind.value,
        "n_samples": config.n_samples,
        "seed": config.seed,
        "parts": [
            {
                "id": part.id,
                "name": part.name,
                "score": float(result.scores[i]),
                "error": None if result.errors is None else float(result.errors[i]),
            }
            for i, (part, _) in enumerate(parts)
        ],
        "intercept": float(result.intercept),
        "q_full": float(q_full),
        "q_empty": float(q_empty),
        "config_hash": config_hash(hash_payload),
    }
    return result, report
