"""spx: per-superpixel relevance scores for black-box object detectors.

KernelSHAP and continuous Beta-sampling estimators over body-part
superpixels, with masking-based perturbation, detection-quality scoring,
bootstrap error bars, an exact Shapley oracle, and a sample-efficiency
harness.
"""

from .attribution import (
    BetaParams,
    ExplainConfig,
    ExplanationResult,
    SampleRecord,
    bootstrap_errors,
    exact_shapley,
    explain_instance,
    sample_beta,
    sample_coalitions,
    shapley_kernel_weight,
    solve_beta,
    solve_kernelshap,
)
from .detector import (
    ExternalDetector,
    PixelMeanDetector,
    SyntheticDetector,
    SyntheticDetectorSpec,
    linear_spec,
    product_spec,
)
from .masking import MaskKind, MaskingMethod, apply_presence, build_all_layers, build_mask_layer, fit_noise_model
from .quality import BBox, Detection, QualityScore, dice, match_and_score
from .segmentation import (
    AbstractionLevel,
    BODYPIX_PARTS,
    LEVEL_VOCABULARY,
    PartLabel,
    SegmentationMap,
    active_parts,
    adjacency,
    load_segmentation,
    read_segmentation,
    remap_abstraction,
    write_segmentation,
)

__version__ = "0.1.0"
