"""Registration and fusion of misaligned infrared-visible image pairs.

Deformation fields are optimized directly per pair over coarse control
grids with self-supervised consistency between a plain and a
patch-scrambled branch; fusion and a six-metric evaluation suite
complete the pipeline.
"""

from .fileio import load_field, load_image, save_field, save_image
from .fuse import FeatureDecomposition, FuseConfig, decompose, fuse, fuse_max, fuse_optimize
from .harness import MisalignmentSpec, RunConfig, parse_config, sweep, synth_misalign
from .image import (
    DisplacementField,
    EdgeMap,
    Image,
    gaussian_blur,
    resample_scale,
    sobel,
    warp,
)
from .losses import (
    EffectiveEdgeSet,
    LossConfig,
    branch_consistency_loss,
    correlation,
    edge_match_loss,
    effective_edges,
    feature_correlation_loss,
    fusion_loss,
    inverse_consistency_loss,
    reconstruction_loss,
    residual_preservation_loss,
    smoothness_loss,
    ssim,
)
from .metrics import MetricReport, ag, ei, evaluate_pair, mg, qabf, sf, viff
from .register import (
    ControlGrid,
    RegisterConfig,
    RegistrationResult,
    ablation_switches,
    densify,
    fd_gradient,
    intra_objective,
    register_pair,
)
from .scramble import (
    PatchOp,
    TransformTranscript,
    sample_transcript,
    scramble_field,
    scramble_image,
    unscramble_field,
    unscramble_image,
)

__version__ = "0.1.0"
