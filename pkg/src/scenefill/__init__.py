"""Self-supervised image completion: region-selective forward diffusion,
closed-form single-step denoising, and patch-adversarial refinement."""

from .diffusion import (
    BetaSchedule,
    forward_diffuse,
    linear_beta_schedule,
    reconstruct_single_step,
    sample_standard_noise,
)
from .image_core import (
    BinaryMask,
    ImageTensor,
    NoiseTensor,
    compose,
    denormalize,
    mask_ratio,
    normalize,
)
from .masks import MaskConfig, punch_holes, sample_mask, sample_polygon

__version__ = "0.1.0"

__all__ = [
    "BetaSchedule",
    "BinaryMask",
    "ImageTensor",
    "MaskConfig",
    "NoiseTensor",
    "compose",
    "denormalize",
    "forward_diffuse",
    "linear_beta_schedule",
    "mask_ratio",
    "normalize",
    "punch_holes",
    "reconstruct_single_step",
    "sample_mask",
    "sample_polygon",
    "sample_standard_noise",
    "__version__",
]
