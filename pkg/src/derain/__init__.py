"""Structure-preserving single-image deraining with residue-prior guidance.

A multi-stage convolutional network built on a Haar-wavelet pyramid
backbone, guided by the residue channel prior (per-pixel max minus min
over RGB) that is re-extracted from each intermediate prediction, plus
the data, metric, training and CLI tooling around it.
"""

from .blocks import BlockConfig, ResidualGroup, SEGate, SEResBlock
from .data import (
    RainPair,
    SynthRainParams,
    load_image,
    load_pairs,
    pad_to_multiple,
    random_patch,
    save_image,
    synth_rain,
    unpad,
)
from .metrics import MetricReport, luminance, psnr, ssim
from .model import (
    DerainNet,
    ModelConfig,
    StageOutputs,
    load_checkpoint,
    model_from_checkpoint,
    param_count,
    parameter_breakdown,
    save_checkpoint,
)
from .rcp import normalize_chromaticity, residue_channel
from .trainer import (
    TrainConfig,
    TrainResult,
    apply_ablations,
    evaluate,
    evaluate_checkpoint,
    stage_loss,
    train,
)
from .wavelet import dwt2, iwt2

__version__ = "0.1.0"

__all__ = [
    "BlockConfig",
    "DerainNet",
    "MetricReport",
    "ModelConfig",
    "RainPair",
    "ResidualGroup",
    "SEGate",
    "SEResBlock",
    "StageOutputs",
    "SynthRainParams",
    "TrainConfig",
    "TrainResult",
    "apply_ablations",
    "dwt2",
    "evaluate",
    "evaluate_checkpoint",
    "iwt2",
    "load_checkpoint",
    "load_image",
    "load_pairs",
    "luminance",
    "model_from_checkpoint",
    "normalize_chromaticity",
    "pad_to_multiple",
    "param_count",
    "parameter_breakdown",
    "psnr",
    "random_patch",
    "residue_channel",
    "save_checkpoint",
    "save_image",
    "ssim",
    "stage_loss",
    "synth_rain",
    "train",
    "unpad",
]
