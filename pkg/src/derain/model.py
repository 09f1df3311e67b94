"""Prior-guided multi-stage deraining network.

Each stage lifts the current residue prior into feature space, fuses it
with the image feature through a shared sigmoid similarity gate, runs a
wavelet multi-level backbone on the fused feature, and emits an RGB
prediction. The prior is re-extracted from every intermediate prediction
so later stages are guided by a progressively cleaner structure map, and
each stage past the first receives a channel-reduced concatenation of
all earlier stage features.
"""

import os
from dataclasses import asdict, dataclass, fields

import torch
import torch.nn as nn

from .blocks import BlockConfig, ResidualGroup, conv2d
from .errors import CheckpointError, ConfigError, ShapeError
from .rcp import residue_channel
from .wavelet import dwt2, iwt2

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    The defaults (60 base channels, SE reduction 12, three stages of
    three levels) are calibrated so the trainable parameter count lands
    near the 3M budget; see the README note on calibration.
    """

    base_channels: int = 60
    num_stages: int = 3
    num_levels: int = 3
    se_reduction: int = 12
    blocks_per_group: int = 3
    gated_fusion: bool = True  # False: plain concat of image/prior features
    ensemble: bool = True      # False: each stage sees only the previous feature
    rcp_update: bool = True    # False: every stage reuses the input image's prior

    def __post_init__(self):
        if self.num_stages < 1:
            raise ConfigError(f"num_stages must be >= 1, got {self.num_stages}")
        if self.num_levels < 1:
            raise ConfigError(f"num_levels must be >= 1, got {self.num_levels}")
        self.block_config()  # validates channels / se_reduction / blocks_per_group

    @property
    def pad_multiple(self):
        """Spatial divisibility the wavelet pyramid requires of its input."""
        return 2 ** (self.num_levels - 1)

    def block_config(self):
        return BlockConfig(self.base_channels, self.se_reduction, self.blocks_per_group)


@dataclass
class StageOutputs:
    """Per-stage RGB predictions, backbone features, and the priors fed in."""

    predictions: list
    features: list
    priors: list

    @property
    def final(self):
        return self.predictions[-1]


class PriorEncoder(nn.Module):
    """Lift the 1-channel residue prior to feature space: conv then a group."""

    def __init__(self, cfg):
        super().__init__()
        self.head = conv2d(1, cfg.base_channels, 3)
        self.body = ResidualGroup(cfg.block_config())

    def forward(self, prior):
        if prior.dim() != 4 or prior.shape[1] != 1:
            raise ShapeError(f"expected a (B, 1, H, W) prior, got {tuple(prior.shape)}")
        return self.body(self.head(prior))


class GatedFusion(nn.Module):
    """Cross-gate image and prior features with a shared similarity map.

    Both streams are mapped by a 3x3 conv, their product squashed to a
    sigmoid gate, and each stream is re-injected residually before the
    channel concat, so mutually supporting structure is amplified in both.
    """

    def __init__(self, channels):
        super().__init__()
        self.map_img = conv2d(channels, channels, 3)
        self.map_prior = conv2d(channels, channels, 3)

    def forward(self, f_img, f_prior):
        if f_img.shape != f_prior.shape:
            raise ShapeError(
                f"feature shapes differ: {tuple(f_img.shape)} vs {tuple(f_prior.shape)}"
            )
        s = torch.sigmoid(self.map_img(f_img) * self.map_prior(f_prior))
        return torch.cat((f_img + s * f_img, f_prior + s * f_prior), dim=1)


class WaveletPyramid(nn.Module):
    """Multi-level backbone: Haar-split down, per-level groups, merge up.

    Level i is produced by a 1x1 conv on the Haar subbands of level i-1;
    each level runs one residual group; coarse levels are upsampled by
    the inverse transform and added back into the finer level.
    """

    def __init__(self, cfg):
        super().__init__()
        c = cfg.base_channels
        self.levels = cfg.num_levels
        block = cfg.block_config()
        self.down = nn.ModuleList(nn.Conv2d(4 * c, c, 1) for _ in range(self.levels - 1))
        self.groups = nn.ModuleList(ResidualGroup(block) for _ in range(self.levels))
        self.up = nn.ModuleList(nn.Conv2d(c, 4 * c, 1) for _ in range(self.levels - 1))

    def forward(self, x):
        m = 2 ** (self.levels - 1)
        if x.shape[2] % m or x.shape[3] % m:
            raise ShapeError(
                f"spatial dims {tuple(x.shape[2:])} must divide by {m} for {self.levels} levels"
            )
        feats = [x]
        for i in range(1, self.levels):
            feats.append(self.down[i - 1](dwt2(feats[-1])))
        outs = [self.groups[i](feats[i]) for i in range(self.levels)]
        for i in range(self.levels - 1, 0, -1):
            outs[i - 1] = outs[i - 1] + iwt2(self.up[i - 1](outs[i]))
        return outs[0]


class DerainStage(nn.Module):
    """One refinement stage: prior encoding, fusion, backbone, RGB head."""

    def __init__(self, cfg):
        super().__init__()
        c = cfg.base_channels
        self.prior_encoder = PriorEncoder(cfg)
        self.fusion = GatedFusion(c) if cfg.gated_fusion else None
        self.reduce = nn.Conv2d(2 * c, c, 1)
        self.pyramid = WaveletPyramid(cfg)
        self.to_rgb = conv2d(c, 3, 3)

    def forward(self, feat, prior):
        f_prior = self.prior_encoder(prior)
        if self.fusion is not None:
            fused = self.fusion(feat, f_prior)
        else:
            fused = torch.cat((feat, f_prior), dim=1)
        f = self.pyramid(self.reduce(fused))
        return f, self.to_rgb(f)


class DerainNet(nn.Module):
    """The full multi-stage network; forward returns every stage's output.

    Weights are read-only during inference and may be shared by
    concurrent readers; training must be the sole writer.
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config if config is not None else ModelConfig()
        c = self.config.base_channels
        self.shallow = conv2d(3, c, 3)
        self.stages = nn.ModuleList(DerainStage(self.config) for _ in range(self.config.num_stages))
        if self.config.ensemble and self.config.num_stages > 1:
            self.merge = nn.ModuleList(
                nn.Conv2d(n * c, c, 1) for n in range(1, self.config.num_stages)
            )
        else:
            self.merge = None

    def forward(self, rainy):
        if rainy.dim() != 4 or rainy.shape[1] != 3:
            raise ShapeError(f"expected a (B, 3, H, W) input, got {tuple(rainy.shape)}")
        m = self.config.pad_multiple
        if rainy.shape[2] % m or rainy.shape[3] % m:
            raise ShapeError(
                f"spatial dims {tuple(rainy.shape[2:])} must divide by {m}; "
                "pad the input first (see data.pad_to_multiple)"
            )
        feat = self.shallow(rainy)
        prior = residue_channel(rainy)
        predictions, features, priors = [], [], []
        for idx, stage in enumerate(self.stages):
            if idx > 0:
                if self.merge is not None:
                    feat = self.merge[idx - 1](torch.cat(features, dim=1))
                else:
                    feat = features[-1]
            f, pred = stage(feat, prior)
            predictions.append(pred)
            features.append(f)
            priors.append(prior)
            if self.config.rcp_update and idx + 1 < len(self.stages):
                # the loss consumes the raw prediction; only the prior
                # extraction sees the clamped copy
                prior = residue_channel(pred.clamp(0.0, 1.0))
        return StageOutputs(predictions, features, priors)


def param_count(config):
    """Exact number of trainable scalars for a given configuration."""
    return sum(p.numel() for p in DerainNet(config).parameters() if p.requires_grad)


def parameter_breakdown(model):
    """Per-top-level-module parameter counts, in definition order."""
    counts = {}
    for name, param in model.named_parameters():
        head = name.split(".")[0]
        if head in ("stages", "merge"):
            head = ".".join(name.split(".")[:2])
        counts[head] = counts.get(head, 0) + param.numel()
    return counts


def save_checkpoint(path, model, optimizer=None, step=0, extra=None):
    """Write a versioned checkpoint atomically (temp file then rename)."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": int(step),
        "extra": dict(extra) if extra else {},
    }
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Read and validate a checkpoint payload."""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a recognized checkpoint file")
    if payload["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {payload['format_version']} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    return payload


def config_from_checkpoint(payload):
    known = {f.name for f in fields(ModelConfig)}
    stored = payload.get("model_config", {})
    unknown = set(stored) - known
    if unknown:
        raise CheckpointError(f"checkpoint config has unknown fields: {sorted(unknown)}")
    try:
        return ModelConfig(**stored)
    except (TypeError, ConfigError) as exc:
        raise CheckpointError(f"invalid checkpoint config: {exc}") from exc


def model_from_checkpoint(payload):
    """Instantiate a model with the checkpoint's config and weights."""
    config = config_from_checkpoint(payload)
    model = DerainNet(config)
    try:
        model.load_state_dict(payload["model_state"])
    except (KeyError, RuntimeError) as exc:
        raise CheckpointError(f"checkpoint weights incompatible with config: {exc}") from exc
    return model
