"""Multi-output L2 training loop, checkpointing, and evaluation sweeps.

The loop is deterministic under a fixed (seed, config, dataset): batch
and patch sampling run on one explicit rng whose state is saved into
every checkpoint, so an interrupted run resumes bit-for-bit. The
optimizer is the sole writer of model weights; evaluation is read-only.
"""

import logging
import math
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import torch

from .data import pad_to_multiple, random_patch, unpad
from .errors import CheckpointError, ConfigError, ShapeError, TrainingDiverged
from .metrics import MetricReport, luminance, psnr, ssim
from .model import (
    DerainNet,
    ModelConfig,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)

log = logging.getLogger(__name__)

LOG_HEADER = "step\tloss\tlr\twall_time"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings plus the architecture ablation switches.

    ``epochs`` counts passes of ``ceil(len(dataset)/batch_size)`` steps;
    ``max_steps`` overrides it when positive. The ablation fields are
    applied on top of the model config when not None.
    """

    lr: float = 5e-4
    batch_size: int = 16
    patch_size: int = 128
    epochs: int = 0
    max_steps: int = 0
    seed: int = 0
    flip: bool = True
    grad_clip: float | None = 10.0
    checkpoint_every: int = 0  # 0: only the final checkpoint
    eval_every: int = 0        # 0: no mid-training eval sweep
    deterministic: bool = True
    gated_fusion: bool | None = None
    ensemble: bool | None = None
    rcp_update: bool | None = None
    num_stages: int | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.epochs < 0 or self.max_steps < 0:
            raise ConfigError("epochs and max_steps must be non-negative")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive or None")


@dataclass
class LogEntry:
    step: int
    loss: float
    lr: float
    wall_time: float


@dataclass
class TrainResult:
    model: DerainNet
    model_config: ModelConfig
    log: list
    evals: list
    final_checkpoint: Path | None
    out_dir: Path | None

    @property
    def losses(self):
        return [entry.loss for entry in self.log]


def apply_ablations(model_config, train_config):
    """Overlay the train config's ablation switches onto the model config."""
    overrides = {}
    for name in ("gated_fusion", "ensemble", "rcp_update", "num_stages"):
        value = getattr(train_config, name)
        if value is not None:
            overrides[name] = value
    return replace(model_config, **overrides) if overrides else model_config


def stage_loss(outputs, target):
    """Sum over stages of the per-stage mean squared error.

    The mean inside each stage keeps the scale independent of batch and
    patch size; stage contributions are summed unweighted.
    """
    total = None
    for pred in outputs.predictions:
        if pred.shape != target.shape:
            raise ShapeError(
                f"prediction {tuple(pred.shape)} does not match target {tuple(target.shape)}"
            )
        term = torch.mean((pred - target) ** 2)
        total = term if total is None else total + term
    return total


def _total_steps(train_config, n_pairs):
    if train_config.max_steps > 0:
        return train_config.max_steps
    if train_config.epochs > 0:
        return train_config.epochs * max(1, math.ceil(n_pairs / train_config.batch_size))
    raise ConfigError("set epochs or max_steps to a positive value")


def _sample_batch(pairs, train_config, sampler):
    indices = sampler.integers(0, len(pairs), size=train_config.batch_size)
    keys, rainy, clean = [], [], []
    for i in indices:
        patch = random_patch(pairs[int(i)], train_config.patch_size, sampler, flip=train_config.flip)
        keys.append(patch.key)
        rainy.append(patch.rainy)
        clean.append(patch.clean)
    return keys, torch.cat(rainy, dim=0), torch.cat(clean, dim=0)


def _rng_extra(sampler, step):
    return {
        "sampler_state": sampler.bit_generator.state,
        "torch_rng_state": torch.get_rng_state(),
        "step": step,
    }


def train(model_config, train_config, pairs, out_dir=None, eval_pairs=None, resume_from=None):
    """Run the optimization loop; returns the model, log, and checkpoints.

    A non-finite loss aborts with the offending step and batch keys.
    Checkpoints are written atomically and embed the sampler state, so
    resuming reproduces the uninterrupted trajectory exactly.
    """
    if not pairs:
        raise ConfigError("dataset is empty")
    model_config = apply_ablations(model_config, train_config)
    if train_config.patch_size % model_config.pad_multiple:
        raise ConfigError(
            f"patch_size {train_config.patch_size} must divide by "
            f"{model_config.pad_multiple} for {model_config.num_levels} levels"
        )
    total_steps = _total_steps(train_config, len(pairs))

    if train_config.deterministic:
        torch.manual_seed(train_config.seed)
    model = DerainNet(model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.lr)
    sampler = np.random.default_rng(train_config.seed)
    start_step = 0

    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        resumed = model_from_checkpoint(payload)
        if resumed.config != model_config:
            raise CheckpointError(
                f"checkpoint config {resumed.config} does not match requested {model_config}"
            )
        model = resumed
        optimizer = torch.optim.Adam(model.parameters(), lr=train_config.lr)
        if payload.get("optimizer_state") is not None:
            optimizer.load_state_dict(payload["optimizer_state"])
        extra = payload.get("extra", {})
        if "sampler_state" in extra:
            sampler.bit_generator.state = extra["sampler_state"]
        if "torch_rng_state" in extra:
            torch.set_rng_state(extra["torch_rng_state"])
        start_step = payload.get("step", 0)

    log_file = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "train_log.tsv"
        resuming = resume_from is not None and log_path.exists()
        log_file = open(log_path, "a" if resuming else "w", encoding="utf-8")
        if not resuming:
            log_file.write(LOG_HEADER + "\n")

    entries = []
    evals = []
    started = time.time()
    model.train()
    try:
        for step in range(start_step + 1, total_steps + 1):
            keys, rainy, clean = _sample_batch(pairs, train_config, sampler)
            outputs = model(rainy)
            loss = stage_loss(outputs, clean)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {float(loss)} at step {step}; batch keys: {keys}"
                )
            optimizer.zero_grad()
            loss.backward()
            if train_config.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_config.grad_clip)
            optimizer.step()

            entry = LogEntry(step, float(loss.detach()), train_config.lr, time.time() - started)
            entries.append(entry)
            if log_file is not None:
                log_file.write(
                    f"{entry.step}\t{entry.loss!r}\t{entry.lr!r}\t{entry.wall_time:.3f}\n"
                )
                log_file.flush()

            if (
                train_config.checkpoint_every
                and out_dir is not None
                and step % train_config.checkpoint_every == 0
            ):
                save_checkpoint(
                    out_dir / f"ckpt_{step:06d}.pt",
                    model,
                    optimizer=optimizer,
                    step=step,
                    extra=_rng_extra(sampler, step),
                )
            if train_config.eval_every and step % train_config.eval_every == 0:
                report = evaluate(model, eval_pairs if eval_pairs else pairs)
                model.train()
                evals.append((step, report.mean_psnr, report.mean_ssim))
                log.info("step %d: eval psnr %.3f ssim %.4f", step, report.mean_psnr, report.mean_ssim)
    finally:
        if log_file is not None:
            log_file.close()

    final_path = None
    if out_dir is not None:
        final_path = Path(
            save_checkpoint(
                out_dir / "final.pt",
                model,
                optimizer=optimizer,
                step=total_steps,
                extra=_rng_extra(sampler, total_steps),
            )
        )
    return TrainResult(
        model=model,
        model_config=model_config,
        log=entries,
        evals=evals,
        final_checkpoint=final_path,
        out_dir=out_dir,
    )


def evaluate(model, pairs, stage=-1, channel="y"):
    """Score one stage's predictions against ground truth, image by image.

    Inputs are padded for the pyramid, predictions unpadded and clamped
    to [0, 1]. ``channel='y'`` (default) scores the BT.601 luminance;
    ``channel='rgb'`` scores all channels (SSIM averaged per channel).
    """
    if channel not in ("y", "rgb"):
        raise ConfigError(f"channel must be 'y' or 'rgb', got {channel!r}")
    was_training = model.training
    model.eval()
    per_image = {}
    with torch.no_grad():
        for pair in pairs:
            padded, size = pad_to_multiple(pair.rainy, model.config.pad_multiple)
            outputs = model(padded)
            pred = unpad(outputs.predictions[stage], size).clamp(0.0, 1.0)
            if channel == "y":
                pred_y = luminance(pred)
                clean_y = luminance(pair.clean)
                pair_psnr = psnr(pred_y, clean_y)
                pair_ssim = ssim(pred_y[0, 0], clean_y[0, 0])
            else:
                pair_psnr = psnr(pred, pair.clean)
                pair_ssim = float(
                    np.mean([ssim(pred[0, c], pair.clean[0, c]) for c in range(3)])
                )
            per_image[pair.key] = (pair_psnr, pair_ssim)
    if was_training:
        model.train()
    return MetricReport.from_per_image(per_image)


def evaluate_checkpoint(path, pairs, stage=-1, channel="y"):
    """Load a checkpoint and score it on a paired dataset."""
    model = model_from_checkpoint(load_checkpoint(path))
    return evaluate(model, pairs, stage=stage, channel=channel)


def _config_from_dict(cls, data, label):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {label} keys: {sorted(unknown)}")
    # JSON has no tuples; coerce list values for tuple-typed fields
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"invalid {label}: {exc}") from exc


def model_config_from_dict(data):
    return _config_from_dict(ModelConfig, data, "model config")


def train_config_from_dict(data):
    return _config_from_dict(TrainConfig, data, "train config")
