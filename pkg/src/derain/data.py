"""Paired-image datasets, synthetic rain rendering, patching and padding.

Loading and patch sampling are safe to run on multiple workers as long
as each worker derives its own rng stream (for example
``np.random.default_rng([seed, worker_index])``); every function here is
deterministic given its rng.
"""

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import ConfigError, DatasetError, DecodeError, InvalidInputError, ShapeError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class RainPair:
    """An aligned (rainy, clean) pair of (1, 3, H, W) tensors in [0, 1]."""

    rainy: torch.Tensor
    clean: torch.Tensor
    key: str

    def __post_init__(self):
        if self.rainy.shape != self.clean.shape:
            raise DatasetError(
                f"pair '{self.key}': rainy {tuple(self.rainy.shape)} and "
                f"clean {tuple(self.clean.shape)} sizes differ"
            )


def load_image(path):
    """Decode an image file to a float32 (1, 3, H, W) tensor in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def save_image(path, image):
    """Write a (1, C, H, W) or (C, H, W) tensor in [0, 1] as an 8-bit image.

    Quantization is round-half-away-from-zero on 255*v; the file is
    written to a temp name and renamed, so no partial output survives a
    failure.
    """
    arr = image.detach().cpu().numpy()
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ShapeError(f"expected a single image, got batch of {arr.shape[0]}")
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ShapeError(f"expected (1|3, H, W) image data, got {arr.shape}")
    quantized = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if quantized.shape[0] == 1:
        pil = Image.fromarray(quantized[0], mode="L")
    else:
        pil = Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        pil.save(tmp, format=Image.registered_extensions().get(path.suffix.lower(), "PNG"))
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def scan_image_dir(directory):
    """Map filename stem -> path for every image file, sorted by stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"not a directory: {directory}")
    found = {}
    for entry in sorted(directory.iterdir()):
        if entry.suffix.lower() not in IMAGE_EXTENSIONS or not entry.is_file():
            continue
        if entry.stem in found:
            raise DatasetError(f"duplicate stem '{entry.stem}' in {directory}")
        found[entry.stem] = entry
    return dict(sorted(found.items()))


def load_pairs(root):
    """Load ``root/rainy`` and ``root/gt`` matched by filename stem.

    Pairs come back in lexicographic key order. A stem present on only
    one side, or a size mismatch within a pair, is a dataset error.
    """
    root = Path(root)
    rainy_files = scan_image_dir(root / "rainy")
    gt_files = scan_image_dir(root / "gt")
    unmatched = sorted(set(rainy_files) ^ set(gt_files))
    if unmatched:
        raise DatasetError(f"unmatched keys between rainy/ and gt/: {unmatched}")
    pairs = []
    for key in rainy_files:
        rainy = load_image(rainy_files[key])
        clean = load_image(gt_files[key])
        pairs.append(RainPair(rainy=rainy, clean=clean, key=key))
    return pairs


@dataclass(frozen=True)
class SynthRainParams:
    """Sampling ranges for the achromatic streak renderer (inclusive)."""

    num_streaks: tuple = (6, 18)
    angle_deg: tuple = (60.0, 120.0)
    length_px: tuple = (10.0, 32.0)
    width_px: tuple = (1.0, 2.2)
    intensity: tuple = (0.08, 0.35)
    blur_len_px: float = 4.0
    seed: int = 0

    def __post_init__(self):
        for name in ("num_streaks", "angle_deg", "length_px", "width_px", "intensity"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} range is empty: ({lo}, {hi})")
        if self.num_streaks[0] < 0:
            raise ConfigError("num_streaks must be non-negative")
        if self.length_px[0] <= 0 or self.width_px[0] <= 0:
            raise ConfigError("length_px and width_px must be positive")
        if not (0.0 < self.intensity[0] and self.intensity[1] <= 0.8):
            raise ConfigError(f"intensity must lie within (0, 0.8], got {self.intensity}")
        if self.blur_len_px < 1.0:
            raise ConfigError("blur_len_px must be >= 1")


def _add_streak(mask, center, angle, length, width, strength, blur_len):
    """Accumulate one anti-aliased segment, box-blurred along its angle."""
    h, w = mask.shape
    ux, uy = math.cos(angle), math.sin(angle)
    offsets = np.linspace(-blur_len / 2.0, blur_len / 2.0, max(int(round(blur_len)), 1) + 1)
    reach = length / 2.0 + blur_len / 2.0 + width / 2.0 + 1.5
    x0 = max(int(math.floor(center[0] - reach)), 0)
    x1 = min(int(math.ceil(center[0] + reach)) + 1, w)
    y0 = max(int(math.floor(center[1] - reach)), 0)
    y1 = min(int(math.ceil(center[1] + reach)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    acc = np.zeros((y1 - y0, x1 - x0))
    for t in offsets:
        ax = center[0] + (t - length / 2.0) * ux
        ay = center[1] + (t - length / 2.0) * uy
        bx = center[0] + (t + length / 2.0) * ux
        by = center[1] + (t + length / 2.0) * uy
        vx, vy = bx - ax, by - ay
        denom = vx * vx + vy * vy
        proj = np.clip(((xs - ax) * vx + (ys - ay) * vy) / denom, 0.0, 1.0)
        dist = np.hypot(xs - (ax + proj * vx), ys - (ay + proj * vy))
        acc += np.clip(width / 2.0 + 0.5 - dist, 0.0, 1.0)
    mask[y0:y1, x0:x1] += strength * (acc / len(offsets)).astype(np.float32)


def render_streak_mask(height, width, params, rng):
    """Single-channel streak field; one scalar intensity per streak."""
    mask = np.zeros((height, width), dtype=np.float32)
    count = int(rng.integers(params.num_streaks[0], params.num_streaks[1] + 1))
    for _ in range(count):
        center = (rng.uniform(0, width - 1), rng.uniform(0, height - 1))
        angle = math.radians(rng.uniform(*params.angle_deg))
        length = rng.uniform(*params.length_px)
        streak_width = rng.uniform(*params.width_px)
        strength = rng.uniform(*params.intensity)
        _add_streak(mask, center, angle, length, streak_width, strength, params.blur_len_px)
    return mask


def synth_rain(clean, params, rng=None, key="synth"):
    """Composite achromatic rain streaks over a clean image.

    The streak field is added equally to all three channels, so the
    residue channel is untouched wherever no clipping occurs. Same
    (clean, params, rng seed) -> bit-identical output; when ``rng`` is
    omitted it is seeded from ``params.seed``.
    """
    if clean.dim() != 4 or clean.shape[1] != 3:
        raise ShapeError(f"expected a (B, 3, H, W) clean image, got {tuple(clean.shape)}")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    mask = render_streak_mask(clean.shape[2], clean.shape[3], params, rng)
    streaks = torch.from_numpy(mask).to(clean.dtype).view(1, 1, *mask.shape)
    rainy = (clean + streaks).clamp(0.0, 1.0)
    return RainPair(rainy=rainy, clean=clean.clone(), key=key)


def random_patch(pair, size, rng, flip=True):
    """Crop one shared window from both images, optionally h-flipping both."""
    h, w = pair.rainy.shape[2:]
    if h < size or w < size:
        raise InvalidInputError(f"pair '{pair.key}' is {h}x{w}, smaller than patch {size}")
    y0 = int(rng.integers(0, h - size + 1))
    x0 = int(rng.integers(0, w - size + 1))
    rainy = pair.rainy[:, :, y0 : y0 + size, x0 : x0 + size]
    clean = pair.clean[:, :, y0 : y0 + size, x0 : x0 + size]
    if flip and rng.random() < 0.5:
        rainy = torch.flip(rainy, dims=(3,))
        clean = torch.flip(clean, dims=(3,))
    return RainPair(rainy=rainy, clean=clean, key=pair.key)


def pad_to_multiple(image, multiple):
    """Reflect-pad bottom/right so both spatial dims divide ``multiple``.

    Returns the padded image and the original (H, W) for ``unpad``.
    """
    if multiple < 1:
        raise InvalidInputError(f"multiple must be >= 1, got {multiple}")
    h, w = image.shape[2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        # reflect needs pad < dim; fall back for degenerate tiny images
        mode = "reflect" if pad_h < h and pad_w < w else "replicate"
        image = F.pad(image, (0, pad_w, 0, pad_h), mode=mode)
    return image, (h, w)


def unpad(image, size):
    """Crop back to the (H, W) recorded by ``pad_to_multiple``."""
    h, w = size
    return image[:, :, :h, :w]
