"""Full-reference quality metrics on the BT.601 luminance channel.

PSNR and SSIM are computed on the studio-swing Y channel by the
evaluation pipeline, matching the convention of the released comparison
code in this area; both also accept arbitrary same-shaped arrays for
direct use. All functions are pure and trivially parallel across images.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.signal import convolve2d

from .errors import InvalidInputError, ShapeError

# Studio-swing BT.601 luma: Y = 16/255 + (65.481 R + 128.553 G + 24.966 B)/255
_LUMA_WEIGHTS = (65.481, 128.553, 24.966)
_LUMA_OFFSET = 16.0


def luminance(image):
    """BT.601 studio-swing Y channel, (B, 3, H, W) -> (B, 1, H, W)."""
    if image.dim() != 4 or image.shape[1] != 3:
        raise ShapeError(f"expected a (B, 3, H, W) image, got {tuple(image.shape)}")
    weights = torch.tensor(_LUMA_WEIGHTS, dtype=image.dtype, device=image.device)
    y = (image * weights.view(1, 3, 1, 1)).sum(dim=1, keepdim=True)
    return (y + _LUMA_OFFSET) / 255.0


def _to_array(x):
    if torch.is_tensor(x):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def psnr(pred, target, data_range=1.0):
    """10*log10(data_range^2 / MSE); identical inputs return math.inf."""
    p = _to_array(pred)
    t = _to_array(target)
    if p.shape != t.shape:
        raise InvalidInputError(f"shape mismatch: {p.shape} vs {t.shape}")
    mse = float(np.mean((p - t) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / mse)


def gaussian_window(size=11, sigma=1.5):
    """Normalized 2-D Gaussian window."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def _as_plane(x):
    arr = _to_array(x)
    arr = arr.squeeze()
    if arr.ndim != 2:
        raise ShapeError(f"expected a single-channel image, got shape {arr.shape}")
    return arr


def ssim(pred, target, data_range=1.0, window_size=11, sigma=1.5):
    """Mean local SSIM: Gaussian window, K1=0.01, K2=0.03, valid region only."""
    p = _as_plane(pred)
    t = _as_plane(target)
    if p.shape != t.shape:
        raise InvalidInputError(f"shape mismatch: {p.shape} vs {t.shape}")
    if min(p.shape) < window_size:
        raise InvalidInputError(
            f"image {p.shape} smaller than the {window_size}x{window_size} window"
        )
    window = gaussian_window(window_size, sigma)
    mu_p = convolve2d(p, window, mode="valid")
    mu_t = convolve2d(t, window, mode="valid")
    var_p = convolve2d(p * p, window, mode="valid") - mu_p * mu_p
    var_t = convolve2d(t * t, window, mode="valid") - mu_t * mu_t
    cov = convolve2d(p * t, window, mode="valid") - mu_p * mu_t
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    num = (2.0 * mu_p * mu_t + c1) * (2.0 * cov + c2)
    den = (mu_p * mu_p + mu_t * mu_t + c1) * (var_p + var_t + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    """Per-image and aggregate PSNR/SSIM values."""

    per_image: dict
    mean_psnr: float
    mean_ssim: float

    @classmethod
    def from_per_image(cls, per_image):
        if not per_image:
            return cls(per_image={}, mean_psnr=math.nan, mean_ssim=math.nan)
        psnrs = [v[0] for v in per_image.values()]
        ssims = [v[1] for v in per_image.values()]
        return cls(
            per_image=dict(per_image),
            mean_psnr=sum(psnrs) / len(psnrs),
            mean_ssim=sum(ssims) / len(ssims),
        )
