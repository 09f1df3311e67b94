"""Residue channel prior: per-pixel max minus min over the RGB channels.

The residue channel is invariant to achromatic additive light (an equal
push on R, G and B), which is what makes it a rain-robust structure map:
streaks brighten all three channels by the same amount and cancel in the
max-min difference, while chromatic scene structure survives.
"""

import torch

from .errors import InvalidInputError, ShapeError


def _check_rgb(image):
    if not torch.is_tensor(image) or image.dim() != 4:
        raise ShapeError(
            f"expected a (B, 3, H, W) tensor, got {getattr(image, 'shape', type(image))}"
        )
    if image.shape[1] != 3:
        raise InvalidInputError(f"expected 3 channels, got {image.shape[1]}")


def residue_channel(image):
    """Max channel minus min channel, (B, 3, H, W) -> (B, 1, H, W).

    Differentiable everywhere except at channel ties, where autograd's
    subgradient convention applies as-is.
    """
    _check_rgb(image)
    return image.amax(dim=1, keepdim=True) - image.amin(dim=1, keepdim=True)


def normalize_chromaticity(image, alpha=(1.0, 1.0, 1.0)):
    """Divide each channel by its chromaticity weight, then clamp to [0, 1].

    The default weights (1, 1, 1) are the identity: under the usual gray
    illuminant the residue channel works on raw images, so no
    color-constancy estimate is required.
    """
    _check_rgb(image)
    weights = torch.as_tensor(alpha, dtype=image.dtype, device=image.device).reshape(-1)
    if weights.numel() != 3:
        raise InvalidInputError(f"alpha must have 3 components, got {weights.numel()}")
    if not bool((weights > 0).all()):
        raise InvalidInputError(f"alpha components must all be positive, got {alpha}")
    return (image / weights.view(1, 3, 1, 1)).clamp(0.0, 1.0)
