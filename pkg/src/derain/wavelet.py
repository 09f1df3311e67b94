"""Single-level orthonormal 2-D Haar transform and its exact inverse.

These are the lossless down/upsampling primitives of the wavelet
backbone: ``dwt2`` halves the spatial size and quadruples the channel
count, ``iwt2`` undoes it perfectly. Both maps are linear, energy
preserving (orthonormal scaling) and differentiable; the gradient of
each is the adjoint of the other.
"""

import torch

from .errors import ShapeError


def dwt2(x):
    """Haar analysis over non-overlapping 2x2 blocks.

    (B, C, H, W) -> (B, 4C, H/2, W/2), H and W even. Output channels are
    laid out in four contiguous blocks [LL | HL | LH | HH], each block
    holding all C input channels in input order.
    """
    if not torch.is_tensor(x) or x.dim() != 4:
        raise ShapeError(f"expected a 4-D tensor, got {getattr(x, 'shape', type(x))}")
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"spatial dims must be even, got {tuple(x.shape[2:])}")
    a = x[:, :, 0::2, 0::2]
    b = x[:, :, 0::2, 1::2]
    c = x[:, :, 1::2, 0::2]
    d = x[:, :, 1::2, 1::2]
    ll = (a + b + c + d) / 2
    hl = (-a + b - c + d) / 2
    lh = (-a - b + c + d) / 2
    hh = (a - b - c + d) / 2
    return torch.cat((ll, hl, lh, hh), dim=1)


def iwt2(y):
    """Haar synthesis, the exact inverse of ``dwt2``.

    (B, 4C, h, w) -> (B, C, 2h, 2w); the channel count must divide by 4.
    """
    if not torch.is_tensor(y) or y.dim() != 4:
        raise ShapeError(f"expected a 4-D tensor, got {getattr(y, 'shape', type(y))}")
    if y.shape[1] % 4:
        raise ShapeError(f"channel count must divide by 4, got {y.shape[1]}")
    n = y.shape[1] // 4
    ll, hl, lh, hh = y[:, :n], y[:, n : 2 * n], y[:, 2 * n : 3 * n], y[:, 3 * n :]
    a = (ll - hl - lh + hh) / 2
    b = (ll + hl - lh - hh) / 2
    c = (ll - hl + lh - hh) / 2
    d = (ll + hl + lh + hh) / 2
    out = y.new_zeros((y.shape[0], n, y.shape[2] * 2, y.shape[3] * 2))
    out[:, :, 0::2, 0::2] = a
    out[:, :, 0::2, 1::2] = b
    out[:, :, 1::2, 0::2] = c
    out[:, :, 1::2, 1::2] = d
    return out
