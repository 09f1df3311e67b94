"""Residue channel: frozen pixel values and achromatic invariance."""

import numpy as np
import pytest
import torch

from derain import normalize_chromaticity, residue_channel
from derain.errors import InvalidInputError, ShapeError


def _pixel(r, g, b):
    return torch.tensor([r, g, b], dtype=torch.float32).view(1, 3, 1, 1)


def test_gray_pixel_is_zero():
    assert residue_channel(_pixel(0.5, 0.5, 0.5)).item() == 0.0


def test_pure_red_pixel_is_one():
    assert residue_channel(_pixel(1.0, 0.0, 0.0)).item() == 1.0


def test_shape_contract():
    out = residue_channel(torch.rand(2, 3, 5, 7))
    assert out.shape == (2, 1, 5, 7)


def test_achromatic_offset_invariance():
    # max(B+s) - min(B+s) == max(B) - min(B) wherever nothing clips
    rng = np.random.default_rng(5)
    for _ in range(50):
        base = torch.from_numpy(rng.uniform(0.0, 0.6, size=(1, 3, 12, 12)).astype(np.float32))
        offset = torch.from_numpy(rng.uniform(0.0, 0.35, size=(1, 1, 12, 12)).astype(np.float32))
        diff = (residue_channel(base + offset) - residue_channel(base)).abs().max()
        assert float(diff) <= 1e-7


def test_grayscale_replication_is_zero():
    mono = torch.rand(1, 1, 9, 9).repeat(1, 3, 1, 1)
    assert residue_channel(mono).abs().max().item() == 0.0


def test_channel_permutation_invariance():
    x = torch.rand(1, 3, 6, 6, generator=torch.Generator().manual_seed(6))
    base = residue_channel(x)
    for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0), (2, 0, 1)]:
        assert torch.equal(residue_channel(x[:, perm]), base)


def test_differentiable_with_subgradient():
    x = torch.rand(1, 3, 4, 4, dtype=torch.float64, requires_grad=True)
    residue_channel(x).sum().backward()
    assert torch.isfinite(x.grad).all()


def test_wrong_channel_count():
    with pytest.raises(InvalidInputError):
        residue_channel(torch.rand(1, 4, 4, 4))
    with pytest.raises(ShapeError):
        residue_channel(torch.rand(3, 4, 4))


def test_normalize_identity_default():
    x = torch.rand(1, 3, 5, 5)
    assert torch.equal(normalize_chromaticity(x), x)


def test_normalize_divides_and_clamps():
    x = _pixel(0.5, 0.5, 0.5)
    out = normalize_chromaticity(x, (1.0, 1.0, 0.5))
    assert out.flatten().tolist() == [0.5, 0.5, 1.0]
    # clamped at 1 when the division overshoots
    out = normalize_chromaticity(_pixel(0.9, 0.2, 0.1), (0.5, 1.0, 1.0))
    assert torch.equal(out, _pixel(1.0, 0.2, 0.1))


def test_normalize_rejects_nonpositive_alpha():
    x = torch.rand(1, 3, 4, 4)
    for alpha in [(0.0, 1.0, 1.0), (1.0, -0.1, 1.0)]:
        with pytest.raises(InvalidInputError):
            normalize_chromaticity(x, alpha)


def test_invariance_survives_normalization():
    # residue(normalize(B + s)) == residue(normalize(B)) absent clipping
    rng = np.random.default_rng(7)
    alpha = (1.0, 1.0, 1.0)
    for _ in range(20):
        base = torch.from_numpy(rng.uniform(0.0, 0.5, size=(1, 3, 10, 10)).astype(np.float32))
        offset = torch.from_numpy(rng.uniform(0.0, 0.3, size=(1, 1, 10, 10)).astype(np.float32))
        lhs = residue_channel(normalize_chromaticity(base + offset, alpha))
        rhs = residue_channel(normalize_chromaticity(base, alpha))
        assert float((lhs - rhs).abs().max()) <= 1e-7
