"""Haar transform: frozen block values, perfect reconstruction, energy."""

import pytest
import torch

from derain import dwt2, iwt2
from derain.errors import ShapeError


def test_constant_image():
    x = torch.full((1, 2, 4, 4), 0.7)
    y = dwt2(x)
    ll, rest = y[:, :2], y[:, 2:]
    assert torch.allclose(ll, torch.full_like(ll, 1.4))
    assert torch.allclose(rest, torch.zeros_like(rest))


def test_single_block_values():
    # 2x2 block [[1, 0], [0, 0]] -> (LL, HL, LH, HH) = (0.5, -0.5, -0.5, 0.5)
    x = torch.tensor([[[[1.0, 0.0], [0.0, 0.0]]]])
    y = dwt2(x)
    assert y.shape == (1, 4, 1, 1)
    assert y.flatten().tolist() == [0.5, -0.5, -0.5, 0.5]


def test_energy_preserved():
    # brute-force energy sums on both sides
    x = torch.randn(1, 3, 8, 8, generator=torch.Generator().manual_seed(0))
    y = dwt2(x)
    e_in = float((x.double() ** 2).sum())
    e_out = float((y.double() ** 2).sum())
    assert abs(e_in - e_out) / e_in < 1e-6


def test_round_trip_float32():
    gen = torch.Generator().manual_seed(1)
    for shape in [(1, 1, 2, 2), (2, 3, 6, 10), (1, 4, 16, 16), (3, 2, 12, 8)]:
        x = torch.randn(*shape, generator=gen)
        assert (iwt2(dwt2(x)) - x).abs().max() <= 1e-5


def test_round_trip_float64():
    gen = torch.Generator().manual_seed(2)
    x = torch.randn(2, 3, 10, 14, generator=gen, dtype=torch.float64)
    assert (iwt2(dwt2(x)) - x).abs().max() <= 1e-12


def test_round_trip_other_direction():
    gen = torch.Generator().manual_seed(3)
    y = torch.randn(2, 8, 5, 7, generator=gen)
    assert (dwt2(iwt2(y)) - y).abs().max() <= 1e-5


def test_zero_subbands_and_constant_ll():
    z = torch.zeros(1, 4, 3, 3)
    assert torch.equal(iwt2(z), torch.zeros(1, 1, 6, 6))
    y = torch.zeros(1, 4, 3, 3)
    y[:, 0] = 1.6  # LL = 2v -> constant image v
    assert torch.allclose(iwt2(y), torch.full((1, 1, 6, 6), 0.8))


def test_linearity():
    gen = torch.Generator().manual_seed(4)
    x = torch.randn(1, 2, 6, 6, generator=gen, dtype=torch.float64)
    y = torch.randn(1, 2, 6, 6, generator=gen, dtype=torch.float64)
    combo = dwt2(2.5 * x - 0.7 * y)
    assert (combo - (2.5 * dwt2(x) - 0.7 * dwt2(y))).abs().max() < 1e-12


def test_differentiable():
    x = torch.randn(1, 1, 4, 4, dtype=torch.float64, requires_grad=True)
    dwt2(x).sum().backward()
    assert x.grad is not None and torch.isfinite(x.grad).all()
    y = torch.randn(1, 4, 2, 2, dtype=torch.float64, requires_grad=True)
    iwt2(y).sum().backward()
    assert y.grad is not None and torch.isfinite(y.grad).all()


@pytest.mark.parametrize("shape", [(1, 1, 5, 4), (1, 1, 4, 7), (1, 1, 3, 3)])
def test_odd_dims_rejected(shape):
    with pytest.raises(ShapeError):
        dwt2(torch.zeros(*shape))


def test_bad_channel_count_rejected():
    with pytest.raises(ShapeError):
        iwt2(torch.zeros(1, 6, 4, 4))
    with pytest.raises(ShapeError):
        dwt2(torch.zeros(3, 4, 4))
