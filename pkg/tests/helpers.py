"""Shared helpers: procedural test images, zeroing, finite differences."""

import numpy as np
import torch


def make_clean_image(height, width, seed):
    """Smooth random RGB field in [0.08, 0.85] built from low-freq waves."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij")
    img = np.zeros((3, height, width))
    for c in range(3):
        field = np.zeros_like(yy)
        for _ in range(4):
            fx, fy = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0, 2 * np.pi, size=2)
            amp = rng.uniform(0.3, 1.0)
            field += amp * np.sin(2 * np.pi * (fx * xx + phase[0])) * np.sin(
                2 * np.pi * (fy * yy + phase[1])
            )
        lo, hi = field.min(), field.max()
        img[c] = 0.08 + (field - lo) / (hi - lo + 1e-9) * (0.85 - 0.08)
    return torch.from_numpy(img).float().unsqueeze(0)


def zero_params(module):
    """Set every parameter of a module to zero, in place."""
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def fd_check(fn, tensors, rel_tol=1e-3, eps=1e-6, max_coords=None, seed=0):
    """Compare autograd gradients of the scalar ``fn()`` to central differences.

    ``tensors`` are float64 leaves with requires_grad that ``fn`` reads.
    Every coordinate is checked unless ``max_coords`` caps it, in which
    case a seeded sample per tensor is used. The comparison is the
    relative L2 error over the checked coordinates.
    """
    value = fn()
    grads = torch.autograd.grad(value, tensors)
    rng = np.random.default_rng(seed)
    for tensor, grad in zip(tensors, grads):
        flat = tensor.detach().reshape(-1)
        n = flat.numel()
        if max_coords is None or n <= max_coords:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords, replace=False)
        analytic = grad.detach().reshape(-1)[coords].numpy()
        numeric = np.zeros(len(coords))
        with torch.no_grad():
            for j, k in enumerate(coords):
                orig = flat[k].item()
                flat[k] = orig + eps
                hi = float(fn())
                flat[k] = orig - eps
                lo = float(fn())
                flat[k] = orig
                numeric[j] = (hi - lo) / (2.0 * eps)
        denom = max(float(np.linalg.norm(numeric)), 1e-8)
        rel = float(np.linalg.norm(analytic - numeric)) / denom
        assert rel <= rel_tol, f"gradient mismatch: rel err {rel:.3e} on tensor {tuple(tensor.shape)}"


def weighted_sum(output, weight):
    """Scalar probe for gradient checks; a plain sum can cancel terms."""
    return (output * weight).sum()
