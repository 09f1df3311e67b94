"""Learned building blocks: SE gate, SE-ResBlock, and residual groups."""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class BlockConfig:
    """Hyperparameters shared by the channel-attention residual blocks."""

    channels: int
    se_reduction: int = 16
    num_blocks: int = 3
    kernel_size: int = 3

    def __post_init__(self):
        if self.channels < 1 or self.se_reduction < 1 or self.num_blocks < 1:
            raise ConfigError("channels, se_reduction and num_blocks must be positive")
        if self.channels % self.se_reduction:
            raise ConfigError(
                f"channels ({self.channels}) must divide by se_reduction ({self.se_reduction})"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")


def conv2d(in_channels, out_channels, kernel_size):
    """Spatial-size-preserving conv with PyTorch's fan-in uniform init."""
    return nn.Conv2d(in_channels, out_channels, kernel_size, padding=kernel_size // 2)


class SEGate(nn.Module):
    """Squeeze-and-excitation channel gate: x * sigmoid(MLP(avgpool(x)))."""

    def __init__(self, channels, reduction):
        super().__init__()
        self.channels = channels
        hidden = channels // reduction
        self.fc1 = nn.Conv2d(channels, hidden, 1)
        self.fc2 = nn.Conv2d(hidden, channels, 1)
        nn.init.zeros_(self.fc1.bias)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {x.shape[1]}")
        g = x.mean(dim=(2, 3), keepdim=True)
        g = torch.sigmoid(self.fc2(torch.relu(self.fc1(g))))
        return x * g


class SEResBlock(nn.Module):
    """conv-relu-conv modulated by a channel gate, plus the identity skip."""

    def __init__(self, cfg):
        super().__init__()
        self.conv1 = conv2d(cfg.channels, cfg.channels, cfg.kernel_size)
        self.conv2 = conv2d(cfg.channels, cfg.channels, cfg.kernel_size)
        self.gate = SEGate(cfg.channels, cfg.se_reduction)

    def forward(self, x):
        return x + self.gate(self.conv2(torch.relu(self.conv1(x))))


class ResidualGroup(nn.Module):
    """SE-ResBlocks and a tail conv wrapped in a long skip connection."""

    def __init__(self, cfg):
        super().__init__()
        self.channels = cfg.channels
        self.blocks = nn.Sequential(*[SEResBlock(cfg) for _ in range(cfg.num_blocks)])
        self.tail = conv2d(cfg.channels, cfg.channels, cfg.kernel_size)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {x.shape[1]}")
        return x + self.tail(self.blocks(x))
