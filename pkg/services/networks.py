# services/networks.py
from typing import List, Tuple

import torch
import torch.nn as nn


def init_weights(module: nn.Module, gain: float = 0.02) -> None:
    """N(0, gain) convolution/linear weights and zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, gain)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


class ResidualBlock(nn.Module):
    """Two reflection-padded 3×3 convolutions, the first dilated, with an identity skip."""

    def __init__(self, channels: int, dilation: int = 2):
        super().__init__()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(dilation),
            nn.Conv2d(channels, channels, kernel_size=3, dilation=dilation),
            nn.InstanceNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class EncoderResidualDecoder(nn.Module):
    """
    7×7 stem, two stride-2 downsamplings, residual blocks, two transposed
    convolutions and a 7×7 head. `forward` returns the raw head output; callers
    add the activation.

    Args:
        in_channels: Input channels
        out_channels: Output channels
        channels_base: Width of the stem; doubles at each downsampling
        residual_blocks: Number of residual blocks at the bottleneck
    """

    def __init__(self, in_channels: int, out_channels: int, channels_base: int = 32,
                 residual_blocks: int = 4):
        super().__init__()
        c = channels_base
        self.encoder = nn.ModuleList([
            nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(in_channels, c, kernel_size=7),
                          nn.InstanceNorm2d(c), nn.ReLU(inplace=True)),
            nn.Sequential(nn.Conv2d(c, 2 * c, kernel_size=4, stride=2, padding=1),
                          nn.InstanceNorm2d(2 * c), nn.ReLU(inplace=True)),
            nn.Sequential(nn.Conv2d(2 * c, 4 * c, kernel_size=4, stride=2, padding=1),
                          nn.InstanceNorm2d(4 * c), nn.ReLU(inplace=True)),
        ])
        self.middle = nn.Sequential(*[ResidualBlock(4 * c) for _ in range(residual_blocks)])
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(4 * c, 2 * c, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(2 * c), nn.ReLU(inplace=True),
            nn.ConvTranspose2d(2 * c, c, kernel_size=4, stride=2, padding=1),
            nn.InstanceNorm2d(c), nn.ReLU(inplace=True),
        )
        self.head = nn.Sequential(nn.ReflectionPad2d(3), nn.Conv2d(c, out_channels, kernel_size=7))
        self.feature_channels = [c, 2 * c, 4 * c]

    def encode(self, x: torch.Tensor) -> List[torch.Tensor]:
        """Outputs of the stem and both downsampling stages."""
        feats = []
        for stage in self.encoder:
            x = stage(x)
            feats.append(x)
        return feats

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.encode(x)[-1]
        return self.head(self.decoder(self.middle(x)))


class PatchDiscriminator(nn.Module):
    """
    Patch-level discriminator returning logits and its intermediate activations
    (used for feature matching).
    """

    def __init__(self, in_channels: int, channels_base: int = 32):
        super().__init__()
        c = channels_base
        self.blocks = nn.ModuleList([
            nn.Sequential(nn.Conv2d(in_channels, c, kernel_size=4, stride=2, padding=1),
                          nn.LeakyReLU(0.2, inplace=True)),
            nn.Sequential(nn.Conv2d(c, 2 * c, kernel_size=4, stride=2, padding=1),
                          nn.LeakyReLU(0.2, inplace=True)),
            nn.Sequential(nn.Conv2d(2 * c, 4 * c, kernel_size=4, stride=1, padding=1),
                          nn.LeakyReLU(0.2, inplace=True)),
        ])
        self.classifier = nn.Conv2d(4 * c, 1, kernel_size=4, stride=1, padding=1)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return self.classifier(x), feats


def hinge_discriminator_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    return (torch.relu(1.0 - real_logits).mean() + torch.relu(1.0 + fake_logits).mean()) / 2


def hinge_generator_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    return -fake_logits.mean()


def feature_matching_loss(fake_feats: List[torch.Tensor], real_feats: List[torch.Tensor]) -> torch.Tensor:
    """Mean L1 distance between discriminator activations of fake and real inputs."""
    total = sum(torch.mean(torch.abs(f - r.detach())) for f, r in zip(fake_feats, real_feats))
    return total / len(fake_feats)


def lsgan_loss(logits: torch.Tensor, target_is_real: bool) -> torch.Tensor:
    target = torch.ones_like(logits) if target_is_real else torch.zeros_like(logits)
    return torch.mean((logits - target) ** 2)
