# services/inpainter/networks.py
import torch
import torch.nn as nn

from services.networks import EncoderResidualDecoder, PatchDiscriminator, init_weights


class EdgeGenerator(nn.Module):
    """(gray, edge_partial, mask) -> edge probability map in [0,1]."""

    def __init__(self, channels_base: int = 32, residual_blocks: int = 4):
        super().__init__()
        self.net = EncoderResidualDecoder(3, 1, channels_base, residual_blocks)
        init_weights(self)

    def forward(self, gray: torch.Tensor, edge_partial: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(torch.cat([gray, edge_partial, mask], dim=1)))


class InpaintGenerator(nn.Module):
    """(incomplete image, full edge map) -> RGB image in [0,1]."""

    def __init__(self, channels_base: int = 32, residual_blocks: int = 4):
        super().__init__()
        self.net = EncoderResidualDecoder(4, 3, channels_base, residual_blocks)
        init_weights(self)

    def forward(self, incomplete: torch.Tensor, edge: torch.Tensor) -> torch.Tensor:
        return (torch.tanh(self.net(torch.cat([incomplete, edge], dim=1))) + 1) / 2


def build_edge_discriminator(channels_base: int = 32) -> PatchDiscriminator:
    # sees (gray, edge map)
    disc = PatchDiscriminator(2, channels_base)
    init_weights(disc)
    return disc


def build_inpaint_discriminator(channels_base: int = 32) -> PatchDiscriminator:
    disc = PatchDiscriminator(3, channels_base)
    init_weights(disc)
    return disc
