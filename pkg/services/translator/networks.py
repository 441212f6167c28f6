# services/translator/networks.py
from typing import List, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from services.networks import EncoderResidualDecoder, init_weights


class ResnetTranslator(nn.Module):
    """
    Residual image translator: output = clamp(x + net(x), 0, 1).

    The last convolution starts at zero, so an untrained translator is the
    identity map.
    """

    def __init__(self, channels_base: int = 32, residual_blocks: int = 4):
        super().__init__()
        self.net = EncoderResidualDecoder(3, 3, channels_base, residual_blocks)
        init_weights(self)
        out_conv = self.net.head[-1]
        nn.init.zeros_(out_conv.weight)
        nn.init.zeros_(out_conv.bias)

    @property
    def feature_channels(self) -> List[int]:
        return self.net.feature_channels

    def encode(self, x: torch.Tensor, layers: Sequence[int]) -> List[torch.Tensor]:
        """Encoder activations at the requested stage indices (0 = stem)."""
        feats = self.net.encode(x)
        return [feats[i] for i in layers]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.clamp(x + self.net(x), 0.0, 1.0)


class PatchSampleMLP(nn.Module):
    """One two-layer projection head per feature layer; outputs are L2-normalised."""

    def __init__(self, in_channels: Sequence[int], projection_dim: int = 128):
        super().__init__()
        self.heads = nn.ModuleList([
            nn.Sequential(nn.Linear(c, projection_dim), nn.ReLU(inplace=True),
                          nn.Linear(projection_dim, projection_dim))
            for c in in_channels
        ])
        init_weights(self)

    def forward(self, index: int, patches: torch.Tensor) -> torch.Tensor:
        return F.normalize(self.heads[index](patches), dim=-1)
