# services/translator/losses.py
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from models.errors import DataError, DegenerateInputError, DimensionError

# features with a smaller L2 norm count as zero
ZERO_NORM = 1e-12


def contrastive_from_similarities(l_pos: torch.Tensor, l_neg: torch.Tensor, temperature: float) -> torch.Tensor:
    """
    Mean cross-entropy of picking the positive among the negatives.

    Args:
        l_pos: (...,) positive similarities
        l_neg: (..., K) negative similarities
        temperature: Softmax temperature

    Returns:
        torch.Tensor: Scalar loss, >= 0
    """
    logits = torch.cat([l_pos.unsqueeze(-1), l_neg], dim=-1) / temperature
    return (torch.logsumexp(logits, dim=-1) - logits[..., 0]).mean()


def patch_contrastive_loss(feats_src: torch.Tensor, feats_out: torch.Tensor,
                           temperature: float = 0.07) -> torch.Tensor:
    """
    Patchwise contrastive loss between corresponding patch features.

    Patch i of the output is pulled toward patch i of the source and pushed away
    from the other N-1 source patches of the same image.

    Args:
        feats_src: (N, C) or (B, N, C) source patch features
        feats_out: Output patch features of the same shape
        temperature: Softmax temperature

    Returns:
        torch.Tensor: Scalar loss, >= 0

    Raises:
        DataError: If fewer than two patches are given
        DegenerateInputError: If a feature vector has zero norm
    """
    if feats_src.shape != feats_out.shape:
        raise DimensionError(f"Patch feature shapes differ: {tuple(feats_src.shape)} vs {tuple(feats_out.shape)}")
    if feats_src.dim() == 2:
        feats_src, feats_out = feats_src.unsqueeze(0), feats_out.unsqueeze(0)
    n = feats_src.shape[1]
    if n < 2:
        raise DataError(f"Contrastive loss needs at least 2 patches, got {n}")
    for name, feats in (('source', feats_src), ('output', feats_out)):
        if bool((feats.norm(dim=-1) < ZERO_NORM).any()):
            raise DegenerateInputError(f"Zero-norm {name} patch feature")

    src = F.normalize(feats_src, dim=-1)
    out = F.normalize(feats_out, dim=-1)
    sim = torch.bmm(out, src.transpose(1, 2))
    diagonal = torch.eye(n, dtype=torch.bool, device=sim.device).unsqueeze(0)
    l_pos = sim.diagonal(dim1=1, dim2=2)
    l_neg = sim.masked_select(~diagonal).view(sim.shape[0], n, n - 1)
    return contrastive_from_similarities(l_pos, l_neg, temperature)


def sample_patches(feats: torch.Tensor, num_patches: int, patch_ids: Optional[torch.Tensor] = None,
                   generator: Optional[torch.Generator] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Gather feature vectors at random spatial locations shared across the batch.

    Args:
        feats: (B, C, H, W) feature map
        num_patches: Locations to draw (capped at H*W)
        patch_ids: Reuse these flat locations instead of drawing new ones
        generator: RNG for drawing locations

    Returns:
        (patches (B, P, C), patch_ids (P,))
    """
    b, c, h, w = feats.shape
    flat = feats.permute(0, 2, 3, 1).reshape(b, h * w, c)
    if patch_ids is None:
        patch_ids = torch.randperm(h * w, generator=generator)[:min(num_patches, h * w)]
    return flat[:, patch_ids.to(feats.device), :], patch_ids
