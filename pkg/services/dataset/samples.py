# services/dataset/samples.py
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from models.types import CannyParams, DatasetManifest, MaskedNightSample
from services.dataset.edges import luminance
from services.dataset.masks import apply_mask, load_mask
from services.run_layout import RunLayout
from utils.image_io import list_images, load_image

logger = logging.getLogger(__name__)


def to_tensor(array: np.ndarray) -> torch.Tensor:
    """H×W or H×W×C float array -> C×H×W float32 tensor."""
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    return torch.from_numpy(np.ascontiguousarray(array.transpose(2, 0, 1), dtype=np.float32))


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """C×H×W tensor -> H×W×C float64 array."""
    return tensor.detach().cpu().double().numpy().transpose(1, 2, 0)


def sample_to_tensors(sample: MaskedNightSample) -> Dict[str, torch.Tensor]:
    """Tensor view of every channel the inpainter reads."""
    return {
        'incomplete': to_tensor(sample.incomplete_night),
        'mask': to_tensor(sample.mask.grid.astype(np.float64)),
        'gray': to_tensor(sample.gray),
        'edge_partial': to_tensor(sample.edge_partial.astype(np.float64)),
        'edge_gt': to_tensor(sample.edge_gt.astype(np.float64)),
        'ground_truth': to_tensor(sample.ground_truth),
        'gray_gt': to_tensor(luminance(sample.ground_truth)),
    }


def build_masked_sample(layout: RunLayout, manifest: DatasetManifest, pair_id: str,
                        canny: Optional[CannyParams] = None) -> MaskedNightSample:
    """Masked night sample for one pair from the ingested run data."""
    night = load_image(layout.night_path(pair_id))
    mask = load_mask(manifest.mask_assignment[pair_id], manifest.image_size, manifest.missing_is_dark)
    return apply_mask(night, mask, manifest.fill, pair_id=pair_id, canny=canny)


class InpaintingSamples(Dataset):
    """
    Lazily built inpainting samples.

    Args:
        pair_ids: Ids to serve, in a fixed order
        build_sample: Callable mapping a pair id to a MaskedNightSample
    """

    def __init__(self, pair_ids: Sequence[str], build_sample: Callable[[str], MaskedNightSample]):
        self.pair_ids = list(pair_ids)
        self.build_sample = build_sample

    def __len__(self) -> int:
        return len(self.pair_ids)

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        return sample_to_tensors(self.build_sample(self.pair_ids[index]))


class ImageFolder(Dataset):
    """Every PNG in a directory as a 3×H×W tensor in [0,1]."""

    def __init__(self, directory: str):
        self.paths: List[str] = list_images(directory)

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, index: int) -> torch.Tensor:
        return to_tensor(load_image(self.paths[index]))
