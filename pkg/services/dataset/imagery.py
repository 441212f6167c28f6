# services/dataset/imagery.py
import logging
import os
from typing import List, Tuple

import numpy as np

from models.errors import DataError, DimensionError, DuplicateIdError
from models.types import ScenePair
from utils.image_io import list_images, load_image, resize_image

logger = logging.getLogger(__name__)


def split_paired_image(composite: np.ndarray, day_side: str = 'left') -> Tuple[np.ndarray, np.ndarray]:
    """
    Cut an H×2W side-by-side composite into its day and night halves.

    Args:
        composite: H×2W×3 image
        day_side: Which half holds the day image ('left' or 'right')

    Returns:
        Tuple of (day, night) H×W×3 images
    """
    if composite.ndim != 3:
        raise DimensionError(f"Composite must be H×W×C, got {composite.shape}")
    width = composite.shape[1]
    if width % 2:
        raise DimensionError(f"Composite width must be even, got {width}")
    if day_side not in ('left', 'right'):
        raise DataError(f"day_side must be 'left' or 'right', got {day_side!r}")
    half = width // 2
    left, right = composite[:, :half].copy(), composite[:, half:].copy()
    return (left, right) if day_side == 'left' else (right, left)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def load_scene_pairs(pairs_dir: str, layout: str = 'composite', day_side: str = 'left',
                     image_size: int = 256) -> List[ScenePair]:
    """
    Read paired imagery from disk and resize it to image_size.

    Args:
        pairs_dir: Directory of composites, or a directory with `night/` and `day/`
        layout: 'composite' or 'split'
        day_side: Day half of composites
        image_size: Output side length

    Returns:
        List of ScenePair sorted by id
    """
    pairs = []
    if layout == 'composite':
        for path in list_images(pairs_dir):
            day, night = split_paired_image(load_image(path), day_side)
            pairs.append(ScenePair(_stem(path), resize_image(night, image_size),
                                   resize_image(day, image_size)))
    elif layout == 'split':
        night_paths = {_stem(p): p for p in list_images(os.path.join(pairs_dir, 'night'))}
        day_paths = {_stem(p): p for p in list_images(os.path.join(pairs_dir, 'day'))}
        unmatched = sorted(set(night_paths).symmetric_difference(day_paths))
        if unmatched:
            raise DataError(f"Night/day files without a partner: {unmatched}")
        for pair_id in sorted(night_paths):
            pairs.append(ScenePair(pair_id,
                                   resize_image(load_image(night_paths[pair_id]), image_size),
                                   resize_image(load_image(day_paths[pair_id]), image_size)))
    else:
        raise DataError(f"Unknown layout {layout!r}")

    ids = [p.id for p in pairs]
    if len(set(ids)) != len(ids):
        raise DuplicateIdError(f"Duplicate pair ids in {pairs_dir}")
    if not pairs:
        raise DataError(f"No image pairs found in {pairs_dir}")
    logger.info(f"Loaded {len(pairs)} scene pairs from {pairs_dir} ({layout} layout)")
    return pairs
