# services/dataset/masks.py
import logging
from typing import Optional

import numpy as np
from scipy import ndimage

from models.errors import DataError
from models.types import CannyParams, Mask, MaskedNightSample
from services.dataset.edges import canny_edges, luminance
from utils.image_io import load_image, resize_image
from utils.validators import require_rgb, require_spatial, require_unit_range

logger = logging.getLogger(__name__)

# 3×3 square structuring element
DILATION_STRUCTURE = np.ones((3, 3), dtype=bool)


def binarize_mask(raw: np.ndarray, missing_is_dark: bool = True) -> Mask:
    """
    Threshold a grayscale stroke image at 0.5 into a missing/known mask.

    Args:
        raw: H×W (or H×W×1) grayscale values in [0,1]
        missing_is_dark: Whether pixels below 0.5 mark missing content

    Returns:
        Mask: 1 = missing, 0 = known
    """
    if raw.ndim == 3:
        raw = raw[:, :, 0]
    require_unit_range(raw, 'mask')
    dark = raw < 0.5
    grid = dark if missing_is_dark else ~dark
    mask = Mask(grid.astype(np.uint8))
    if mask.coverage in (0.0, 1.0):
        logger.debug(f"Degenerate mask with coverage {mask.coverage}")
    return mask


def load_mask(path: str, image_size: int, missing_is_dark: bool = True) -> Mask:
    """Load a corpus mask, resize it (nearest) to image_size and binarize it."""
    raw = load_image(path, grayscale=True)
    return binarize_mask(resize_image(raw, image_size, nearest=True), missing_is_dark)


def dilate_mask(mask: Mask, iterations: int) -> Mask:
    """
    Thicken the missing region with a 3×3 square structuring element.

    Args:
        mask: Input mask
        iterations: Number of dilation passes (0 returns the mask unchanged)

    Returns:
        Mask: Dilated mask
    """
    if iterations < 0:
        raise DataError(f"Dilation iterations must be >= 0, got {iterations}")
    if iterations == 0 or mask.coverage in (0.0, 1.0):
        return Mask(mask.grid.copy())
    grown = ndimage.binary_dilation(mask.grid.astype(bool), structure=DILATION_STRUCTURE,
                                    iterations=iterations)
    return Mask(grown.astype(np.uint8))


def fill_holes(image: np.ndarray, mask: Mask, fill: float) -> np.ndarray:
    """Replace masked pixels with `fill` in every channel; known pixels are copied."""
    return np.where(mask.grid[:, :, np.newaxis] == 1, fill, image)


def apply_mask(night: np.ndarray, mask: Mask, fill: float = 1.0, *, pair_id: str = '',
               canny: Optional[CannyParams] = None,
               ground_truth: Optional[np.ndarray] = None) -> MaskedNightSample:
    """
    Build a masked inpainting sample with all auxiliary channels.

    Args:
        night: Complete H×W×3 image in [0,1]
        mask: Missing-region mask of the same H×W
        fill: Value written into missing pixels
        pair_id: Identifier carried on the sample
        canny: Edge detector parameters
        ground_truth: Complete image supervising the inpainter (defaults to `night`)

    Returns:
        MaskedNightSample: incomplete image, gray, partial and ground-truth edges
    """
    require_rgb(night, 'night image')
    require_spatial(night, mask.shape, 'night image')
    if not 0.0 <= fill <= 1.0:
        raise DataError(f"Fill value must lie in [0,1], got {fill}")
    if ground_truth is None:
        ground_truth = night
    require_rgb(ground_truth, 'ground truth')
    require_spatial(ground_truth, mask.shape, 'ground truth')
    canny = canny or CannyParams()

    incomplete = fill_holes(night, mask, fill)
    gray = luminance(incomplete)
    known = mask.grid == 0
    edge_partial = canny_edges(gray, canny.sigma, canny.low, canny.high, valid=known)
    edge_partial = edge_partial * known.astype(np.uint8)
    edge_gt = canny_edges(luminance(ground_truth), canny.sigma, canny.low, canny.high)

    return MaskedNightSample(
        pair_id=pair_id,
        incomplete_night=incomplete,
        mask=mask,
        gray=gray,
        edge_partial=edge_partial,
        edge_gt=edge_gt,
        ground_truth=ground_truth,
    )
