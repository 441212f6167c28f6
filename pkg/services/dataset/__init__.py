# services/dataset/__init__.py
from services.dataset.edges import canny_edges, luminance
from services.dataset.imagery import load_scene_pairs, split_paired_image
from services.dataset.masks import apply_mask, binarize_mask, dilate_mask, fill_holes, load_mask
from services.dataset.splits import (
    assign_masks, build_splits, load_manifest, prepare_dataset, save_manifest
)

__all__ = [
    'apply_mask', 'assign_masks', 'binarize_mask', 'build_splits', 'canny_edges',
    'dilate_mask', 'fill_holes', 'load_manifest', 'load_mask', 'load_scene_pairs',
    'luminance', 'prepare_dataset', 'save_manifest', 'split_paired_image',
]
