# services/dataset/splits.py
import logging
import os
from typing import Dict, List, Sequence

import numpy as np
from marshmallow import ValidationError

from models.errors import ConfigError, DataError, DuplicateIdError
from models.schemas import ManifestSchema
from models.types import DatasetManifest, PipelineConfig
from services.dataset.imagery import load_scene_pairs
from services.run_layout import RunLayout
from utils.artifact_helpers import atomic_write_json, load_json
from utils.image_io import list_images, save_image

logger = logging.getLogger(__name__)

SPLIT_NAMES = ('train', 'val', 'test')


def split_sizes(n: int) -> Dict[str, int]:
    """80/10/10 partition sizes; val and test round half up, train takes the rest."""
    tenth = (n + 5) // 10
    return {'train': n - 2 * tenth, 'val': tenth, 'test': tenth}


def build_splits(pair_ids: Sequence[str], seed: int, image_size: int = 256,
                 **manifest_fields) -> DatasetManifest:
    """
    Deterministically partition pair ids into train/val/test.

    Ids are sorted before a seeded shuffle, so the result depends only on the
    set of ids and the seed.

    Args:
        pair_ids: Unique pair identifiers
        seed: Shuffle seed
        image_size: Side length recorded in the manifest
        **manifest_fields: Extra DatasetManifest fields (day_side, fill, ...)

    Returns:
        DatasetManifest: Manifest with an empty mask assignment
    """
    if not pair_ids:
        raise DataError("Cannot split an empty id list")
    if len(set(pair_ids)) != len(pair_ids):
        seen, dupes = set(), set()
        for pair_id in pair_ids:
            (dupes if pair_id in seen else seen).add(pair_id)
        raise DuplicateIdError(f"Duplicate pair ids: {sorted(dupes)}")

    order = np.random.default_rng(seed).permutation(len(pair_ids))
    ids = sorted(pair_ids)
    shuffled = [ids[i] for i in order]
    sizes = split_sizes(len(ids))
    train = shuffled[:sizes['train']]
    val = shuffled[sizes['train']:sizes['train'] + sizes['val']]
    test = shuffled[sizes['train'] + sizes['val']:]
    logger.info(f"Split {len(ids)} ids into {len(train)}/{len(val)}/{len(test)} (seed {seed})")
    return DatasetManifest(train_ids=train, val_ids=val, test_ids=test, mask_assignment={},
                           seed=seed, image_size=image_size, **manifest_fields)


def assign_masks(manifest: DatasetManifest, mask_paths: Sequence[str], seed: int) -> Dict[str, str]:
    """
    Assign one corpus mask per pair, drawn without replacement within each split.

    A split larger than the corpus starts a fresh permutation once the current
    one is used up.

    Args:
        manifest: Manifest with populated splits
        mask_paths: Mask file paths
        seed: Assignment seed

    Returns:
        Dict mapping pair id to mask path
    """
    if not mask_paths:
        raise DataError("Mask corpus is empty")
    corpus = sorted(mask_paths)
    assignment = {}
    for split_index, name in enumerate(SPLIT_NAMES):
        rng = np.random.default_rng([seed, split_index])
        queue: List[int] = []
        for pair_id in manifest.split(name):
            if not queue:
                queue = list(rng.permutation(len(corpus)))
            assignment[pair_id] = corpus[queue.pop(0)]
    return assignment


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    return ManifestSchema().dump(manifest)


def save_manifest(path: str, manifest: DatasetManifest) -> str:
    """Write the manifest as canonical JSON (write-temp-then-rename)."""
    atomic_write_json(path, manifest_to_dict(manifest))
    logger.info(f"Manifest written to {path}")
    return path


def load_manifest(path: str) -> DatasetManifest:
    """Load and validate a manifest file."""
    try:
        return ManifestSchema().load(load_json(path))
    except ValidationError as e:
        raise ConfigError(f"Invalid manifest {path}: {e.messages}") from e


def prepare_dataset(run_dir: str, config: PipelineConfig) -> DatasetManifest:
    """
    Ingest raw pairs and the mask corpus into a run directory.

    Writes `data/{night,day}/<id>.png` at the configured size and
    `manifest.json` with the splits and the mask assignment.

    Args:
        run_dir: Run directory
        config: Effective run configuration

    Returns:
        DatasetManifest: The written manifest
    """
    layout = RunLayout(run_dir)
    data = config.data
    pairs = load_scene_pairs(data.pairs_dir, data.layout, data.day_side, config.image_size)
    for pair in pairs:
        save_image(layout.night_path(pair.id), pair.night)
        save_image(layout.day_path(pair.id), pair.day)

    manifest = build_splits([p.id for p in pairs], config.seeds.data, config.image_size,
                            day_side=data.day_side, fill=config.fill,
                            missing_is_dark=data.missing_is_dark, layout=data.layout)
    mask_paths = [os.path.abspath(p) for p in list_images(data.masks_dir)]
    manifest.mask_assignment = assign_masks(manifest, mask_paths, config.seeds.data)
    save_manifest(layout.manifest_path, manifest)
    logger.info(f"Prepared {len(pairs)} pairs and {len(mask_paths)} masks in {layout.root}")
    return manifest
