# services/pipeline.py
import logging
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

from config import active_config
from models.errors import StageOrderError
from models.types import (
    CannyParams, DatasetManifest, MaskedNightSample, PipelineConfig, StageOutputs
)
from services.dataset.masks import apply_mask, fill_holes, load_mask
from services.dataset.samples import InpaintingSamples, build_masked_sample
from services.dataset.splits import load_manifest
from services.inpainter.model import (
    INPAINTER_STAGES, InpainterCheckpoint, inpaint, load_inpainter, save_inpainter
)
from services.inpainter.training import fit_inpainter
from services.run_layout import RunLayout
from services.run_registry import RunRegistry
from services.stage_outputs import save_stage_outputs
from services.translator.model import (
    TranslatorCheckpoint, load_translator, save_translator, translate
)
from services.translator.training import train_translator
from utils.artifact_helpers import atomic_write_json, load_json, sha256_file, sha256_json
from utils.image_io import load_image, quantize, save_image

logger = logging.getLogger(__name__)

TRANSLATOR_CHECKPOINT = 'translator.ckpt'
STAGE_FILE = 'stage.json'


def inpainter_checkpoint_name(substage: str) -> str:
    return f"inpainter_{substage}.ckpt"


@dataclass
class PipelineCheckpoints:
    """Trained models of one run plus the masking parameters inference re-applies."""
    order: str
    inpainter: InpainterCheckpoint
    translator: TranslatorCheckpoint
    fill: float = 1.0
    canny: Optional[CannyParams] = None


def _components(order: str) -> Tuple[str, str]:
    return ('inpainter', 'translator') if order == 'M1' else ('translator', 'inpainter')


def _stage_fingerprint(config: PipelineConfig, manifest_sha: str, stage: int,
                       upstream_sha: Optional[str]) -> dict:
    component = _components(config.order)[stage - 1]
    hyperparams = config.inpainter if component == 'inpainter' else config.translator
    return {
        'order': config.order,
        'stage': stage,
        'component': component,
        'hyperparams': asdict(hyperparams),
        'seed': config.seeds.stage1 if stage == 1 else config.seeds.stage2,
        'data_seed': config.seeds.data,
        'manifest_sha256': manifest_sha,
        'fill': config.fill,
        'canny': asdict(config.canny),
        'image_size': config.image_size,
        'upstream_sha256': upstream_sha,
    }


def _write_stage_file(layout: RunLayout, stage: int, fingerprint: dict, checkpoint_path: str) -> None:
    atomic_write_json(os.path.join(layout.stage_dir(stage), STAGE_FILE), {
        'order': fingerprint['order'],
        'component': fingerprint['component'],
        'fingerprint': sha256_json(fingerprint),
        'inputs': fingerprint,
        'checkpoint': os.path.basename(checkpoint_path),
        'checkpoint_sha256': sha256_file(checkpoint_path),
    })


def _train_inpainter_stage(layout: RunLayout, registry: RunRegistry, config: PipelineConfig, stage: int,
                           dataset: InpaintingSamples, fingerprint: dict) -> Tuple[InpainterCheckpoint, str]:
    """Run edge -> inpaint -> joint, skipping sub-stages whose checkpoint is current."""
    seed = config.seeds.stage1 if stage == 1 else config.seeds.stage2
    checkpoint: Optional[InpainterCheckpoint] = None
    previous_sha: Optional[str] = None
    previous_name = ''
    path = ''
    for substage in INPAINTER_STAGES:
        name = f"stage{stage}/inpainter_{substage}"
        path = os.path.join(layout.stage_dir(stage), inpainter_checkpoint_name(substage))
        sub_fp = sha256_json({**fingerprint, 'substage': substage, 'previous_sha256': previous_sha})
        if registry.is_current(name, sub_fp):
            logger.info(f"Skipping {name}: checkpoint is current")
            checkpoint = load_inpainter(path)
        else:
            checkpoint = fit_inpainter(dataset, config.inpainter, substage, seed=seed,
                                       image_size=config.image_size, previous=checkpoint,
                                       loss_path=layout.loss_path(f"stage{stage}_inpainter_{substage}"))
            save_inpainter(path, checkpoint)
            registry.register_artifact(name, path, sub_fp, {'substage': substage})
            if previous_name:
                registry.register_dependency(name, previous_name)
            registry.save()
        previous_sha = sha256_file(path)
        previous_name = name
    return checkpoint, path


def _train_translator_stage(layout: RunLayout, registry: RunRegistry, config: PipelineConfig, stage: int,
                            source_dir: str, target_dir: str, fingerprint: dict) -> Tuple[TranslatorCheckpoint, str]:
    name = f"stage{stage}/translator"
    path = os.path.join(layout.stage_dir(stage), TRANSLATOR_CHECKPOINT)
    stage_fp = sha256_json(fingerprint)
    if registry.is_current(name, stage_fp):
        logger.info(f"Skipping {name}: checkpoint is current")
        return load_translator(path), path
    seed = config.seeds.stage1 if stage == 1 else config.seeds.stage2
    checkpoint = train_translator(source_dir, target_dir, config.translator, seed=seed,
                                  loss_path=layout.loss_path(f"stage{stage}_translator"))
    save_translator(path, checkpoint)
    registry.register_artifact(name, path, stage_fp)
    registry.save()
    return checkpoint, path


def _write_day_targets(layout: RunLayout, pair_ids: List[str], out_dir: str) -> str:
    """Target-domain folder holding the day ground truths of the given ids."""
    if os.path.isdir(out_dir):
        shutil.rmtree(out_dir)
    os.makedirs(out_dir)
    for pair_id in pair_ids:
        shutil.copyfile(layout.day_path(pair_id), os.path.join(out_dir, f"{pair_id}.png"))
    return out_dir


def _night_samples(layout: RunLayout, manifest: DatasetManifest, config: PipelineConfig) -> InpaintingSamples:
    return InpaintingSamples(
        manifest.train_ids, lambda pair_id: build_masked_sample(layout, manifest, pair_id, config.canny))


def train_m1(manifest: DatasetManifest, config: PipelineConfig,
             run_dir: str) -> Tuple[InpainterCheckpoint, TranslatorCheckpoint]:
    """
    Inpaint-first training.

    Stage 1 trains the inpainter on masked night images; its outputs over the
    training split are written to stage1/inpainted/ and become the source domain
    of the stage-2 translator, whose target domain is the training day images.

    Args:
        manifest: Dataset manifest of the run
        config: Effective run configuration (order M1)
        run_dir: Run directory

    Returns:
        (stage-1 inpainter, stage-2 translator)
    """
    if config.order != 'M1':
        raise StageOrderError(f"train_m1 called with order {config.order}")
    layout = RunLayout(run_dir)
    registry = RunRegistry.load(layout)
    manifest_sha = sha256_file(layout.manifest_path)

    stage1_fp = _stage_fingerprint(config, manifest_sha, 1, None)
    inpainter, stage1_path = _train_inpainter_stage(
        layout, registry, config, 1, _night_samples(layout, manifest, config), stage1_fp)
    _write_stage_file(layout, 1, stage1_fp, stage1_path)

    stage2_fp = _stage_fingerprint(config, manifest_sha, 2, sha256_file(stage1_path))
    stage2_name = 'stage2/translator'
    if not registry.is_current(stage2_name, sha256_json(stage2_fp)):
        source_dir = layout.path('stage1', 'inpainted')
        if os.path.isdir(source_dir):
            shutil.rmtree(source_dir)
        for pair_id in manifest.train_ids:
            sample = build_masked_sample(layout, manifest, pair_id, config.canny)
            save_image(os.path.join(source_dir, f"{pair_id}.png"), inpaint(inpainter, sample)[1])
        logger.info(f"Precomputed {len(manifest.train_ids)} inpainted night images in {source_dir}")
    target_dir = _write_day_targets(layout, manifest.train_ids, layout.path('stage2', 'target'))
    translator, stage2_path = _train_translator_stage(
        layout, registry, config, 2, layout.path('stage1', 'inpainted'), target_dir, stage2_fp)
    registry.register_dependency(stage2_name, 'stage1/inpainter_joint')
    registry.save()
    _write_stage_file(layout, 2, stage2_fp, stage2_path)
    return inpainter, translator


def _translated_with_holes(translator: TranslatorCheckpoint, sample: MaskedNightSample, fill: float):
    """Day-domain image of the incomplete night with its holes re-filled, at 8-bit precision."""
    return quantize(fill_holes(translate(translator, sample.incomplete_night), sample.mask, fill))


def train_m2(manifest: DatasetManifest, config: PipelineConfig,
             run_dir: str) -> Tuple[TranslatorCheckpoint, InpainterCheckpoint]:
    """
    Translate-first training.

    Stage 1 trains the translator from incomplete nights to training day images.
    Stage 2 trains the inpainter in the day domain: inputs are the translated
    images with holes re-filled (stage1/translated/), ground truth is the day
    image.

    Args:
        manifest: Dataset manifest of the run
        config: Effective run configuration (order M2)
        run_dir: Run directory

    Returns:
        (stage-1 translator, stage-2 inpainter)
    """
    if config.order != 'M2':
        raise StageOrderError(f"train_m2 called with order {config.order}")
    layout = RunLayout(run_dir)
    registry = RunRegistry.load(layout)
    manifest_sha = sha256_file(layout.manifest_path)

    source_dir = layout.path('stage1', 'source')
    if os.path.isdir(source_dir):
        shutil.rmtree(source_dir)
    for pair_id in manifest.train_ids:
        sample = build_masked_sample(layout, manifest, pair_id, config.canny)
        save_image(os.path.join(source_dir, f"{pair_id}.png"), sample.incomplete_night)
    target_dir = _write_day_targets(layout, manifest.train_ids, layout.path('stage1', 'target'))
    stage1_fp = _stage_fingerprint(config, manifest_sha, 1, None)
    translator, stage1_path = _train_translator_stage(
        layout, registry, config, 1, source_dir, target_dir, stage1_fp)
    _write_stage_file(layout, 1, stage1_fp, stage1_path)

    translated_dir = layout.path('stage1', 'translated')
    if os.path.isdir(translated_dir):
        shutil.rmtree(translated_dir)
    for pair_id in manifest.train_ids:
        sample = build_masked_sample(layout, manifest, pair_id, config.canny)
        save_image(os.path.join(translated_dir, f"{pair_id}.png"),
                   _translated_with_holes(translator, sample, config.fill))
    logger.info(f"Precomputed {len(manifest.train_ids)} translated images in {translated_dir}")

    def day_sample(pair_id: str) -> MaskedNightSample:
        mask = load_mask(manifest.mask_assignment[pair_id], manifest.image_size, manifest.missing_is_dark)
        return apply_mask(load_image(os.path.join(translated_dir, f"{pair_id}.png")), mask, config.fill,
                          pair_id=pair_id, canny=config.canny, ground_truth=load_image(layout.day_path(pair_id)))

    stage2_fp = _stage_fingerprint(config, manifest_sha, 2, sha256_file(stage1_path))
    inpainter, stage2_path = _train_inpainter_stage(
        layout, registry, config, 2, InpaintingSamples(manifest.train_ids, day_sample), stage2_fp)
    registry.register_dependency('stage2/inpainter_edge', 'stage1/translator')
    registry.save()
    _write_stage_file(layout, 2, stage2_fp, stage2_path)
    return translator, inpainter


def _check_run_order(layout: RunLayout, order: str) -> None:
    stage_file = os.path.join(layout.stage_dir(1), STAGE_FILE)
    if os.path.exists(stage_file):
        trained = load_json(stage_file)['order']
        if trained != order:
            raise StageOrderError(f"Run {layout.root} was trained with order {trained}, not {order}")


def train_pipeline(manifest: DatasetManifest, config: PipelineConfig, run_dir: str):
    """Two-stage training in the configured order; the order of a run cannot change."""
    _check_run_order(RunLayout(run_dir), config.order)
    if config.order == 'M1':
        return train_m1(manifest, config, run_dir)
    return train_m2(manifest, config, run_dir)


def load_checkpoints(run_dir: str, config: PipelineConfig) -> PipelineCheckpoints:
    """
    Load the trained models of a run.

    Raises:
        MissingArtifactError: If a stage has not been trained
        StageOrderError: If the stages were trained for another order
    """
    layout = RunLayout(run_dir)
    components = _components(config.order)
    paths = {}
    for stage, component in enumerate(components, start=1):
        info = load_json(os.path.join(layout.stage_dir(stage), STAGE_FILE))
        if info['order'] != config.order or info['component'] != component:
            raise StageOrderError(
                f"stage{stage} holds a {info['order']} {info['component']} model, "
                f"expected {config.order} {component}")
        paths[component] = os.path.join(layout.stage_dir(stage), info['checkpoint'])
    return PipelineCheckpoints(order=config.order, inpainter=load_inpainter(paths['inpainter']),
                               translator=load_translator(paths['translator']),
                               fill=config.fill, canny=config.canny)


def infer(checkpoints: PipelineCheckpoints, sample: MaskedNightSample, order: str) -> StageOutputs:
    """
    Run both stages on one masked sample.

    M1: intermediate = inpaint(sample), final = translate(intermediate).
    M2: intermediate = translate(incomplete) with holes re-filled, final =
    inpaint over the intermediate with the same mask. Intermediates are
    quantized to 8 bits before the second stage reads them.

    Raises:
        StageOrderError: If `order` differs from the order the checkpoints were trained for
    """
    if order != checkpoints.order:
        raise StageOrderError(f"Checkpoints were trained for {checkpoints.order}, not {order}")
    if order == 'M1':
        intermediate = quantize(inpaint(checkpoints.inpainter, sample)[1])
        final = translate(checkpoints.translator, intermediate)
    else:
        intermediate = _translated_with_holes(checkpoints.translator, sample, checkpoints.fill)
        day_sample = apply_mask(intermediate, sample.mask, checkpoints.fill,
                                pair_id=sample.pair_id, canny=checkpoints.canny)
        final = inpaint(checkpoints.inpainter, day_sample)[1]
    return StageOutputs(pair_id=sample.pair_id, input_image=sample.incomplete_night,
                        intermediate_image=intermediate, final_image=quantize(final), mask=sample.mask)


def infer_test_split(run_dir: str, config: PipelineConfig,
                     checkpoints: Optional[PipelineCheckpoints] = None) -> List[StageOutputs]:
    """
    Batch inference over the test split; one StageOutputs per test id, persisted
    under outputs/.
    """
    layout = RunLayout(run_dir)
    manifest = load_manifest(layout.manifest_path)
    checkpoints = checkpoints or load_checkpoints(run_dir, config)

    def run_one(pair_id: str) -> StageOutputs:
        outputs = infer(checkpoints, build_masked_sample(layout, manifest, pair_id, config.canny), config.order)
        save_stage_outputs(layout, outputs)
        return outputs

    workers = max(1, int(active_config.NUM_WORKERS))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_one, manifest.test_ids))
    logger.info(f"Inferred {len(results)} test samples with order {config.order} ({workers} workers)")
    return results
