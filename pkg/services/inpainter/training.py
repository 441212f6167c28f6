# services/inpainter/training.py
import logging
from typing import Callable, Dict, Iterator, Optional

import torch
from torch.utils.data import DataLoader, Dataset

from models.errors import DataError, StageOrderError, TrainingDivergedError
from models.types import CannyParams, DatasetManifest, InpainterConfig
from services.dataset.samples import InpaintingSamples, build_masked_sample
from services.inpainter.model import (
    INPAINTER_STAGES, InpainterCheckpoint, build_inpainter, merge_edges, move_inpainter
)
from services.networks import (
    feature_matching_loss, hinge_discriminator_loss, hinge_generator_loss
)
from services.run_layout import RunLayout
from utils.artifact_helpers import LossLog
from utils.seeding import get_device, seed_everything

logger = logging.getLogger(__name__)

# Stage that must already be completed before each stage may run
PREREQUISITES = {
    'edge': (),
    'inpaint': ('edge', 'inpaint', 'joint'),
    'joint': ('inpaint', 'joint'),
}


def _cycle(loader: DataLoader) -> Iterator[Dict[str, torch.Tensor]]:
    while True:
        for batch in loader:
            yield batch


def _check_prerequisite(stage: str, previous: Optional[InpainterCheckpoint]) -> None:
    if stage not in INPAINTER_STAGES:
        raise StageOrderError(f"Unknown inpainter stage '{stage}'")
    required = PREREQUISITES[stage]
    if not required:
        return
    completed = previous.training_stage_completed if previous is not None else None
    if completed not in required:
        needed = 'edge' if stage == 'inpaint' else 'edge and inpaint'
        raise StageOrderError(
            f"Stage '{stage}' needs a completed {needed} checkpoint, got {completed or 'none'}")


def _edge_step(ckpt: InpainterCheckpoint, batch, opt_g, opt_d, config: InpainterConfig) -> Dict[str, float]:
    gen, disc = ckpt.edge_model.generator, ckpt.edge_model.discriminator
    soft = gen(batch['gray'], batch['edge_partial'], batch['mask'])
    real_input = torch.cat([batch['gray_gt'], batch['edge_gt']], dim=1)

    real_logits, _ = disc(real_input)
    fake_logits, _ = disc(torch.cat([batch['gray_gt'], soft.detach()], dim=1))
    d_loss = hinge_discriminator_loss(real_logits, fake_logits)
    opt_d.zero_grad()
    d_loss.backward()
    opt_d.step()

    fake_logits, fake_feats = disc(torch.cat([batch['gray_gt'], soft], dim=1))
    with torch.no_grad():
        _, real_feats = disc(real_input)
    adv = config.adv_weight * hinge_generator_loss(fake_logits)
    fm = config.feat_match_weight * feature_matching_loss(fake_feats, real_feats)
    opt_g.zero_grad()
    (adv + fm).backward()
    opt_g.step()
    return {'edge_d': d_loss.item(), 'edge_g_adv': adv.item(), 'edge_g_fm': fm.item()}


def _inpaint_losses(ckpt: InpainterCheckpoint, batch, edge: torch.Tensor, opt_d,
                    config: InpainterConfig, extra_d_loss: Optional[torch.Tensor] = None):
    gen, disc = ckpt.inpaint_model.generator, ckpt.inpaint_model.discriminator
    raw = gen(batch['incomplete'], edge)

    real_logits, _ = disc(batch['ground_truth'])
    fake_logits, _ = disc(raw.detach())
    d_loss = hinge_discriminator_loss(real_logits, fake_logits)
    opt_d.zero_grad()
    (d_loss if extra_d_loss is None else d_loss + extra_d_loss).backward()
    opt_d.step()

    fake_logits, _ = disc(raw)
    adv = config.adv_weight * hinge_generator_loss(fake_logits)
    l1 = config.l1_weight * torch.mean(torch.abs(raw - batch['ground_truth']))
    return adv + l1, {'inpaint_d': d_loss.item(), 'inpaint_g_adv': adv.item(), 'inpaint_l1': l1.item()}


def _inpaint_step(ckpt, batch, opt_g, opt_d, config) -> Dict[str, float]:
    edge = merge_edges(batch['edge_gt'], batch['edge_partial'], batch['mask'])
    g_loss, losses = _inpaint_losses(ckpt, batch, edge, opt_d, config)
    opt_g.zero_grad()
    g_loss.backward()
    opt_g.step()
    return losses


def _joint_step(ckpt, batch, opt_g, opt_d, config) -> Dict[str, float]:
    soft = ckpt.edge_model.generator(batch['gray'], batch['edge_partial'], batch['mask'])

    edge_disc = ckpt.edge_model.discriminator
    real_logits, _ = edge_disc(torch.cat([batch['gray_gt'], batch['edge_gt']], dim=1))
    fake_logits, _ = edge_disc(torch.cat([batch['gray_gt'], soft.detach()], dim=1))
    edge_d = hinge_discriminator_loss(real_logits, fake_logits)

    edge = merge_edges(soft, batch['edge_partial'], batch['mask'])
    g_loss, losses = _inpaint_losses(ckpt, batch, edge, opt_d, config, extra_d_loss=edge_d)

    opt_g.zero_grad()
    g_loss.backward()
    opt_g.step()
    losses['edge_d'] = edge_d.item()
    return losses


STEP_FUNCTIONS: Dict[str, Callable] = {
    'edge': _edge_step,
    'inpaint': _inpaint_step,
    'joint': _joint_step,
}


def _optimizers(ckpt: InpainterCheckpoint, stage: str, config: InpainterConfig):
    generators, discriminators = [], []
    if stage in ('edge', 'joint'):
        generators.append(ckpt.edge_model.generator)
        discriminators.append(ckpt.edge_model.discriminator)
    if stage in ('inpaint', 'joint'):
        generators.append(ckpt.inpaint_model.generator)
        discriminators.append(ckpt.inpaint_model.discriminator)
    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam([p for m in generators for p in m.parameters()], lr=config.lr, betas=betas)
    opt_d = torch.optim.Adam([p for m in discriminators for p in m.parameters()], lr=config.lr, betas=betas)
    return opt_g, opt_d


def fit_inpainter(dataset: Dataset, config: InpainterConfig, stage: str, *, seed: int, image_size: int,
                  previous: Optional[InpainterCheckpoint] = None,
                  loss_path: Optional[str] = None) -> InpainterCheckpoint:
    """
    Run one inpainter training stage over a tensor sample set.

    The edge stage trains the edge model alone, the inpaint stage trains the
    completion model on ground-truth edges, and the joint stage fine-tunes both
    with the completion losses. `previous` is never modified.

    Args:
        dataset: Sample set yielding the tensor dicts of `sample_to_tensors`
        config: Inpainter hyperparameters
        stage: One of edge, inpaint, joint
        seed: Seed for initialisation (edge stage without `previous`) and data order
        image_size: Training side length
        previous: Checkpoint of the preceding stage
        loss_path: Where to write the loss CSV

    Returns:
        InpainterCheckpoint: Checkpoint with `training_stage_completed = stage`

    Raises:
        StageOrderError: If the prerequisite stage is missing
        TrainingDivergedError: If a loss term becomes non-finite
    """
    _check_prerequisite(stage, previous)
    if len(dataset) == 0:
        raise DataError(f"Inpainter stage '{stage}' has no training samples")

    checkpoint = previous.copy() if previous is not None else build_inpainter(config, seed, image_size)
    steps = config.steps_for(stage)
    generator = seed_everything(seed + 1000 * (INPAINTER_STAGES.index(stage) + 1))
    device = get_device()
    move_inpainter(checkpoint, device)

    loader = DataLoader(dataset, batch_size=min(config.batch_size, len(dataset)), shuffle=True,
                        generator=generator, num_workers=0)
    batches = _cycle(loader)
    opt_g, opt_d = _optimizers(checkpoint, stage, config)
    step_fn = STEP_FUNCTIONS[stage]
    log = LossLog()

    logger.info(f"Training inpainter stage '{stage}' for {steps} steps on {len(dataset)} samples")
    for step in range(1, steps + 1):
        batch = {k: v.to(device) for k, v in next(batches).items()}
        losses = step_fn(checkpoint, batch, opt_g, opt_d, config)
        bad = log.non_finite(losses)
        if bad is not None:
            if loss_path:
                log.record(step, losses)
                log.save(loss_path)
            raise TrainingDivergedError(stage, step, bad[0], bad[1])
        if step % config.log_every == 0 or step == steps:
            log.record(step, losses)
            summary = ', '.join(f"{k}={v:.4f}" for k, v in sorted(losses.items()))
            logger.info(f"[{stage}] step {step}/{steps}: {summary}")

    if loss_path:
        log.save(loss_path)
    move_inpainter(checkpoint, torch.device('cpu'))
    checkpoint.training_stage_completed = stage
    checkpoint.step_count += steps
    checkpoint.stage_steps[stage] = checkpoint.stage_steps.get(stage, 0) + steps
    return checkpoint


def train_inpainter(manifest: DatasetManifest, config: InpainterConfig, stage: str, *, run_dir: str,
                    seed: int, previous: Optional[InpainterCheckpoint] = None,
                    canny: Optional[CannyParams] = None,
                    loss_path: Optional[str] = None) -> InpainterCheckpoint:
    """Train one stage on the masked night images of the manifest's training split."""
    layout = RunLayout(run_dir)
    dataset = InpaintingSamples(
        manifest.train_ids, lambda pair_id: build_masked_sample(layout, manifest, pair_id, canny))
    return fit_inpainter(dataset, config, stage, seed=seed, image_size=manifest.image_size,
                         previous=previous, loss_path=loss_path)
