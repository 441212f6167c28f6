# services/ablation.py
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models.errors import DataError
from models.types import MaskedNightSample, PipelineConfig, StageOutputs
from services.dataset.masks import apply_mask, dilate_mask
from services.dataset.samples import build_masked_sample
from services.dataset.splits import load_manifest
from services.metrics.evaluation import sample_metrics
from services.metrics.plots import plot_image_grid
from services.pipeline import PipelineCheckpoints, infer, load_checkpoints
from services.run_layout import RunLayout
from utils.artifact_helpers import atomic_write_json, write_csv
from utils.image_io import load_image, save_image

logger = logging.getLogger(__name__)

ABLATION_HEADER = ('k', 'coverage', 'rmse', 'mae', 'ssim', 'ncc')
GRID_COLUMNS = ('input', 'intermediate', 'night gt', 'output', 'day gt')


@dataclass
class SweepRow:
    k: int
    coverage: float
    rmse: float
    mae: float
    ssim: float
    ncc: float

    def as_tuple(self) -> tuple:
        return (self.k, self.coverage, self.rmse, self.mae, self.ssim, self.ncc)


@dataclass
class SweepReport:
    pair_id: str
    order: str
    rows: List[SweepRow] = field(default_factory=list)
    outputs: List[StageOutputs] = field(default_factory=list)
    saturated_at: Optional[int] = None

    @property
    def coverages(self) -> List[float]:
        return [r.coverage for r in self.rows]


def dilation_sweep(sample: MaskedNightSample, checkpoints: PipelineCheckpoints, order: str,
                   max_iterations: int, day_gt: np.ndarray) -> SweepReport:
    """
    Run inference with the sample's mask dilated k = 0..max_iterations times.

    The sweep stops early, without failing, once the mask covers the whole
    image; the step where that happened is kept in `saturated_at`.

    Args:
        sample: Masked sample whose `ground_truth` is the complete night image
        checkpoints: Trained models
        order: M1 or M2
        max_iterations: Largest dilation count, >= 1
        day_gt: Day ground truth of the scene

    Returns:
        SweepReport: One row (and one StageOutputs) per executed k
    """
    if max_iterations < 1:
        raise DataError(f"max_iterations must be >= 1, got {max_iterations}")
    report = SweepReport(pair_id=sample.pair_id, order=order)
    for k in range(max_iterations + 1):
        mask = dilate_mask(sample.mask, k)
        masked = apply_mask(sample.ground_truth, mask, checkpoints.fill, pair_id=sample.pair_id,
                            canny=checkpoints.canny)
        outputs = infer(checkpoints, masked, order)
        values = sample_metrics(outputs.final_image, day_gt, sample.pair_id)
        row = SweepRow(k=k, coverage=mask.coverage, rmse=values['RMSE'], mae=values['MAE'],
                       ssim=values['SSIM'], ncc=values['NCC'])
        report.rows.append(row)
        report.outputs.append(outputs)
        logger.info(f"Dilation k={k}: coverage {row.coverage:.4f}, RMSE {row.rmse:.4f}")
        if mask.coverage >= 1.0 and k < max_iterations:
            report.saturated_at = k
            logger.warning(f"Mask of {sample.pair_id} covers the whole image at k={k}; stopping the sweep")
            break
    return report


def write_sweep(out_dir: str, report: SweepReport, night_gt: np.ndarray, day_gt: np.ndarray) -> str:
    """Write ablation.csv, per-k images, a JSON summary and ablation_grid.png."""
    write_csv(os.path.join(out_dir, 'ablation.csv'), ABLATION_HEADER, [r.as_tuple() for r in report.rows])
    for outputs, row in zip(report.outputs, report.rows):
        k_dir = os.path.join(out_dir, f"k{row.k:02d}")
        save_image(os.path.join(k_dir, 'input.png'), outputs.input_image)
        save_image(os.path.join(k_dir, 'intermediate.png'), outputs.intermediate_image)
        save_image(os.path.join(k_dir, 'final.png'), outputs.final_image)
        save_image(os.path.join(k_dir, 'mask.png'), outputs.mask.grid.astype(np.float64))
    atomic_write_json(os.path.join(out_dir, 'ablation.json'), {
        'pair_id': report.pair_id,
        'order': report.order,
        'saturated_at': report.saturated_at,
        'iterations': [r.k for r in report.rows],
    })
    grid_rows = [[o.input_image, o.intermediate_image, night_gt, o.final_image, day_gt] for o in report.outputs]
    return plot_image_grid(grid_rows, GRID_COLUMNS, [f"k={r.k}" for r in report.rows],
                           os.path.join(out_dir, 'ablation_grid.png'))


def run_ablation(run_dir: str, config: PipelineConfig, pair_id: Optional[str] = None,
                 max_iterations: Optional[int] = None) -> SweepReport:
    """Dilation sweep on one test sample of a trained run; results go to ablation/."""
    layout = RunLayout(run_dir)
    manifest = load_manifest(layout.manifest_path)
    pair_id = pair_id or config.ablation.pair_id or manifest.test_ids[0]
    if pair_id not in manifest.mask_assignment:
        raise DataError(f"Unknown pair id '{pair_id}'")
    max_iterations = config.ablation.max_iterations if max_iterations is None else max_iterations

    checkpoints = load_checkpoints(run_dir, config)
    sample = build_masked_sample(layout, manifest, pair_id, config.canny)
    day_gt = load_image(layout.day_path(pair_id))
    report = dilation_sweep(sample, checkpoints, config.order, max_iterations, day_gt)
    write_sweep(layout.ablation_dir, report, sample.ground_truth, day_gt)
    return report
