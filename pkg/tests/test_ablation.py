# tests/test_ablation.py
import os

import numpy as np
import pytest

from models.errors import DataError
from services.ablation import dilation_sweep, run_ablation
from services.dataset.samples import build_masked_sample
from services.pipeline import infer, load_checkpoints
from services.run_layout import RunLayout
from utils.artifact_helpers import load_json, read_csv
from utils.image_io import load_image


def _sweep_inputs(run):
    run_dir, config, manifest = run
    layout = RunLayout(run_dir)
    pair_id = manifest.test_ids[0]
    sample = build_masked_sample(layout, manifest, pair_id, config.canny)
    return sample, load_checkpoints(run_dir, config), load_image(layout.day_path(pair_id))


class TestDilationSweep:
    def test_coverage_is_monotone(self, trained_m1_run):
        sample, checkpoints, day_gt = _sweep_inputs(trained_m1_run)
        report = dilation_sweep(sample, checkpoints, 'M1', 4, day_gt)
        assert [r.k for r in report.rows] == [0, 1, 2, 3, 4]
        assert all(a <= b for a, b in zip(report.coverages, report.coverages[1:]))
        assert report.saturated_at is None

    def test_zero_dilation_matches_plain_inference(self, trained_m2_run):
        sample, checkpoints, day_gt = _sweep_inputs(trained_m2_run)
        report = dilation_sweep(sample, checkpoints, 'M2', 1, day_gt)
        expected = infer(checkpoints, sample, 'M2')
        assert np.array_equal(report.outputs[0].final_image, expected.final_image)
        assert report.rows[0].coverage == sample.mask.coverage

    def test_stops_once_mask_covers_image(self, trained_m1_run):
        sample, checkpoints, day_gt = _sweep_inputs(trained_m1_run)
        report = dilation_sweep(sample, checkpoints, 'M1', 40, day_gt)
        assert report.saturated_at is not None
        assert report.rows[-1].k == report.saturated_at
        assert report.rows[-1].coverage == 1.0
        assert all(c < 1.0 for c in report.coverages[:-1])

    def test_needs_at_least_one_iteration(self, trained_m1_run):
        sample, checkpoints, day_gt = _sweep_inputs(trained_m1_run)
        with pytest.raises(DataError):
            dilation_sweep(sample, checkpoints, 'M1', 0, day_gt)


class TestRunAblation:
    def test_writes_results(self, trained_m1_run):
        run_dir, config, manifest = trained_m1_run
        report = run_ablation(run_dir, config, max_iterations=2)
        out_dir = os.path.join(run_dir, 'ablation')
        rows = read_csv(os.path.join(out_dir, 'ablation.csv'))
        assert [int(r['k']) for r in rows] == [0, 1, 2]
        assert list(rows[0]) == ['k', 'coverage', 'rmse', 'mae', 'ssim', 'ncc']
        for k in range(3):
            for name in ('input', 'intermediate', 'final', 'mask'):
                assert os.path.exists(os.path.join(out_dir, f"k{k:02d}", f"{name}.png"))
        assert os.path.exists(os.path.join(out_dir, 'ablation_grid.png'))
        summary = load_json(os.path.join(out_dir, 'ablation.json'))
        assert summary['pair_id'] == report.pair_id == manifest.test_ids[0]
        assert summary['iterations'] == [0, 1, 2]

    def test_unknown_pair_raises(self, trained_m1_run):
        run_dir, config, _ = trained_m1_run
        with pytest.raises(DataError):
            run_ablation(run_dir, config, pair_id='no_such_scene', max_iterations=1)
