# tests/test_metrics.py
import math
import os

import numpy as np
import pytest
import scipy.linalg
from skimage.metrics import structural_similarity

from models.errors import DataError, DegenerateInputError, DimensionError, MissingGroundTruthError
from models.types import ALL_METRICS, HISTOGRAM_RANGES, Mask, PhaseReport, StageOutputs
from services.dataset.edges import luminance
from services.metrics import (
    ProjectionEmbedder, build_histogram, compare_models, evaluate_phases, fid, frechet_distance,
    load_phase_report, mae, ncc, rmse, ssim
)
from services.metrics.evaluation import headline_values, write_phase_reports
from services.metrics.similarity import SSIM_C1


def _brute_rmse(a, b):
    total, n = 0.0, 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for c in range(a.shape[2]):
                total += (a[i, j, c] - b[i, j, c]) ** 2
                n += 1
    return math.sqrt(total / n)


def _brute_mae(a, b):
    return sum(abs(x - y) for x, y in zip(a.ravel(), b.ravel())) / a.size


def _brute_ncc(a, b):
    xs, ys = a.ravel(), b.ravel()
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs) * sum((y - my) ** 2 for y in ys))
    return num / den


class TestPixelMetrics:
    def test_match_brute_force(self, rng):
        for _ in range(50):
            a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
            assert rmse(a, b) == pytest.approx(_brute_rmse(a, b), abs=1e-12)
            assert mae(a, b) == pytest.approx(_brute_mae(a, b), abs=1e-12)
            assert ncc(a, b) == pytest.approx(_brute_ncc(a, b), abs=1e-12)

    def test_identities(self, rng):
        a = rng.random((16, 16, 3))
        assert rmse(a, a) == 0.0
        assert mae(a, a) == 0.0
        assert ncc(a, a) == pytest.approx(1.0, abs=1e-12)
        assert ncc(a, 1.0 - a) == pytest.approx(-1.0, abs=1e-12)
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self, rng):
        a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
        for fn in (rmse, mae, ncc, ssim):
            assert fn(a, b) == pytest.approx(fn(b, a), abs=1e-12)

    def test_ncc_affine_invariant(self, rng):
        a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
        assert ncc(0.5 * a + 0.2, b) == pytest.approx(ncc(a, b), abs=1e-12)

    def test_ncc_constant_image_is_degenerate(self, rng):
        with pytest.raises(DegenerateInputError):
            ncc(np.full((8, 8, 3), 0.3), rng.random((8, 8, 3)))

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            rmse(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))


class TestSSIM:
    def test_opposite_constants_closed_form(self):
        white, black = np.ones((16, 16, 3)), np.zeros((16, 16, 3))
        assert ssim(white, black) == pytest.approx(SSIM_C1 / (1 + SSIM_C1), abs=1e-12)

    def test_matches_skimage_on_luminance(self, rng):
        for _ in range(5):
            a, b = rng.random((32, 32, 3)), rng.random((32, 32, 3))
            expected = structural_similarity(
                luminance(a)[:, :, 0], luminance(b)[:, :, 0], gaussian_weights=True, sigma=1.5,
                use_sample_covariance=False, data_range=1.0
            )
            assert ssim(a, b) == pytest.approx(expected, abs=1e-6)

    def test_in_range(self, rng):
        a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
        assert -1.0 <= ssim(a, b) <= 1.0

    def test_too_small_raises(self):
        with pytest.raises(DimensionError):
            ssim(np.zeros((10, 10, 3)), np.zeros((10, 10, 3)))


class TestFrechetDistance:
    def test_same_set_is_zero(self, rng):
        feats = rng.standard_normal((200, 8))
        assert frechet_distance(feats, feats) <= 1e-8

    def test_gaussian_closed_form(self, rng):
        # offset of 0.5 in each of 16 dims has squared norm 4
        a = rng.standard_normal((10000, 16))
        b = rng.standard_normal((10000, 16)) + 0.5
        assert frechet_distance(a, b) == pytest.approx(4.0, rel=0.05)

    def test_matches_sqrtm_formula(self, rng):
        embedder = ProjectionEmbedder(dim=16, seed=1)
        set_a = [rng.random((16, 16, 3)) for _ in range(64)]
        set_b = [np.clip(rng.random((16, 16, 3)) * 0.6 + 0.3, 0, 1) for _ in range(64)]
        fa, fb = embedder.embed(set_a), embedder.embed(set_b)
        cov_a, cov_b = np.cov(fa, rowvar=False), np.cov(fb, rowvar=False)
        covmean = scipy.linalg.sqrtm(cov_a @ cov_b).real
        diff = fa.mean(axis=0) - fb.mean(axis=0)
        expected = diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2 * np.trace(covmean)
        assert fid(set_a, set_b, embedder) == pytest.approx(expected, rel=1e-6, abs=1e-9)

    def test_non_negative(self, rng):
        for _ in range(10):
            a = rng.standard_normal((30, 5))
            assert frechet_distance(a, a + 1e-12) >= 0.0

    def test_single_sample_raises(self, rng):
        with pytest.raises(DataError):
            frechet_distance(rng.standard_normal((1, 4)), rng.standard_normal((10, 4)))

    def test_dimension_mismatch_raises(self, rng):
        with pytest.raises(DimensionError):
            frechet_distance(rng.standard_normal((10, 4)), rng.standard_normal((10, 5)))

    def test_projection_embedder_is_deterministic(self, rng):
        images = [rng.random((16, 16, 3)) for _ in range(3)]
        first = ProjectionEmbedder(dim=8, seed=2).embed(images)
        second = ProjectionEmbedder(dim=8, seed=2).embed(images)
        assert first.shape == (3, 8)
        assert np.array_equal(first, second)


class TestBuildHistogram:
    def test_counts_and_edges(self):
        hist = build_histogram([0.05, 0.15, 0.15, 0.95], (0.0, 1.0), bins=10)
        assert len(hist.bin_edges) == 11
        assert hist.counts.tolist() == [1, 2, 0, 0, 0, 0, 0, 0, 0, 1]

    def test_out_of_range_values_fall_in_end_bins(self):
        hist = build_histogram([-5.0, 5.0], (0.0, 1.0), bins=4)
        assert hist.counts.tolist() == [1, 0, 0, 1]

    def test_nan_values_skipped(self):
        hist = build_histogram([0.5, float('nan')], (0.0, 1.0), bins=2)
        assert int(hist.counts.sum()) == 1

    def test_errors(self):
        with pytest.raises(DataError):
            build_histogram([], (0.0, 1.0))
        with pytest.raises(DataError):
            build_histogram([0.5], (1.0, 1.0))


def _outputs(rng, n, size=16):
    outputs, day_gt = [], {}
    for i in range(n):
        pair_id = f"p{i}"
        day = rng.random((size, size, 3))
        day_gt[pair_id] = day
        outputs.append(StageOutputs(
            pair_id=pair_id,
            input_image=rng.random((size, size, 3)),
            intermediate_image=np.clip(day + 0.1 * rng.standard_normal(day.shape), 0, 1),
            final_image=day.copy(),
            mask=Mask(np.zeros((size, size))),
        ))
    return outputs, day_gt


class TestEvaluatePhases:
    def test_three_phases(self, rng):
        outputs, day_gt = _outputs(rng, 4)
        pre, mid, post = evaluate_phases(outputs, day_gt, ProjectionEmbedder(dim=2))
        assert [r.phase for r in (pre, mid, post)] == ['Pre', 'Intermediate', 'Post']
        assert post.summary['RMSE'] == (0.0, 0.0)
        assert post.summary['SSIM'][0] == pytest.approx(1.0)
        assert post.fid == pytest.approx(0.0, abs=1e-8)
        assert pre.summary['RMSE'][0] > mid.summary['RMSE'][0]
        for report in (pre, mid, post):
            assert report.ids == ['p0', 'p1', 'p2', 'p3']
            assert int(report.histograms['RMSE'].counts.sum()) == 4

    def test_single_sample_has_no_fid(self, rng):
        outputs, day_gt = _outputs(rng, 1)
        reports = evaluate_phases(outputs, day_gt, ProjectionEmbedder(dim=2))
        assert all(r.fid is None for r in reports)

    def test_constant_image_records_nan_ncc(self, rng):
        outputs, day_gt = _outputs(rng, 2)
        outputs[0].input_image = np.full((16, 16, 3), 0.5)
        pre = evaluate_phases(outputs, day_gt, ProjectionEmbedder(dim=2))[0]
        assert math.isnan(pre.per_sample['p0']['NCC'])
        assert pre.summary['NCC'][0] == pytest.approx(pre.per_sample['p1']['NCC'])

    def test_missing_ground_truth_raises(self, rng):
        outputs, day_gt = _outputs(rng, 2)
        del day_gt['p1']
        with pytest.raises(MissingGroundTruthError):
            evaluate_phases(outputs, day_gt, ProjectionEmbedder(dim=2))


def _post_report(rmse_mean, fid_value, ids=('a', 'b'), others=(0.1, 0.9, 0.8)):
    mae_mean, ssim_mean, ncc_mean = others
    per_sample = {i: {'RMSE': rmse_mean, 'MAE': mae_mean, 'SSIM': ssim_mean, 'NCC': ncc_mean} for i in ids}
    summary = {'RMSE': (rmse_mean, 0.0), 'MAE': (mae_mean, 0.0),
               'SSIM': (ssim_mean, 0.0), 'NCC': (ncc_mean, 0.0)}
    return PhaseReport(phase='Post', per_sample=per_sample, fid=fid_value, summary=summary)


class TestCompareModels:
    def test_identical_reports_tie(self):
        report = _post_report(0.25, 80.0)
        verdicts = compare_models(report, report, ('M1', 'M2'))
        assert set(verdicts) == {'RMSE', 'MAE', 'SSIM', 'NCC', 'FID'}
        assert all(v['winner'] == 'tie' for v in verdicts.values())

    def test_directions_respected(self):
        m1 = _post_report(0.23, 56.77, others=(0.1, 0.7, 0.8))
        m2 = _post_report(0.27, 108.62, others=(0.1, 0.8, 0.8))
        verdicts = compare_models(m1, m2, ('M1', 'M2'))
        assert verdicts['RMSE']['winner'] == 'M1'
        assert verdicts['FID']['winner'] == 'M1'
        assert verdicts['SSIM']['winner'] == 'M2'
        assert verdicts['MAE']['winner'] == 'tie'
        assert verdicts['FID']['direction'] == 'lower_better'
        assert verdicts['RMSE']['M2'] == 0.27

    def test_headline_values_carry_directions(self):
        values = headline_values(_post_report(0.25, 80.0))
        assert tuple(values) == ALL_METRICS
        assert values['RMSE'].value == 0.25
        assert values['FID'].value == 80.0
        assert values['SSIM'].direction == 'higher_better'
        assert values['MAE'].direction == 'lower_better'

    def test_undefined_fid(self):
        verdicts = compare_models(_post_report(0.2, None), _post_report(0.3, 5.0))
        assert verdicts['FID']['winner'] == 'n/a'

    def test_mismatched_ids_raise(self):
        with pytest.raises(DataError):
            compare_models(_post_report(0.2, 1.0, ids=('a',)), _post_report(0.2, 1.0, ids=('b',)))

    def test_non_final_phase_raises(self):
        report = _post_report(0.2, 1.0)
        report.phase = 'Pre'
        with pytest.raises(DataError):
            compare_models(report, _post_report(0.2, 1.0))

    def test_equal_names_raise(self):
        report = _post_report(0.2, 1.0)
        with pytest.raises(DataError):
            compare_models(report, report, ('X', 'X'))


class TestPhaseReportFiles:
    def test_write_then_load(self, rng, tmp_path):
        outputs, day_gt = _outputs(rng, 3)
        reports = evaluate_phases(outputs, day_gt, ProjectionEmbedder(dim=2))
        summary = write_phase_reports(str(tmp_path), reports)

        assert set(summary) == {'Pre', 'Intermediate', 'Post'}
        for name in ('phase1_per_sample.csv', 'phase2_per_sample.csv', 'phase3_per_sample.csv',
                     'summary.json', 'histograms.json'):
            assert os.path.exists(tmp_path / name)
        loaded = load_phase_report(str(tmp_path), 'Intermediate')
        assert loaded.per_sample == reports[1].per_sample
        assert loaded.fid == pytest.approx(reports[1].fid)
        assert loaded.histograms['SSIM'].counts.tolist() == reports[1].histograms['SSIM'].counts.tolist()
        assert np.allclose(loaded.histograms['NCC'].bin_edges, np.linspace(*HISTOGRAM_RANGES['NCC'], 21))

    def test_unknown_phase_raises(self, tmp_path):
        with pytest.raises(DataError):
            load_phase_report(str(tmp_path), 'During')
