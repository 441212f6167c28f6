# services/metrics/evaluation.py
import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import DataError, DegenerateInputError, MissingGroundTruthError
from models.types import (
    ALL_METRICS, HIGHER_BETTER, HISTOGRAM_RANGES, METRIC_DIRECTIONS, PER_SAMPLE_METRICS, PHASES,
    Histogram, MetricValue, PhaseReport, StageOutputs
)
from services.dataset.splits import load_manifest
from services.metrics.fid import Embedder, fid
from services.metrics.plots import plot_comparison_histograms, plot_phase_histograms
from services.metrics.similarity import METRIC_FUNCTIONS
from services.run_layout import RunLayout
from services.stage_outputs import load_stage_outputs
from utils.artifact_helpers import atomic_write_json, load_json, read_csv, write_csv
from utils.image_io import load_image

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 20
PHASE_IMAGE = {
    'Pre': 'input_image',
    'Intermediate': 'intermediate_image',
    'Post': 'final_image',
}
TIE = 'tie'


def build_histogram(values: Sequence[float], value_range: Tuple[float, float],
                    bins: int = HISTOGRAM_BINS) -> Histogram:
    """
    Uniform-bin histogram; values outside the range count in the end bins.

    Args:
        values: Sample values (NaNs are skipped)
        value_range: (lo, hi) with lo < hi
        bins: Number of bins

    Returns:
        Histogram: bins + 1 edges and bins counts
    """
    lo, hi = value_range
    if not lo < hi:
        raise DataError(f"Histogram range needs lo < hi, got ({lo}, {hi})")
    data = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
    if data.size == 0:
        raise DataError("Cannot build a histogram from no values")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.clip(data, lo, hi), bins=edges)
    return Histogram(bin_edges=edges, counts=counts.astype(np.int64))


def summarize(per_sample: Dict[str, Dict[str, float]]) -> Dict[str, Tuple[float, float]]:
    """Population mean and std of each metric over the samples with a defined value."""
    summary = {}
    for metric in PER_SAMPLE_METRICS:
        values = np.array([per_sample[i][metric] for i in sorted(per_sample)], dtype=np.float64)
        values = values[~np.isnan(values)]
        if values.size == 0:
            summary[metric] = (float('nan'), float('nan'))
        else:
            summary[metric] = (float(np.mean(values)), float(np.std(values)))
    return summary


def sample_metrics(image: np.ndarray, reference: np.ndarray, pair_id: str = '') -> Dict[str, float]:
    """RMSE, MAE, SSIM and NCC of one image against its reference; NaN where undefined."""
    values = {}
    for name, fn in METRIC_FUNCTIONS.items():
        try:
            values[name] = fn(image, reference)
        except DegenerateInputError as e:
            logger.warning(f"{name} undefined for {pair_id or 'sample'}: {e}")
            values[name] = float('nan')
    return values


def _phase_report(phase: str, outputs: Sequence[StageOutputs], day_gt: Dict[str, np.ndarray],
                  embedder: Embedder) -> PhaseReport:
    attr = PHASE_IMAGE[phase]
    per_sample = {o.pair_id: sample_metrics(getattr(o, attr), day_gt[o.pair_id], o.pair_id) for o in outputs}
    fid_value: Optional[float] = None
    if len(outputs) >= 2:
        fid_value = fid([getattr(o, attr) for o in outputs], [day_gt[o.pair_id] for o in outputs], embedder)
    else:
        logger.warning(f"Phase {phase}: FID needs at least 2 samples, got {len(outputs)}")
    histograms = {}
    for metric in PER_SAMPLE_METRICS:
        values = [per_sample[i][metric] for i in sorted(per_sample)]
        if any(not math.isnan(v) for v in values):
            histograms[metric] = build_histogram(values, HISTOGRAM_RANGES[metric])
    return PhaseReport(phase=phase, per_sample=per_sample, fid=fid_value,
                       summary=summarize(per_sample), histograms=histograms)


def evaluate_phases(outputs: Sequence[StageOutputs], day_gt: Dict[str, np.ndarray],
                    embedder: Embedder) -> Tuple[PhaseReport, PhaseReport, PhaseReport]:
    """
    Compare input, intermediate and final images of every sample to the day ground truth.

    Args:
        outputs: One StageOutputs per test sample
        day_gt: Day ground truth keyed by pair id
        embedder: Feature extractor for the set-level FID

    Returns:
        (Pre, Intermediate, Post) reports

    Raises:
        MissingGroundTruthError: If some pair ids have no ground truth
    """
    if not outputs:
        raise DataError("No stage outputs to evaluate")
    missing = [o.pair_id for o in outputs if o.pair_id not in day_gt]
    if missing:
        raise MissingGroundTruthError(missing)
    reports = tuple(_phase_report(phase, outputs, day_gt, embedder) for phase in PHASES)
    for report in reports:
        rmse_mean, rmse_std = report.summary['RMSE']
        logger.info(f"Phase {report.phase}: RMSE {rmse_mean:.4f}±{rmse_std:.4f}, FID {report.fid}")
    return reports


def _winner(direction: str, value_a: float, value_b: float, names: Sequence[str]) -> str:
    if value_a is None or value_b is None or math.isnan(value_a) or math.isnan(value_b):
        return 'n/a'
    if value_a == value_b:
        return TIE
    a_better = value_a > value_b if direction == HIGHER_BETTER else value_a < value_b
    return names[0] if a_better else names[1]


def headline_values(report: PhaseReport) -> Dict[str, MetricValue]:
    """Mean of each per-sample metric plus the set-level FID."""
    return {m: MetricValue(m, report.fid if m == 'FID' else report.summary[m][0]) for m in ALL_METRICS}


def compare_models(report_a: PhaseReport, report_b: PhaseReport,
                   names: Sequence[str] = ('A', 'B')) -> Dict[str, Dict]:
    """
    Per-metric verdicts between the final-phase reports of two models.

    Means decide the per-sample metrics and the set value decides FID.

    Args:
        report_a: Post report of the first model
        report_b: Post report of the second model
        names: Labels used in the verdicts

    Returns:
        Dict mapping metric name to {direction, <name a>, <name b>, winner}

    Raises:
        DataError: If the reports cover different ids or are not final-phase reports
    """
    if names[0] == names[1]:
        raise DataError(f"Model labels must differ, got '{names[0]}' twice")
    for report in (report_a, report_b):
        if report.phase != 'Post':
            raise DataError(f"Models are compared on Post reports, got {report.phase}")
    if set(report_a.ids) != set(report_b.ids):
        only_a = sorted(set(report_a.ids) - set(report_b.ids))
        only_b = sorted(set(report_b.ids) - set(report_a.ids))
        raise DataError(f"Reports cover different ids (only in {names[0]}: {only_a}; only in {names[1]}: {only_b})")

    values_a, values_b = headline_values(report_a), headline_values(report_b)
    verdicts = {}
    for metric in METRIC_DIRECTIONS:
        a, b = values_a[metric], values_b[metric]
        verdicts[metric] = {
            'direction': a.direction,
            names[0]: a.value,
            names[1]: b.value,
            'winner': _winner(a.direction, a.value, b.value, names),
        }
    return verdicts


def _json_float(value: Optional[float]):
    if value is None or math.isnan(value):
        return None
    return float(value)


def _from_json_float(value) -> float:
    return float('nan') if value is None else float(value)


def per_sample_path(reports_dir: str, phase: str) -> str:
    return os.path.join(reports_dir, f"phase{PHASES.index(phase) + 1}_per_sample.csv")


def write_phase_reports(reports_dir: str, reports: Sequence[PhaseReport]) -> Dict[str, dict]:
    """Write per-sample CSVs, summary.json and histograms.json; returns the summary."""
    header = ['pair_id'] + [m.lower() for m in PER_SAMPLE_METRICS]
    summary = {}
    histograms = {}
    for report in reports:
        rows = [[i] + [report.per_sample[i][m] for m in PER_SAMPLE_METRICS] for i in report.ids]
        write_csv(per_sample_path(reports_dir, report.phase), header, rows)
        entry = {m: {'mean': _json_float(report.summary[m][0]), 'std': _json_float(report.summary[m][1])}
                 for m in PER_SAMPLE_METRICS}
        entry['FID'] = {'value': _json_float(report.fid)}
        summary[report.phase] = entry
        histograms[report.phase] = {m: h.to_dict() for m, h in sorted(report.histograms.items())}
    atomic_write_json(os.path.join(reports_dir, 'summary.json'), summary)
    atomic_write_json(os.path.join(reports_dir, 'histograms.json'), histograms)
    logger.info(f"Wrote phase reports to {reports_dir}")
    return summary


def load_phase_report(reports_dir: str, phase: str) -> PhaseReport:
    """Rebuild a PhaseReport from the files written by write_phase_reports."""
    if phase not in PHASES:
        raise DataError(f"Unknown phase '{phase}'")
    per_sample = {}
    for row in read_csv(per_sample_path(reports_dir, phase)):
        per_sample[row['pair_id']] = {m: float(row[m.lower()]) for m in PER_SAMPLE_METRICS}
    summary_entry = load_json(os.path.join(reports_dir, 'summary.json'))[phase]
    summary = {m: (_from_json_float(summary_entry[m]['mean']), _from_json_float(summary_entry[m]['std']))
               for m in PER_SAMPLE_METRICS}
    fid_value = summary_entry['FID']['value']
    hist_entry = load_json(os.path.join(reports_dir, 'histograms.json')).get(phase, {})
    histograms = {m: Histogram(np.asarray(h['bin_edges']), np.asarray(h['counts'], dtype=np.int64))
                  for m, h in hist_entry.items()}
    return PhaseReport(phase=phase, per_sample=per_sample, fid=fid_value, summary=summary,
                       histograms=histograms)


def evaluate_run(run_dir: str, embedder: Embedder, pair_ids: Optional[List[str]] = None) -> Tuple[PhaseReport, ...]:
    """
    Evaluate the persisted test outputs of a run and write its reports and plots.

    Args:
        run_dir: Run directory with outputs/ and data/day/
        embedder: FID feature extractor
        pair_ids: Ids to evaluate (defaults to the manifest's test split)

    Returns:
        (Pre, Intermediate, Post) reports
    """
    layout = RunLayout(run_dir)
    if pair_ids is None:
        pair_ids = load_manifest(layout.manifest_path).test_ids
    outputs = [load_stage_outputs(layout, i) for i in sorted(pair_ids)]
    missing = [i for i in pair_ids if not os.path.exists(layout.day_path(i))]
    if missing:
        raise MissingGroundTruthError(missing)
    day_gt = {i: load_image(layout.day_path(i)) for i in pair_ids}
    reports = evaluate_phases(outputs, day_gt, embedder)
    write_phase_reports(layout.reports_dir, reports)
    plot_phase_histograms(reports, layout.reports_dir)
    return reports


def compare_runs(run_a: str, run_b: str, out_dir: Optional[str] = None) -> Dict[str, Dict]:
    """Compare the Post reports of two evaluated runs; writes comparison.json and overlay plots."""
    names = [os.path.basename(os.path.normpath(run_a)), os.path.basename(os.path.normpath(run_b))]
    if names[0] == names[1]:
        names = [f"{names[0]}_a", f"{names[1]}_b"]
    report_a = load_phase_report(RunLayout(run_a).reports_dir, 'Post')
    report_b = load_phase_report(RunLayout(run_b).reports_dir, 'Post')
    verdicts = compare_models(report_a, report_b, names)
    out_dir = out_dir or RunLayout(run_a).reports_dir
    atomic_write_json(os.path.join(out_dir, 'comparison.json'),
                      {'models': names, 'verdicts': {m: {k: (_json_float(v) if k in names else v)
                                                         for k, v in entry.items()}
                                                     for m, entry in verdicts.items()}})
    plot_comparison_histograms(report_a, report_b, names, out_dir)
    for metric, entry in verdicts.items():
        logger.info(f"{metric}: {names[0]}={entry[names[0]]} {names[1]}={entry[names[1]]} -> {entry['winner']}")
    return verdicts
