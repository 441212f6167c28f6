# controllers/cli_controller.py
import json
import logging
import os
from typing import Any, Dict, Optional, Sequence

import click
from marshmallow import ValidationError

from models.errors import ConfigError, InpaintingError
from models.schemas import PipelineConfigSchema
from models.types import PipelineConfig
from services.ablation import run_ablation
from services.dataset.splits import load_manifest, prepare_dataset
from services.metrics.evaluation import compare_runs, evaluate_run
from services.metrics.fid import build_embedder
from services.pipeline import infer_test_split, train_pipeline
from services.run_layout import RunLayout
from utils.artifact_helpers import atomic_write_json, load_json

# Configure logging
logger = logging.getLogger(__name__)

USAGE_EXIT_CODE = 2
UNEXPECTED_EXIT_CODE = 1


def _set_key(data: Dict[str, Any], dotted: str, value: Any) -> None:
    node = data
    *parents, leaf = dotted.split('.')
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def load_run_config(run_dir: str, config_file: Optional[str] = None,
                    overrides: Optional[Dict[str, Any]] = None, required: bool = True) -> PipelineConfig:
    """
    Build the effective run configuration and write it to run/config.json.

    The base is `config_file` if given, else the run's own config.json (when
    present or `required`); flags with a value override keys in dotted form.

    Raises:
        MissingArtifactError: If the base config file does not exist
        ConfigError: If the merged configuration fails validation
    """
    layout = RunLayout(run_dir)
    if config_file:
        data = load_json(config_file)
    elif required or os.path.exists(layout.config_path):
        data = load_json(layout.config_path)
    else:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("Run configuration must be a JSON object")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_key(data, dotted, value)

    schema = PipelineConfigSchema()
    try:
        config = schema.load(data)
    except ValidationError as e:
        logger.error(f"Validation error: {e.messages}")
        raise ConfigError(f"Invalid run configuration: {json.dumps(e.messages, sort_keys=True)}") from e
    atomic_write_json(layout.config_path, schema.dump(config))
    return config


def _success(command: str, **details) -> None:
    click.echo(json.dumps({'status': 'success', 'command': command, **details}, sort_keys=True))


def _error_line(category: str, message: str) -> None:
    click.echo(json.dumps({'status': 'error', 'category': category, 'message': message}), err=True)


run_dir_option = click.option('--run-dir', required=True, type=click.Path(file_okay=False),
                              help='Run directory holding every artifact of the run.')
config_option = click.option('--config', 'config_file', type=click.Path(dir_okay=False),
                             help='JSON run configuration (defaults to RUN_DIR/config.json).')


@click.group()
def cli():
    """Night-to-day inpainting: prepare, train, infer, evaluate, compare, ablate."""


@cli.command()
@run_dir_option
@config_option
@click.option('--pairs-dir', help='Directory of scene pairs.')
@click.option('--masks-dir', help='Directory of stroke masks.')
@click.option('--layout', type=click.Choice(['composite', 'split']), help='Pair file layout.')
@click.option('--image-size', type=int, help='Side length images are resized to.')
@click.option('--seed', type=int, help='Split and mask-assignment seed.')
@click.option('--day-side', type=click.Choice(['left', 'right']), help='Half of a composite holding the day image.')
def prepare(run_dir, config_file, pairs_dir, masks_dir, layout, image_size, seed, day_side):
    """Ingest pairs and masks, build splits and write manifest.json."""
    config = load_run_config(run_dir, config_file, {
        'data.pairs_dir': pairs_dir, 'data.masks_dir': masks_dir, 'data.layout': layout,
        'data.day_side': day_side, 'image_size': image_size, 'seeds.data': seed,
    }, required=False)
    manifest = prepare_dataset(run_dir, config)
    _success('prepare', train=len(manifest.train_ids), val=len(manifest.val_ids), test=len(manifest.test_ids))


@cli.command()
@run_dir_option
@config_option
@click.option('--order', type=click.Choice(['m1', 'm2', 'M1', 'M2']), help='Stage order.')
@click.option('--stage1-seed', type=int, help='Seed of the first stage.')
@click.option('--stage2-seed', type=int, help='Seed of the second stage.')
def train(run_dir, config_file, order, stage1_seed, stage2_seed):
    """Two-stage training in the configured order."""
    config = load_run_config(run_dir, config_file, {
        'order': order, 'seeds.stage1': stage1_seed, 'seeds.stage2': stage2_seed,
    })
    manifest = load_manifest(RunLayout(run_dir).manifest_path)
    if manifest.image_size != config.image_size:
        raise ConfigError(f"Manifest was prepared at {manifest.image_size}px, config asks for {config.image_size}px")
    train_pipeline(manifest, config, run_dir)
    _success('train', order=config.order)


@cli.command()
@run_dir_option
@config_option
def infer(run_dir, config_file):
    """Inference over the test split; images go to outputs/."""
    config = load_run_config(run_dir, config_file)
    outputs = infer_test_split(run_dir, config)
    _success('infer', samples=len(outputs))


@cli.command()
@run_dir_option
@config_option
def evaluate(run_dir, config_file):
    """Three-phase evaluation of the persisted test outputs."""
    config = load_run_config(run_dir, config_file)
    reports = evaluate_run(run_dir, build_embedder(config.embedder))
    _success('evaluate', phases=[r.phase for r in reports])


@cli.command()
@click.argument('run_a', type=click.Path(file_okay=False))
@click.argument('run_b', type=click.Path(file_okay=False))
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), help='Where comparison files go.')
def compare(run_a, run_b, out_dir):
    """Compare the final-phase reports of two evaluated runs."""
    verdicts = compare_runs(run_a, run_b, out_dir)
    _success('compare', winners={m: v['winner'] for m, v in verdicts.items()})


@cli.command()
@run_dir_option
@config_option
@click.option('--pair-id', help='Test pair to sweep (defaults to the first test id).')
@click.option('--max-iterations', type=int, help='Largest dilation count.')
def ablate(run_dir, config_file, pair_id, max_iterations):
    """Mask-dilation sweep on one test sample."""
    config = load_run_config(run_dir, config_file, {
        'ablation.pair_id': pair_id, 'ablation.max_iterations': max_iterations,
    })
    report = run_ablation(run_dir, config)
    _success('ablate', pair_id=report.pair_id, rows=len(report.rows), saturated_at=report.saturated_at)


def dispatch(argv: Sequence[str]) -> int:
    """
    Run one subcommand and map its outcome to an exit code.

    Failures print exactly one JSON line on stderr:
    {"status": "error", "category": ..., "message": ...}

    Args:
        argv: Arguments after the program name

    Returns:
        int: 0 on success, the error category's exit code otherwise
    """
    try:
        result = cli.main(args=list(argv), prog_name='inpaint', standalone_mode=False)
        return result if isinstance(result, int) else 0
    except click.UsageError as e:
        _error_line('usage', e.format_message())
        return USAGE_EXIT_CODE
    except click.ClickException as e:
        _error_line('usage', e.format_message())
        return e.exit_code
    except click.Abort:
        _error_line('unexpected', 'Aborted')
        return UNEXPECTED_EXIT_CODE
    except InpaintingError as e:
        logger.error(f"{e.category} error: {e}")
        _error_line(e.category, str(e))
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}", exc_info=True)
        _error_line('unexpected', str(e))
        return UNEXPECTED_EXIT_CODE
