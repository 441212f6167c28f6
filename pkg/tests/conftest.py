# tests/conftest.py
import os

os.environ.setdefault('INPAINT_ENV', 'testing')
os.environ.setdefault('INPAINT_DEVICE', 'cpu')

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from models.schemas import PipelineConfigSchema  # noqa: E402
from services.dataset.splits import prepare_dataset  # noqa: E402
from services.pipeline import infer_test_split, train_m1, train_m2  # noqa: E402
from tests.synthetic import tiny_config, write_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def dataset_dirs(tmp_path_factory):
    """Twenty 32×32 composite pairs (16/2/2 split) and six stroke masks."""
    root = tmp_path_factory.mktemp('raw')
    return write_dataset(str(root), n_pairs=20, size=32)


def _trained_run(run_dir: str, dataset_dirs, order: str):
    config = PipelineConfigSchema().load(tiny_config(*dataset_dirs, order=order))
    manifest = prepare_dataset(run_dir, config)
    train = train_m1 if order == 'M1' else train_m2
    train(manifest, config, run_dir)
    infer_test_split(run_dir, config)
    return run_dir, config, manifest


@pytest.fixture(scope='session')
def trained_m1_run(tmp_path_factory, dataset_dirs):
    """Prepared, trained and inferred M1 run (tiny networks, a few steps)."""
    return _trained_run(str(tmp_path_factory.mktemp('m1_run')), dataset_dirs, 'M1')


@pytest.fixture(scope='session')
def trained_m2_run(tmp_path_factory, dataset_dirs):
    return _trained_run(str(tmp_path_factory.mktemp('m2_run')), dataset_dirs, 'M2')
