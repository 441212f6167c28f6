# tests/test_inpainter.py
import numpy as np
import pytest
import torch
from torch.utils.data import Dataset

from models.errors import ConfigError, DimensionError, StageOrderError, TrainingDivergedError
from models.types import InpainterConfig, TranslatorConfig
from services.dataset import apply_mask, binarize_mask
from services.dataset.samples import sample_to_tensors
from services.inpainter import (
    build_inpainter, complete_image, fit_inpainter, hallucinate_edges, inpaint, load_inpainter,
    save_inpainter
)
from services.inpainter.model import l1_term
from services.translator import build_translator, save_translator
from tests.synthetic import random_samples

SIZE = 16


class TensorSamples(Dataset):
    def __init__(self, samples):
        self.items = [sample_to_tensors(s) for s in samples]

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        return self.items[index]


def small_config(**overrides) -> InpainterConfig:
    values = dict(channels_base=4, residual_blocks=1, batch_size=2, edge_steps=2, inpaint_steps=2,
                  joint_steps=2, log_every=1)
    values.update(overrides)
    return InpainterConfig(**values)


def masked_samples(rng, n=4, size=SIZE):
    return [apply_mask(night, binarize_mask(raw), fill=1.0, pair_id=f"s{i}")
            for i, (night, raw) in enumerate(random_samples(rng, n, size))]


def params_of(checkpoint):
    modules = (checkpoint.edge_model.generator, checkpoint.edge_model.discriminator,
               checkpoint.inpaint_model.generator, checkpoint.inpaint_model.discriminator)
    return [p.detach().clone() for m in modules for p in m.parameters()]


def all_stages(dataset, config, seed=0):
    edge = fit_inpainter(dataset, config, 'edge', seed=seed, image_size=SIZE)
    mid = fit_inpainter(dataset, config, 'inpaint', seed=seed, image_size=SIZE, previous=edge)
    return fit_inpainter(dataset, config, 'joint', seed=seed, image_size=SIZE, previous=mid)


class TestInference:
    def test_edges_are_binary_and_keep_known_edges(self, rng):
        checkpoint = build_inpainter(small_config(), seed=0, image_size=SIZE)
        for sample in masked_samples(rng):
            edge = hallucinate_edges(checkpoint.edge_model, sample)
            assert edge.shape == (SIZE, SIZE)
            assert set(np.unique(edge)) <= {0, 1}
            known = sample.mask.grid == 0
            assert np.array_equal(edge[known], sample.edge_partial[known])

    def test_completion_keeps_known_pixels(self, rng):
        checkpoint = build_inpainter(small_config(), seed=0, image_size=SIZE)
        for sample in masked_samples(rng, n=16):
            _, image = inpaint(checkpoint, sample)
            known = sample.mask.grid == 0
            assert image.shape == (SIZE, SIZE, 3)
            assert np.array_equal(image[known], sample.incomplete_night[known])
            assert image.min() >= 0.0 and image.max() <= 1.0

    def test_deterministic(self, rng):
        sample = masked_samples(rng, n=1)[0]
        first = inpaint(build_inpainter(small_config(), seed=5, image_size=SIZE), sample)
        second = inpaint(build_inpainter(small_config(), seed=5, image_size=SIZE), sample)
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])

    def test_wrong_size_raises(self, rng):
        checkpoint = build_inpainter(small_config(), seed=0, image_size=SIZE)
        sample = masked_samples(rng, n=1, size=32)[0]
        with pytest.raises(DimensionError):
            hallucinate_edges(checkpoint.edge_model, sample)
        with pytest.raises(DimensionError):
            complete_image(checkpoint.inpaint_model, sample, np.zeros((32, 32), dtype=np.uint8))

    def test_edge_map_shape_mismatch_raises(self, rng):
        checkpoint = build_inpainter(small_config(), seed=0, image_size=SIZE)
        sample = masked_samples(rng, n=1)[0]
        with pytest.raises(DimensionError):
            complete_image(checkpoint.inpaint_model, sample, np.zeros((8, 8), dtype=np.uint8))


class TestTraining:
    def test_zero_steps_returns_initial_parameters(self, rng):
        config = small_config(edge_steps=0)
        trained = fit_inpainter(TensorSamples(masked_samples(rng)), config, 'edge', seed=3, image_size=SIZE)
        initial = build_inpainter(config, seed=3, image_size=SIZE)
        assert all(torch.equal(a, b) for a, b in zip(params_of(trained), params_of(initial)))
        assert trained.training_stage_completed == 'edge'
        assert trained.step_count == 0

    def test_stage_bookkeeping(self, rng):
        final = all_stages(TensorSamples(masked_samples(rng)), small_config())
        assert final.training_stage_completed == 'joint'
        assert final.step_count == 6
        assert final.stage_steps == {'edge': 2, 'inpaint': 2, 'joint': 2}

    def test_same_seed_same_parameters(self, rng):
        dataset = TensorSamples(masked_samples(rng))
        first = all_stages(dataset, small_config(), seed=11)
        second = all_stages(dataset, small_config(), seed=11)
        assert all(torch.equal(a, b) for a, b in zip(params_of(first), params_of(second)))

    def test_previous_is_not_modified(self, rng):
        dataset = TensorSamples(masked_samples(rng))
        edge = fit_inpainter(dataset, small_config(), 'edge', seed=0, image_size=SIZE)
        before = params_of(edge)
        fit_inpainter(dataset, small_config(), 'inpaint', seed=0, image_size=SIZE, previous=edge)
        assert edge.training_stage_completed == 'edge'
        assert all(torch.equal(a, b) for a, b in zip(before, params_of(edge)))

    def test_inpaint_stage_trains_only_completion_model(self, rng):
        dataset = TensorSamples(masked_samples(rng))
        edge = fit_inpainter(dataset, small_config(), 'edge', seed=0, image_size=SIZE)
        mid = fit_inpainter(dataset, small_config(), 'inpaint', seed=0, image_size=SIZE, previous=edge)
        for a, b in zip(edge.edge_model.generator.parameters(), mid.edge_model.generator.parameters()):
            assert torch.equal(a, b)

    def test_stage_order_enforced(self, rng):
        dataset = TensorSamples(masked_samples(rng))
        with pytest.raises(StageOrderError):
            fit_inpainter(dataset, small_config(), 'inpaint', seed=0, image_size=SIZE)
        edge = fit_inpainter(dataset, small_config(), 'edge', seed=0, image_size=SIZE)
        with pytest.raises(StageOrderError):
            fit_inpainter(dataset, small_config(), 'joint', seed=0, image_size=SIZE, previous=edge)
        with pytest.raises(StageOrderError):
            fit_inpainter(dataset, small_config(), 'refine', seed=0, image_size=SIZE)

    def test_non_finite_loss_raises(self, rng, tmp_path):
        dataset = TensorSamples(masked_samples(rng, n=2))
        for item in dataset.items:
            item['gray_gt'][:] = float('nan')
        loss_path = tmp_path / 'losses.csv'
        with pytest.raises(TrainingDivergedError) as excinfo:
            fit_inpainter(dataset, small_config(), 'edge', seed=0, image_size=SIZE, loss_path=str(loss_path))
        assert excinfo.value.stage == 'edge'
        assert excinfo.value.step == 1
        assert loss_path.exists()

    def test_loss_log_written(self, rng, tmp_path):
        loss_path = tmp_path / 'edge.csv'
        fit_inpainter(TensorSamples(masked_samples(rng)), small_config(), 'edge', seed=0,
                      image_size=SIZE, loss_path=str(loss_path))
        lines = loss_path.read_text().splitlines()
        assert lines[0] == 'step,loss_name,value'
        assert {line.split(',')[1] for line in lines[1:]} == {'edge_d', 'edge_g_adv', 'edge_g_fm'}

    def test_l1_gradient_matches_finite_differences(self, rng):
        checkpoint = build_inpainter(small_config(), seed=0, image_size=SIZE)
        state = checkpoint.inpaint_model
        state.generator.double()
        batch = {k: v.unsqueeze(0).double() for k, v in sample_to_tensors(masked_samples(rng, n=1)[0]).items()}

        params = [p for p in state.generator.parameters() if p.numel() > 1]
        state.generator.zero_grad()
        l1_term(state, batch).backward()
        picks = np.random.default_rng(0)
        eps = 1e-6
        for _ in range(10):
            param = params[int(picks.integers(len(params)))]
            index = tuple(int(picks.integers(s)) for s in param.shape)
            analytic = param.grad[index].item()
            with torch.no_grad():
                original = param[index].item()
                param[index] = original + eps
                plus = l1_term(state, batch).item()
                param[index] = original - eps
                minus = l1_term(state, batch).item()
                param[index] = original
            numeric = (plus - minus) / (2 * eps)
            assert abs(analytic - numeric) <= 1e-3 * max(1.0, abs(numeric))

    @pytest.mark.slow
    def test_overfits_a_small_training_set(self, rng):
        size = 64
        dataset = TensorSamples(masked_samples(rng, n=8, size=size))
        config = small_config(channels_base=16, residual_blocks=2, batch_size=8, edge_steps=1,
                              inpaint_steps=2000, adv_weight=0.0, lr=1e-3)
        edge = fit_inpainter(dataset, config, 'edge', seed=0, image_size=size)
        trained = fit_inpainter(dataset, config, 'inpaint', seed=0, image_size=size, previous=edge)
        batch = {k: torch.stack([dataset[i][k] for i in range(len(dataset))]) for k in dataset[0]}
        with torch.no_grad():
            error = l1_term(trained.inpaint_model, batch).item() / config.l1_weight
        assert error < 0.05


class TestCheckpointFiles:
    def test_save_load_save_is_byte_identical(self, rng, tmp_path):
        checkpoint = all_stages(TensorSamples(masked_samples(rng)), small_config())
        first = save_inpainter(str(tmp_path / 'a.ckpt'), checkpoint)
        loaded = load_inpainter(first)
        second = save_inpainter(str(tmp_path / 'b.ckpt'), loaded)
        assert open(first, 'rb').read() == open(second, 'rb').read()
        assert loaded.training_stage_completed == 'joint'
        assert loaded.stage_steps == checkpoint.stage_steps

    def test_loaded_checkpoint_infers_identically(self, rng, tmp_path):
        checkpoint = build_inpainter(small_config(), seed=2, image_size=SIZE)
        loaded = load_inpainter(save_inpainter(str(tmp_path / 'x.ckpt'), checkpoint))
        sample = masked_samples(rng, n=1)[0]
        assert np.array_equal(inpaint(checkpoint, sample)[1], inpaint(loaded, sample)[1])

    def test_wrong_kind_raises(self, tmp_path):
        path = save_translator(str(tmp_path / 't.ckpt'),
                               build_translator(TranslatorConfig(channels_base=4, residual_blocks=1), 0, SIZE))
        with pytest.raises(ConfigError):
            load_inpainter(path)
