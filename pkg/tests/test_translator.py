# tests/test_translator.py
import math
import os

import numpy as np
import pytest
import torch

from models.errors import DataError, DegenerateInputError, DimensionError
from models.types import TranslatorConfig
from services.translator import (
    build_translator, load_translator, patch_contrastive_loss, sample_patches, save_translator,
    train_translator, translate, translate_batch
)
from services.translator.losses import contrastive_from_similarities
from tests.synthetic import day_from_night, night_scene
from utils.image_io import list_images, load_image, save_image

SIZE = 16


def small_config(**overrides) -> TranslatorConfig:
    values = dict(channels_base=4, residual_blocks=1, batch_size=2, num_patches=8, steps=2, log_every=1)
    values.update(overrides)
    return TranslatorConfig(**values)


def write_domains(root, rng, n=4, size=SIZE):
    source_dir, target_dir = os.path.join(root, 'night'), os.path.join(root, 'day')
    for i in range(n):
        night = night_scene(rng, size)
        save_image(os.path.join(source_dir, f"n{i}.png"), night)
        save_image(os.path.join(target_dir, f"d{i}.png"), day_from_night(night_scene(rng, size)))
    return source_dir, target_dir


def unit_rows(angle):
    return torch.tensor([[1.0, 0.0], [math.cos(angle), math.sin(angle)]], dtype=torch.float64)


class TestTranslate:
    def test_untrained_translator_is_identity(self, rng):
        checkpoint = build_translator(small_config(), seed=0, image_size=SIZE)
        image = night_scene(rng, SIZE)
        assert np.allclose(translate(checkpoint, image), image, atol=1e-6)

    def test_output_in_unit_range_for_random_weights(self, rng):
        checkpoint = build_translator(small_config(), seed=0, image_size=SIZE)
        with torch.no_grad():
            for p in checkpoint.generator.parameters():
                p.normal_(0.0, 1.0)
        out = translate(checkpoint, rng.random((SIZE, SIZE, 3)))
        assert out.shape == (SIZE, SIZE, 3)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_same_seed_same_output(self, rng):
        image = rng.random((SIZE, SIZE, 3))
        first, second = (build_translator(small_config(), seed=4, image_size=SIZE) for _ in range(2))
        for checkpoint in (first, second):
            with torch.no_grad():
                checkpoint.generator.net.head[-1].weight.fill_(0.01)
        assert np.array_equal(translate(first, image), translate(second, image))

    def test_wrong_size_or_channels_raise(self, rng):
        checkpoint = build_translator(small_config(), seed=0, image_size=SIZE)
        with pytest.raises(DimensionError):
            translate(checkpoint, rng.random((32, 32, 3)))
        with pytest.raises(DimensionError):
            translate(checkpoint, rng.random((SIZE, SIZE)))

    def test_batch_keeps_file_names(self, rng, tmp_path):
        source_dir, _ = write_domains(str(tmp_path), rng, n=2)
        written = translate_batch(build_translator(small_config(), 0, SIZE), source_dir, str(tmp_path / 'out'))
        assert [os.path.basename(p) for p in written] == ['n0.png', 'n1.png']
        assert list_images(str(tmp_path / 'out')) == sorted(written)


class TestPatchContrastiveLoss:
    def test_two_patch_closed_form(self):
        temperature = 0.07
        for angle in (0.3, 0.6, 1.0):
            feats = unit_rows(angle)
            s = math.cos(angle)
            expected = math.log(1 + math.exp((s - 1) / temperature))
            assert patch_contrastive_loss(feats, feats, temperature).item() == pytest.approx(expected, rel=1e-6)

    def test_non_negative(self):
        gen = torch.Generator().manual_seed(0)
        for _ in range(20):
            src = torch.randn(3, 10, 6, generator=gen, dtype=torch.float64)
            out = torch.randn(3, 10, 6, generator=gen, dtype=torch.float64)
            assert patch_contrastive_loss(src, out).item() >= 0.0

    def test_joint_permutation_invariant(self):
        gen = torch.Generator().manual_seed(1)
        for _ in range(100):
            src = torch.randn(12, 5, generator=gen, dtype=torch.float64)
            out = torch.randn(12, 5, generator=gen, dtype=torch.float64)
            perm = torch.randperm(12, generator=gen)
            assert patch_contrastive_loss(src[perm], out[perm]).item() == pytest.approx(
                patch_contrastive_loss(src, out).item(), rel=1e-12)

    def test_negative_order_is_irrelevant(self):
        gen = torch.Generator().manual_seed(3)
        for _ in range(100):
            l_pos = torch.rand(6, generator=gen, dtype=torch.float64) * 2 - 1
            l_neg = torch.rand(6, 9, generator=gen, dtype=torch.float64) * 2 - 1
            perm = torch.randperm(9, generator=gen)
            assert contrastive_from_similarities(l_pos, l_neg[:, perm], 0.07).item() == pytest.approx(
                contrastive_from_similarities(l_pos, l_neg, 0.07).item(), rel=1e-12)

    def test_falls_as_positive_similarity_rises(self):
        gen = torch.Generator().manual_seed(4)
        for _ in range(100):
            l_pos = torch.rand(6, generator=gen, dtype=torch.float64) * 1.5 - 1
            l_neg = torch.rand(6, 9, generator=gen, dtype=torch.float64) * 2 - 1
            step = torch.rand(6, generator=gen, dtype=torch.float64) * 0.4 + 0.05
            assert contrastive_from_similarities(l_pos + step, l_neg, 0.07).item() < \
                contrastive_from_similarities(l_pos, l_neg, 0.07).item()

    def test_aligning_outputs_with_orthogonal_negatives(self):
        n = 6
        src = torch.eye(n + 1, dtype=torch.float64)[:n]
        losses = []
        for angle in (1.2, 0.9, 0.6, 0.3, 0.0):
            out = math.cos(angle) * src.clone()
            out[:, n] = math.sin(angle)
            losses.append(patch_contrastive_loss(src, out).item())
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_grows_as_negatives_get_closer(self):
        losses = [patch_contrastive_loss(unit_rows(a), unit_rows(a)).item() for a in (1.2, 0.9, 0.6, 0.2)]
        assert all(a < b for a, b in zip(losses, losses[1:]))

    def test_scale_invariant(self):
        gen = torch.Generator().manual_seed(2)
        src = torch.randn(6, 4, generator=gen, dtype=torch.float64)
        out = torch.randn(6, 4, generator=gen, dtype=torch.float64)
        assert patch_contrastive_loss(3.0 * src, 0.5 * out).item() == pytest.approx(
            patch_contrastive_loss(src, out).item(), rel=1e-12)

    def test_errors(self):
        with pytest.raises(DataError):
            patch_contrastive_loss(torch.ones(1, 4), torch.ones(1, 4))
        with pytest.raises(DegenerateInputError):
            patch_contrastive_loss(torch.zeros(3, 4), torch.ones(3, 4))
        with pytest.raises(DimensionError):
            patch_contrastive_loss(torch.ones(3, 4), torch.ones(4, 4))

    def test_sampled_locations_are_shared(self):
        feats = torch.arange(2 * 3 * 4 * 4, dtype=torch.float32).view(2, 3, 4, 4)
        patches, ids = sample_patches(feats, 5, generator=torch.Generator().manual_seed(0))
        again, same_ids = sample_patches(feats, 5, patch_ids=ids)
        assert patches.shape == (2, 5, 3)
        assert torch.equal(ids, same_ids)
        assert torch.equal(patches, again)
        assert len(set(ids.tolist())) == 5


class TestTraining:
    def test_zero_steps_is_identity(self, rng, tmp_path):
        source_dir, target_dir = write_domains(str(tmp_path), rng)
        checkpoint = train_translator(source_dir, target_dir, small_config(steps=0), seed=0)
        image = load_image(os.path.join(source_dir, 'n0.png'))
        assert checkpoint.step_count == 0
        assert np.allclose(translate(checkpoint, image), image, atol=1e-6)

    def test_same_seed_same_parameters(self, rng, tmp_path):
        source_dir, target_dir = write_domains(str(tmp_path), rng)
        first = train_translator(source_dir, target_dir, small_config(), seed=9)
        second = train_translator(source_dir, target_dir, small_config(), seed=9)
        for a, b in zip(first.generator.parameters(), second.generator.parameters()):
            assert torch.equal(a, b)
        assert first.step_count == 2

    def test_loss_log_written(self, rng, tmp_path):
        source_dir, target_dir = write_domains(str(tmp_path), rng)
        loss_path = tmp_path / 'translator.csv'
        train_translator(source_dir, target_dir, small_config(), seed=0, loss_path=str(loss_path))
        names = {line.split(',')[1] for line in loss_path.read_text().splitlines()[1:]}
        assert names == {'translator_d', 'translator_g_adv', 'translator_nce'}

    def test_empty_domain_raises(self, rng, tmp_path):
        source_dir, _ = write_domains(str(tmp_path), rng)
        (tmp_path / 'empty').mkdir()
        with pytest.raises(DataError):
            train_translator(source_dir, str(tmp_path / 'empty'), small_config(), seed=0)

    def test_size_mismatch_raises(self, rng, tmp_path):
        source_dir, _ = write_domains(str(tmp_path / 'a'), rng)
        _, target_dir = write_domains(str(tmp_path / 'b'), rng, size=32)
        with pytest.raises(DimensionError):
            train_translator(source_dir, target_dir, small_config(), seed=0)

    @pytest.mark.slow
    def test_learns_inversion(self, rng, tmp_path):
        size = 64
        source_dir, target_dir = str(tmp_path / 'source'), str(tmp_path / 'target')
        for i in range(8):
            night = night_scene(rng, size)
            save_image(os.path.join(source_dir, f"s{i}.png"), night)
            save_image(os.path.join(target_dir, f"t{i}.png"), 1.0 - night)
        config = small_config(channels_base=16, residual_blocks=2, batch_size=4, num_patches=64,
                              steps=3000, log_every=100)
        checkpoint = train_translator(source_dir, target_dir, config, seed=0)
        sources = [load_image(p) for p in list_images(source_dir)]
        error = np.mean([np.abs(translate(checkpoint, x) - (1.0 - x)).mean() for x in sources])
        assert error < 0.1


class TestCheckpointFiles:
    def test_save_load_save_is_byte_identical(self, rng, tmp_path):
        source_dir, target_dir = write_domains(str(tmp_path), rng)
        checkpoint = train_translator(source_dir, target_dir, small_config(), seed=0)
        first = save_translator(str(tmp_path / 'a.ckpt'), checkpoint)
        loaded = load_translator(first)
        second = save_translator(str(tmp_path / 'b.ckpt'), loaded)
        assert open(first, 'rb').read() == open(second, 'rb').read()
        image = load_image(os.path.join(source_dir, 'n1.png'))
        assert np.array_equal(translate(checkpoint, image), translate(loaded, image))
