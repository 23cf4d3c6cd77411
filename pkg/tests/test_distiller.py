import numpy as np
import pandas as pd
import pytest

from davdd_forge.core.tensor import Tape, Tensor, backward
from davdd_forge.data.benchmark import BenchmarkSpec, generate_benchmark
from davdd_forge.distill.distiller import (
    TRAJECTORY_COLUMNS,
    DistillConfig,
    distill_step,
    matching_objective,
    run_distillation,
    sample_draw,
    smoothed_trajectory,
    trailing_rolling_std,
)
from davdd_forge.distill.matching import loss_private
from davdd_forge.distill.synthetic import SyntheticSet, init_synthetic
from davdd_forge.exceptions import ConfigError, ContractError
from davdd_forge.models.decoupler import encode, train_decouplers
from davdd_forge.models.decoupling_losses import DecouplingWeights
from davdd_forge.models.network import EncoderConfig
from davdd_forge.models.pretrained import pretrain_bank


def small_config(**overrides):
    values = dict(lambda_c=1.0, lambda_p=2.0, steps=3, lr_syn=0.05, batch_size=4, seed=7, factor=1, ipc=2,
                  init_method='random', log_every=0)
    values.update(overrides)
    return DistillConfig(**values)


def bank_parameters(banks):
    pretrained, decouplers = banks
    arrays = [p for pair in pretrained for model in (pair.audio, pair.visual) for p in model.parameter_arrays()]
    arrays += [p for dec in decouplers for model in (dec.audio, dec.visual) for p in model.parameter_arrays()]
    return arrays


def objective_grads(syn, train, draw, cfg):
    audio = Tensor(syn.audio, requires_grad=True)
    visual = Tensor(syn.visual, requires_grad=True)
    with Tape() as tape:
        total, l_pr, l_com, per_group = matching_objective(audio, visual, train, draw, cfg, syn.factor)
    grads = backward(total, tape)
    return total.item(), grads[audio], grads[visual], per_group


class TestDistillConfig:
    def test_negative_weight(self):
        with pytest.raises(ConfigError):
            small_config(lambda_c=-1.0)

    def test_unknown_encoder_source(self):
        with pytest.raises(ConfigError):
            small_config(encoder_source='imagenet')

    def test_matches_common(self):
        assert small_config().matches_common
        assert not small_config(lambda_c=0.0).matches_common
        assert not small_config(use_decoupler=False).matches_common


class TestObjective:
    def test_private_matching_is_isolated_per_modality(self, tiny_train, tiny_banks):
        cfg = small_config(use_decoupler=False, lambda_c=0.0)
        syn = init_synthetic(tiny_train, 2, 'random', seed=0)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(1))
        perturbed = syn.with_canvases(syn.audio, syn.visual + 0.5)
        _, audio_grad, _, _ = objective_grads(syn, tiny_train, draw, cfg)
        _, audio_grad_perturbed, _, _ = objective_grads(perturbed, tiny_train, draw, cfg)
        np.testing.assert_array_equal(audio_grad, audio_grad_perturbed)

    def test_audio_private_term_has_no_visual_gradient(self, tiny_train, tiny_banks):
        pretrained, decouplers = tiny_banks
        real = encode(pretrained[0], decouplers.get(0, 0), tiny_train)
        audio = Tensor(tiny_train.audio[:3] + 0.1, requires_grad=True)
        visual = Tensor(tiny_train.visual[:3] - 0.1, requires_grad=True)
        with Tape() as tape:
            syn = encode(pretrained[0], decouplers.get(0, 0), (audio, visual))
            audio_term = ((real.audio_private.mean(axis=0) - syn.audio_private.mean(axis=0)) ** 2).sum()
            visual_term = loss_private(real, syn) - audio_term
        np.testing.assert_array_equal(backward(audio_term, tape)[visual], np.zeros_like(tiny_train.visual[:3]))
        np.testing.assert_array_equal(backward(visual_term, tape)[audio], np.zeros_like(tiny_train.audio[:3]))

    def test_common_matching_couples_modalities(self, tiny_train, tiny_banks):
        cfg = small_config(lambda_p=0.0)
        syn = init_synthetic(tiny_train, 2, 'random', seed=0)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(1))
        _, audio_grad, _, _ = objective_grads(syn, tiny_train, draw, cfg)
        _, audio_grad_perturbed, visual_grad, _ = objective_grads(
            syn.with_canvases(syn.audio, syn.visual + 0.5), tiny_train, draw, cfg
        )
        assert np.abs(visual_grad).sum() > 0
        assert not np.allclose(audio_grad, audio_grad_perturbed)

    def test_exact_copies_are_a_fixed_point(self, tiny_train, tiny_banks):
        counts = tiny_train.class_counts()
        ipc = int(counts.min())
        members = [tiny_train.class_indices(c)[:ipc] for c in range(tiny_train.num_classes)]
        syn = SyntheticSet(
            np.stack([tiny_train.audio[idx] for idx in members]),
            np.stack([tiny_train.visual[idx] for idx in members]),
        )
        cfg = small_config(batch_size=ipc, ipc=ipc)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(2))
        draw.real_indices = {c: members[c] for c in range(tiny_train.num_classes)}
        total, audio_grad, visual_grad, _ = objective_grads(syn, tiny_train, draw, cfg)
        assert total == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(audio_grad, 0.0, atol=1e-10)
        np.testing.assert_allclose(visual_grad, 0.0, atol=1e-10)

    def test_total_is_sum_of_class_losses(self, tiny_train, tiny_banks):
        cfg = small_config()
        syn = init_synthetic(tiny_train, 2, 'random', seed=3)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(3))
        total, _, _, per_group = objective_grads(syn, tiny_train, draw, cfg)
        assert len(per_group) == tiny_train.num_classes
        assert total == pytest.approx(sum(per_group), abs=1e-10)

    def test_one_step_descends_on_a_frozen_draw(self, tiny_train, tiny_banks):
        cfg = small_config()
        syn = init_synthetic(tiny_train, 2, 'random', seed=5)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(5))
        before, audio_grad, visual_grad, _ = objective_grads(syn, tiny_train, draw, cfg)
        lr, improved = 0.1, False
        for _ in range(20):
            stepped = syn.with_canvases(syn.audio - lr * audio_grad, syn.visual - lr * visual_grad)
            after, _, _, _ = objective_grads(stepped, tiny_train, draw, cfg)
            if after < before:
                improved = True
                break
            lr /= 2
        assert improved

    def test_global_matching(self, tiny_train, tiny_banks):
        cfg = small_config(per_class_matching=False)
        syn = init_synthetic(tiny_train, 2, 'random', seed=0)
        draw = sample_draw(tiny_train, tiny_banks, cfg, np.random.default_rng(0))
        assert list(draw.real_indices) == [None]
        _, _, _, per_group = objective_grads(syn, tiny_train, draw, cfg)
        assert len(per_group) == 1


class TestDistillStep:
    def test_bank_is_untouched_after_ten_steps(self, tiny_train, tiny_banks):
        before = bank_parameters(tiny_banks)
        run_distillation(tiny_train, tiny_banks, small_config(steps=10))
        for a, b in zip(before, bank_parameters(tiny_banks)):
            np.testing.assert_array_equal(a, b)

    def test_private_only_step(self, tiny_train, tiny_banks):
        cfg = small_config(lambda_c=0.0)
        syn = init_synthetic(tiny_train, 1, 'random', seed=0)
        _, metrics, _ = distill_step(syn, tiny_train, tiny_banks, cfg, step_seed=11)
        assert metrics['L_com'] == 0.0
        assert metrics['L_dis'] == pytest.approx(cfg.lambda_p * metrics['L_pr'], rel=1e-12)

    def test_canvases_move_and_labels_stay(self, tiny_train, tiny_banks):
        syn = init_synthetic(tiny_train, 1, 'random', seed=0)
        updated, metrics, state = distill_step(syn, tiny_train, tiny_banks, small_config(), step_seed=1)
        assert not np.array_equal(updated.audio, syn.audio)
        assert not np.array_equal(updated.visual, syn.visual)
        assert updated.audio.shape == syn.audio.shape
        assert 0 <= metrics['pair'] < 2 and 0 <= metrics['slot'] < 2
        assert state.velocities is not None

    def test_refuses_test_split(self, tiny_test, tiny_banks):
        syn = init_synthetic(tiny_test.subset(np.arange(len(tiny_test)), split='train'), 1, 'random', seed=0)
        with pytest.raises(ContractError):
            distill_step(syn, tiny_test, tiny_banks, small_config(), step_seed=0)

    def test_common_matching_needs_decouplers(self, tiny_train, tiny_pretrained):
        syn = init_synthetic(tiny_train, 1, 'random', seed=0)
        with pytest.raises(ContractError):
            distill_step(syn, tiny_train, (tiny_pretrained, None), small_config(), step_seed=0)

    def test_random_encoders(self, tiny_train, tiny_pretrained):
        cfg = small_config(encoder_source='random', use_decoupler=False, lambda_c=0.0)
        syn = init_synthetic(tiny_train, 1, 'random', seed=0)
        _, metrics, _ = distill_step(syn, tiny_train, (tiny_pretrained, None), cfg, step_seed=3)
        assert metrics['pair'] == -1 and metrics['slot'] == -1


class TestRunDistillation:
    def test_zero_steps_returns_initialization(self, tiny_train, tiny_banks):
        cfg = small_config(steps=0)
        syn, trajectory = run_distillation(tiny_train, tiny_banks, cfg)
        init = init_synthetic(tiny_train, cfg.ipc, cfg.init_method, seed=cfg.seed)
        np.testing.assert_array_equal(syn.audio, init.audio)
        assert trajectory.empty and list(trajectory.columns) == TRAJECTORY_COLUMNS

    def test_same_seed_same_trajectory(self, tiny_train, tiny_banks):
        cfg = small_config(steps=4, factor=2)
        first_syn, first = run_distillation(tiny_train, tiny_banks, cfg)
        second_syn, second = run_distillation(tiny_train, tiny_banks, cfg)
        pd.testing.assert_frame_equal(first, second)
        np.testing.assert_array_equal(first_syn.audio, second_syn.audio)

    def test_herding_initialization_uses_first_pair(self, tiny_train, tiny_banks):
        cfg = small_config(steps=0, init_method='herding')
        syn, _ = run_distillation(tiny_train, tiny_banks, cfg)
        expected = init_synthetic(tiny_train, cfg.ipc, 'herding', tiny_banks[0][0])
        assert syn.selection == expected.selection

    def test_stability_helpers(self):
        trajectory = pd.DataFrame({'L_dis': [5.0, 4.0, 3.0, 3.0, 2.0, 2.0]})
        smoothed = smoothed_trajectory(trajectory, window=2)
        assert smoothed.tolist() == [5.0, 4.5, 3.5, 3.0, 2.5, 2.0]
        assert np.isfinite(trailing_rolling_std(trajectory, window=2))
        assert trailing_rolling_std(trajectory.iloc[:2]) == 0.0


@pytest.mark.slow
def test_distillation_loss_settles():
    spec = BenchmarkSpec(num_classes=4, samples_per_class=40, audio_shape=(1, 8, 8), visual_shape=(3, 8, 8), seed=2)
    train, _ = generate_benchmark(spec)
    config = EncoderConfig(architecture='mlp', audio_shape=spec.audio_shape, visual_shape=spec.visual_shape,
                           hidden=(32,), feature_dim=16)
    pretrained = pretrain_bank(train, 2, config, epochs=5, seed=0, lr=0.05, batch_size=32)
    decouplers, _, _ = train_decouplers(pretrained, 2, train, DecouplingWeights(), 0.1, epochs=5, seed=0,
                                        common_dim=16, batch_size=32)
    cfg = DistillConfig(lambda_c=1.0, lambda_p=2.0, steps=120, lr_syn=0.05, batch_size=32, seed=1, factor=2,
                        ipc=2, init_method='random', log_every=0)
    _, trajectory = run_distillation(train, (pretrained, decouplers), cfg)
    smoothed = smoothed_trajectory(trajectory, window=20)
    half = len(smoothed) // 2
    assert np.isfinite(trailing_rolling_std(trajectory))
    assert smoothed.iloc[-1] <= smoothed.iloc[half]
