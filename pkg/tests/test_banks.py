import json

import numpy as np
import pytest

from davdd_forge.core.gradcheck import grad_check
from davdd_forge.core.tensor import Tensor
from davdd_forge.data.benchmark import BenchmarkSpec, generate_benchmark
from davdd_forge.evaluation.protocol import linear_probe_accuracy
from davdd_forge.exceptions import ArtifactError, ConfigError, ContractError
from davdd_forge.models.bank_store import load_bank, save_bank
from davdd_forge.models.decoupler import (
    AGREEMENT_COLUMNS,
    HISTORY_COLUMNS,
    DecouplerBank,
    build_decoupler,
    cross_modal_agreement,
    encode,
    train_decouplers,
)
from davdd_forge.models.decoupling_losses import DecouplingWeights
from davdd_forge.models.network import EncoderConfig
from davdd_forge.models.pretrained import pretrain_bank


def parameters_of(pretrained):
    return [p for pair in pretrained for model in (pair.audio, pair.visual) for p in model.parameter_arrays()]


class TestPretrainBank:
    def test_pairs_have_distinct_parameters(self, tiny_pretrained):
        assert len(tiny_pretrained) == 2
        assert len(set(tiny_pretrained.seeds)) == 2
        first, second = tiny_pretrained[0], tiny_pretrained[1]
        assert not np.array_equal(first.audio.parameter_arrays()[0], second.audio.parameter_arrays()[0])

    def test_pairs_are_frozen(self, tiny_pretrained):
        assert all(pair.audio.frozen and pair.visual.frozen for pair in tiny_pretrained)

    def test_history(self, tiny_pretrained):
        history = tiny_pretrained.history
        assert list(history.columns) == ['pair', 'epoch', 'loss']
        assert len(history) == 2 * 2

    def test_epochs_must_be_positive(self, tiny_train, mlp_config):
        with pytest.raises(ConfigError):
            pretrain_bank(tiny_train, 1, mlp_config, epochs=0, seed=0)

    def test_same_seed_is_reproducible(self, tiny_train, mlp_config, tiny_pretrained):
        again = pretrain_bank(tiny_train, 2, mlp_config, epochs=2, seed=3, batch_size=8)
        for a, b in zip(parameters_of(again), parameters_of(tiny_pretrained)):
            np.testing.assert_array_equal(a, b)


class TestEncode:
    def _identity_decoupler(self, pair):
        dim = pair.feature_dim
        dec = build_decoupler(dim, dim, 1, seed=0)
        dec.audio.set_parameters([np.eye(dim), np.zeros(dim)])
        dec.visual.set_parameters([np.eye(dim), np.zeros(dim)])
        return dec

    def test_identity_projection(self, tiny_pretrained, tiny_train):
        pair = tiny_pretrained[0]
        reps = encode(pair, self._identity_decoupler(pair), tiny_train.subset([0, 1, 2]))
        np.testing.assert_allclose(reps.audio_common.data, reps.audio_private.data)
        np.testing.assert_allclose(reps.visual_common.data, reps.visual_private.data)

    def test_empty_batch(self, tiny_pretrained, tiny_train):
        pair = tiny_pretrained[0]
        audio = np.zeros((0, *tiny_train.audio_shape))
        visual = np.zeros((0, *tiny_train.visual_shape))
        reps = encode(pair, build_decoupler(pair.feature_dim, 3, 2, seed=1), (audio, visual))
        assert len(reps) == 0
        assert reps.audio_common.shape == (0, 3)

    def test_shape_mismatch(self, tiny_pretrained):
        pair = tiny_pretrained[0]
        with pytest.raises(ContractError):
            encode(pair, build_decoupler(pair.feature_dim, 3, 1, seed=1), (np.zeros((2, 9)), np.zeros((2, 9))))

    def test_gradient_reaches_raw_input(self, tiny_pretrained, tiny_train):
        pair = tiny_pretrained[0]
        dec = build_decoupler(pair.feature_dim, 3, 2, seed=2).freeze()
        visual = Tensor(tiny_train.visual[:2])

        def common_energy(audio):
            return (encode(pair, dec, (audio, visual)).audio_common ** 2).sum()

        assert grad_check(common_energy, tiny_train.audio[:2]) < 1e-4

    def test_depth_must_be_one_or_two(self):
        with pytest.raises(ConfigError):
            build_decoupler(4, 4, 3, seed=0)


class TestTrainDecouplers:
    def test_bank_shape(self, tiny_banks):
        pretrained, decouplers = tiny_banks
        assert decouplers.num_pairs == len(pretrained)
        assert decouplers.num_slots == 2
        for m in range(decouplers.num_pairs):
            for t in range(decouplers.num_slots):
                dec = decouplers.get(m, t)
                assert dec.index == (m, t)
                assert dec.frozen and dec.common_dim == 4

    def test_encoders_stay_bitwise_identical(self, tiny_train, tiny_pretrained):
        before = parameters_of(tiny_pretrained)
        train_decouplers(tiny_pretrained, 1, tiny_train, DecouplingWeights(), 0.1, epochs=1, seed=0,
                         common_dim=3, batch_size=8)
        for a, b in zip(before, parameters_of(tiny_pretrained)):
            np.testing.assert_array_equal(a, b)

    def test_history_and_agreement_tables(self, tiny_train, tiny_test, tiny_pretrained):
        _, history, agreement = train_decouplers(
            tiny_pretrained, 1, tiny_train, DecouplingWeights(), 0.1, epochs=2, seed=0,
            common_dim=3, batch_size=8, holdout=tiny_test,
        )
        assert list(history.columns) == HISTORY_COLUMNS
        assert len(history) == 2 * 2
        assert list(agreement.columns) == AGREEMENT_COLUMNS
        assert agreement[['before', 'after']].abs().le(1.0 + 1e-9).all().all()

    def test_rejects_test_split(self, tiny_test, tiny_pretrained):
        with pytest.raises(ContractError):
            train_decouplers(tiny_pretrained, 1, tiny_test, DecouplingWeights(), 0.1, epochs=1, seed=0)

    def test_misplaced_decoupler(self):
        dec = build_decoupler(3, 3, 1, seed=0, index=(0, 1))
        with pytest.raises(ContractError):
            DecouplerBank([[dec]], 3, 1)


class TestBankStore:
    def test_roundtrip(self, tmp_path, tiny_banks, tiny_test):
        pretrained, decouplers = tiny_banks
        manifest = save_bank(str(tmp_path / 'bank'), pretrained, decouplers)
        assert (manifest['M'], manifest['T'], manifest['d_c']) == (2, 2, 4)
        loaded, loaded_dec, _ = load_bank(str(tmp_path / 'bank'))
        assert loaded.seeds == pretrained.seeds
        batch = tiny_test.subset([0, 1])
        for m in range(2):
            for t in range(2):
                original = encode(pretrained[m], decouplers.get(m, t), batch)
                restored = encode(loaded[m], loaded_dec.get(m, t), batch)
                np.testing.assert_array_equal(restored.audio_common.data, original.audio_common.data)
                np.testing.assert_array_equal(restored.visual_private.data, original.visual_private.data)

    def test_manifest_is_sorted_json(self, tmp_path, tiny_banks):
        pretrained, decouplers = tiny_banks
        save_bank(str(tmp_path / 'bank'), pretrained, decouplers, extra={'temperature': 0.5})
        text = (tmp_path / 'bank' / 'manifest.json').read_text(encoding='utf-8')
        assert json.loads(text)['temperature'] == 0.5
        assert text == json.dumps(json.loads(text), sort_keys=True, indent=2)

    def test_pretrained_only_bank(self, tmp_path, tiny_pretrained):
        save_bank(str(tmp_path / 'bank'), tiny_pretrained)
        _, decouplers, manifest = load_bank(str(tmp_path / 'bank'))
        assert decouplers is None and manifest['T'] == 0
        with pytest.raises(ArtifactError):
            load_bank(str(tmp_path / 'bank'), require_decouplers=True)

    def test_missing_bank(self, tmp_path):
        with pytest.raises(ArtifactError):
            load_bank(str(tmp_path / 'nowhere'))


@pytest.mark.slow
def test_decoupler_training_raises_cross_modal_agreement():
    spec = BenchmarkSpec(num_classes=4, samples_per_class=60, audio_shape=(1, 8, 8), visual_shape=(3, 8, 8), seed=1)
    train, test = generate_benchmark(spec)
    config = EncoderConfig(architecture='mlp', audio_shape=spec.audio_shape, visual_shape=spec.visual_shape,
                           hidden=(32,), feature_dim=16)
    pretrained = pretrain_bank(train, 1, config, epochs=10, seed=0, lr=0.05, batch_size=32)
    decouplers, _, agreement = train_decouplers(
        pretrained, 1, train, DecouplingWeights(), 0.1, epochs=30, seed=0, common_dim=16, batch_size=32,
        holdout=test,
    )
    assert agreement.loc[0, 'after'] > agreement.loc[0, 'before']
    assert cross_modal_agreement(pretrained[0], decouplers.get(0, 0), test) == pytest.approx(agreement.loc[0, 'after'])


@pytest.mark.slow
def test_pretrained_features_are_linearly_separable():
    train, test = generate_benchmark(BenchmarkSpec(num_classes=4, samples_per_class=100, seed=2))
    config = EncoderConfig(architecture='mlp', audio_shape=train.audio.shape[1:], visual_shape=train.visual.shape[1:],
                           hidden=(64,), feature_dim=32)
    pretrained = pretrain_bank(train, 2, config, epochs=20, seed=0, lr=0.05, batch_size=32)
    for pair in pretrained:
        assert linear_probe_accuracy(pair, train, test) > 0.85
