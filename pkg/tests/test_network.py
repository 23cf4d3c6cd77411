import numpy as np
import pytest

from davdd_forge.core.tensor import Tape, Tensor, backward
from davdd_forge.exceptions import ConfigError, ContractError, ShapeError
from davdd_forge.models.classifier import FusedClassifier
from davdd_forge.models.losses import cross_entropy
from davdd_forge.models.network import (
    EncoderConfig,
    Model,
    build_encoder,
    build_linear_head,
    fuse_and_classify,
)
from davdd_forge.models.optim import SgdState, sgd_step


class TestBuildEncoder:
    def test_mlp_is_deterministic(self):
        config = EncoderConfig(architecture='mlp', audio_shape=(64,), hidden=(128,), feature_dim=64)
        first = build_encoder(config, 7).parameter_arrays()
        second = build_encoder(config, 7).parameter_arrays()
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_convnet_output_dim(self):
        config = EncoderConfig(architecture='convnet', audio_shape=(1, 16, 16), blocks=3, width=4, feature_dim=12)
        encoder = build_encoder(config, 0, 'audio')
        assert encoder.output_dim == 12
        out = encoder(Tensor(np.random.default_rng(0).standard_normal((2, 1, 16, 16))))
        assert out.shape == (2, 12)

    def test_zero_hidden_layers(self):
        with pytest.raises(ConfigError):
            build_encoder(EncoderConfig(architecture='mlp', hidden=()), 0)

    def test_invalid_shape_chain(self):
        with pytest.raises(ConfigError):
            build_encoder(EncoderConfig(architecture='convnet', audio_shape=(1, 6, 6), blocks=2), 0)

    def test_wrong_input_shape(self, mlp_config):
        encoder = build_encoder(mlp_config, 0, 'audio')
        with pytest.raises(ShapeError):
            encoder(Tensor(np.zeros((2, 2, 4, 4))))

    def test_checkpoint_roundtrip(self, tmp_path, conv_config):
        encoder = build_encoder(conv_config, 3, 'visual').freeze()
        encoder.save(str(tmp_path / 'enc.ckpt'))
        loaded = Model.load(str(tmp_path / 'enc.ckpt'))
        assert loaded.frozen
        x = Tensor(np.random.default_rng(1).standard_normal((2, *conv_config.visual_shape)))
        np.testing.assert_array_equal(loaded(x).data, encoder(x).data)


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss = cross_entropy(Tensor(np.zeros((3, 10))), [0, 4, 9])
        assert loss.item() == pytest.approx(np.log(10), abs=1e-12)

    def test_saturated(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 50.0
        assert cross_entropy(Tensor(logits), [2]).item() < 1e-9

    def test_two_by_two(self):
        loss = cross_entropy(Tensor([[1.0, 0.0], [0.0, 1.0]]), [0, 1])
        assert loss.item() == pytest.approx(np.log(1 + np.exp(-1)), abs=1e-9)
        assert loss.item() == pytest.approx(0.313262, abs=1e-6)

    def test_out_of_range_label(self):
        with pytest.raises(ContractError):
            cross_entropy(Tensor(np.zeros((1, 3))), [3])

    def test_non_negative(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            logits = rng.standard_normal((4, 5)) * 3
            assert cross_entropy(Tensor(logits), rng.integers(0, 5, size=4)).item() >= 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_random_batches_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, c = int(rng.integers(1, 9)), int(rng.integers(2, 17))
        logits = rng.standard_normal((n, c)) * 3
        labels = rng.integers(0, c, size=n)
        expected = 0.0
        for i in range(n):
            expected -= np.log(np.exp(logits[i, labels[i]]) / sum(np.exp(v) for v in logits[i]))
        assert cross_entropy(Tensor(logits), labels).item() == pytest.approx(expected / n, abs=1e-9)


class TestSgd:
    def _scalar_model(self, value):
        head = build_linear_head(1, 1, zero=True)
        head.set_parameters([np.array([[value]]), np.zeros(1)])
        return head

    def test_vanilla_step(self):
        model = self._scalar_model(1.0)
        sgd_step(model, [np.array([[2.0]]), np.zeros(1)], SgdState(lr=0.1, momentum=0.0))
        assert model.parameters()[0].item() == pytest.approx(0.8)

    def test_momentum_accumulates(self):
        model = self._scalar_model(1.0)
        state = SgdState(lr=0.1, momentum=0.9)
        grads = [np.array([[1.0]]), np.zeros(1)]
        sgd_step(model, grads, state)
        sgd_step(model, grads, state)
        # v1 = 1, v2 = 1.9
        assert model.parameters()[0].item() == pytest.approx(1.0 - 0.1 - 0.19)

    def test_zero_gradient_fixed_point(self):
        model = self._scalar_model(0.5)
        sgd_step(model, [np.zeros((1, 1)), np.zeros(1)], SgdState(lr=0.1))
        assert model.parameters()[0].item() == 0.5

    def test_frozen_model(self):
        model = self._scalar_model(1.0).freeze()
        with pytest.raises(ContractError):
            sgd_step(model, [np.zeros((1, 1)), np.zeros(1)], SgdState(lr=0.1))

    def test_frozen_parameters_get_no_gradient(self, mlp_config):
        encoder = build_encoder(mlp_config, 0, 'audio').freeze()
        x = Tensor(np.ones((2, *mlp_config.audio_shape)), requires_grad=True)
        with Tape() as tape:
            loss = encoder(x).sum()
        grads = backward(loss, tape)
        assert all(p not in grads for p in encoder.parameters())
        assert np.abs(grads[x]).sum() > 0


class TestFuse:
    def test_logit_length(self):
        head = build_linear_head(8, 3, seed=0)
        assert fuse_and_classify(Tensor(np.ones(4)), Tensor(np.ones(4)), head).shape == (3,)

    def test_zero_head_gives_zero_logits(self):
        head = build_linear_head(8, 5, zero=True)
        logits = fuse_and_classify(Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 4))), head)
        np.testing.assert_array_equal(logits.data, np.zeros((2, 5)))

    def test_dimension_mismatch(self):
        head = build_linear_head(8, 3, seed=0)
        with pytest.raises(ContractError):
            fuse_and_classify(Tensor(np.ones(4)), Tensor(np.ones(5)), head)


class TestFusedClassifier:
    def test_fit_lowers_loss(self, tiny_train, mlp_config):
        clf = FusedClassifier(mlp_config, tiny_train.num_classes, seed=1)
        clf.fit(tiny_train, epochs=15, lr=0.05, batch_size=8)
        assert clf.history[-1] < clf.history[0]

    def test_refuses_test_split(self, tiny_test, mlp_config):
        clf = FusedClassifier(mlp_config, tiny_test.num_classes, seed=1)
        with pytest.raises(ContractError):
            clf.fit(tiny_test, epochs=1, lr=0.01)

    def test_save_load(self, tmp_path, tiny_train, tiny_test, mlp_config):
        clf = FusedClassifier(mlp_config, tiny_train.num_classes, seed=2).fit(tiny_train, 1, 0.01)
        clf.save(str(tmp_path / 'clf'))
        loaded = FusedClassifier.load(str(tmp_path / 'clf'))
        np.testing.assert_array_equal(loaded.predict_logits(tiny_test), clf.predict_logits(tiny_test))


def test_separable_toy_set_is_fit_exactly():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1], 10)
    centers = np.where(labels[:, None] == 0, -2.0, 2.0)
    audio = centers + 0.3 * rng.standard_normal((20, 2))
    visual = centers + 0.3 * rng.standard_normal((20, 2))
    config = EncoderConfig(architecture='mlp', audio_shape=(2,), visual_shape=(2,), hidden=(8,), feature_dim=4)
    models = [build_encoder(config, 1, 'audio'), build_encoder(config, 2, 'visual'), build_linear_head(8, 2, seed=3)]
    states = [SgdState(lr=0.05, momentum=0.9) for _ in models]

    def logits():
        return fuse_and_classify(models[0](Tensor(audio)), models[1](Tensor(visual)), models[2])

    for _ in range(200):
        with Tape() as tape:
            loss = cross_entropy(logits(), labels)
        grads = backward(loss, tape)
        for model, state in zip(models, states):
            sgd_step(model, grads, state)
    assert (np.argmax(logits().data, axis=1) == labels).all()
