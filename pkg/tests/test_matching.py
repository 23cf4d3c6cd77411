import numpy as np
import pytest

from davdd_forge.core.tensor import Tape, Tensor, backward
from davdd_forge.distill.matching import loss_common, loss_private
from davdd_forge.exceptions import ContractError
from davdd_forge.models.decoupler import Reps


def column(values):
    if values is None:
        return None
    return Tensor(np.asarray(values, dtype=float)[:, None])


def reps(audio_private, visual_private, audio_common=None, visual_common=None):
    return Reps(column(audio_private), column(audio_common), column(visual_private), column(visual_common))


def random_batches(rng):
    d_private, d_common = int(rng.integers(1, 17)), int(rng.integers(1, 17))
    batches = []
    for _ in range(2):
        n = int(rng.integers(1, 9))
        batches.append(Reps(*(Tensor(rng.standard_normal((n, d))) for d in (d_private, d_common, d_private, d_common))))
    return batches


def mean_rows(rows):
    return [sum(row[j] for row in rows) / len(rows) for j in range(len(rows[0]))]


def squared_distance(u, v):
    return sum((a - b) ** 2 for a, b in zip(u, v))


class TestLossPrivate:
    def test_equal_means(self):
        real = reps([1.0, 3.0], [0.0, 4.0])
        syn = reps([2.0], [2.0])
        assert loss_private(real, syn).item() == 0.0

    def test_one_dimensional_example(self):
        real = reps([1.0, 3.0], [2.0, 2.0])
        syn = reps([0.0], [0.0])
        assert loss_private(real, syn).item() == pytest.approx(8.0)

    def test_empty_batch(self):
        with pytest.raises(ContractError):
            loss_private(reps([1.0], [1.0]), reps(np.zeros(0), np.zeros(0)))

    def test_audio_term_ignores_visual_inputs(self):
        audio = Tensor([[0.5], [1.5]], requires_grad=True)
        visual = Tensor([[0.5], [-1.0]], requires_grad=True)
        real = reps([2.0, 2.0], [0.0, 0.0])
        with Tape() as tape:
            loss = loss_private(real, Reps(audio, None, visual, None))
        grads = backward(loss, tape)
        # d/d(audio) yalnızca ses ortalamasına bağlı
        np.testing.assert_allclose(grads[audio], [[-1.0], [-1.0]])
        np.testing.assert_allclose(grads[visual], [[-0.25], [-0.25]])

    def test_audio_term_has_no_visual_gradient(self):
        audio = Tensor([[0.5, 1.0], [1.5, -2.0]], requires_grad=True)
        visual = Tensor([[0.5, 0.3], [-1.0, 0.7]], requires_grad=True)
        real = Reps(Tensor([[2.0, 1.0]]), None, Tensor([[0.0, 1.0]]), None)
        with Tape() as tape:
            syn = Reps(audio, None, visual, None)
            audio_term = ((real.audio_private.mean(axis=0) - syn.audio_private.mean(axis=0)) ** 2).sum()
            visual_term = loss_private(real, syn) - audio_term
        np.testing.assert_array_equal(backward(audio_term, tape)[visual], np.zeros((2, 2)))
        np.testing.assert_array_equal(backward(visual_term, tape)[audio], np.zeros((2, 2)))

    @pytest.mark.parametrize("seed", range(20))
    def test_random_batches_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        real, syn = random_batches(rng)
        expected = 0.0
        for attr in ('audio_private', 'visual_private'):
            expected += squared_distance(mean_rows(getattr(real, attr).data), mean_rows(getattr(syn, attr).data))
        assert loss_private(real, syn).item() == pytest.approx(expected, abs=1e-9)


class TestLossCommon:
    def test_coincident_means(self):
        real = reps([0.0], [0.0], [1.0, 3.0], [2.0, 2.0])
        syn = reps([0.0], [0.0], [2.0], [2.0])
        assert loss_common(real, syn).item() == 0.0

    def test_plug_in_example(self):
        real = reps([0.0], [0.0], [1.0], [1.0])
        syn = reps([0.0], [0.0], [0.0], [0.0])
        assert loss_common(real, syn).item() == pytest.approx(6.0)
        assert loss_common(real, syn, joint=False).item() == pytest.approx(2.0)

    def test_joint_term_not_redundant(self):
        real = reps([0.0], [0.0], [1.0], [-1.0])
        syn = reps([0.0], [0.0], [0.0], [0.0])
        assert loss_common(real, syn).item() == pytest.approx(2.0)
        assert loss_common(real, syn, joint=False).item() == pytest.approx(2.0)

    def test_joint_term_couples_modalities(self):
        audio = Tensor([[0.2]], requires_grad=True)
        visual = Tensor([[0.1]], requires_grad=True)
        real = reps([0.0], [0.0], [1.0], [1.0])
        with Tape() as tape:
            syn = Reps(Tensor([[0.0]]), audio, Tensor([[0.0]]), visual)
            joint = loss_common(real, syn) - loss_common(real, syn, joint=False)
        grads = backward(joint, tape)
        # d/da (2 - a - v)^2 = -2 (2 - a - v)
        np.testing.assert_allclose(grads[audio], [[-3.4]])
        np.testing.assert_allclose(grads[visual], [[-3.4]])

    def test_empty_batch(self):
        real = reps([0.0], [0.0], [1.0], [1.0])
        with pytest.raises(ContractError):
            loss_common(real, reps(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)))

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("joint", [True, False])
    def test_random_batches_match_oracle(self, seed, joint):
        rng = np.random.default_rng(60 + seed)
        real, syn = random_batches(rng)
        real_a, real_v = mean_rows(real.audio_common.data), mean_rows(real.visual_common.data)
        syn_a, syn_v = mean_rows(syn.audio_common.data), mean_rows(syn.visual_common.data)
        expected = squared_distance(real_a, syn_a) + squared_distance(real_v, syn_v)
        if joint:
            expected += squared_distance([a + v for a, v in zip(real_a, real_v)],
                                         [a + v for a, v in zip(syn_a, syn_v)])
        assert loss_common(real, syn, joint=joint).item() == pytest.approx(expected, abs=1e-9)
