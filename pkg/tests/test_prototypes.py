import numpy as np
import pytest

from davdd_forge.exceptions import ContractError
from davdd_forge.models.prototypes import PrototypeBank, ema_update


def test_first_update_is_normalized_mean():
    bank = PrototypeBank(2, 2)
    bank.update(1, 'audio', [3.0, 4.0], 5)
    np.testing.assert_allclose(bank.get('audio', 1), [0.6, 0.8])
    assert bank.counts['audio'][1] == 5


def test_equal_count_blend():
    bank = PrototypeBank(1, 2)
    bank.update(0, 'visual', [1.0, 0.0], 8)
    bank.update(0, 'visual', [0.0, 1.0], 8)
    np.testing.assert_allclose(bank.get('visual', 0), [0.70711, 0.70711], atol=1e-5)
    assert bank.counts['visual'][0] == 16


def test_same_mean_is_fixed_point():
    bank = PrototypeBank(1, 2)
    bank.update(0, 'audio', [0.6, 0.8], 3)
    bank.update(0, 'audio', [0.6, 0.8], 4)
    np.testing.assert_allclose(bank.get('audio', 0), [0.6, 0.8], atol=1e-15)
    assert bank.counts['audio'][0] == 7


def test_unnormalized_updates_give_count_weighted_mean():
    rng = np.random.default_rng(0)
    bank = PrototypeBank(1, 3, normalize=False)
    means = rng.standard_normal((5, 3))
    counts = rng.integers(1, 10, size=5)
    for mean, count in zip(means, counts):
        bank.update(0, 'audio', mean, int(count))
    expected = (means * counts[:, None]).sum(axis=0) / counts.sum()
    np.testing.assert_allclose(bank.get('audio', 0), expected, atol=1e-12)


def test_initialized_needs_both_modalities():
    bank = PrototypeBank(2, 2)
    bank.update(0, 'audio', [1.0, 0.0], 1)
    assert not bank.initialized(0)
    bank.update(0, 'visual', [1.0, 0.0], 1)
    assert bank.initialized(0)
    assert bank.initialized_classes() == [0]


def test_ema_update_touches_only_batch_classes():
    bank = PrototypeBank(3, 2)
    ema_update(bank, {2: np.array([0.0, 2.0])}, {2: np.array([2.0, 0.0])}, {2: 4})
    assert bank.initialized_classes() == [2]
    np.testing.assert_allclose(bank.get('audio', 2), [0.0, 1.0])
    np.testing.assert_allclose(bank.get('visual', 2), [1.0, 0.0])


def test_zero_count_rejected():
    with pytest.raises(ContractError):
        ema_update(PrototypeBank(1, 2), {0: np.ones(2)}, {0: np.ones(2)}, {0: 0})


def test_get_returns_copy():
    bank = PrototypeBank(1, 2)
    bank.update(0, 'audio', [1.0, 0.0], 1)
    proto = bank.get('audio', 0)
    proto[0] = 9.0
    np.testing.assert_allclose(bank.get('audio', 0), [1.0, 0.0])
