"""
Paylaşılan test fikstürleri: küçük benchmark ve küçük eğitilmiş banka
"""

import pytest

from davdd_forge.data.benchmark import BenchmarkSpec, generate_benchmark
from davdd_forge.models.decoupler import train_decouplers
from davdd_forge.models.decoupling_losses import DecouplingWeights
from davdd_forge.models.network import EncoderConfig
from davdd_forge.models.pretrained import pretrain_bank


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Uzun kabul testlerini çalıştır")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: uzun süren yönsel kabul testleri (--runslow gerekir)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow ile çalıştırın")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


TINY_SPEC = BenchmarkSpec(
    num_classes=3, samples_per_class=10, shared_dim=4, private_dim=4, noise=0.05,
    audio_shape=(1, 4, 4), visual_shape=(2, 4, 4), seed=11,
)


@pytest.fixture(scope="session")
def tiny_spec():
    return TINY_SPEC


@pytest.fixture(scope="session")
def tiny_data():
    return generate_benchmark(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_train(tiny_data):
    return tiny_data[0]


@pytest.fixture(scope="session")
def tiny_test(tiny_data):
    return tiny_data[1]


@pytest.fixture(scope="session")
def mlp_config():
    return EncoderConfig(
        architecture='mlp', audio_shape=TINY_SPEC.audio_shape, visual_shape=TINY_SPEC.visual_shape,
        hidden=(8,), feature_dim=6,
    )


@pytest.fixture(scope="session")
def conv_config():
    return EncoderConfig(
        architecture='convnet', audio_shape=TINY_SPEC.audio_shape, visual_shape=TINY_SPEC.visual_shape,
        width=2, blocks=1, feature_dim=5,
    )


@pytest.fixture(scope="session")
def tiny_pretrained(tiny_train, mlp_config):
    return pretrain_bank(tiny_train, 2, mlp_config, epochs=2, seed=3, batch_size=8)


@pytest.fixture(scope="session")
def tiny_banks(tiny_train, tiny_pretrained):
    decouplers, _, _ = train_decouplers(
        tiny_pretrained, 2, tiny_train, DecouplingWeights(), tau=0.5, epochs=1, seed=5,
        common_dim=4, depth=2, batch_size=8,
    )
    return tiny_pretrained, decouplers
