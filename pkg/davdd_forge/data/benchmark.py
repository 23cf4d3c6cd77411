"""
Sentetik eşli modalite benchmark üretimi

Her sınıf için paylaşılan gizil uzayda bir şablon ve modalite başına özel şablonlar
çizilir. Aynı örneğin ses ve görüntüsü AYNI paylaşılan gizil çekilişi gömer; özel
gizil değişkenler modalite başına bağımsız çekilir.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from ..exceptions import ConfigError
from .dataset import PairedDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkSpec:
    """
    Args:
        num_classes (int): C
        samples_per_class (int): Sınıf başına örnek
        shared_dim (int): Paylaşılan gizil boyut
        private_dim (int): Modalite başına özel gizil boyut
        noise (float): Gözlem gürültüsü σ
        shared_jitter (float): Örnek başına paylaşılan sapma ölçeği
        private_jitter (float): Örnek başına özel sapma ölçeği
        audio_shape (tuple): Spektrogram biçimli ses şekli
        visual_shape (tuple): Görüntü şekli
        test_size (float): Test oranı (sınıf bazında)
        seed (int): Tohum
    """

    num_classes: int = 4
    samples_per_class: int = 100
    shared_dim: int = 8
    private_dim: int = 8
    noise: float = 0.1
    shared_jitter: float = 0.6
    private_jitter: float = 0.6
    audio_shape: tuple = (1, 16, 16)
    visual_shape: tuple = (3, 16, 16)
    test_size: float = 0.2
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, 'audio_shape', tuple(int(v) for v in self.audio_shape))
        object.__setattr__(self, 'visual_shape', tuple(int(v) for v in self.visual_shape))

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError(f"En az iki sınıf gerekli: C={self.num_classes}")
        if self.samples_per_class < 2:
            raise ConfigError(f"Her sınıf iki bölüme de örnek vermeli: {self.samples_per_class}")
        dims = [self.shared_dim, self.private_dim, *self.audio_shape, *self.visual_shape]
        if min(dims) < 1:
            raise ConfigError(f"Tüm boyutlar pozitif olmalı: {dims}")
        if self.noise < 0 or self.shared_jitter < 0 or self.private_jitter < 0:
            raise ConfigError("Gürültü ve sapma ölçekleri negatif olamaz")
        if not 0.0 < self.test_size < 1.0:
            raise ConfigError(f"test_size (0, 1) aralığında olmalı: {self.test_size}")

    def to_dict(self):
        values = asdict(self)
        values['audio_shape'] = list(self.audio_shape)
        values['visual_shape'] = list(self.visual_shape)
        return values

    @classmethod
    def from_dict(cls, values):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Bilinmeyen benchmark anahtarları: {unknown}")
        return cls(**values)

    @classmethod
    def from_run_config(cls, cfg):
        return cls(
            num_classes=cfg.num_classes, samples_per_class=cfg.samples_per_class,
            shared_dim=cfg.shared_dim, private_dim=cfg.private_dim, noise=cfg.noise,
            shared_jitter=cfg.shared_jitter, private_jitter=cfg.private_jitter,
            audio_shape=cfg.audio_shape, visual_shape=cfg.visual_shape, seed=cfg.data_seed,
        )


def _render_matrix(rng, out_size, in_dim):
    return rng.standard_normal((out_size, in_dim)) / np.sqrt(in_dim)


def split_train_test(labels, test_size=0.2, random_state=42):
    """
    Sınıf bazında katmanlı eğitim/test bölmesi

    Args:
        labels (np.ndarray): Etiketler
        test_size (float): Test kümesi oranı
        random_state (int): Rastgele durum

    Returns:
        tuple: (train_idx, test_idx)
    """
    frame = pd.DataFrame({'index': np.arange(len(labels)), 'label': labels})
    train_parts, test_parts = [], []
    # Her sınıf için ayrı ayrı böl
    for _, group in frame.groupby('label', sort=True):
        group = group.sample(frac=1, random_state=random_state)
        n_test = max(1, int(round(len(group) * test_size)))
        n_test = min(n_test, len(group) - 1)
        test_parts.append(group['index'].to_numpy()[:n_test])
        train_parts.append(group['index'].to_numpy()[n_test:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return train_idx, test_idx


def generate_benchmark(spec):
    """
    Benchmark üret

    Args:
        spec (BenchmarkSpec): Üretim yapılandırması

    Returns:
        tuple: (train, test) PairedDataset
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    audio_size = int(np.prod(spec.audio_shape))
    visual_size = int(np.prod(spec.visual_shape))

    # Sabit doğrusal görüntüleme matrisleri
    audio_shared = _render_matrix(rng, audio_size, spec.shared_dim)
    audio_private = _render_matrix(rng, audio_size, spec.private_dim)
    visual_shared = _render_matrix(rng, visual_size, spec.shared_dim)
    visual_private = _render_matrix(rng, visual_size, spec.private_dim)

    # Sınıf şablonları
    shared_templates = rng.standard_normal((spec.num_classes, spec.shared_dim))
    audio_templates = rng.standard_normal((spec.num_classes, spec.private_dim))
    visual_templates = rng.standard_normal((spec.num_classes, spec.private_dim))

    n = spec.num_classes * spec.samples_per_class
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)

    shared = shared_templates[labels] + spec.shared_jitter * rng.standard_normal((n, spec.shared_dim))
    private_a = audio_templates[labels] + spec.private_jitter * rng.standard_normal((n, spec.private_dim))
    private_v = visual_templates[labels] + spec.private_jitter * rng.standard_normal((n, spec.private_dim))

    audio = shared @ audio_shared.T + private_a @ audio_private.T
    visual = shared @ visual_shared.T + private_v @ visual_private.T
    audio = audio + spec.noise * rng.standard_normal(audio.shape)
    visual = visual + spec.noise * rng.standard_normal(visual.shape)

    audio = audio.reshape((n, *spec.audio_shape))
    visual = visual.reshape((n, *spec.visual_shape))

    train_idx, test_idx = split_train_test(labels, spec.test_size, spec.seed)
    meta = {'spec': spec.to_dict()}
    train = PairedDataset(audio[train_idx], visual[train_idx], labels[train_idx], 'train', spec.num_classes, meta)
    test = PairedDataset(audio[test_idx], visual[test_idx], labels[test_idx], 'test', spec.num_classes, meta)
    logger.info(f"Benchmark üretildi: {len(train)} eğitim, {len(test)} test, C={spec.num_classes}")
    return train, test
