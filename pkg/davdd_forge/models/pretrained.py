"""
Ön eğitilmiş kodlayıcı çifti bankası
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..config import effective_jobs
from ..core.tensor import Tensor, concat
from ..exceptions import ConfigError
from .classifier import FusedClassifier, spawn_seeds
from .network import Model

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['pair', 'epoch', 'loss']


@dataclass
class PretrainedPair:
    """
    Aynı tohumu paylaşan donmuş ses ve görüntü kodlayıcıları
    """

    audio: Model
    visual: Model
    pair_id: int
    seed: int
    feature_dim: int

    def features(self, audio, visual):
        """
        Args:
            audio, visual: Yığın girdileri

        Returns:
            tuple: (z_p^A, z_p^V)
        """
        audio = audio if isinstance(audio, Tensor) else Tensor(audio)
        visual = visual if isinstance(visual, Tensor) else Tensor(visual)
        return self.audio(audio), self.visual(visual)

    def probe_features(self, ds, batch_size=256):
        """
        Birleştirilmiş [z_p^A ; z_p^V] öznitelikleri (türevsiz)
        """
        chunks = []
        for start in range(0, len(ds), batch_size):
            stop = start + batch_size
            z_a, z_v = self.features(ds.audio[start:stop], ds.visual[start:stop])
            chunks.append(concat([z_a, z_v], axis=1).numpy())
        if not chunks:
            return np.zeros((0, 2 * self.feature_dim))
        return np.concatenate(chunks, axis=0)


class PretrainedBank:
    """
    M adet donmuş kodlayıcı çifti
    """

    def __init__(self, pairs, encoder_config, history=None):
        seeds = [p.seed for p in pairs]
        if len(set(seeds)) != len(seeds):
            raise ConfigError(f"Çiftler farklı tohumlarla eğitilmeli: {seeds}")
        self.pairs = list(pairs)
        self.encoder_config = encoder_config
        self.history = history if history is not None else pd.DataFrame(columns=HISTORY_COLUMNS)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, m):
        return self.pairs[m]

    def __iter__(self):
        return iter(self.pairs)

    @property
    def seeds(self):
        return [p.seed for p in self.pairs]

    @property
    def feature_dim(self):
        return self.encoder_config.feature_dim


def _pretrain_pair(pair_id, seed, train, encoder_config, epochs, lr, momentum, batch_size):
    clf = FusedClassifier(encoder_config, train.num_classes, seed)
    clf.fit(train, epochs, lr, momentum=momentum, batch_size=batch_size, seed=seed)
    logger.info(f"Ön eğitim çifti {pair_id} tamamlandı: son kayıp={clf.history[-1]:.4f}")
    history = [{'pair': pair_id, 'epoch': e, 'loss': loss} for e, loss in enumerate(clf.history)]
    # Sınıflandırıcı atılır, yalnızca kodlayıcılar dondurulup saklanır
    pair = PretrainedPair(clf.audio.freeze(), clf.visual.freeze(), pair_id, seed, encoder_config.feature_dim)
    return pair, history


def pretrain_bank(train, num_pairs, encoder_config, epochs, seed, lr=0.01, momentum=0.9,
                  batch_size=64, jobs=1):
    """
    M kodlayıcı çiftini birbirinden bağımsız eğitir ve dondurur

    Args:
        train (PairedDataset): Eğitim verisi
        num_pairs (int): M
        encoder_config (EncoderConfig): Kodlayıcı yapılandırması
        epochs (int): Çift başına dönem sayısı
        seed (int): Ana tohum (çift tohumları bundan türetilir)
        jobs (int): Paralel iş sayısı

    Returns:
        PretrainedBank: Donmuş çiftler
    """
    if num_pairs < 1:
        raise ConfigError(f"M en az 1 olmalı: {num_pairs}")
    if epochs < 1:
        raise ConfigError(f"Dönem sayısı en az 1 olmalı: {epochs}")
    train.require_trainable()
    seeds = spawn_seeds(seed, num_pairs)
    logger.info(f"Ön eğitim bankası oluşturuluyor: M={num_pairs}, dönem={epochs}, iş={effective_jobs(jobs)}")
    results = Parallel(n_jobs=effective_jobs(jobs))(
        delayed(_pretrain_pair)(m, s, train, encoder_config, epochs, lr, momentum, batch_size)
        for m, s in enumerate(seeds)
    )
    pairs = [pair for pair, _ in results]
    history = pd.DataFrame([row for _, rows in results for row in rows], columns=HISTORY_COLUMNS)
    return PretrainedBank(pairs, encoder_config, history)
