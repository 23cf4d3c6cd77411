"""
Alt görev değerlendirme protokolü

Damıtılmış küme üzerinde sıfırdan eğitilen birleşik ses-görüntü sınıflandırıcısının
test doğruluğu, bağımsız çalıştırmalar üzerinden ortalama ± standart sapma olarak
raporlanır.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import accuracy_score
from sklearn.preprocessing import StandardScaler

from ..config import effective_jobs
from ..core.tensor import Tape, Tensor, backward
from ..exceptions import ArtifactError, ContractError
from ..models.classifier import FusedClassifier, spawn_seeds
from ..models.losses import cross_entropy
from ..models.network import build_linear_head
from ..models.optim import SgdState, sgd_step

logger = logging.getLogger(__name__)


def train_downstream(distilled, encoder_config, epochs, seed, lr=0.01, momentum=0.9, batch_size=64):
    """
    Damıtılmış küme üzerinde yeni kodlayıcılar + birleşik sınıflandırıcı eğitir

    Args:
        distilled (PairedDataset): Eğitim kümesi (faktörle genişletilmiş örnekler dahil)
        encoder_config (EncoderConfig): Değerlendirme kodlayıcısı (çapraz mimari için farklı olabilir)
        epochs (int): Dönem sayısı
        seed (int): Başlatma ve karıştırma tohumu

    Returns:
        FusedClassifier: Eğitilmiş model
    """
    distilled.require_trainable()
    if len(distilled) == 0:
        raise ContractError("Boş damıtılmış küme ile eğitim yapılamaz")
    model = FusedClassifier(encoder_config, distilled.num_classes, seed)
    return model.fit(distilled, epochs, lr, momentum=momentum, batch_size=batch_size, seed=seed)


def evaluate(model, test):
    """
    Birleşik tahminlerin argmax doğruluğu

    Args:
        model: predict_logits(ds) sağlayan model
        test (PairedDataset): Test verisi

    Returns:
        float: [0, 1] aralığında doğruluk
    """
    if len(test) == 0:
        return 0.0
    predictions = np.argmax(model.predict_logits(test), axis=1)
    return float(accuracy_score(test.labels, predictions))


def config_fingerprint(values):
    payload = json.dumps(values, sort_keys=True, default=str).encode('utf-8')
    return hashlib.sha256(payload).hexdigest()


@dataclass
class EvalReport:
    """
    Çalıştırma başına doğruluklar ve özet

    Ortalama ve (popülasyon) standart sapma her zaman saklanan listeden hesaplanır.
    """

    accuracies: list
    seeds: list
    fingerprint: str = ''
    label: str = ''
    meta: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(np.mean(self.accuracies)) if self.accuracies else 0.0

    @property
    def std(self):
        return float(np.std(self.accuracies)) if self.accuracies else 0.0

    def to_dict(self):
        return {
            'label': self.label,
            'accuracies': [float(a) for a in self.accuracies],
            'seeds': [int(s) for s in self.seeds],
            'mean': self.mean,
            'std': self.std,
            'runs': len(self.accuracies),
            'fingerprint': self.fingerprint,
            'meta': self.meta,
        }

    def runs_frame(self):
        return pd.DataFrame({
            'run': np.arange(len(self.accuracies)),
            'seed': self.seeds,
            'accuracy': self.accuracies,
        })

    def save(self, path):
        """
        report.json ve runs.csv yazar
        """
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, 'report.json'), 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)
        self.runs_frame().to_csv(
            os.path.join(path, 'runs.csv'), index=False, encoding='utf-8', float_format='%.10g'
        )
        return path

    @classmethod
    def load(cls, path):
        report_path = os.path.join(path, 'report.json')
        if not os.path.exists(report_path):
            raise ArtifactError(report_path)
        with open(report_path, 'r', encoding='utf-8') as f:
            values = json.load(f)
        return cls(values['accuracies'], values['seeds'], values['fingerprint'], values['label'], values['meta'])

    def __str__(self):
        return f"{self.label or 'rapor'}: {100 * self.mean:.1f}±{100 * self.std:.1f} ({len(self.accuracies)} çalıştırma)"


def _single_run(distilled, test, encoder_config, epochs, seed, lr, momentum, batch_size):
    model = train_downstream(distilled, encoder_config, epochs, seed, lr, momentum, batch_size)
    accuracy = evaluate(model, test)
    logger.info(f"Değerlendirme çalıştırması (tohum={seed}): doğruluk={accuracy:.4f}")
    return accuracy


def run_protocol(distilled, test, encoder_config, runs=5, seeds=None, epochs=200, lr=0.01,
                 momentum=0.9, batch_size=64, jobs=1, seed=0, label='', fingerprint_source=None):
    """
    Bağımsız train_downstream + evaluate çalıştırmaları

    Args:
        distilled (PairedDataset): Eğitim kümesi
        test (PairedDataset): Test kümesi
        encoder_config (EncoderConfig): Değerlendirme kodlayıcısı
        runs (int): Çalıştırma sayısı
        seeds (list): Çalıştırma tohumları (verilmezse seed'den türetilir)

    Returns:
        EvalReport: Rapor
    """
    if runs < 1:
        raise ContractError(f"Çalıştırma sayısı en az 1 olmalı: {runs}")
    if test.split != 'test':
        raise ContractError(f"Değerlendirme yalnızca 'test' bölümünde yapılır, verilen bölüm: {test.split}")
    seeds = list(seeds) if seeds is not None else spawn_seeds(seed, runs)
    if len(seeds) != runs:
        raise ContractError(f"{runs} çalıştırma için {len(seeds)} tohum verildi")
    accuracies = Parallel(n_jobs=effective_jobs(jobs))(
        delayed(_single_run)(distilled, test, encoder_config, epochs, s, lr, momentum, batch_size)
        for s in seeds
    )
    fingerprint = config_fingerprint(fingerprint_source or {
        'encoder_config': encoder_config.to_dict(), 'epochs': epochs, 'lr': lr,
        'momentum': momentum, 'batch_size': batch_size, 'seeds': seeds,
    })
    report = EvalReport(list(accuracies), seeds, fingerprint, label)
    logger.info(f"Protokol tamamlandı: {report}")
    return report


def linear_probe_accuracy(pair, train, test, epochs=100, lr=0.1, momentum=0.9, seed=0):
    """
    Donmuş [z_p^A ; z_p^V] öznitelikleri üzerinde doğrusal sınıflandırıcı doğruluğu

    Args:
        pair (PretrainedPair): Donmuş kodlayıcı çifti
        train (PairedDataset): Eğitim verisi
        test (PairedDataset): Test verisi

    Returns:
        float: Test doğruluğu
    """
    train.require_trainable()
    raw_train = pair.probe_features(train)
    scaler = StandardScaler().fit(raw_train)
    train_features = Tensor(scaler.transform(raw_train))
    test_features = Tensor(scaler.transform(pair.probe_features(test)))
    head = build_linear_head(train_features.shape[1], train.num_classes, seed, name='probe')
    state = SgdState(lr=lr, momentum=momentum)
    for _ in range(epochs):
        with Tape() as tape:
            loss = cross_entropy(head(train_features), train.labels)
        sgd_step(head, backward(loss, tape), state)
    predictions = np.argmax(head(test_features).numpy(), axis=1)
    return float(accuracy_score(test.labels, predictions))
