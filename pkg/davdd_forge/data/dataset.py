"""
Eşli (ses, görüntü, etiket) veri kümeleri, kalıcılık ve yığınlama
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..core.serialization import file_sha256, load_tensor, save_tensor
from ..exceptions import ArtifactError, ContractError, ShapeError

logger = logging.getLogger(__name__)

SPLITS = ('train', 'test', 'distilled')


@dataclass(frozen=True)
class PairedDataset:
    """
    Eşli iki modaliteli veri kümesi

    Args:
        audio (np.ndarray): N×audio_shape
        visual (np.ndarray): N×visual_shape
        labels (np.ndarray): N sınıf indeksi
        split (str): 'train', 'test' ya da 'distilled'
        num_classes (int): Sınıf sayısı
    """

    audio: np.ndarray
    visual: np.ndarray
    labels: np.ndarray
    split: str
    num_classes: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        audio = np.asarray(self.audio, dtype=np.float64)
        visual = np.asarray(self.visual, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not (audio.shape[0] == visual.shape[0] == labels.shape[0]):
            raise ShapeError(
                f"Ses, görüntü ve etiket sayıları eşit olmalı: {audio.shape[0]}, {visual.shape[0]}, {labels.shape[0]}"
            )
        if self.split not in SPLITS:
            raise ContractError(f"Bilinmeyen bölüm etiketi: {self.split}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ContractError(f"Etiketler [0, {self.num_classes}) aralığında olmalı")
        for arr in (audio, visual, labels):
            arr.setflags(write=False)
        object.__setattr__(self, 'audio', audio)
        object.__setattr__(self, 'visual', visual)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def audio_shape(self):
        return tuple(self.audio.shape[1:])

    @property
    def visual_shape(self):
        return tuple(self.visual.shape[1:])

    def class_indices(self, c):
        return np.flatnonzero(self.labels == c)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices, split=None):
        indices = np.asarray(indices, dtype=np.int64)
        return PairedDataset(
            self.audio[indices], self.visual[indices], self.labels[indices],
            split or self.split, self.num_classes, dict(self.meta),
        )

    def require_trainable(self):
        """
        Test verisinin eğitime sızmasını engeller
        """
        if self.split == 'test':
            raise ContractError("Test olarak etiketlenmiş veri eğitimde kullanılamaz")
        return self


def pairing_checksum(ds):
    """
    Sıradan bağımsız eşleşme sağlaması

    Her örnek için (ses, görüntü, etiket) üçlüsünün özeti alınır, özetler sıralanıp
    birleştirilir. Karıştırma sağlamayı değiştirmez; bir sesin eşinden ayrılması
    değiştirir.
    """
    digests = []
    for a, v, y in zip(ds.audio, ds.visual, ds.labels):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(a, dtype='<f8').tobytes())
        h.update(np.ascontiguousarray(v, dtype='<f8').tobytes())
        h.update(int(y).to_bytes(8, 'little', signed=True))
        digests.append(h.digest())
    total = hashlib.sha256()
    for d in sorted(digests):
        total.update(d)
    return total.hexdigest()


def save_dataset(ds, path, spec=None, extra=None):
    """
    Veri kümesini dizine kaydet

    Args:
        ds (PairedDataset): Kaydedilecek küme
        path (str): Hedef dizin
        spec (dict): Üretim yapılandırması
        extra (dict): Manifeste eklenecek ek alanlar

    Returns:
        dict: Yazılan manifest
    """
    os.makedirs(path, exist_ok=True)
    checksums = {
        'audio.dvt': save_tensor(os.path.join(path, 'audio.dvt'), ds.audio),
        'visual.dvt': save_tensor(os.path.join(path, 'visual.dvt'), ds.visual),
        'labels.dvt': save_tensor(os.path.join(path, 'labels.dvt'), ds.labels.astype(np.float64)),
    }
    manifest = {
        'split': ds.split,
        'num_samples': len(ds),
        'num_classes': ds.num_classes,
        'class_counts': ds.class_counts().tolist(),
        'audio_shape': list(ds.audio_shape),
        'visual_shape': list(ds.visual_shape),
        'sha256': checksums,
        'pairing_checksum': pairing_checksum(ds),
        'spec': spec or {},
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(path, 'manifest.json'), 'w', encoding='utf-8') as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    logger.info(f"Veri kümesi kaydedildi: {path} ({len(ds)} örnek, bölüm={ds.split})")
    return manifest


def load_dataset(path, verify=True):
    """
    Veri kümesini dizinden yükle

    Args:
        path (str): Veri kümesi dizini
        verify (bool): Sağlamaları doğrula

    Returns:
        PairedDataset: Yüklenen küme
    """
    manifest_path = os.path.join(path, 'manifest.json')
    if not os.path.exists(manifest_path):
        raise ArtifactError(manifest_path)
    with open(manifest_path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    if verify:
        for fname, digest in manifest['sha256'].items():
            fpath = os.path.join(path, fname)
            if not os.path.exists(fpath):
                raise ArtifactError(fpath)
            if file_sha256(fpath) != digest:
                raise ArtifactError(fpath, "sağlaması uyuşmuyor")
    ds = PairedDataset(
        load_tensor(os.path.join(path, 'audio.dvt')),
        load_tensor(os.path.join(path, 'visual.dvt')),
        np.rint(load_tensor(os.path.join(path, 'labels.dvt'))).astype(np.int64),
        manifest['split'],
        manifest['num_classes'],
        {'path': path, 'spec': manifest.get('spec', {})},
    )
    if verify and pairing_checksum(ds) != manifest['pairing_checksum']:
        raise ArtifactError(path, "eşleşme sağlaması uyuşmuyor")
    return ds


def batch_iter(ds, batch_size, seed, by_class=None, epoch=0):
    """
    Tohumlu karıştırma ile yığınlar üretir

    Args:
        ds (PairedDataset): Kaynak küme
        batch_size (int): Yığın boyutu
        seed (int): Karıştırma tohumu
        by_class (int): Verilirse yalnızca o sınıfın örnekleri
        epoch (int): Dönem numarası (her dönem farklı ama belirlenimci sıra)

    Yields:
        PairedDataset: Alt küme yığınları
    """
    if batch_size < 1:
        raise ContractError(f"Yığın boyutu en az 1 olmalı: {batch_size}")
    indices = np.arange(len(ds)) if by_class is None else ds.class_indices(by_class)
    rng = np.random.default_rng([int(seed), int(epoch)])
    order = indices[rng.permutation(indices.shape[0])]
    for start in range(0, order.shape[0], batch_size):
        yield ds.subset(order[start:start + batch_size])
