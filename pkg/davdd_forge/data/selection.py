"""
Çekirdek küme (coreset) seçimi: Herding ve rastgele seçim
"""

import logging

import numpy as np

from ..exceptions import ContractError

logger = logging.getLogger(__name__)


def _check_ipc(labels, ipc, num_classes):
    if ipc < 1:
        raise ContractError(f"ipc en az 1 olmalı: {ipc}")
    counts = np.bincount(labels, minlength=num_classes)
    too_small = [c for c in range(num_classes) if counts[c] < ipc]
    if too_small:
        raise ContractError(f"ipc={ipc} sınıf boyutunu aşıyor: sınıflar {too_small}, boyutlar {counts[too_small].tolist()}")


def herding_select(features, labels, ipc, num_classes=None):
    """
    Sınıf başına açgözlü Herding seçimi

    t. adımda seçilmemiş örnekler arasından
    ||mu_c - (f_i + toplam(seçilenler)) / t|| değerini en küçük yapan örnek seçilir.
    Eşitlikte en küçük indeks kazanır.

    Args:
        features (np.ndarray): N×d öznitelikler
        labels (np.ndarray): N etiket
        ipc (int): Sınıf başına seçilecek örnek
        num_classes (int): Sınıf sayısı (varsayılan: max(label) + 1)

    Returns:
        dict: sınıf -> seçilme sırasıyla indeks listesi
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(num_classes or labels.max() + 1)
    _check_ipc(labels, ipc, num_classes)

    selection = {}
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        feats = features[idx]
        mu = feats.mean(axis=0)
        running = np.zeros_like(mu)
        available = np.ones(idx.shape[0], dtype=bool)
        picked = []
        for t in range(1, ipc + 1):
            candidates = (running[None, :] + feats) / t
            dist = np.linalg.norm(mu[None, :] - candidates, axis=1)
            dist[~available] = np.inf
            best = int(np.argmin(dist))
            available[best] = False
            running += feats[best]
            picked.append(int(idx[best]))
        selection[c] = picked
    logger.debug(f"Herding seçimi: {num_classes} sınıf, ipc={ipc}")
    return selection


def random_select(labels, ipc, seed, num_classes=None):
    """
    Sınıf başına yerine koymadan düzgün rastgele seçim

    Returns:
        dict: sınıf -> indeks listesi
    """
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(num_classes or labels.max() + 1)
    _check_ipc(labels, ipc, num_classes)
    rng = np.random.default_rng(seed)
    selection = {}
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        selection[c] = [int(i) for i in rng.choice(idx, size=ipc, replace=False)]
    return selection


def flatten_selection(selection):
    """
    Sınıf sırasıyla düz indeks dizisi
    """
    return np.array([i for c in sorted(selection) for i in selection[c]], dtype=np.int64)
