"""
Sınıflandırma kaybı
"""

import numpy as np

from ..core.tensor import as_tensor, log_softmax
from ..exceptions import ContractError, ShapeError


def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    encoded = np.zeros((labels.shape[0], num_classes))
    encoded[np.arange(labels.shape[0]), labels] = 1.0
    return encoded


def cross_entropy(logits, labels):
    """
    Yığın ortalamalı çapraz entropi (log-sum-exp ile kararlı)

    Args:
        logits (Tensor): N×C
        labels (array): [0, C) aralığında N sınıf indeksi

    Returns:
        Tensor: Skaler kayıp
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy N×C logit bekler: {logits.shape}")
    n, num_classes = logits.shape
    if labels.shape[0] != n:
        raise ShapeError(f"Etiket sayısı logitlerle uyuşmuyor: {labels.shape[0]} ve {n}")
    if n == 0:
        raise ContractError("cross_entropy boş yığın alamaz")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ContractError(f"Etiketler [0, {num_classes}) aralığında olmalı: min={labels.min()}, max={labels.max()}")
    log_probs = log_softmax(logits, axis=1)
    return -(log_probs * one_hot(labels, num_classes)).sum() / n
