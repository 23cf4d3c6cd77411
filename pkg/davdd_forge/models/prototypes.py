"""
Sınıf prototipi bankası ve uyarlanır momentumlu güncelleme
"""

import logging

import numpy as np

from ..core.tensor import NORM_EPS
from ..exceptions import ContractError

logger = logging.getLogger(__name__)

MODALITIES = ('audio', 'visual')


class PrototypeBank:
    """
    Modalite başına sınıf prototipleri ve kümülatif örnek sayıları

    Args:
        num_classes (int): C
        dim (int): Prototip boyutu (d_c)
        normalize (bool): Her güncellemeden sonra birim uzunluğa normalize et
    """

    def __init__(self, num_classes, dim, normalize=True):
        self.num_classes = int(num_classes)
        self.dim = int(dim)
        self.normalize = normalize
        self.prototypes = {m: np.zeros((self.num_classes, self.dim)) for m in MODALITIES}
        self.counts = {m: np.zeros(self.num_classes, dtype=np.int64) for m in MODALITIES}

    def initialized(self, c):
        return all(self.counts[m][c] > 0 for m in MODALITIES)

    def initialized_classes(self):
        return [c for c in range(self.num_classes) if self.initialized(c)]

    def get(self, modality, c):
        return self.prototypes[modality][c].copy()

    def update(self, c, modality, mean, count):
        """
        P_c <- N(m·P_c + (1-m)·μ_c), m = N_prev / (N_prev + N_curr)

        Args:
            c (int): Sınıf
            modality (str): 'audio' ya da 'visual'
            mean (np.ndarray): Yığın ortalaması μ_c
            count (int): Yığındaki sınıf örneği sayısı
        """
        if count < 1:
            raise ContractError(f"Sınıf {c} için güncelleme sayısı en az 1 olmalı: {count}")
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        if mean.shape[0] != self.dim:
            raise ContractError(f"Prototip boyutu {self.dim} beklenirken {mean.shape[0]} verildi")
        n_prev = int(self.counts[modality][c])
        momentum = n_prev / (n_prev + count)
        blended = momentum * self.prototypes[modality][c] + (1.0 - momentum) * mean
        if self.normalize:
            norm = np.linalg.norm(blended)
            if norm > NORM_EPS:
                blended = blended / norm
            else:
                logger.debug(f"Sınıf {c} ({modality}) prototipi dejenere, normalize edilmedi")
        self.prototypes[modality][c] = blended
        self.counts[modality][c] = n_prev + int(count)


def ema_update(bank, audio_means, visual_means, counts):
    """
    Yığında görülen her sınıf için iki modalitenin prototipini günceller

    Args:
        bank (PrototypeBank): Güncellenecek banka
        audio_means (dict): sınıf -> ses yığın ortalaması
        visual_means (dict): sınıf -> görüntü yığın ortalaması
        counts (dict): sınıf -> yığındaki örnek sayısı

    Returns:
        PrototypeBank: Aynı banka (yerinde güncellenir)
    """
    for c, count in counts.items():
        if count < 1:
            raise ContractError(f"Sınıf {c} için sayı en az 1 olmalı: {count}")
        bank.update(c, 'audio', audio_means[c], count)
        bank.update(c, 'visual', visual_means[c], count)
    return bank
