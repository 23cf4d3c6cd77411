"""
Momentumlu stokastik gradyan inişi
"""

from dataclasses import dataclass, field

import numpy as np

from ..core.tensor import GradientMap, Tensor
from ..exceptions import ContractError, ShapeError


@dataclass
class SgdState:
    """
    Parametre başına hız tensörleri

    Güncelleme kuralı: v <- momentum * v + g ; p <- p - lr * v
    """

    lr: float
    momentum: float = 0.9
    velocities: list = field(default=None)

    def apply(self, params, grads):
        """
        Args:
            params (list): Parametre dizileri ya da tensörleri
            grads (list): Aynı sırada türev dizileri

        Returns:
            list: Güncellenmiş parametre dizileri
        """
        params = [np.asarray(p.data if isinstance(p, Tensor) else p, dtype=np.float64) for p in params]
        grads = [np.asarray(g, dtype=np.float64) for g in grads]
        if len(params) != len(grads):
            raise ShapeError(f"{len(params)} parametre için {len(grads)} türev verildi")
        if self.velocities is None:
            self.velocities = [np.zeros_like(p) for p in params]
        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape or self.velocities[i].shape != p.shape:
                raise ShapeError(f"Parametre {i} şekli uyumsuz: {p.shape}, türev {g.shape}")
            self.velocities[i] = self.momentum * self.velocities[i] + g
            updated.append(p - self.lr * self.velocities[i])
        return updated


def sgd_step(model, grads, state):
    """
    Modelin parametrelerini bir SGD adımıyla günceller

    Args:
        model (Model): Donmamış model
        grads (GradientMap | list): Parametrelere karşılık gelen türevler
        state (SgdState): Optimizasyon durumu

    Returns:
        tuple: (model, state)
    """
    if model.frozen:
        raise ContractError(f"Donmuş model güncellenemez: {model.name}")
    params = model.parameters()
    if isinstance(grads, GradientMap):
        grads = grads.get_many(params)
    model.set_parameters(state.apply(params, grads))
    return model, state
