"""
Merkezi fark ile türev doğrulama
"""

import logging

import numpy as np

from ..exceptions import ContractError, NonFiniteError
from .tensor import Tape, Tensor, backward

logger = logging.getLogger(__name__)


def _scalar(fn, arr):
    try:
        out = fn(Tensor(arr))
    except NonFiniteError as e:
        raise NonFiniteError(f"grad_check: fonksiyon sonlu değil ({e})") from None
    if out.size != 1:
        raise ContractError(f"grad_check skaler fonksiyon gerektirir, alınan şekil: {out.shape}")
    value = out.item()
    if not np.isfinite(value):
        raise NonFiniteError("grad_check: fonksiyon sonlu değil")
    return value


def grad_check(fn, x, h=1e-5):
    """
    Analitik türevi merkezi farklarla karşılaştırır

    Args:
        fn: Tensor -> skaler Tensor
        x (Tensor | np.ndarray): Değerlendirme noktası
        h (float): Fark adımı

    Returns:
        float: max |analitik - sayısal| / max(|analitik|, |sayısal|, 1e-8)
    """
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)

    leaf = Tensor(base, requires_grad=True)
    with Tape() as tape:
        out = fn(leaf)
    if out.size != 1:
        raise ContractError(f"grad_check skaler fonksiyon gerektirir, alınan şekil: {out.shape}")
    analytic = backward(out, tape)[leaf].reshape(-1)

    flat = base.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        plus = flat.copy()
        plus[i] += h
        minus = flat.copy()
        minus[i] -= h
        f_plus = _scalar(fn, plus.reshape(base.shape))
        f_minus = _scalar(fn, minus.reshape(base.shape))
        numeric[i] = (f_plus - f_minus) / (2.0 * h)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    error = float(np.max(np.abs(analytic - numeric) / scale)) if flat.size else 0.0
    logger.debug(f"grad_check: {flat.size} koordinat, maksimum göreli hata {error:.3e}")
    return error
