"""
Ayrıştırıcı eğitimi kayıpları

L_de = L_cls + λ_inter·L_inter + λ_intra·L_intra + λ_align·L_align
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..core.tensor import Tensor, as_tensor, concat, l2_normalize, log_softmax
from ..exceptions import ConfigError, ContractError
from .losses import cross_entropy
from .network import build_linear_head

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecouplingWeights:
    """
    Ayrıştırma kaybı ağırlıkları
    """

    lambda_com: float = 2.0
    lambda_fu: float = 2.0
    lambda_inter: float = 1.0
    lambda_intra: float = 3.0
    lambda_align: float = 1.0

    def __post_init__(self):
        negative = {k: v for k, v in asdict(self).items() if v < 0}
        if negative:
            raise ConfigError(f"Kayıp ağırlıkları negatif olamaz: {negative}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_run_config(cls, cfg):
        return cls(cfg.lambda_com, cfg.lambda_fu, cfg.lambda_inter, cfg.lambda_intra, cfg.lambda_align)


@dataclass
class ClassifierHeads:
    """
    Ayrıştırıcı eğitiminde kullanılıp atılan üç doğrusal sınıflandırıcı
    """

    audio: object
    visual: object
    fused: object

    @property
    def models(self):
        return (self.audio, self.visual, self.fused)


def build_heads(common_dim, num_classes, seed):
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=3)
    return ClassifierHeads(
        audio=build_linear_head(common_dim, num_classes, int(seeds[0]), name='audio_head'),
        visual=build_linear_head(common_dim, num_classes, int(seeds[1]), name='visual_head'),
        fused=build_linear_head(2 * common_dim, num_classes, int(seeds[2]), name='fused_head'),
    )


def loss_cls(reps, labels, heads, lambda_com, lambda_fu):
    """
    λ_com·(CE(l_a, y) + CE(l_v, y)) + λ_fu·CE(l_fuse, y)

    Args:
        reps (Reps): Temsiller (yalnızca ortak kısımlar kullanılır)
        labels (np.ndarray): Etiketler
        heads (ClassifierHeads): Sınıflandırıcılar
    """
    z_a, z_v = reps.audio_common, reps.visual_common
    ce_a = cross_entropy(heads.audio(z_a), labels)
    ce_v = cross_entropy(heads.visual(z_v), labels)
    ce_fuse = cross_entropy(heads.fused(concat([z_a, z_v], axis=1)), labels)
    return lambda_com * (ce_a + ce_v) + lambda_fu * ce_fuse


def loss_inter(z_a, z_v, labels, tau):
    """
    Bileşik temsiller üzerinde denetimli karşıtsal kayıp

    Pozitifi olmayan çapalar atlanır; hiç pozitif yoksa kayıp 0'dır.

    Args:
        z_a (Tensor): N×d_c ses ortak temsilleri
        z_v (Tensor): N×d_c görüntü ortak temsilleri
        labels (np.ndarray): N etiket
        tau (float): Sıcaklık
    """
    z_a, z_v = as_tensor(z_a), as_tensor(z_v)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = labels.shape[0]
    if n < 2:
        raise ContractError(f"loss_inter en az iki örnek gerektirir: N={n}")
    composite = l2_normalize(z_a + z_v, axis=1)
    logits = (composite @ composite.T) / tau

    not_self = ~np.eye(n, dtype=bool)
    positives = (labels[:, None] == labels[None, :]) & not_self
    pos_counts = positives.sum(axis=1)
    anchors = pos_counts > 0
    if not anchors.any():
        return Tensor(0.0)

    # Her çapa için pozitiflerin ortalaması, ardından çapalar üzerinden ortalama
    weights = np.zeros((n, n))
    weights[anchors] = positives[anchors] / pos_counts[anchors, None]
    log_probs = log_softmax(logits, axis=1, mask=not_self)
    return -(log_probs * weights).sum() / float(anchors.sum())


def loss_intra(z_a, z_v, tau):
    """
    Örnek içi modaliteler arası karşıtsal kayıp (A->V ve V->A ortalaması)

    Args:
        z_a (Tensor): N×d_c
        z_v (Tensor): N×d_c
        tau (float): Sıcaklık
    """
    z_a, z_v = as_tensor(z_a), as_tensor(z_v)
    n = z_a.shape[0]
    if n == 0:
        return Tensor(0.0)
    sim = (l2_normalize(z_a, axis=1) @ l2_normalize(z_v, axis=1).T) / tau
    diag = np.eye(n)
    a_to_v = -(log_softmax(sim, axis=1) * diag).sum() / float(n)
    v_to_a = -(log_softmax(sim, axis=0) * diag).sum() / float(n)
    return (a_to_v + v_to_a) * 0.5


def class_mean_matrix(labels, classes):
    """
    K×N ortalama matrisi: satır k, classes[k] sınıfının örneklerinin ortalamasını alır
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    averaging = np.zeros((len(classes), labels.shape[0]))
    for k, c in enumerate(classes):
        members = labels == c
        averaging[k, members] = 1.0 / members.sum()
    return averaging


def class_means(z, labels, classes):
    """
    Normalize edilmiş özniteliklerin sınıf ortalamaları, yeniden normalize edilmiş
    """
    averaging = Tensor(class_mean_matrix(labels, classes))
    return l2_normalize(averaging @ l2_normalize(as_tensor(z), axis=1), axis=1)


def loss_align(z_a, z_v, labels, bank):
    """
    Yığın sınıf ortalamalarını karşı modalitenin prototipine hizalar

    Prototipler sabittir; banka henüz görmediği sınıflar atlanır.

    Args:
        z_a (Tensor): N×d_c
        z_v (Tensor): N×d_c
        labels (np.ndarray): N etiket
        bank (PrototypeBank): Prototip bankası
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    present = sorted(int(c) for c in np.unique(labels))
    classes = [c for c in present if bank.initialized(c)]
    if not classes:
        return Tensor(0.0)
    mu_a = class_means(z_a, labels, classes)
    mu_v = class_means(z_v, labels, classes)
    proto_a = Tensor(np.stack([bank.get('audio', c) for c in classes]))
    proto_v = Tensor(np.stack([bank.get('visual', c) for c in classes]))
    distance = (1.0 - (mu_a * proto_v).sum(axis=1)) + (1.0 - (mu_v * proto_a).sum(axis=1))
    return distance.sum() / float(len(classes))


def decoupling_loss(reps, labels, heads, bank, weights, tau):
    """
    Toplam ayrıştırma kaybı ve bileşenleri

    Returns:
        tuple: (toplam Tensor, {'cls', 'inter', 'intra', 'align'} float sözlüğü)
    """
    l_cls = loss_cls(reps, labels, heads, weights.lambda_com, weights.lambda_fu)
    l_inter = loss_inter(reps.audio_common, reps.visual_common, labels, tau)
    l_intra = loss_intra(reps.audio_common, reps.visual_common, tau)
    l_align = loss_align(reps.audio_common, reps.visual_common, labels, bank)
    total = (
        l_cls
        + weights.lambda_inter * l_inter
        + weights.lambda_intra * l_intra
        + weights.lambda_align * l_align
    )
    parts = {
        'cls': l_cls.item(),
        'inter': l_inter.item(),
        'intra': l_intra.item(),
        'align': l_align.item(),
    }
    return total, parts
