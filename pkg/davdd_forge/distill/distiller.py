"""
Ayrıştırılmış ses-görüntü damıtma döngüsü

Her adımda bir ön eğitilmiş çift φ^m ve ona bağlı bir ayrıştırıcı δ^(m,t)
düzgün olarak örneklenir; her sınıf için gerçek ve sentetik yığınların özel ve
ortak temsil ortalamaları eşlenir ve yalnızca sentetik tuvaller güncellenir.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..core.tensor import Tape, Tensor, backward, concat
from ..exceptions import ConfigError, ContractError
from ..models.classifier import spawn_seeds
from ..models.decoupler import Reps, project
from ..models.network import build_encoder
from ..models.optim import SgdState
from ..models.pretrained import PretrainedPair
from .matching import loss_common, loss_private
from .synthetic import factor_expand, init_synthetic

logger = logging.getLogger(__name__)

ENCODER_SOURCES = ('bank', 'random')
TRAJECTORY_COLUMNS = ['step', 'pair', 'slot', 'L_pr', 'L_com', 'L_dis']


@dataclass(frozen=True)
class DistillConfig:
    """
    Damıtma yapılandırması

    Args:
        lambda_c (float): Ortak eşleme ağırlığı (0 = yalnızca özel eşleme)
        lambda_p (float): Özel eşleme ağırlığı
        steps (int): Adım sayısı
        lr_syn (float): Tuval öğrenme oranı
        momentum (float): Tuval momentumu
        batch_size (int): Sınıf başına gerçek yığın boyutu
        seed (int): Tohum
        per_class_matching (bool): Sınıf içinde eşle (False = küme genelinde)
        factor (int): Faktör tekniği parametresi l
        ipc (int): Sınıf başına tuval
        init_method (str): 'herding' ya da 'random'
        encoder_source (str): 'bank' (ön eğitilmiş) ya da 'random' (her adımda yeni rastgele kodlayıcı)
        use_decoupler (bool): Ayrıştırıcı bankasını kullan
        joint_common (bool): Ortak eşlemeye AV birleşik terimini ekle
        log_every (int): Kaç adımda bir loglanacağı
    """

    lambda_c: float = 40.0
    lambda_p: float = 80.0
    steps: int = 200
    lr_syn: float = 0.2
    momentum: float = 0.9
    batch_size: int = 64
    seed: int = 42
    per_class_matching: bool = True
    factor: int = 2
    ipc: int = 4
    init_method: str = 'herding'
    encoder_source: str = 'bank'
    use_decoupler: bool = True
    joint_common: bool = True
    log_every: int = 50

    def __post_init__(self):
        if self.lambda_c < 0 or self.lambda_p < 0:
            raise ConfigError(f"λ_c ve λ_p negatif olamaz: λ_c={self.lambda_c}, λ_p={self.lambda_p}")
        if self.steps < 0:
            raise ConfigError(f"Adım sayısı negatif olamaz: {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"Yığın boyutu en az 1 olmalı: {self.batch_size}")
        if self.encoder_source not in ENCODER_SOURCES:
            raise ConfigError(f"Bilinmeyen kodlayıcı kaynağı: {self.encoder_source}")

    @property
    def matches_common(self):
        return self.use_decoupler and self.lambda_c > 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_run_config(cls, cfg, **overrides):
        values = dict(
            lambda_c=cfg.lambda_c, lambda_p=cfg.lambda_p, steps=cfg.steps, lr_syn=cfg.lr_syn,
            momentum=cfg.momentum, batch_size=cfg.batch_size, seed=cfg.seed,
            per_class_matching=cfg.per_class_matching, factor=cfg.factor, ipc=cfg.ipc,
            init_method=cfg.init_method, joint_common=cfg.joint_common,
        )
        values.update(overrides)
        return cls(**values)


@dataclass
class Draw:
    """
    Bir adımın örneklenen çifti, ayrıştırıcısı ve gerçek yığınları
    """

    pair: PretrainedPair
    decoupler: Optional[object]
    pair_index: int
    slot: int
    real_indices: dict


def _random_pair(encoder_config, rng):
    audio_seed, visual_seed = (int(s) for s in rng.integers(0, 2**31 - 1, size=2))
    audio = build_encoder(encoder_config, audio_seed, 'audio').freeze()
    visual = build_encoder(encoder_config, visual_seed, 'visual').freeze()
    return PretrainedPair(audio, visual, -1, audio_seed, encoder_config.feature_dim)


def sample_draw(train, banks, cfg, rng):
    """
    (m, t) çiftini ve sınıf başına gerçek yığın indekslerini örnekler

    Args:
        train (PairedDataset): Eğitim verisi
        banks (tuple): (PretrainedBank, DecouplerBank ya da None)
        cfg (DistillConfig): Yapılandırma
        rng (np.random.Generator): Adım üreteci

    Returns:
        Draw: Örneklenen çekiliş
    """
    pretrained, decouplers = banks
    if pretrained is None or len(pretrained) == 0:
        raise ContractError("Damıtma boş olmayan bir ön eğitilmiş banka gerektirir")
    if cfg.encoder_source == 'random':
        pair, m = _random_pair(pretrained.encoder_config, rng), -1
    else:
        m = int(rng.integers(len(pretrained)))
        pair = pretrained[m]

    dec, t = None, -1
    if cfg.use_decoupler:
        if decouplers is None or decouplers.num_slots == 0:
            raise ContractError("Ortak eşleme ayrıştırıcı bankası gerektirir")
        if m < 0:
            raise ContractError("Ayrıştırıcılar yalnızca ön eğitilmiş çiftlerle kullanılabilir")
        t = int(rng.integers(decouplers.num_slots))
        dec = decouplers.get(m, t)

    if cfg.per_class_matching:
        real_indices = {}
        for c in range(train.num_classes):
            members = train.class_indices(c)
            size = min(cfg.batch_size, members.shape[0])
            real_indices[c] = np.sort(rng.choice(members, size=size, replace=False))
    else:
        size = min(cfg.batch_size, len(train))
        real_indices = {None: np.sort(rng.choice(len(train), size=size, replace=False))}
    return Draw(pair, dec, m, t, real_indices)


def represent(pair, dec, audio, visual):
    """
    Donmuş çift (ve varsa ayrıştırıcı) üzerinden temsiller
    """
    z_pa, z_pv = pair.features(audio, visual)
    if dec is None:
        return Reps(z_pa, None, z_pv, None)
    z_ca, z_cv = project(dec, z_pa, z_pv)
    return Reps(z_pa, z_ca, z_pv, z_cv)


def _group_terms(draw, cfg, real_audio, real_visual, syn_audio, syn_visual, factor):
    reps_real = represent(draw.pair, draw.decoupler, Tensor(real_audio), Tensor(real_visual))
    reps_syn = represent(
        draw.pair, draw.decoupler, factor_expand(syn_audio, factor), factor_expand(syn_visual, factor)
    )
    l_pr = loss_private(reps_real, reps_syn)
    if cfg.matches_common:
        l_com = loss_common(reps_real, reps_syn, joint=cfg.joint_common)
        total = cfg.lambda_c * l_com + cfg.lambda_p * l_pr
    else:
        l_com = Tensor(0.0)
        total = cfg.lambda_p * l_pr
    return total, l_pr, l_com


def matching_objective(audio, visual, train, draw, cfg, factor):
    """
    Bir çekiliş için toplam damıtma kaybı

    Args:
        audio (Tensor): C×ipc×audio_shape sentetik ses tuvalleri
        visual (Tensor): C×ipc×visual_shape sentetik görüntü tuvalleri
        train (PairedDataset): Gerçek veri
        draw (Draw): Örneklenen çekiliş
        cfg (DistillConfig): Yapılandırma
        factor (int): l

    Returns:
        tuple: (L_dis Tensor, L_pr float, L_com float, sınıf başına L_dis listesi)
    """
    num_classes, ipc = audio.shape[0], audio.shape[1]
    per_group, l_pr_sum, l_com_sum = [], 0.0, 0.0
    total = None
    if cfg.per_class_matching:
        for c in range(num_classes):
            idx = draw.real_indices[c]
            group, l_pr, l_com = _group_terms(
                draw, cfg, train.audio[idx], train.visual[idx], audio[c], visual[c], factor
            )
            # Sınıf sırasıyla toplanır
            total = group if total is None else total + group
            per_group.append(group.item())
            l_pr_sum += l_pr.item()
            l_com_sum += l_com.item()
    else:
        idx = draw.real_indices[None]
        flat_audio = audio.reshape(num_classes * ipc, *audio.shape[2:])
        flat_visual = visual.reshape(num_classes * ipc, *visual.shape[2:])
        total, l_pr, l_com = _group_terms(
            draw, cfg, train.audio[idx], train.visual[idx], flat_audio, flat_visual, factor
        )
        per_group.append(total.item())
        l_pr_sum, l_com_sum = l_pr.item(), l_com.item()
    return total, l_pr_sum, l_com_sum, per_group


def distill_step(syn, train, banks, cfg, step_seed, state=None):
    """
    Tek damıtma adımı: yalnızca sentetik tuvallere bir SGD adımı

    Args:
        syn (SyntheticSet): Güncel sentetik küme
        train (PairedDataset): Eğitim verisi
        banks (tuple): (PretrainedBank, DecouplerBank ya da None)
        cfg (DistillConfig): Yapılandırma
        step_seed (int): Adım tohumu
        state (SgdState): Tuval momentum durumu

    Returns:
        tuple: (yeni SyntheticSet, metrik sözlüğü, SgdState)
    """
    train.require_trainable()
    state = state or SgdState(lr=cfg.lr_syn, momentum=cfg.momentum)
    rng = np.random.default_rng(step_seed)
    draw = sample_draw(train, banks, cfg, rng)

    audio = Tensor(syn.audio, requires_grad=True, name='syn_audio')
    visual = Tensor(syn.visual, requires_grad=True, name='syn_visual')
    with Tape() as tape:
        total, l_pr, l_com, _ = matching_objective(audio, visual, train, draw, cfg, syn.factor)
    grads = backward(total, tape)
    new_audio, new_visual = state.apply([audio, visual], [grads[audio], grads[visual]])
    metrics = {
        'pair': draw.pair_index,
        'slot': draw.slot,
        'L_pr': l_pr,
        'L_com': l_com,
        'L_dis': total.item(),
    }
    return syn.with_canvases(new_audio, new_visual), metrics, state


def run_distillation(train, banks, cfg, syn=None):
    """
    Başlat ve cfg.steps kez distill_step uygula

    Args:
        train (PairedDataset): Eğitim verisi
        banks (tuple): (PretrainedBank, DecouplerBank ya da None)
        cfg (DistillConfig): Yapılandırma
        syn (SyntheticSet): Verilirse başlatma atlanır

    Returns:
        tuple: (SyntheticSet, pd.DataFrame kayıp yörüngesi)
    """
    pretrained, _ = banks
    if syn is None:
        probe = pretrained[0] if pretrained is not None and len(pretrained) else None
        syn = init_synthetic(train, cfg.ipc, cfg.init_method, probe, cfg.seed, cfg.factor)
    logger.info(
        f"Damıtma başlıyor: adım={cfg.steps}, λ_c={cfg.lambda_c}, λ_p={cfg.lambda_p}, "
        f"kaynak={cfg.encoder_source}, ayrıştırıcı={cfg.use_decoupler}, AV terimi={cfg.joint_common}"
    )
    state = SgdState(lr=cfg.lr_syn, momentum=cfg.momentum)
    rows = []
    step_seeds = spawn_seeds(cfg.seed, cfg.steps) if cfg.steps else []
    for step, step_seed in enumerate(step_seeds):
        syn, metrics, state = distill_step(syn, train, banks, cfg, step_seed, state)
        rows.append({'step': step, **metrics})
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            logger.info(
                f"Adım {step + 1}/{cfg.steps}: L_dis={metrics['L_dis']:.4f}, "
                f"L_pr={metrics['L_pr']:.4f}, L_com={metrics['L_com']:.4f}"
            )
    return syn, pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def smoothed_trajectory(trajectory, column='L_dis', window=10):
    """
    Kayıp yörüngesinin kayan ortalaması
    """
    return trajectory[column].rolling(window, min_periods=1).mean()


def trailing_rolling_std(trajectory, column='L_dis', window=10):
    """
    Yörüngenin son yarısındaki kayan standart sapmanın ortalaması
    """
    series = trajectory[column]
    tail = series.iloc[len(series) // 2:]
    if len(tail) < 2:
        return 0.0
    return float(tail.rolling(min(window, len(tail)), min_periods=2).std().mean())
