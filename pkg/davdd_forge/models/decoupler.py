"""
Ayrıştırıcılar: donmuş özel özniteliklerden ortak uzaya hafif izdüşümler
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics.pairwise import paired_cosine_distances

from ..config import effective_jobs
from ..core.tensor import Tape, Tensor, as_tensor, backward
from ..exceptions import ConfigError, ContractError
from .classifier import spawn_seeds
from .decoupling_losses import build_heads, class_mean_matrix, decoupling_loss
from .layers import Linear, ReLU
from .network import Model
from .optim import SgdState, sgd_step
from .prototypes import PrototypeBank, ema_update

logger = logging.getLogger(__name__)

DEPTHS = (1, 2)
HISTORY_COLUMNS = ['pair', 'slot', 'epoch', 'loss', 'cls', 'inter', 'intra', 'align']
AGREEMENT_COLUMNS = ['pair', 'slot', 'before', 'after']


class Decoupler:
    """
    Bir ön eğitilmiş çifte bağlı ses (g^a) ve görüntü (g^v) izdüşümleri

    Args:
        audio (Model): d_p -> d_c
        visual (Model): d_p -> d_c
        depth (int): 1 (doğrusal) ya da 2 (Linear-ReLU-Linear)
        index (tuple): (m, t)
    """

    def __init__(self, audio, visual, depth, index):
        if audio.output_shape != visual.output_shape:
            raise ConfigError(f"g^a ve g^v aynı boyutu üretmeli: {audio.output_shape} ve {visual.output_shape}")
        self.audio = audio
        self.visual = visual
        self.depth = int(depth)
        self.index = tuple(int(v) for v in index)

    @property
    def common_dim(self):
        return self.audio.output_dim

    @property
    def feature_dim(self):
        return self.audio.input_shape[0]

    @property
    def frozen(self):
        return self.audio.frozen and self.visual.frozen

    def freeze(self):
        self.audio.freeze()
        self.visual.freeze()
        return self


def _projection(feature_dim, common_dim, depth, rng, name):
    if depth == 1:
        layers = [Linear(feature_dim, common_dim, rng)]
    else:
        layers = [Linear(feature_dim, common_dim, rng), ReLU(), Linear(common_dim, common_dim, rng)]
    return Model(layers, (feature_dim,), name=name)


def build_decoupler(feature_dim, common_dim, depth, seed, index=(0, 0)):
    """
    Args:
        feature_dim (int): d_p
        common_dim (int): d_c
        depth (int): Katman sayısı (1 ya da 2)
        seed (int): Başlatma tohumu
        index (tuple): (m, t)

    Returns:
        Decoupler: Eğitilebilir ayrıştırıcı
    """
    if depth not in DEPTHS:
        raise ConfigError(f"Ayrıştırıcı derinliği 1 ya da 2 olmalı: {depth}")
    if common_dim < 1:
        raise ConfigError(f"d_c pozitif olmalı: {common_dim}")
    rng = np.random.default_rng(seed)
    m, t = index
    return Decoupler(
        _projection(feature_dim, common_dim, depth, rng, f'decoupler_{m}_{t}_audio'),
        _projection(feature_dim, common_dim, depth, rng, f'decoupler_{m}_{t}_visual'),
        depth,
        index,
    )


class DecouplerBank:
    """
    Her ön eğitilmiş çift m için T ayrıştırıcı
    """

    def __init__(self, decouplers, common_dim, depth):
        self.decouplers = [list(row) for row in decouplers]
        self.common_dim = int(common_dim)
        self.depth = int(depth)
        for m, row in enumerate(self.decouplers):
            for t, dec in enumerate(row):
                if dec.index != (m, t):
                    raise ContractError(f"Ayrıştırıcı ({m}, {t}) konumunda {dec.index} indeksi taşıyor")

    @property
    def num_pairs(self):
        return len(self.decouplers)

    @property
    def num_slots(self):
        return len(self.decouplers[0]) if self.decouplers else 0

    def get(self, m, t):
        return self.decouplers[m][t]

    def __iter__(self):
        for row in self.decouplers:
            yield from row


@dataclass
class Reps:
    """
    Bir yığının özel (kodlayıcı çıktısı) ve ortak (ayrıştırıcı çıktısı) temsilleri
    """

    audio_private: Tensor
    audio_common: Tensor
    visual_private: Tensor
    visual_common: Tensor

    def __len__(self):
        return self.audio_private.shape[0]


def _batch_inputs(batch):
    if hasattr(batch, 'audio') and hasattr(batch, 'visual'):
        return as_tensor(batch.audio), as_tensor(batch.visual)
    audio, visual = batch
    return as_tensor(audio), as_tensor(visual)


def project(dec, z_a, z_v):
    return dec.audio(z_a), dec.visual(z_v)


def encode(pair, dec, batch):
    """
    z_p = donmuş kodlayıcı çıktısı, z_c = ayrıştırıcı(z_p)

    Args:
        pair (PretrainedPair): Donmuş kodlayıcı çifti
        dec (Decoupler): Çifte bağlı ayrıştırıcı
        batch: PairedDataset ya da (ses, görüntü) ikilisi; girdiler türev taşıyabilir

    Returns:
        Reps: Dört temsil
    """
    audio, visual = _batch_inputs(batch)
    if tuple(audio.shape[1:]) != pair.audio.input_shape or tuple(visual.shape[1:]) != pair.visual.input_shape:
        raise ContractError(
            f"Yığın şekilleri kodlayıcılarla uyuşmuyor: ses {audio.shape} / {pair.audio.input_shape}, "
            f"görüntü {visual.shape} / {pair.visual.input_shape}"
        )
    if audio.shape[0] != visual.shape[0]:
        raise ContractError(f"Ses ve görüntü yığın boyutları farklı: {audio.shape[0]} ve {visual.shape[0]}")
    if audio.shape[0] == 0:
        empty_p = Tensor(np.zeros((0, pair.feature_dim)))
        empty_c = Tensor(np.zeros((0, dec.common_dim)))
        return Reps(empty_p, empty_c, empty_p, empty_c)
    z_pa, z_pv = pair.features(audio, visual)
    z_ca, z_cv = project(dec, z_pa, z_pv)
    return Reps(z_pa, z_ca, z_pv, z_cv)


def _agreement(dec, z_pa, z_pv):
    if z_pa.shape[0] == 0:
        return 0.0
    z_ca, z_cv = project(dec, Tensor(z_pa), Tensor(z_pv))
    return float(np.mean(1.0 - paired_cosine_distances(z_ca.numpy(), z_cv.numpy())))


def cross_modal_agreement(pair, dec, ds):
    """
    Aynı örneğin z_c^A ve z_c^V temsilleri arasındaki ortalama kosinüs benzerliği
    """
    return _agreement(dec, *_pair_features(pair, ds))


def _normalized_class_means(z, labels, classes):
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    unit = z / np.where(norms > 0, norms, 1.0)
    means = class_mean_matrix(labels, classes) @ unit
    mean_norms = np.linalg.norm(means, axis=1, keepdims=True)
    return means / np.where(mean_norms > 0, mean_norms, 1.0)


def _train_one(pair, index, seed, train_features, labels, num_classes, weights, tau, epochs,
               common_dim, depth, lr, momentum, batch_size, holdout_features=None):
    m, t = index
    dec_seed, head_seed, batch_seed = spawn_seeds(seed, 3)
    dec = build_decoupler(pair.feature_dim, common_dim, depth, dec_seed, index)
    heads = build_heads(common_dim, num_classes, head_seed)
    prototypes = PrototypeBank(num_classes, common_dim)
    models = (dec.audio, dec.visual, *heads.models)
    states = [SgdState(lr=lr, momentum=momentum) for _ in models]
    z_pa_all, z_pv_all = train_features
    n = labels.shape[0]
    history = []
    agreement = {'pair': m, 'slot': t}
    if holdout_features is not None:
        agreement['before'] = _agreement(dec, *holdout_features)

    for epoch in range(epochs):
        rng = np.random.default_rng([batch_seed, epoch])
        order = rng.permutation(n)
        totals = {'loss': 0.0, 'cls': 0.0, 'inter': 0.0, 'intra': 0.0, 'align': 0.0}
        steps = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            if idx.shape[0] < 2:
                logger.debug(f"Ayrıştırıcı ({m}, {t}): tek örnekli yığın atlandı")
                continue
            y = labels[idx]
            z_pa, z_pv = Tensor(z_pa_all[idx]), Tensor(z_pv_all[idx])
            with Tape() as tape:
                z_ca, z_cv = project(dec, z_pa, z_pv)
                reps = Reps(z_pa, z_ca, z_pv, z_cv)
                total, parts = decoupling_loss(reps, y, heads, prototypes, weights, tau)
            grads = backward(total, tape)
            for model, state in zip(models, states):
                sgd_step(model, grads, state)

            # Prototipler optimizasyon adımından sonra güncellenir
            classes = sorted(int(c) for c in np.unique(y))
            mean_a = _normalized_class_means(z_ca.numpy(), y, classes)
            mean_v = _normalized_class_means(z_cv.numpy(), y, classes)
            ema_update(
                prototypes,
                dict(zip(classes, mean_a)),
                dict(zip(classes, mean_v)),
                {c: int(np.sum(y == c)) for c in classes},
            )

            totals['loss'] += total.item()
            for key, value in parts.items():
                totals[key] += value
            steps += 1
        if steps:
            row = {key: value / steps for key, value in totals.items()}
            history.append({'pair': m, 'slot': t, 'epoch': epoch, **row})
            logger.debug(f"Ayrıştırıcı ({m}, {t}) dönem {epoch + 1}/{epochs}: L_de={row['loss']:.4f}")

    dec.freeze()
    if holdout_features is not None:
        agreement['after'] = _agreement(dec, *holdout_features)
        logger.info(
            f"Ayrıştırıcı ({m}, {t}) modaliteler arası uyum: "
            f"{agreement['before']:.4f} -> {agreement['after']:.4f}"
        )
    return dec, history, agreement


def _pair_features(pair, train, batch_size=256):
    audio_parts, visual_parts = [], []
    for start in range(0, len(train), batch_size):
        stop = start + batch_size
        z_a, z_v = pair.features(train.audio[start:stop], train.visual[start:stop])
        audio_parts.append(z_a.numpy())
        visual_parts.append(z_v.numpy())
    if not audio_parts:
        empty = np.zeros((0, pair.feature_dim))
        return empty, empty
    return np.concatenate(audio_parts), np.concatenate(visual_parts)


def train_decouplers(bank, num_slots, train, weights, tau, epochs, seed, common_dim=64, depth=2,
                     lr=0.01, momentum=0.9, batch_size=64, jobs=1, holdout=None):
    """
    Her (m, t) için ayrıştırıcı + üç geçici sınıflandırıcıyı L_de ile eğitir

    Kodlayıcılar donmuş kalır; her iş kendi prototip bankasına sahiptir ve banka
    eğitimden sonra atılır.

    Args:
        bank (PretrainedBank): Donmuş çiftler
        num_slots (int): T
        train (PairedDataset): Eğitim verisi
        weights (DecouplingWeights): Kayıp ağırlıkları
        tau (float): Sıcaklık
        epochs (int): Dönem sayısı
        seed (int): Ana tohum
        holdout (PairedDataset): Verilirse eğitim öncesi ve sonrası modaliteler arası uyum ölçülür

    Returns:
        tuple: (DecouplerBank, pd.DataFrame eğitim geçmişi, pd.DataFrame uyum tablosu)
    """
    if num_slots < 1:
        raise ConfigError(f"T en az 1 olmalı: {num_slots}")
    if epochs < 1:
        raise ConfigError(f"Dönem sayısı en az 1 olmalı: {epochs}")
    if tau <= 0:
        raise ConfigError(f"Sıcaklık pozitif olmalı: {tau}")
    train.require_trainable()
    labels = np.asarray(train.labels)
    seeds = spawn_seeds(seed, len(bank) * num_slots)
    features = [_pair_features(pair, train) for pair in bank]
    holdout_features = [_pair_features(pair, holdout) for pair in bank] if holdout is not None else None
    logger.info(
        f"Ayrıştırıcı eğitimi: M={len(bank)}, T={num_slots}, d_c={common_dim}, derinlik={depth}, "
        f"iş={effective_jobs(jobs)}"
    )
    jobs_list = [(m, t) for m in range(len(bank)) for t in range(num_slots)]
    results = Parallel(n_jobs=effective_jobs(jobs))(
        delayed(_train_one)(
            bank[m], (m, t), seeds[m * num_slots + t], features[m], labels, train.num_classes,
            weights, tau, epochs, common_dim, depth, lr, momentum, batch_size,
            holdout_features[m] if holdout_features is not None else None,
        )
        for m, t in jobs_list
    )
    rows = [[None] * num_slots for _ in range(len(bank))]
    history, agreement = [], []
    for (m, t), (dec, dec_history, dec_agreement) in zip(jobs_list, results):
        rows[m][t] = dec
        history.extend(dec_history)
        agreement.append(dec_agreement)
    return (
        DecouplerBank(rows, common_dim, depth),
        pd.DataFrame(history, columns=HISTORY_COLUMNS),
        pd.DataFrame(agreement, columns=AGREEMENT_COLUMNS if holdout is not None else ['pair', 'slot']),
    )
