"""
Bileşen ablasyonu: temel DM -> + ön eğitilmiş banka -> + ayrıştırıcı bankası -> + AV birleşik eşleme
"""

import logging
from dataclasses import replace

import pandas as pd

from ..distill.distiller import run_distillation
from .protocol import run_protocol

logger = logging.getLogger(__name__)

ABLATION_ROWS = [
    {
        'row': 1,
        'name': 'baseline',
        'overrides': {'encoder_source': 'random', 'use_decoupler': False, 'lambda_c': 0.0},
    },
    {
        'row': 2,
        'name': 'pretrained_bank',
        'overrides': {'encoder_source': 'bank', 'use_decoupler': False, 'lambda_c': 0.0},
    },
    {
        'row': 3,
        'name': 'decoupler_bank',
        'overrides': {'encoder_source': 'bank', 'use_decoupler': True, 'joint_common': False},
    },
    {
        'row': 4,
        'name': 'cim',
        'overrides': {'encoder_source': 'bank', 'use_decoupler': True, 'joint_common': True},
    },
]


def row_config(base_cfg, row):
    """
    Ablasyon satırının damıtma yapılandırması
    """
    return replace(base_cfg, **row['overrides'])


def ablation_suite(train, test, banks, base_cfg, encoder_config, runs=5, epochs=200, lr=0.01,
                   momentum=0.9, batch_size=64, seeds=None, jobs=1, rows=None):
    """
    Dört yapılandırmayı sırayla damıtır ve aynı protokolle değerlendirir

    Args:
        train (PairedDataset): Eğitim verisi
        test (PairedDataset): Test verisi
        banks (tuple): (PretrainedBank, DecouplerBank)
        base_cfg (DistillConfig): Ortak damıtma yapılandırması
        encoder_config (EncoderConfig): Değerlendirme kodlayıcısı
        runs (int): Satır başına çalıştırma
        rows (list): Çalıştırılacak satırlar (varsayılan: ABLATION_ROWS)

    Returns:
        tuple: (sıralı [(satır, EvalReport, yörünge)] listesi, özet pd.DataFrame)
    """
    results = []
    for row in rows or ABLATION_ROWS:
        cfg = row_config(base_cfg, row)
        logger.info(f"Ablasyon satırı {row['row']} ({row['name']}) başlıyor")
        syn, trajectory = run_distillation(train, banks, cfg)
        report = run_protocol(
            syn.to_dataset(), test, encoder_config, runs=runs, seeds=seeds, epochs=epochs, lr=lr,
            momentum=momentum, batch_size=batch_size, jobs=jobs, seed=cfg.seed, label=row['name'],
        )
        report.meta = {'row': row['row'], 'distill_config': cfg.to_dict()}
        results.append((row, report, trajectory))
        logger.info(f"Ablasyon satırı {row['row']}: {report}")
    summary = pd.DataFrame(
        [{'row': row['row'], 'name': row['name'], 'mean': report.mean, 'std': report.std}
         for row, report, _ in results],
        columns=['row', 'name', 'mean', 'std'],
    )
    return results, summary
