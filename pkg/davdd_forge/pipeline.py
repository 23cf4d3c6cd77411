"""
Komut satırı aşamaları

Her aşama kendi çıktı dizinine yazar: birincil çıktı, bir metrik CSV'si,
birleştirilmiş config.json ve girdi özetlerini içeren stage.json.
"""

import hashlib
import json
import logging
import os

import numpy as np
import pandas as pd

from .config import CONFIG_NAME, STAGE_MANIFEST_NAME
from .core.serialization import file_sha256
from .data.benchmark import BenchmarkSpec, generate_benchmark
from .data.dataset import load_dataset, save_dataset
from .distill.distiller import DistillConfig, run_distillation, smoothed_trajectory, trailing_rolling_std
from .distill.synthetic import init_synthetic
from .evaluation.ablation import ablation_suite
from .evaluation.protocol import config_fingerprint, linear_probe_accuracy, run_protocol
from .exceptions import ArtifactError, ConfigError
from .models.bank_store import load_bank, save_bank
from .models.decoupler import encode, train_decouplers
from .models.decoupling_losses import DecouplingWeights
from .models.network import EncoderConfig
from .models.pretrained import pretrain_bank

logger = logging.getLogger(__name__)

CSV_OPTIONS = {'index': False, 'encoding': 'utf-8', 'float_format': '%.10g'}


def directory_sha256(path):
    """
    Dizinin içerik özeti: göreli yol + dosya özeti çiftlerinin sıralı özeti
    """
    if not os.path.exists(path):
        raise ArtifactError(path)
    if os.path.isfile(path):
        return file_sha256(path)
    entries = []
    for root, _, files in os.walk(path):
        for name in files:
            full = os.path.join(root, name)
            rel = os.path.relpath(full, path).replace(os.sep, '/')
            entries.append(f'{rel}:{file_sha256(full)}')
    return hashlib.sha256('\n'.join(sorted(entries)).encode('utf-8')).hexdigest()


def _require(path):
    if not path or not os.path.exists(path):
        raise ArtifactError(path or '<belirtilmedi>')
    return path


def _write_json(path, values):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(values, f, sort_keys=True, indent=2)


def _finish_stage(stage, cfg, out, inputs, outputs):
    """
    config.json ve stage.json yazar
    """
    cfg.save(os.path.join(out, CONFIG_NAME))
    manifest = {
        'stage': stage,
        'inputs': {name: {'path': path, 'sha256': directory_sha256(path)} for name, path in inputs.items()},
        'outputs': sorted(outputs),
        'config_fingerprint': config_fingerprint(cfg.to_dict()),
    }
    _write_json(os.path.join(out, STAGE_MANIFEST_NAME), manifest)
    logger.info(f"Aşama '{stage}' tamamlandı: {out}")
    return manifest


def _load_splits(data_dir):
    _require(data_dir)
    train = load_dataset(os.path.join(data_dir, 'train'))
    test = load_dataset(os.path.join(data_dir, 'test'))
    return train, test


def cmd_gen(cfg, spec_path=None):
    """
    Benchmark üretir: out/train, out/test

    Args:
        cfg (RunConfig): Birleştirilmiş yapılandırma
        spec_path (str): İsteğe bağlı BenchmarkSpec JSON dosyası
    """
    if spec_path:
        if not os.path.exists(spec_path):
            raise ConfigError(f"Benchmark tanımı bulunamadı: {spec_path}")
        with open(spec_path, 'r', encoding='utf-8') as f:
            spec = BenchmarkSpec.from_dict(json.load(f))
    else:
        spec = BenchmarkSpec.from_run_config(cfg)
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    train, test = generate_benchmark(spec)
    save_dataset(train, os.path.join(out, 'train'), spec=spec.to_dict())
    save_dataset(test, os.path.join(out, 'test'), spec=spec.to_dict())
    counts = pd.DataFrame({
        'class': np.arange(spec.num_classes),
        'train': train.class_counts(),
        'test': test.class_counts(),
    })
    counts.to_csv(os.path.join(out, 'metrics.csv'), **CSV_OPTIONS)
    inputs = {'spec': spec_path} if spec_path else {}
    return _finish_stage('gen', cfg, out, inputs, ['train', 'test', 'metrics.csv'])


def cmd_pretrain(cfg, data_dir):
    """
    M kodlayıcı çiftini eğitip out/ altına banka olarak kaydeder

    probe.csv: her çiftin donmuş öznitelikleri üzerinde doğrusal sonda doğruluğu
    """
    train, test = _load_splits(data_dir)
    encoder_config = EncoderConfig.from_run_config(cfg)
    bank = pretrain_bank(
        train, cfg.num_pairs, encoder_config, cfg.pretrain_epochs, cfg.seed, lr=cfg.lr_net,
        momentum=cfg.momentum, batch_size=cfg.batch_size, jobs=cfg.jobs,
    )
    out = cfg.out
    save_bank(out, bank)
    bank.history.to_csv(os.path.join(out, 'metrics.csv'), **CSV_OPTIONS)
    probe = pd.DataFrame(
        [{'pair': pair.pair_id, 'seed': pair.seed, 'probe_accuracy': linear_probe_accuracy(pair, train, test, seed=cfg.seed)}
         for pair in bank],
        columns=['pair', 'seed', 'probe_accuracy'],
    )
    probe.to_csv(os.path.join(out, 'probe.csv'), **CSV_OPTIONS)
    logger.info(f"Doğrusal sonda doğrulukları: {probe['probe_accuracy'].round(4).tolist()}")
    outputs = ['pair_*', 'manifest.json', 'metrics.csv', 'probe.csv']
    return _finish_stage('pretrain', cfg, out, {'data': data_dir}, outputs)


def cmd_decouple(cfg, data_dir, bank_dir):
    """
    Ön eğitilmiş bankadaki her çift için T ayrıştırıcı eğitir; out/ tam banka olur
    """
    train, test = _load_splits(data_dir)
    pretrained, _, _ = load_bank(_require(bank_dir))
    weights = DecouplingWeights.from_run_config(cfg)
    decouplers, history, agreement = train_decouplers(
        pretrained, cfg.num_decouplers, train, weights, cfg.temperature, cfg.decouple_epochs, cfg.seed,
        common_dim=cfg.common_dim, depth=cfg.decoupler_depth, lr=cfg.lr_net, momentum=cfg.momentum,
        batch_size=cfg.batch_size, jobs=cfg.jobs, holdout=test,
    )
    out = cfg.out
    save_bank(out, pretrained, decouplers, extra={'loss_weights': weights.to_dict(), 'temperature': cfg.temperature})
    history.to_csv(os.path.join(out, 'metrics.csv'), **CSV_OPTIONS)
    agreement.to_csv(os.path.join(out, 'agreement.csv'), **CSV_OPTIONS)
    inputs = {'data': data_dir, 'bank': bank_dir}
    return _finish_stage('decouple', cfg, out, inputs, ['pair_*', 'manifest.json', 'metrics.csv', 'agreement.csv'])


def cmd_distill(cfg, data_dir, bank_dir=None, encoder_source='bank', use_decoupler=True):
    """
    Sentetik kümeyi damıtır

    steps=0 ile yalnızca başlatma (Herding / rastgele çekirdek küme) yazılır.

    Çıktılar: out/distilled (faktörle genişletilmiş eğitim kümesi), out/canvases,
    metrics.csv (kayıp yörüngesi), distill_meta.json
    """
    train, _ = _load_splits(data_dir)
    # Rastgele kodlayıcıların ayrıştırıcısı yoktur
    use_decoupler = use_decoupler and encoder_source == 'bank' and cfg.lambda_c > 0 and cfg.steps > 0
    needs_bank = cfg.init_method == 'herding' or cfg.steps > 0
    banks, bank_manifest_hash = (None, None), None
    if needs_bank:
        pretrained, decouplers, _ = load_bank(_require(bank_dir), require_decouplers=use_decoupler)
        banks = (pretrained, decouplers)
        bank_manifest_hash = directory_sha256(bank_dir)

    distill_cfg = DistillConfig.from_run_config(cfg, encoder_source=encoder_source, use_decoupler=use_decoupler)
    if cfg.steps == 0:
        probe = banks[0][0] if banks[0] is not None else None
        # Çekirdek küme gerçek örneklerden oluşur, faktör uygulanmaz
        syn = init_synthetic(train, cfg.ipc, cfg.init_method, probe, cfg.seed, factor=1)
        trajectory = pd.DataFrame(columns=['step', 'pair', 'slot', 'L_pr', 'L_com', 'L_dis'])
    else:
        syn, trajectory = run_distillation(train, banks, distill_cfg)

    out = cfg.out
    os.makedirs(out, exist_ok=True)
    save_dataset(syn.to_dataset(expand=True), os.path.join(out, 'distilled'), extra={'factor': syn.factor})
    save_dataset(syn.to_dataset(expand=False), os.path.join(out, 'canvases'), extra={'factor': syn.factor})
    if len(trajectory):
        trajectory = trajectory.assign(L_dis_smooth=smoothed_trajectory(trajectory))
    trajectory.to_csv(os.path.join(out, 'metrics.csv'), **CSV_OPTIONS)
    meta = {
        'distill_config': distill_cfg.to_dict(),
        'trajectory': 'metrics.csv',
        'bank_sha256': bank_manifest_hash,
        'selection': {str(c): idx for c, idx in syn.selection.items()},
        'trailing_rolling_std': trailing_rolling_std(trajectory) if len(trajectory) else 0.0,
    }
    _write_json(os.path.join(out, 'distill_meta.json'), meta)
    inputs = {'data': data_dir}
    if needs_bank:
        inputs['bank'] = bank_dir
    return _finish_stage('distill', cfg, out, inputs, ['distilled', 'canvases', 'metrics.csv', 'distill_meta.json'])


def _eval_encoder_config(cfg, eval_arch):
    encoder_config = EncoderConfig.from_run_config(cfg)
    if eval_arch and eval_arch != encoder_config.architecture:
        encoder_config = EncoderConfig(**{**encoder_config.to_dict(), 'architecture': eval_arch})
    return encoder_config


def _eval_metrics(report):
    """
    Yöntem başına özet tablo: çalıştırma sayısı, ortalama ve popülasyon sapması
    """
    runs = report.runs_frame().assign(method=report.label or 'rapor')
    metrics = runs.groupby('method', sort=False)['accuracy'].agg(
        runs='count', mean='mean', std=lambda s: float(np.std(s)), min='min', max='max',
    ).reset_index()
    for key, value in sorted(report.meta.items()):
        metrics[key] = value
    return metrics


def cmd_eval(cfg, data_dir, distilled_dir=None, whole=False, eval_arch=None):
    """
    Değerlendirme protokolü: report.json, runs.csv ve yöntem özeti metrics.csv

    Args:
        distilled_dir (str): cmd_distill çıktısı
        whole (bool): Tüm gerçek eğitim kümesiyle eğit (referans satırı)
        eval_arch (str): Çapraz mimari değerlendirme için kodlayıcı mimarisi
    """
    train, test = _load_splits(data_dir)
    inputs = {'data': data_dir}
    if whole:
        training_set, label = train, 'whole_dataset'
    else:
        source = os.path.join(_require(distilled_dir), 'distilled')
        training_set, label = load_dataset(source), os.path.basename(os.path.normpath(distilled_dir))
        inputs['distilled'] = distilled_dir
    encoder_config = _eval_encoder_config(cfg, eval_arch)
    report = run_protocol(
        training_set, test, encoder_config, runs=cfg.eval_runs, epochs=cfg.downstream_epochs,
        lr=cfg.lr_net, momentum=cfg.momentum, batch_size=cfg.batch_size, jobs=cfg.jobs, seed=cfg.seed,
        label=label, fingerprint_source={'config': cfg.to_dict(), 'whole': whole, 'eval_arch': eval_arch},
    )
    report.meta = {'train_samples': len(training_set), 'architecture': encoder_config.architecture}
    out = cfg.out
    report.save(out)
    _eval_metrics(report).to_csv(os.path.join(out, 'metrics.csv'), **CSV_OPTIONS)
    logger.info(f"Değerlendirme sonucu: {report}")
    return _finish_stage('eval', cfg, out, inputs, ['report.json', 'runs.csv', 'metrics.csv'])


def cmd_ablate(cfg, data_dir, bank_dir):
    """
    Dört satırlı ablasyon: her satır için rapor ve yörünge, özet ablation.csv
    """
    train, test = _load_splits(data_dir)
    pretrained, decouplers, _ = load_bank(_require(bank_dir), require_decouplers=True)
    base_cfg = DistillConfig.from_run_config(cfg)
    results, summary = ablation_suite(
        train, test, (pretrained, decouplers), base_cfg, EncoderConfig.from_run_config(cfg),
        runs=cfg.eval_runs, epochs=cfg.downstream_epochs, lr=cfg.lr_net, momentum=cfg.momentum,
        batch_size=cfg.batch_size, jobs=cfg.jobs,
    )
    out = cfg.out
    outputs = ['ablation.csv']
    for row, report, trajectory in results:
        row_dir = os.path.join(out, f"row_{row['row']}_{row['name']}")
        report.save(row_dir)
        trajectory.to_csv(os.path.join(row_dir, 'metrics.csv'), **CSV_OPTIONS)
        outputs.append(os.path.basename(row_dir))
    os.makedirs(out, exist_ok=True)
    summary.to_csv(os.path.join(out, 'ablation.csv'), **CSV_OPTIONS)
    return _finish_stage('ablate', cfg, out, {'data': data_dir, 'bank': bank_dir}, outputs)


def embedding_frame(pretrained, decouplers, ds, pair_index=0, slot=0):
    """
    Örnek ve modalite başına z_p ve z_c koordinatları (2N satır)
    """
    pair = pretrained[pair_index]
    dec = decouplers.get(pair_index, slot)
    reps = encode(pair, dec, ds)
    frames = []
    for modality, private, common in (
        ('audio', reps.audio_private, reps.audio_common),
        ('visual', reps.visual_private, reps.visual_common),
    ):
        private, common = private.numpy(), common.numpy()
        frame = pd.DataFrame({'index': np.arange(len(ds)), 'label': ds.labels, 'modality': modality})
        frame = pd.concat([
            frame,
            pd.DataFrame(private, columns=[f'p{i}' for i in range(private.shape[1])]),
            pd.DataFrame(common, columns=[f'c{i}' for i in range(common.shape[1])]),
        ], axis=1)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def cmd_export_embeddings(cfg, data_dir, bank_dir, split='test', pair_index=0, slot=0):
    """
    Dış izdüşüm araçları için embeddings.csv yazar
    """
    _require(data_dir)
    ds = load_dataset(os.path.join(data_dir, split))
    pretrained, decouplers, _ = load_bank(_require(bank_dir), require_decouplers=True)
    if not 0 <= pair_index < len(pretrained) or not 0 <= slot < decouplers.num_slots:
        raise ConfigError(f"Geçersiz (m, t): ({pair_index}, {slot})")
    frame = embedding_frame(pretrained, decouplers, ds, pair_index, slot)
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    frame.to_csv(os.path.join(out, 'embeddings.csv'), **CSV_OPTIONS)
    return _finish_stage('export-embeddings', cfg, out, {'data': data_dir, 'bank': bank_dir}, ['embeddings.csv'])
