"""
Ön eğitilmiş ve ayrıştırıcı bankalarının diske yazılması / okunması

Dizin düzeni:
    bank/manifest.json
    bank/pair_{m}/audio.ckpt, visual.ckpt, dec_{t}.ckpt
"""

import json
import logging
import os

from ..config import MANIFEST_NAME
from ..exceptions import ArtifactError
from .decoupler import Decoupler, DecouplerBank
from .network import EncoderConfig, Model
from .pretrained import PretrainedBank, PretrainedPair

logger = logging.getLogger(__name__)


def _pair_dir(path, m):
    return os.path.join(path, f'pair_{m}')


def save_decoupler(dec, path):
    os.makedirs(path, exist_ok=True)
    dec.audio.save(os.path.join(path, 'audio'))
    dec.visual.save(os.path.join(path, 'visual'))
    meta = {'depth': dec.depth, 'index': list(dec.index), 'common_dim': dec.common_dim}
    with open(os.path.join(path, 'decoupler.json'), 'w', encoding='utf-8') as f:
        json.dump(meta, f, sort_keys=True, indent=2)


def load_decoupler(path):
    meta_path = os.path.join(path, 'decoupler.json')
    if not os.path.exists(meta_path):
        raise ArtifactError(meta_path)
    with open(meta_path, 'r', encoding='utf-8') as f:
        meta = json.load(f)
    audio = Model.load(os.path.join(path, 'audio'))
    visual = Model.load(os.path.join(path, 'visual'))
    return Decoupler(audio, visual, meta['depth'], meta['index'])


def save_bank(path, pretrained, decouplers=None, extra=None):
    """
    Bankayı kaydet

    Args:
        path (str): Banka dizini
        pretrained (PretrainedBank): Donmuş çiftler
        decouplers (DecouplerBank): Varsa ayrıştırıcılar
        extra (dict): Manifeste eklenecek alanlar (ör. kayıp ağırlıkları)

    Returns:
        dict: Yazılan manifest
    """
    os.makedirs(path, exist_ok=True)
    for pair in pretrained:
        pair_dir = _pair_dir(path, pair.pair_id)
        pair.audio.save(os.path.join(pair_dir, 'audio.ckpt'))
        pair.visual.save(os.path.join(pair_dir, 'visual.ckpt'))
        if decouplers is not None:
            for t in range(decouplers.num_slots):
                save_decoupler(decouplers.get(pair.pair_id, t), os.path.join(pair_dir, f'dec_{t}.ckpt'))

    manifest = {
        'M': len(pretrained),
        'T': decouplers.num_slots if decouplers is not None else 0,
        'd_p': pretrained.feature_dim,
        'd_c': decouplers.common_dim if decouplers is not None else None,
        'decoupler_depth': decouplers.depth if decouplers is not None else None,
        'seeds': pretrained.seeds,
        'encoder_config': pretrained.encoder_config.to_dict(),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(path, MANIFEST_NAME), 'w', encoding='utf-8') as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    logger.info(f"Banka kaydedildi: {path} (M={manifest['M']}, T={manifest['T']})")
    return manifest


def load_bank(path, require_decouplers=False):
    """
    Bankayı yükle

    Args:
        path (str): Banka dizini
        require_decouplers (bool): Ayrıştırıcı yoksa hata ver

    Returns:
        tuple: (PretrainedBank, DecouplerBank ya da None, manifest)
    """
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise ArtifactError(manifest_path)
    with open(manifest_path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)

    encoder_config = EncoderConfig(**manifest['encoder_config'])
    pairs = []
    for m, seed in enumerate(manifest['seeds']):
        pair_dir = _pair_dir(path, m)
        audio = Model.load(os.path.join(pair_dir, 'audio.ckpt')).freeze()
        visual = Model.load(os.path.join(pair_dir, 'visual.ckpt')).freeze()
        pairs.append(PretrainedPair(audio, visual, m, seed, manifest['d_p']))
    pretrained = PretrainedBank(pairs, encoder_config)

    decouplers = None
    if manifest['T'] > 0:
        rows = [
            [load_decoupler(os.path.join(_pair_dir(path, m), f'dec_{t}.ckpt')).freeze() for t in range(manifest['T'])]
            for m in range(manifest['M'])
        ]
        decouplers = DecouplerBank(rows, manifest['d_c'], manifest['decoupler_depth'])
    elif require_decouplers:
        raise ArtifactError(path, "ayrıştırıcı bankası içermiyor")
    logger.info(f"Banka yüklendi: {path} (M={manifest['M']}, T={manifest['T']})")
    return pretrained, decouplers, manifest
