"""
Kodlayıcı / sınıflandırıcı oluşturma ve model kontrol noktaları
"""

import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..core.serialization import load_tensor, save_tensor
from ..core.tensor import Tensor, as_tensor, concat
from ..exceptions import ArtifactError, ConfigError, ContractError, ShapeError
from .layers import AvgPool, Conv2d, Flatten, InstanceNorm, Linear, ReLU, layer_from_spec

logger = logging.getLogger(__name__)

ARCHITECTURES = ('mlp', 'convnet')
NORMALIZATIONS = ('none', 'instance')


@dataclass(frozen=True)
class EncoderConfig:
    """
    Ses ve görüntü kodlayıcıları için ortak yapılandırma

    Her iki kodlayıcı aynı öznitelik boyutunu (feature_dim = d_p) üretir.
    """

    architecture: str = 'convnet'
    audio_shape: tuple = (1, 16, 16)
    visual_shape: tuple = (3, 16, 16)
    hidden: tuple = (128,)
    width: int = 8
    blocks: int = 2
    feature_dim: int = 64
    normalization: str = 'instance'

    def __post_init__(self):
        object.__setattr__(self, 'audio_shape', tuple(int(v) for v in self.audio_shape))
        object.__setattr__(self, 'visual_shape', tuple(int(v) for v in self.visual_shape))
        object.__setattr__(self, 'hidden', tuple(int(v) for v in self.hidden))

    def input_shape(self, modality):
        if modality == 'audio':
            return self.audio_shape
        if modality == 'visual':
            return self.visual_shape
        raise ConfigError(f"Bilinmeyen modalite: {modality}")

    def to_dict(self):
        values = asdict(self)
        for key in ('audio_shape', 'visual_shape', 'hidden'):
            values[key] = list(values[key])
        return values

    @classmethod
    def from_run_config(cls, cfg):
        return cls(
            architecture=cfg.architecture, audio_shape=cfg.audio_shape, visual_shape=cfg.visual_shape,
            hidden=cfg.hidden, width=cfg.width, blocks=cfg.blocks, feature_dim=cfg.feature_dim,
            normalization=cfg.normalization,
        )


class Model:
    """
    Sıralı katmanlardan oluşan ağ

    Args:
        layers (list): Katmanlar
        input_shape (tuple): Örnek başına girdi şekli (yığın ekseni hariç)
        name (str): Model adı
        frozen (bool): Donmuş modeller türev almaz ve güncellenemez
    """

    def __init__(self, layers, input_shape, name='model', frozen=False):
        self.layers = list(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.name = name
        self.frozen = False
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.output_shape = shape
        if frozen:
            self.freeze()

    @property
    def output_dim(self):
        return int(np.prod(self.output_shape))

    def parameters(self):
        params = []
        for layer in self.layers:
            params.extend(layer.params())
        return params

    def parameter_arrays(self):
        return [p.numpy() for p in self.parameters()]

    def set_parameters(self, arrays):
        arrays = list(arrays)
        expected = len(self.parameters())
        if len(arrays) != expected:
            raise ShapeError(f"{self.name}: {expected} parametre beklenirken {len(arrays)} verildi")
        offset = 0
        for layer in self.layers:
            count = len(layer.params())
            if count:
                layer.set_params(arrays[offset:offset + count])
                offset += count

    def freeze(self):
        """
        Parametreleri sabitlere dönüştürür; geri yayılım bu modele ulaşmaz
        """
        for layer in self.layers:
            if hasattr(layer, 'set_trainable'):
                layer.set_trainable(False)
        self.frozen = True
        return self

    def forward(self, x):
        x = as_tensor(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"{self.name} girdisi (N, {self.input_shape}) beklerken {x.shape} aldı")
        for layer in self.layers:
            x = layer(x)
        return x

    def __call__(self, x):
        return self.forward(x)

    def save(self, path):
        """
        Modeli kaydet: manifest.json + param_XX.dvt

        Args:
            path (str): Kontrol noktası dizini
        """
        os.makedirs(path, exist_ok=True)
        files, digests = [], {}
        for i, param in enumerate(self.parameters()):
            fname = f'param_{i:02d}.dvt'
            digests[fname] = save_tensor(os.path.join(path, fname), param)
            files.append(fname)
        manifest = {
            'name': self.name,
            'input_shape': list(self.input_shape),
            'frozen': self.frozen,
            'layers': [layer.spec() for layer in self.layers],
            'params': files,
            'sha256': digests,
        }
        with open(os.path.join(path, 'manifest.json'), 'w', encoding='utf-8') as f:
            json.dump(manifest, f, sort_keys=True, indent=2)
        logger.debug(f"Model kaydedildi: {path}")
        return path

    @classmethod
    def load(cls, path):
        """
        Modeli yükle

        Args:
            path (str): Kontrol noktası dizini

        Returns:
            Model: Yüklenen model
        """
        manifest_path = os.path.join(path, 'manifest.json')
        if not os.path.exists(manifest_path):
            raise ArtifactError(manifest_path)
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        layers = [layer_from_spec(spec) for spec in manifest['layers']]
        model = cls(layers, manifest['input_shape'], name=manifest['name'])
        model.set_parameters([load_tensor(os.path.join(path, fname)) for fname in manifest['params']])
        if manifest.get('frozen'):
            model.freeze()
        return model


def build_encoder(config, seed, modality='audio'):
    """
    Belirlenimci olarak başlatılmış kodlayıcı oluşturur

    Args:
        config (EncoderConfig): Mimari yapılandırması
        seed (int): Başlatma tohumu
        modality (str): 'audio' veya 'visual'

    Returns:
        Model: Girdi -> d_p boyutlu öznitelik
    """
    if config.architecture not in ARCHITECTURES:
        raise ConfigError(f"Bilinmeyen mimari: {config.architecture}")
    if config.normalization not in NORMALIZATIONS:
        raise ConfigError(f"Bilinmeyen normalizasyon: {config.normalization}")
    if config.feature_dim < 1:
        raise ConfigError(f"Öznitelik boyutu pozitif olmalı: {config.feature_dim}")

    rng = np.random.default_rng(seed)
    input_shape = config.input_shape(modality)
    layers = []

    if config.architecture == 'mlp':
        if not config.hidden:
            raise ConfigError("mlp en az bir gizli katman gerektirir")
        in_dim = int(np.prod(input_shape))
        layers.append(Flatten())
        for width in config.hidden:
            layers.extend([Linear(in_dim, width, rng), ReLU()])
            in_dim = width
        layers.append(Linear(in_dim, config.feature_dim, rng))
    else:
        if config.blocks < 1:
            raise ConfigError(f"convnet en az bir blok gerektirir: {config.blocks}")
        if len(input_shape) != 3:
            raise ConfigError(f"convnet C×H×W girdi gerektirir: {input_shape}")
        channels, h, w = input_shape
        for _ in range(config.blocks):
            if h % 2 or w % 2:
                raise ConfigError(f"convnet blok zinciri geçersiz: {input_shape} ile {config.blocks} blok")
            layers.append(Conv2d(channels, config.width, kernel=3, stride=1, pad=1, rng=rng))
            if config.normalization == 'instance':
                layers.append(InstanceNorm())
            layers.extend([ReLU(), AvgPool(2)])
            channels, h, w = config.width, h // 2, w // 2
        layers.extend([Flatten(), Linear(channels * h * w, config.feature_dim, rng)])

    return Model(layers, input_shape, name=f'{modality}_encoder')


def build_linear_head(in_dim, num_classes, seed=None, zero=False, name='head'):
    """
    Tek katmanlı doğrusal sınıflandırıcı
    """
    rng = None if zero else np.random.default_rng(seed)
    return Model([Linear(in_dim, num_classes, rng, zero=zero)], (in_dim,), name=name)


def fuse_and_classify(f_a, f_v, head):
    """
    Öznitelikleri birleştirip [f_a ; f_v] üzerinden logit üretir

    Args:
        f_a (Tensor): Ses öznitelikleri (N×d_a ya da d_a)
        f_v (Tensor): Görüntü öznitelikleri (N×d_v ya da d_v)
        head (Model): 2 boyutlu girdi bekleyen sınıflandırıcı

    Returns:
        Tensor: N×C logitler (tek örnek için C)
    """
    f_a, f_v = as_tensor(f_a), as_tensor(f_v)
    single = f_a.ndim == 1
    if single:
        f_a, f_v = f_a.reshape(1, -1), f_v.reshape(1, -1)
    expected = head.input_shape[0]
    if f_a.ndim != 2 or f_v.ndim != 2 or f_a.shape[1] + f_v.shape[1] != expected or f_a.shape[0] != f_v.shape[0]:
        raise ContractError(f"Birleştirme boyutu uyumsuz: {f_a.shape} + {f_v.shape}, sınıflandırıcı {expected} bekliyor")
    logits = head(concat([f_a, f_v], axis=1))
    return logits.reshape(-1) if single else logits


def to_batch_tensor(values):
    if isinstance(values, Tensor):
        return values
    return Tensor(np.asarray(values, dtype=np.float64))
