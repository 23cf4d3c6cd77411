"""
Sentetik (damıtılmış) küme ve faktör tekniği
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..core.tensor import as_tensor, bilinear_resize, reshape, transpose
from ..data.dataset import PairedDataset
from ..data.selection import herding_select, random_select
from ..exceptions import ConfigError, ContractError, ShapeError

logger = logging.getLogger(__name__)

INIT_METHODS = ('herding', 'random')


@dataclass(frozen=True)
class SyntheticSet:
    """
    Sınıf başına ipc ses ve görüntü tuvali

    Args:
        audio (np.ndarray): C×ipc×audio_shape
        visual (np.ndarray): C×ipc×visual_shape
        factor (int): Faktör tekniği parametresi l
        selection (dict): Başlatmada seçilen gerçek örnek indeksleri
        init_method (str): Başlatma yöntemi
    """

    audio: np.ndarray
    visual: np.ndarray
    factor: int = 1
    selection: dict = field(default_factory=dict, compare=False)
    init_method: str = 'herding'

    def __post_init__(self):
        audio = np.array(self.audio, dtype=np.float64)
        visual = np.array(self.visual, dtype=np.float64)
        if audio.shape[:2] != visual.shape[:2]:
            raise ShapeError(f"Ses ve görüntü tuvalleri eşleşmiyor: {audio.shape[:2]} ve {visual.shape[:2]}")
        audio.setflags(write=False)
        visual.setflags(write=False)
        object.__setattr__(self, 'audio', audio)
        object.__setattr__(self, 'visual', visual)

    @property
    def num_classes(self):
        return self.audio.shape[0]

    @property
    def ipc(self):
        return self.audio.shape[1]

    def with_canvases(self, audio, visual):
        """
        Güncellenmiş tuvallerle yeni küme (ses ve görüntü birlikte değişir)
        """
        return replace(self, audio=audio, visual=visual)

    def to_dataset(self, expand=True):
        """
        Damıtılmış kümeyi eğitilebilir PairedDataset olarak döndürür

        Args:
            expand (bool): Faktör tekniğiyle l² alt örneğe genişlet

        Returns:
            PairedDataset: 'distilled' etiketli küme
        """
        audio_parts, visual_parts, labels = [], [], []
        for c in range(self.num_classes):
            audio, visual = self.audio[c], self.visual[c]
            if expand and self.factor > 1:
                audio = factor_expand(audio, self.factor).numpy()
                visual = factor_expand(visual, self.factor).numpy()
            audio_parts.append(audio)
            visual_parts.append(visual)
            labels.append(np.full(audio.shape[0], c, dtype=np.int64))
        meta = {'factor': self.factor, 'ipc': self.ipc, 'init_method': self.init_method}
        return PairedDataset(
            np.concatenate(audio_parts), np.concatenate(visual_parts), np.concatenate(labels),
            'distilled', self.num_classes, meta,
        )


def factor_expand(canvases, factor):
    """
    Her tuvali l×l ızgaraya böler ve her alt görüntüyü H×W boyutuna büyütür

    Çıktı sırası: önce tuval, sonra ızgara üzerinde satır öncelikli.

    Args:
        canvases (Tensor): n×C×H×W
        factor (int): l

    Returns:
        Tensor: (n·l²)×C×H×W
    """
    canvases = as_tensor(canvases)
    if factor < 1:
        raise ConfigError(f"factor en az 1 olmalı: {factor}")
    if factor == 1:
        return canvases
    if canvases.ndim != 4:
        raise ShapeError(f"factor_expand n×C×H×W bekler: {canvases.shape}")
    n, channels, height, width = canvases.shape
    if height % factor or width % factor:
        raise ShapeError(f"{canvases.shape} şekli factor={factor} ile bölünemiyor")
    h, w = height // factor, width // factor
    grid = reshape(canvases, (n, channels, factor, h, factor, w))
    grid = transpose(grid, (0, 2, 4, 1, 3, 5))
    pieces = reshape(grid, (n * factor * factor, channels, h, w))
    return bilinear_resize(pieces, height, width)


def init_synthetic(train, ipc, method='herding', probe_pair=None, seed=0, factor=1):
    """
    Tuvalleri seçilen gerçek eşlerden kopyalayarak sentetik küme oluşturur

    Args:
        train (PairedDataset): Eğitim verisi
        ipc (int): Sınıf başına tuval
        method (str): 'herding' ya da 'random'
        probe_pair (PretrainedPair): Herding öznitelikleri için donmuş çift (m=0)
        seed (int): Rastgele seçim tohumu
        factor (int): Faktör tekniği parametresi

    Returns:
        SyntheticSet: Başlangıç kümesi
    """
    if ipc < 1:
        raise ContractError(f"ipc en az 1 olmalı: {ipc}")
    if method not in INIT_METHODS:
        raise ConfigError(f"Bilinmeyen başlatma yöntemi: {method}")
    train.require_trainable()
    if method == 'herding':
        if probe_pair is None:
            raise ContractError("Herding başlatması bir öznitelik çifti gerektirir")
        features = probe_pair.probe_features(train)
        selection = herding_select(features, train.labels, ipc, train.num_classes)
    else:
        selection = random_select(train.labels, ipc, seed, train.num_classes)

    audio = np.stack([train.audio[selection[c]] for c in range(train.num_classes)])
    visual = np.stack([train.visual[selection[c]] for c in range(train.num_classes)])
    logger.info(f"Sentetik küme başlatıldı: yöntem={method}, ipc={ipc}, C={train.num_classes}, l={factor}")
    return SyntheticSet(audio, visual, factor, selection, method)
