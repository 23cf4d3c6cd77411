"""
Ses + görüntü kodlayıcıları ve birleşik sınıflandırıcıdan oluşan model
"""

import json
import logging
import os

import numpy as np

from ..core.tensor import Tape, Tensor, backward
from ..data.dataset import batch_iter
from ..exceptions import ArtifactError, ContractError
from .losses import cross_entropy
from .network import EncoderConfig, Model, build_encoder, build_linear_head, fuse_and_classify
from .optim import SgdState, sgd_step

logger = logging.getLogger(__name__)


def spawn_seeds(seed, n):
    """
    Bağımsız ve birbirinden farklı alt tohumlar
    """
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


class FusedClassifier:
    """
    Birleşik ses-görüntü sınıflandırıcısı

    Ses kodlayıcısı, görüntü kodlayıcısı ve [f_a ; f_v] üzerinde doğrusal bir
    sınıflandırıcıdan oluşur; çapraz entropi ile uçtan uca eğitilir.
    """

    def __init__(self, encoder_config, num_classes, seed):
        """
        Args:
            encoder_config (EncoderConfig): Kodlayıcı yapılandırması
            num_classes (int): Sınıf sayısı
            seed (int): Başlatma tohumu
        """
        self.encoder_config = encoder_config
        self.num_classes = int(num_classes)
        self.seed = int(seed)
        audio_seed, visual_seed, head_seed = spawn_seeds(seed, 3)
        self.audio = build_encoder(encoder_config, audio_seed, 'audio')
        self.visual = build_encoder(encoder_config, visual_seed, 'visual')
        self.head = build_linear_head(2 * encoder_config.feature_dim, num_classes, head_seed, name='fused_head')
        self.history = []

    @property
    def models(self):
        return (self.audio, self.visual, self.head)

    def logits(self, audio, visual):
        audio = audio if isinstance(audio, Tensor) else Tensor(audio)
        visual = visual if isinstance(visual, Tensor) else Tensor(visual)
        return fuse_and_classify(self.audio(audio), self.visual(visual), self.head)

    def fit(self, ds, epochs, lr, momentum=0.9, batch_size=64, seed=0, log_every=0):
        """
        Modeli eğit

        Args:
            ds (PairedDataset): Eğitim verisi (test etiketli olamaz)
            epochs (int): Dönem sayısı
            lr (float): Öğrenme oranı
            momentum (float): Momentum katsayısı
            batch_size (int): Yığın boyutu
            seed (int): Yığın karıştırma tohumu
            log_every (int): Kaç dönemde bir loglanacağı (0 = yalnızca son)

        Returns:
            self
        """
        ds.require_trainable()
        if len(ds) == 0:
            raise ContractError("Boş veri kümesiyle eğitim yapılamaz")
        if epochs < 1:
            raise ContractError(f"Dönem sayısı en az 1 olmalı: {epochs}")
        states = [SgdState(lr=lr, momentum=momentum) for _ in self.models]
        for epoch in range(epochs):
            epoch_loss, seen = 0.0, 0
            for batch in batch_iter(ds, batch_size, seed, epoch=epoch):
                with Tape() as tape:
                    loss = cross_entropy(self.logits(batch.audio, batch.visual), batch.labels)
                grads = backward(loss, tape)
                for model, state in zip(self.models, states):
                    sgd_step(model, grads, state)
                epoch_loss += loss.item() * len(batch)
                seen += len(batch)
            self.history.append(epoch_loss / seen)
            if log_every and (epoch + 1) % log_every == 0:
                logger.info(f"Dönem {epoch + 1}/{epochs}: kayıp={self.history[-1]:.4f}")
        logger.debug(f"FusedClassifier.fit tamamlandı: son kayıp={self.history[-1]:.4f}")
        return self

    def predict_logits(self, ds, batch_size=256):
        outputs = []
        for start in range(0, len(ds), batch_size):
            stop = start + batch_size
            outputs.append(self.logits(ds.audio[start:stop], ds.visual[start:stop]).numpy())
        if not outputs:
            return np.zeros((0, self.num_classes))
        return np.concatenate(outputs, axis=0)

    def predict(self, ds, batch_size=256):
        return np.argmax(self.predict_logits(ds, batch_size), axis=1)

    def save(self, path):
        """
        Modeli kaydet

        Args:
            path (str): Kayıt dizini
        """
        os.makedirs(path, exist_ok=True)
        self.audio.save(os.path.join(path, 'audio.ckpt'))
        self.visual.save(os.path.join(path, 'visual.ckpt'))
        self.head.save(os.path.join(path, 'head.ckpt'))
        meta = {
            'encoder_config': self.encoder_config.to_dict(),
            'num_classes': self.num_classes,
            'seed': self.seed,
        }
        with open(os.path.join(path, 'classifier.json'), 'w', encoding='utf-8') as f:
            json.dump(meta, f, sort_keys=True, indent=2)
        logger.info(f"Model kaydedildi: {path}")

    @classmethod
    def load(cls, path):
        """
        Modeli yükle

        Args:
            path (str): Kayıt dizini

        Returns:
            FusedClassifier: Yüklenen model
        """
        meta_path = os.path.join(path, 'classifier.json')
        if not os.path.exists(meta_path):
            raise ArtifactError(meta_path)
        with open(meta_path, 'r', encoding='utf-8') as f:
            meta = json.load(f)
        model = cls.__new__(cls)
        model.encoder_config = EncoderConfig(**meta['encoder_config'])
        model.num_classes = meta['num_classes']
        model.seed = meta['seed']
        model.audio = Model.load(os.path.join(path, 'audio.ckpt'))
        model.visual = Model.load(os.path.join(path, 'visual.ckpt'))
        model.head = Model.load(os.path.join(path, 'head.ckpt'))
        model.history = []
        return model
