"""
Sinir ağı yapı taşları, ön eğitilmiş banka ve ayrıştırıcı bankası
"""

from .bank_store import load_bank, save_bank
from .classifier import FusedClassifier, spawn_seeds
from .decoupler import (
    Decoupler,
    DecouplerBank,
    Reps,
    build_decoupler,
    cross_modal_agreement,
    encode,
    train_decouplers,
)
from .decoupling_losses import DecouplingWeights, build_heads, loss_align, loss_cls, loss_inter, loss_intra
from .losses import cross_entropy
from .network import EncoderConfig, Model, build_encoder, build_linear_head, fuse_and_classify
from .optim import SgdState, sgd_step
from .pretrained import PretrainedBank, PretrainedPair, pretrain_bank
from .prototypes import PrototypeBank, ema_update
