"""
Yapılandırma ayarları
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from dotenv import load_dotenv

from .exceptions import ConfigError

# Ortam değişkenlerini yükle
load_dotenv()


def _env_bool(name, default):
    return os.getenv(name, str(default)).lower() in ('true', '1', 't')


# Temel yapılandırma
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.getenv('DATA_DIR', os.path.join(os.getcwd(), 'data'))
OUTPUT_DIR = os.getenv('OUTPUT_DIR', os.path.join(os.getcwd(), 'runs'))
LOG_DIR = os.getenv('LOG_DIR', os.path.join(os.getcwd(), 'logs'))
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_TO_FILE = _env_bool('LOG_TO_FILE', True)

# Paralellik
MAX_THREADS = int(os.getenv('DAVDD_FORGE_THREADS', os.cpu_count() or 1))

# Veri yapılandırması
RANDOM_STATE = int(os.getenv('RANDOM_STATE', 42))
TEST_SIZE = float(os.getenv('TEST_SIZE', 0.2))
NUM_CLASSES = int(os.getenv('NUM_CLASSES', 4))
SAMPLES_PER_CLASS = int(os.getenv('SAMPLES_PER_CLASS', 100))
NOISE_SCALE = float(os.getenv('NOISE_SCALE', 0.1))

# Ağ yapılandırması (masaüstü ölçeği)
ARCHITECTURE = os.getenv('ARCHITECTURE', 'convnet')
PRIVATE_DIM = int(os.getenv('PRIVATE_DIM', 64))
CONV_WIDTH = int(os.getenv('CONV_WIDTH', 8))
CONV_BLOCKS = int(os.getenv('CONV_BLOCKS', 2))
LR_NET = float(os.getenv('LR_NET', 0.01))
MOMENTUM = float(os.getenv('MOMENTUM', 0.9))
BATCH_SIZE = int(os.getenv('BATCH_SIZE', 64))
PRETRAIN_EPOCHS = int(os.getenv('PRETRAIN_EPOCHS', 20))

# Banka yapılandırması
NUM_PAIRS = int(os.getenv('NUM_PAIRS', 4))
NUM_DECOUPLERS = int(os.getenv('NUM_DECOUPLERS', 2))
COMMON_DIM = int(os.getenv('COMMON_DIM', 64))
DECOUPLER_DEPTH = int(os.getenv('DECOUPLER_DEPTH', 2))
DECOUPLE_EPOCHS = int(os.getenv('DECOUPLE_EPOCHS', 10))
TEMPERATURE = float(os.getenv('TEMPERATURE', 0.1))

# Kayıp ağırlıkları
LAMBDA_C = float(os.getenv('LAMBDA_C', 40))
LAMBDA_P = float(os.getenv('LAMBDA_P', 80))
LAMBDA_COM = float(os.getenv('LAMBDA_COM', 2))
LAMBDA_FU = float(os.getenv('LAMBDA_FU', 2))
LAMBDA_INTER = float(os.getenv('LAMBDA_INTER', 1))
LAMBDA_INTRA = float(os.getenv('LAMBDA_INTRA', 3))
LAMBDA_ALIGN = float(os.getenv('LAMBDA_ALIGN', 1))

# Damıtma yapılandırması
IPC = int(os.getenv('IPC', 4))
FACTOR = int(os.getenv('FACTOR', 2))
DISTILL_STEPS = int(os.getenv('DISTILL_STEPS', 200))
LR_SYN = float(os.getenv('LR_SYN', 0.2))
INIT_METHOD = os.getenv('INIT_METHOD', 'herding')

# Değerlendirme yapılandırması
DOWNSTREAM_EPOCHS = int(os.getenv('DOWNSTREAM_EPOCHS', 200))
EVAL_RUNS = int(os.getenv('EVAL_RUNS', 5))

# Dosya adları
MANIFEST_NAME = 'manifest.json'
CONFIG_NAME = 'config.json'
STAGE_MANIFEST_NAME = 'stage.json'


def effective_jobs(requested):
    """
    İstenen iş sayısını DAVDD_FORGE_THREADS sınırına göre kırpar
    """
    requested = int(requested or 1)
    if requested < 1:
        raise ConfigError(f"İş sayısı en az 1 olmalı: {requested}")
    return max(1, min(requested, MAX_THREADS))


@dataclass
class RunConfig:
    """
    Bir çalıştırmanın tamamen serileştirilebilir yapılandırması

    Kalıcı hale getirilen config.json tek başına çalıştırmayı yeniden üretmeye yeter.
    """

    # Benchmark
    num_classes: int = NUM_CLASSES
    samples_per_class: int = SAMPLES_PER_CLASS
    shared_dim: int = 8
    private_dim: int = 8
    noise: float = NOISE_SCALE
    shared_jitter: float = 0.6
    private_jitter: float = 0.6
    audio_shape: tuple = (1, 16, 16)
    visual_shape: tuple = (3, 16, 16)
    data_seed: int = RANDOM_STATE

    # Kodlayıcı
    architecture: str = ARCHITECTURE
    hidden: tuple = (128,)
    width: int = CONV_WIDTH
    blocks: int = CONV_BLOCKS
    feature_dim: int = PRIVATE_DIM
    normalization: str = 'instance'

    # Bankalar
    num_pairs: int = NUM_PAIRS
    num_decouplers: int = NUM_DECOUPLERS
    common_dim: int = COMMON_DIM
    decoupler_depth: int = DECOUPLER_DEPTH
    pretrain_epochs: int = PRETRAIN_EPOCHS
    decouple_epochs: int = DECOUPLE_EPOCHS
    temperature: float = TEMPERATURE

    # Kayıp ağırlıkları
    lambda_c: float = LAMBDA_C
    lambda_p: float = LAMBDA_P
    lambda_com: float = LAMBDA_COM
    lambda_fu: float = LAMBDA_FU
    lambda_inter: float = LAMBDA_INTER
    lambda_intra: float = LAMBDA_INTRA
    lambda_align: float = LAMBDA_ALIGN

    # Damıtma
    ipc: int = IPC
    factor: int = FACTOR
    steps: int = DISTILL_STEPS
    init_method: str = INIT_METHOD
    per_class_matching: bool = True
    joint_common: bool = True
    lr_syn: float = LR_SYN
    lr_net: float = LR_NET
    momentum: float = MOMENTUM
    batch_size: int = BATCH_SIZE

    # Değerlendirme
    downstream_epochs: int = DOWNSTREAM_EPOCHS
    eval_runs: int = EVAL_RUNS

    # Çalıştırma
    seed: int = RANDOM_STATE
    jobs: int = 1
    out: str = field(default=OUTPUT_DIR)

    def __post_init__(self):
        self.audio_shape = tuple(int(v) for v in self.audio_shape)
        self.visual_shape = tuple(int(v) for v in self.visual_shape)
        self.hidden = tuple(int(v) for v in self.hidden)
        self.validate()

    def validate(self):
        weights = {
            'lambda_c': self.lambda_c, 'lambda_p': self.lambda_p,
            'lambda_com': self.lambda_com, 'lambda_fu': self.lambda_fu,
            'lambda_inter': self.lambda_inter, 'lambda_intra': self.lambda_intra,
            'lambda_align': self.lambda_align,
        }
        for name, value in weights.items():
            if value < 0:
                raise ConfigError(f"{name} negatif olamaz: {value}")
        if self.temperature <= 0:
            raise ConfigError(f"Sıcaklık pozitif olmalı: {self.temperature}")
        if self.num_pairs < 1 or self.num_decouplers < 1:
            raise ConfigError(f"Banka boyutları en az 1 olmalı: M={self.num_pairs}, T={self.num_decouplers}")
        if self.ipc < 1 or self.factor < 1:
            raise ConfigError(f"ipc ve factor en az 1 olmalı: ipc={self.ipc}, factor={self.factor}")
        if self.jobs < 1:
            raise ConfigError(f"İş sayısı en az 1 olmalı: {self.jobs}")

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Bilinmeyen yapılandırma anahtarları: {unknown}")
        return cls(**values)

    @classmethod
    def from_json(cls, path):
        if not os.path.exists(path):
            raise ConfigError(f"Yapılandırma dosyası bulunamadı: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Yapılandırma dosyası okunamadı: {path} ({e})") from None
        return cls.from_dict(values)

    def merged(self, overrides):
        """
        Bayrak değerlerini dosya değerlerinin üzerine yazar (None değerler yok sayılır)
        """
        known = {f.name for f in fields(self)}
        updates = {k: v for k, v in overrides.items() if v is not None and k in known}
        return replace(self, **updates)

    def to_dict(self):
        values = asdict(self)
        for key in ('audio_shape', 'visual_shape', 'hidden'):
            values[key] = list(values[key])
        return values

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)
        return path
