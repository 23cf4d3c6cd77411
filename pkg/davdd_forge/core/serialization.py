"""
DVT1 tensör dosya biçimi

Başlık: b"DVT1", rank (u64 LE), her eksen boyutu (u64 LE); ardından
little-endian float64 veriler (satır öncelikli).
"""

import hashlib
import os
import struct

import numpy as np

from ..exceptions import ArtifactError
from .tensor import Tensor

MAGIC = b"DVT1"


def encode_tensor(value):
    """
    Tensörü (ya da diziyi) DVT1 baytlarına dönüştürür
    """
    arr = np.asarray(value.data if isinstance(value, Tensor) else value, dtype=np.float64)
    header = MAGIC + struct.pack("<Q", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.astype("<f8").tobytes(order="C")


def decode_tensor(payload, source="<bytes>"):
    """
    DVT1 baytlarını numpy dizisine çözer
    """
    if len(payload) < 12 or payload[:4] != MAGIC:
        raise ArtifactError(source, "DVT1 biçiminde değil")
    (rank,) = struct.unpack_from("<Q", payload, 4)
    offset = 12 + 8 * rank
    if len(payload) < offset:
        raise ArtifactError(source, "başlığı eksik")
    shape = struct.unpack_from(f"<{rank}Q", payload, 12)
    count = int(np.prod(shape)) if rank else 1
    if len(payload) != offset + 8 * count:
        raise ArtifactError(source, "veri uzunluğu başlıkla uyuşmuyor")
    arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
    return arr.astype(np.float64).reshape(shape)


def save_tensor(path, value):
    payload = encode_tensor(value)
    with open(path, "wb") as f:
        f.write(payload)
    return hashlib.sha256(payload).hexdigest()


def load_tensor(path):
    if not os.path.exists(path):
        raise ArtifactError(path)
    with open(path, "rb") as f:
        payload = f.read()
    return decode_tensor(payload, source=path)


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
