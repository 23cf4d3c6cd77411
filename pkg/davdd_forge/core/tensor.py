"""
Ters mod otomatik türev alma ile yoğun tensörler

Tensörler oluşturulduktan sonra değişmez. Türev gerektiren işlemler yalnızca etkin
bir Tape (kayıt bandı) içinde kaydedilir; bant iş parçacığına özeldir.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import log_softmax as _log_softmax

from ..exceptions import ContractError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def active_tape():
    """
    Bu iş parçacığında etkin olan en içteki bandı döndürür (yoksa None)
    """
    stack = _tape_stack()
    return stack[-1] if stack else None


@dataclass(frozen=True)
class _Record:
    inputs: Tuple["Tensor", ...]
    output: "Tensor"
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
    name: str


class Tape:
    """
    Yürütülen işlemlerin sıralı kaydı

    Kayıtlar yürütme sırasıyla eklenir; bu yüzden her işlem girdilerini üreten
    işlemlerden sonra gelir (topolojik sıra).

    Kullanım:
        with Tape() as tape:
            loss = f(x)
        grads = backward(loss, tape)
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, inputs, output, backward_fn, name):
        self.records.append(_Record(tuple(inputs), output, backward_fn, name))

    def __len__(self):
        return len(self.records)

    def produced(self, tensor):
        return any(rec.output is tensor for rec in self.records)


def _as_array(data):
    arr = np.array(data, dtype=np.float64)
    return arr


def _check_finite(arr, op_name):
    if arr.size and not np.isfinite(arr).all():
        raise NonFiniteError(f"'{op_name}' işlemi sonlu olmayan değer üretti")


class Tensor:
    """
    Yoğun, satır öncelikli 64-bit kayan noktalı dizi

    Args:
        data: Dizi benzeri veri
        requires_grad (bool): Geri yayılımda türev toplanacak mı
        name (str): Hata ayıklama için isteğe bağlı ad
    """

    __slots__ = ("_data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        arr = _as_array(data)
        _check_finite(arr, "tensor")
        arr.setflags(write=False)
        self._data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name

    @classmethod
    def _wrap(cls, arr, requires_grad, op_name):
        arr = np.array(arr, dtype=np.float64, order="C")
        _check_finite(arr, op_name)
        out = cls.__new__(cls)
        if arr.flags.writeable:
            arr.setflags(write=False)
        out._data = arr
        out.requires_grad = requires_grad
        out.name = None
        return out

    @property
    def data(self):
        return self._data

    @property
    def shape(self):
        return self._data.shape

    @property
    def ndim(self):
        return self._data.ndim

    @property
    def size(self):
        return self._data.size

    def __len__(self):
        return self._data.shape[0]

    def numpy(self):
        return self._data.copy()

    def item(self):
        if self._data.size != 1:
            raise ContractError(f"item() yalnızca tek elemanlı tensörler için: {self.shape}")
        return float(self._data.reshape(-1)[0])

    def detach(self):
        return Tensor._wrap(self._data, False, "detach")

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Aritmetik
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return mul(other, power(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _apply(op_name, out_arr, inputs, backward_fn):
    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(out_arr, needs_grad, op_name)
    if needs_grad:
        tape.record(inputs, out, backward_fn, op_name)
    return out


def _unbroadcast(grad, shape):
    """
    Yayınlanmış (broadcast) türevi özgün şekle geri toplar
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a, b, op_name):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"'{op_name}' için uyumsuz şekiller: {a.shape} ve {b.shape}") from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _apply("add", a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _apply("sub", a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _apply("mul", a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")

    def backward(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _apply("div", a.data / b.data, (a, b), backward)


def power(x, p):
    x = as_tensor(x)
    p = float(p)

    def backward(g):
        return (g * p * np.power(x.data, p - 1.0),)

    return _apply("power", np.power(x.data, p), (x,), backward)


def matmul(a, b):
    """
    İki boyutlu matris çarpımı

    Args:
        a (Tensor): m×k
        b (Tensor): k×n

    Returns:
        Tensor: m×n
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul için uyumsuz şekiller: {a.shape} ve {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _apply("matmul", a.data @ b.data, (a, b), backward)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return _apply("relu", np.where(mask, x.data, 0.0), (x,), backward)


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tensor_sum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _apply("sum", x.data.sum(axis=axes, keepdims=keepdims), (x,), backward)


def tensor_mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if count == 0:
        raise ContractError(f"Boş eksen üzerinde ortalama alınamaz: {x.shape}")

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape) / count,)

    return _apply("mean", x.data.mean(axis=axes, keepdims=keepdims), (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"{x.shape} şekli {tuple(shape)} şekline dönüştürülemez") from None

    def backward(g):
        return (g.reshape(x.shape),)

    return _apply("reshape", out, (x,), backward)


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _apply("transpose", np.transpose(x.data, axes), (x,), backward)


def getitem(x, idx):
    """
    Temel dilimleme (slice / tamsayı); gelişmiş indeksleme için take kullanılır
    """
    x = as_tensor(x)
    parts = idx if isinstance(idx, tuple) else (idx,)
    if not all(isinstance(p, (slice, int, type(Ellipsis))) for p in parts):
        raise ContractError("getitem yalnızca dilim ve tamsayı indeksleri destekler")

    def backward(g):
        full = np.zeros(x.shape)
        full[idx] = g
        return (full,)

    return _apply("getitem", x.data[idx], (x,), backward)


def take(x, indices, axis=0):
    """
    Bir eksen boyunca indeks listesiyle seçim (tekrarlı indeksler desteklenir)
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % x.ndim

    def backward(g):
        full = np.zeros(x.shape)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        return (full,)

    return _apply("take", np.take(x.data, indices, axis=axis), (x,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat en az bir tensör gerektirir")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat için uyumsuz şekiller: {shapes}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _apply("concat", out, tuple(tensors), backward)


def conv2d(x, k, stride=1, pad=0):
    """
    Çapraz korelasyon (çekirdek çevrilmez)

    Args:
        x (Tensor): C_in×H×W ya da N×C_in×H×W
        k (Tensor): C_out×C_in×kh×kw
        stride (int): Adım
        pad (int): Sıfır dolgu

    Returns:
        Tensor: C_out×H'×W' ya da N×C_out×H'×W'
    """
    x, k = as_tensor(x), as_tensor(k)
    single = x.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d için beklenmeyen ranklar: girdi {x.shape}, çekirdek {k.shape}")
    n, c, h, w = xd.shape
    c_out, c_in, kh, kw = k.shape
    if c_in != c:
        raise ShapeError(f"conv2d kanal uyuşmazlığı: girdi {x.shape}, çekirdek {k.shape}")
    hp, wp = h + 2 * pad, w + 2 * pad
    if kh > hp or kw > wp:
        raise ShapeError(f"Çekirdek dolgulu girdiye sığmıyor: girdi {x.shape}, çekirdek {k.shape}, pad={pad}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise ShapeError(
            f"Tamsayı olmayan çıktı boyutu: girdi {x.shape}, çekirdek {k.shape}, stride={stride}, pad={pad}"
        )
    ho, wo = (hp - kh) // stride + 1, (wp - kw) // stride + 1
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("nchwij,ocij->nohw", windows, k.data, optimize=True)

    def backward(g):
        g4 = g[None] if single else g
        dk = np.einsum("nohw,nchwij->ocij", g4, windows, optimize=True)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.einsum(
                    "nohw,oc->nchw", g4, k.data[:, :, i, j], optimize=True
                )
        dx = dxp[:, :, pad:pad + h, pad:pad + w]
        return (dx[0] if single else dx), dk

    return _apply("conv2d", out[0] if single else out, (x, k), backward)


def l2_normalize(x, axis=-1, eps=NORM_EPS, return_flag=False):
    """
    L2 normalizasyonu: x / ||x||_2

    Normu eps değerine eşit ya da küçük olan vektörler değiştirilmeden döndürülür
    ve dejenere olarak işaretlenir.

    Args:
        x (Tensor): Vektör ya da satırları normalize edilecek matris
        axis (int): Normun alınacağı eksen
        eps (float): Dejenere eşiği
        return_flag (bool): True ise (tensör, dejenere maskesi) döndürülür

    Returns:
        Tensor ya da (Tensor, np.ndarray)
    """
    x = as_tensor(x)
    norms = np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=True))
    degenerate = norms <= eps
    safe = np.where(degenerate, 1.0, norms)
    y = x.data / safe

    def backward(g):
        proj = np.sum(g * y, axis=axis, keepdims=True)
        dx = np.where(degenerate, g, (g - y * proj) / safe)
        return (dx,)

    out = _apply("l2_normalize", y, (x,), backward)
    if return_flag:
        flag = np.squeeze(degenerate, axis=axis)
        return out, (bool(flag) if flag.ndim == 0 else flag)
    return out


def log_softmax(x, axis=-1, mask=None):
    """
    Kararlı log-softmax; isteğe bağlı maske ile bazı girdiler normalizasyondan
    çıkarılır (maskelenen çıktılar 0, türevleri 0)

    Args:
        x (Tensor): Logitler
        axis (int): Softmax ekseni
        mask (np.ndarray): x ile aynı şekilli bool dizi, True = dahil
    """
    x = as_tensor(x)
    if mask is None:
        out = _log_softmax(x.data, axis=axis)
        probs = np.exp(out)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"log_softmax maske şekli uyumsuz: {mask.shape} ve {x.shape}")
        if not mask.any(axis=axis).all():
            raise ContractError("log_softmax: her satırda en az bir dahil öğe olmalı")
        shifted = np.where(mask, x.data, -np.inf)
        out = np.where(mask, _log_softmax(shifted, axis=axis), 0.0)
        probs = np.where(mask, np.exp(out), 0.0)

    def backward(g):
        if mask is not None:
            g = np.where(mask, g, 0.0)
        return (g - probs * np.sum(g, axis=axis, keepdims=True),)

    return _apply("log_softmax", out, (x,), backward)


def _interp_matrix(out_size, in_size):
    """
    Yarım piksel merkezli (align_corners=False) doğrusal ara değer matrisi
    """
    weights = np.zeros((out_size, in_size))
    scale = in_size / out_size
    for o in range(out_size):
        src = max((o + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), in_size - 1)
        i1 = min(i0 + 1, in_size - 1)
        frac = src - i0 if i1 != i0 else 0.0
        weights[o, i0] += 1.0 - frac
        weights[o, i1] += frac
    return weights


def bilinear_resize(x, out_h, out_w):
    """
    Son iki ekseni çift doğrusal ara değerle yeniden boyutlandırır
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"bilinear_resize en az iki boyut gerektirir: {x.shape}")
    a_h = _interp_matrix(out_h, x.shape[-2])
    a_w = _interp_matrix(out_w, x.shape[-1])
    out = np.einsum("Hh,...hw,Ww->...HW", a_h, x.data, a_w, optimize=True)

    def backward(g):
        return (np.einsum("Hh,...HW,Ww->...hw", a_h, g, a_w, optimize=True),)

    return _apply("bilinear_resize", out, (x,), backward)


class GradientMap:
    """
    Tensör -> türev eşlemesi; kayıpa ulaşmayan tensörler için sıfır döndürür
    """

    def __init__(self, grads, tape):
        self._grads = grads
        self._tape = tape

    def __getitem__(self, tensor):
        grad = self._grads.get(id(tensor))
        if grad is None:
            return np.zeros(tensor.shape)
        return grad

    def __contains__(self, tensor):
        return id(tensor) in self._grads

    def get_many(self, tensors):
        return [self[t] for t in tensors]


def backward(loss, tape):
    """
    Skaler kayıptan ters mod türevleri hesaplar

    Args:
        loss (Tensor): Skaler kayıp
        tape (Tape): Kaybı üreten işlemlerin kaydı

    Returns:
        GradientMap: requires_grad tensörler için kesin türevler
    """
    if not isinstance(loss, Tensor) or loss.size != 1:
        shape = loss.shape if isinstance(loss, Tensor) else type(loss)
        raise ContractError(f"backward skaler kayıp gerektirir, alınan şekil: {shape}")

    grads = {id(loss): np.ones(loss.shape)}
    for rec in reversed(tape.records):
        g = grads.get(id(rec.output))
        if g is None:
            continue
        input_grads = rec.backward(g)
        for tensor, grad in zip(rec.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = np.asarray(grad, dtype=np.float64)
    # Ara düğümlerin türevleri de tutulur; yaprak olmayanlar da sorgulanabilir
    return GradientMap(grads, tape)


def value_and_grad(fn: Callable[..., Tensor], *inputs: Union[np.ndarray, Tensor]):
    """
    fn(*inputs) değerini ve her girdiye göre türevi döndürür
    """
    leaves = [Tensor(t.data if isinstance(t, Tensor) else t, requires_grad=True) for t in inputs]
    with Tape() as tape:
        out = fn(*leaves)
    grads = backward(out, tape)
    return out.item(), [grads[leaf] for leaf in leaves]
