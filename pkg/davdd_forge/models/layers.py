"""
Kodlayıcı yapı taşları

Her katman kendi parametre tensörlerini tutar; parametreler değişmez olduğundan
optimizasyon adımı yeni tensörleri set_params ile geri yazar.
"""

import numpy as np

from ..core.tensor import Tensor, conv2d, relu
from ..exceptions import ConfigError, ShapeError


def he_uniform(rng, shape, fan_in):
    """
    Fan-in ölçekli düzgün (He) başlatma: U(-sqrt(6/fan_in), sqrt(6/fan_in))
    """
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    kind = 'layer'

    def __init__(self):
        self.trainable = True

    def params(self):
        return []

    def set_params(self, arrays):
        if arrays:
            raise ShapeError(f"{self.kind} katmanının parametresi yok, {len(arrays)} dizi verildi")

    def spec(self):
        return {'kind': self.kind}

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)


class _ParamLayer(Layer):
    param_names = ()

    def _tensor(self, arr):
        return Tensor(arr, requires_grad=self.trainable)

    def params(self):
        return [getattr(self, name) for name in self.param_names]

    def set_params(self, arrays):
        if len(arrays) != len(self.param_names):
            raise ShapeError(f"{self.kind}: {len(self.param_names)} parametre beklenirken {len(arrays)} verildi")
        for name, arr in zip(self.param_names, arrays):
            current = getattr(self, name)
            arr = np.asarray(arr.data if isinstance(arr, Tensor) else arr, dtype=np.float64)
            if arr.shape != current.shape:
                raise ShapeError(f"{self.kind}.{name} şekli uyumsuz: {current.shape} ve {arr.shape}")
            setattr(self, name, self._tensor(arr))

    def set_trainable(self, trainable):
        self.trainable = trainable
        self.set_params([p.data for p in self.params()])


class Linear(_ParamLayer):
    """
    y = x @ W + b
    """

    kind = 'linear'
    param_names = ('weight', 'bias')

    def __init__(self, in_dim, out_dim, rng=None, zero=False):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"Linear boyutları pozitif olmalı: {in_dim}->{out_dim}")
        self.in_dim, self.out_dim = int(in_dim), int(out_dim)
        if zero or rng is None:
            weight = np.zeros((in_dim, out_dim))
        else:
            weight = he_uniform(rng, (in_dim, out_dim), in_dim)
        self.weight = self._tensor(weight)
        self.bias = self._tensor(np.zeros(out_dim))

    def spec(self):
        return {'kind': self.kind, 'in_dim': self.in_dim, 'out_dim': self.out_dim}

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_dim,):
            raise ConfigError(f"Linear girdisi {self.in_dim} beklerken {tuple(input_shape)} aldı")
        return (self.out_dim,)

    def forward(self, x):
        return x @ self.weight + self.bias


class Conv2d(_ParamLayer):
    kind = 'conv2d'
    param_names = ('weight', 'bias')

    def __init__(self, in_channels, out_channels, kernel=3, stride=1, pad=1, rng=None):
        super().__init__()
        self.in_channels, self.out_channels = int(in_channels), int(out_channels)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        fan_in = in_channels * kernel * kernel
        shape = (out_channels, in_channels, kernel, kernel)
        weight = np.zeros(shape) if rng is None else he_uniform(rng, shape, fan_in)
        self.weight = self._tensor(weight)
        self.bias = self._tensor(np.zeros(out_channels))

    def spec(self):
        return {
            'kind': self.kind, 'in_channels': self.in_channels, 'out_channels': self.out_channels,
            'kernel': self.kernel, 'stride': self.stride, 'pad': self.pad,
        }

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ConfigError(f"Conv2d girdisi {self.in_channels} kanal beklerken {tuple(input_shape)} aldı")
        _, h, w = input_shape
        hp, wp = h + 2 * self.pad, w + 2 * self.pad
        if hp < self.kernel or wp < self.kernel or (hp - self.kernel) % self.stride or (wp - self.kernel) % self.stride:
            raise ConfigError(f"Conv2d çıktı boyutu tamsayı değil: girdi {tuple(input_shape)}")
        return (self.out_channels, (hp - self.kernel) // self.stride + 1, (wp - self.kernel) // self.stride + 1)

    def forward(self, x):
        out = conv2d(x, self.weight, stride=self.stride, pad=self.pad)
        return out + self.bias.reshape(1, self.out_channels, 1, 1)


class InstanceNorm(Layer):
    """
    Örnek ve kanal başına standartlaştırma (öğrenilebilir ölçek yok)
    """

    kind = 'instance_norm'

    def __init__(self, eps=1e-5):
        super().__init__()
        self.eps = float(eps)

    def spec(self):
        return {'kind': self.kind, 'eps': self.eps}

    def forward(self, x):
        centered = x - x.mean(axis=(2, 3), keepdims=True)
        var = (centered * centered).mean(axis=(2, 3), keepdims=True)
        return centered * (var + self.eps) ** -0.5


class ReLU(Layer):
    kind = 'relu'

    def forward(self, x):
        return relu(x)


class AvgPool(Layer):
    kind = 'avg_pool'

    def __init__(self, size=2):
        super().__init__()
        self.size = int(size)

    def spec(self):
        return {'kind': self.kind, 'size': self.size}

    def output_shape(self, input_shape):
        c, h, w = input_shape
        if h % self.size or w % self.size:
            raise ConfigError(f"AvgPool({self.size}) için bölünemeyen boyut: {tuple(input_shape)}")
        return (c, h // self.size, w // self.size)

    def forward(self, x):
        n, c, h, w = x.shape
        s = self.size
        return x.reshape(n, c, h // s, s, w // s, s).mean(axis=(3, 5))


class Flatten(Layer):
    kind = 'flatten'

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1)


LAYER_TYPES = {
    'linear': lambda s: Linear(s['in_dim'], s['out_dim']),
    'conv2d': lambda s: Conv2d(s['in_channels'], s['out_channels'], s['kernel'], s['stride'], s['pad']),
    'instance_norm': lambda s: InstanceNorm(s['eps']),
    'relu': lambda s: ReLU(),
    'avg_pool': lambda s: AvgPool(s['size']),
    'flatten': lambda s: Flatten(),
}


def layer_from_spec(spec):
    try:
        factory = LAYER_TYPES[spec['kind']]
    except KeyError:
        raise ConfigError(f"Bilinmeyen katman türü: {spec.get('kind')}") from None
    return factory(spec)
