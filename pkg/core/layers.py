"""网络层定义（前向 + 反向）."""
import logging
import math
from abc import ABC, abstractmethod
from enum import StrEnum
from typing import Any, ClassVar

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from core.exceptions import ShapeError

logger = logging.getLogger(__name__)

Tensor = NDArray[np.float64]


class LayerKind(StrEnum):
    """层类型标签."""

    DENSE = 'dense'
    CONV = 'conv'
    BATCH_NORM = 'batch_norm'
    ACTIVATION = 'activation'


class BNMode(StrEnum):
    """批归一化统计量模式."""

    TRAIN = 'train'  # 使用当前批次统计量
    EVAL = 'eval'    # 使用冻结的滑动统计量


class Layer(ABC):
    """
    可微层基类.

    前向返回 (输出, 缓存)，反向只依赖缓存，因此同一次前向可以被多次反向复用.
    参数统一命名为 weight / bias.
    """

    kind: ClassVar[LayerKind]

    def __init__(
        self,
        input_shape: tuple[int, ...],
        output_shape: tuple[int, ...]
    ):
        self.input_shape = tuple(int(v) for v in input_shape)
        self.output_shape = tuple(int(v) for v in output_shape)
        self.params: dict[str, Tensor] = {}
        self.state: dict[str, Tensor] = {}

    @abstractmethod
    def forward(
        self, x: Tensor, mode: BNMode, update_stats: bool = False
    ) -> tuple[Tensor, Any]:
        """
        前向计算.

        Args:
            x: 批量输入 (n, *input_shape)
            mode: 批归一化模式
            update_stats: 是否更新滑动统计量（仅批归一化层使用）

        Returns:
            (输出, 反向所需缓存)
        """

    @abstractmethod
    def backward(
        self, grad_out: Tensor, cache: Any
    ) -> tuple[Tensor, dict[str, Tensor]]:
        """
        反向传播.

        Args:
            grad_out: 对输出的梯度
            cache: 前向缓存

        Returns:
            (对输入的梯度, 参数梯度字典)
        """

    def options(self) -> dict[str, Any]:
        """层的额外结构参数（写入架构描述）."""
        return {}

    def describe(self) -> dict[str, Any]:
        """
        生成架构描述.

        Returns:
            可JSON序列化的描述字典
        """
        return {
            'kind': str(self.kind),
            'input_shape': list(self.input_shape),
            'output_shape': list(self.output_shape),
            **self.options(),
        }

    def num_parameters(self) -> int:
        """参数总数."""
        return sum(int(p.size) for p in self.params.values())


class Dense(Layer):
    """全连接层，输入按样本展平."""

    kind = LayerKind.DENSE

    def __init__(
        self,
        input_shape: tuple[int, ...],
        out_features: int,
        rng: np.random.Generator | None = None
    ):
        super().__init__(input_shape, (out_features,))
        fan_in = math.prod(self.input_shape)
        if rng is None:
            weight = np.zeros((out_features, fan_in))
        else:
            weight = rng.normal(
                0.0, math.sqrt(2.0 / fan_in), size=(out_features, fan_in)
            )
        self.params = {
            'weight': weight.astype(np.float64),
            'bias': np.zeros(out_features),
        }

    def options(self) -> dict[str, Any]:
        return {'out_features': self.output_shape[0]}

    def forward(self, x, mode, update_stats=False):
        flat = x.reshape(x.shape[0], -1)
        out = flat @ self.params['weight'].T + self.params['bias']
        return out, (flat, x.shape)

    def backward(self, grad_out, cache):
        flat, shape = cache
        grads = {
            'weight': grad_out.T @ flat,
            'bias': grad_out.sum(axis=0),
        }
        grad_in = (grad_out @ self.params['weight']).reshape(shape)
        return grad_in, grads


class Conv2d(Layer):
    """步长为1、零填充的二维卷积层，输入形状 (C, H, W)."""

    kind = LayerKind.CONV

    def __init__(
        self,
        input_shape: tuple[int, ...],
        out_channels: int,
        kernel_size: int = 3,
        padding: int = 1,
        rng: np.random.Generator | None = None
    ):
        if len(input_shape) != 3:
            raise ShapeError(
                f"Conv2d expects (C, H, W) input, got {input_shape}"
            )
        channels, height, width = input_shape
        out_h = height + 2 * padding - kernel_size + 1
        out_w = width + 2 * padding - kernel_size + 1
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(
                f"Kernel {kernel_size} too large for input {input_shape}"
            )
        super().__init__(input_shape, (out_channels, out_h, out_w))
        self.kernel_size = kernel_size
        self.padding = padding
        fan_in = channels * kernel_size * kernel_size
        shape = (out_channels, channels, kernel_size, kernel_size)
        if rng is None:
            weight = np.zeros(shape)
        else:
            weight = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        self.params = {
            'weight': weight.astype(np.float64),
            'bias': np.zeros(out_channels),
        }

    def options(self) -> dict[str, Any]:
        return {
            'out_channels': self.output_shape[0],
            'kernel_size': self.kernel_size,
            'padding': self.padding,
        }

    def _pad(self, x: Tensor) -> Tensor:
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))

    def forward(self, x, mode, update_stats=False):
        k = self.kernel_size
        windows = sliding_window_view(self._pad(x), (k, k), axis=(2, 3))
        out = np.einsum(
            'nchwij,ocij->nohw', windows, self.params['weight']
        ) + self.params['bias'][None, :, None, None]
        return out, (windows, x.shape)

    def backward(self, grad_out, cache):
        windows, shape = cache
        k = self.kernel_size
        p = self.padding
        weight = self.params['weight']
        grads = {
            'weight': np.einsum('nohw,nchwij->ocij', grad_out, windows),
            'bias': grad_out.sum(axis=(0, 2, 3)),
        }
        n, c, h, w = shape
        grad_pad = np.zeros((n, c, h + 2 * p, w + 2 * p))
        out_h, out_w = grad_out.shape[2], grad_out.shape[3]
        for i in range(k):
            for j in range(k):
                grad_pad[:, :, i:i + out_h, j:j + out_w] += np.einsum(
                    'nohw,oc->nchw', grad_out, weight[:, :, i, j]
                )
        if p > 0:
            grad_pad = grad_pad[:, :, p:-p, p:-p]
        return grad_pad, grads


class BatchNorm(Layer):
    """
    批归一化层.

    向量输入按特征归一化，(C, H, W) 输入按通道归一化.
    TRAIN 模式使用批次统计量，EVAL 模式只读滑动统计量且不修改任何状态.
    """

    kind = LayerKind.BATCH_NORM

    def __init__(
        self,
        input_shape: tuple[int, ...],
        momentum: float = 0.1,
        eps: float = 1e-5
    ):
        super().__init__(input_shape, input_shape)
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must be in (0, 1), got {momentum}")
        self.momentum = momentum
        self.eps = eps
        features = self.input_shape[0]
        self.params = {
            'weight': np.ones(features),
            'bias': np.zeros(features),
        }
        self.state = {
            'running_mean': np.zeros(features),
            'running_var': np.ones(features),
        }

    def options(self) -> dict[str, Any]:
        return {'momentum': self.momentum, 'eps': self.eps}

    def _axes(self, x: Tensor) -> tuple[int, ...]:
        return (0,) if x.ndim == 2 else (0, 2, 3)

    def _broadcast(self, v: Tensor, ndim: int) -> Tensor:
        return v.reshape((1, -1) + (1,) * (ndim - 2))

    def forward(self, x, mode, update_stats=False):
        axes = self._axes(x)
        gamma = self._broadcast(self.params['weight'], x.ndim)
        beta = self._broadcast(self.params['bias'], x.ndim)

        if mode == BNMode.EVAL:
            mean = self._broadcast(self.state['running_mean'], x.ndim)
            var = self._broadcast(self.state['running_var'], x.ndim)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean) * inv_std
            return gamma * x_hat + beta, (mode, x_hat, inv_std, axes)

        mean = x.mean(axis=axes, keepdims=True)
        var = x.var(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std

        if update_stats:
            count = x.size // x.shape[1]
            unbiased = var.ravel() * count / max(count - 1, 1)
            m = self.momentum
            self.state['running_mean'] = (
                (1.0 - m) * self.state['running_mean'] + m * mean.ravel()
            )
            self.state['running_var'] = (
                (1.0 - m) * self.state['running_var'] + m * unbiased
            )

        return gamma * x_hat + beta, (mode, x_hat, inv_std, axes)

    def backward(self, grad_out, cache):
        mode, x_hat, inv_std, axes = cache
        gamma = self._broadcast(self.params['weight'], grad_out.ndim)
        grads = {
            'weight': (grad_out * x_hat).sum(axis=axes),
            'bias': grad_out.sum(axis=axes),
        }
        grad_hat = grad_out * gamma
        if mode == BNMode.EVAL:
            return grad_hat * inv_std, grads

        count = grad_out.size // grad_out.shape[1]
        sum_hat = grad_hat.sum(axis=axes, keepdims=True)
        sum_hat_x = (grad_hat * x_hat).sum(axis=axes, keepdims=True)
        grad_in = inv_std / count * (
            count * grad_hat - sum_hat - x_hat * sum_hat_x
        )
        return grad_in, grads


class ReLU(Layer):
    """ReLU激活，0处次梯度取0."""

    kind = LayerKind.ACTIVATION

    def __init__(self, input_shape: tuple[int, ...]):
        super().__init__(input_shape, input_shape)

    def options(self) -> dict[str, Any]:
        return {'activation': 'relu'}

    def forward(self, x, mode, update_stats=False):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, grad_out, cache):
        return np.where(cache, grad_out, 0.0), {}


def layer_from_descriptor(desc: dict[str, Any]) -> Layer:
    """
    根据架构描述重建层（参数为零，由调用方随后写入）.

    Args:
        desc: describe() 生成的字典

    Returns:
        层实例
    """
    kind = LayerKind(desc['kind'])
    input_shape = tuple(desc['input_shape'])
    layer: Layer
    if kind == LayerKind.DENSE:
        layer = Dense(input_shape, int(desc['out_features']))
    elif kind == LayerKind.CONV:
        layer = Conv2d(
            input_shape,
            int(desc['out_channels']),
            kernel_size=int(desc['kernel_size']),
            padding=int(desc['padding'])
        )
    elif kind == LayerKind.BATCH_NORM:
        layer = BatchNorm(
            input_shape,
            momentum=float(desc['momentum']),
            eps=float(desc['eps'])
        )
    else:
        if desc.get('activation', 'relu') != 'relu':
            raise ShapeError(
                f"Unsupported activation {desc.get('activation')}"
            )
        layer = ReLU(input_shape)

    if list(layer.output_shape) != list(desc['output_shape']):
        raise ShapeError(
            f"Descriptor output shape {desc['output_shape']} does not "
            f"match rebuilt layer {layer.output_shape}"
        )
    return layer
