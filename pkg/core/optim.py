"""优化器与学习率调度."""
import math
from collections.abc import Sequence

import numpy as np

from core.layers import Tensor

# 参考日程: 150 轮训练，在 [50, 100, 125] 轮衰减
REFERENCE_EPOCHS = 150
REFERENCE_DECAY_EPOCHS = (50, 100, 125)


class SGD:
    """带可选动量与权重衰减的 SGD（原地更新参数）."""

    def __init__(self, momentum: float = 0.0, weight_decay: float = 0.0):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity: dict[str, Tensor] = {}

    def step(
        self,
        params: dict[str, Tensor],
        grads: dict[str, Tensor],
        lr: float
    ) -> None:
        """
        执行一次更新.

        Args:
            params: 名称 -> 参数（原地修改）
            grads: 名称 -> 梯度
            lr: 当前学习率
        """
        for name, param in params.items():
            grad = grads[name]
            if self.weight_decay:
                grad = grad + self.weight_decay * param
            if self.momentum:
                buf = self._velocity.get(name)
                if buf is None:
                    buf = grad.copy()
                else:
                    buf = self.momentum * buf + grad
                self._velocity[name] = buf
                grad = buf
            param -= lr * grad


class Adam:
    """Adam 优化器（原地更新参数）."""

    def __init__(
        self,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0
    ):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self._m: dict[str, Tensor] = {}
        self._v: dict[str, Tensor] = {}
        self._t = 0

    def step(
        self,
        params: dict[str, Tensor],
        grads: dict[str, Tensor],
        lr: float
    ) -> None:
        """执行一次更新."""
        self._t += 1
        correction1 = 1.0 - self.beta1 ** self._t
        correction2 = 1.0 - self.beta2 ** self._t
        for name, param in params.items():
            grad = grads[name]
            if self.weight_decay:
                grad = grad + self.weight_decay * param
            m = self._m.get(name, np.zeros_like(param))
            v = self._v.get(name, np.zeros_like(param))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self._m[name] = m
            self._v[name] = v
            m_hat = m / correction1
            v_hat = v / correction2
            param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def lr_at(
    base_lr: float,
    decay: float,
    decay_epochs: Sequence[int],
    epoch: int
) -> float:
    """
    阶梯式学习率: lr·decay^(#{d ∈ decay_epochs : d ≤ epoch}).

    Args:
        base_lr: 初始学习率
        decay: 衰减率
        decay_epochs: 衰减轮次（0起计）
        epoch: 当前轮次（0起计）

    Returns:
        当前学习率
    """
    passed = sum(1 for d in decay_epochs if d <= epoch)
    return base_lr * decay ** passed


def scale_decay_epochs(
    epochs: int,
    reference: Sequence[int] = REFERENCE_DECAY_EPOCHS,
    reference_epochs: int = REFERENCE_EPOCHS
) -> tuple[int, ...]:
    """
    将参考衰减点按训练轮数等比例缩放.

    Args:
        epochs: 实际训练轮数
        reference: 参考衰减轮次
        reference_epochs: 参考总轮数

    Returns:
        严格递增的衰减轮次
    """
    scaled: list[int] = []
    for d in reference:
        value = max(1, math.floor(d * epochs / reference_epochs + 0.5))
        if scaled and value <= scaled[-1]:
            value = scaled[-1] + 1
        scaled.append(value)
    return tuple(scaled)
