"""首层/主体拆分网络及其能量、梯度计算."""
import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import logsumexp, softmax

from core.exceptions import DivergenceError, ShapeError
from core.layers import (
    BatchNorm,
    BNMode,
    Conv2d,
    Dense,
    Layer,
    ReLU,
    Tensor,
    layer_from_descriptor,
)

logger = logging.getLogger(__name__)

Labels = int | np.ndarray | None


@dataclass
class JointGradient:
    """联合目标的参数梯度及其附带统计量."""

    grads: dict[str, Tensor]
    ce_loss: float
    energy_gap: float
    real_energy: Tensor
    sample_energy: Tensor
    real_logits: Tensor


class SplitNetwork:
    """
    拆分为首层 f0 与主体 g 的分类网络: f(x) = g(f0(x)).

    logits 解释为联合能量模型: E(x) = -LSE(f(x))；带标签时 E(x, y) = -f(x)[y].
    所有方法同时接受单个样本（形状等于 input_shape）或批量（首维为批次）.
    """

    def __init__(
        self,
        first_layer: Layer,
        body: list[Layer],
        num_classes: int
    ):
        """
        初始化网络并校验形状.

        Args:
            first_layer: 首层 f0
            body: 主体层序列 g
            num_classes: 类别数 C
        """
        if num_classes < 1:
            raise ShapeError(f"num_classes must be positive: {num_classes}")
        self.first_layer = first_layer
        self.body = list(body)
        self.num_classes = int(num_classes)

        shape = first_layer.output_shape
        for index, layer in enumerate(self.body):
            if layer.input_shape != shape:
                raise ShapeError(
                    f"Body layer {index} expects {layer.input_shape}, "
                    f"got {shape}"
                )
            shape = layer.output_shape
        if shape != (self.num_classes,):
            raise ShapeError(
                f"Network output shape {shape} != ({self.num_classes},)"
            )

    @property
    def input_shape(self) -> tuple[int, ...]:
        """输入形状（不含批次维）."""
        return self.first_layer.input_shape

    @property
    def feature_shape(self) -> tuple[int, ...]:
        """首层输出形状."""
        return self.first_layer.output_shape

    def layers(self) -> list[tuple[str, Layer]]:
        """带名称前缀的所有层."""
        named = [('first', self.first_layer)]
        named.extend(
            (f'body.{i}', layer) for i, layer in enumerate(self.body)
        )
        return named

    def named_parameters(self) -> dict[str, Tensor]:
        """
        所有参数（返回的数组即网络持有的数组，原地修改会生效）.

        Returns:
            名称 -> 参数数组
        """
        return {
            f'{prefix}.{key}': value
            for prefix, layer in self.layers()
            for key, value in layer.params.items()
        }

    def named_state(self) -> dict[str, Tensor]:
        """批归一化滑动统计量."""
        return {
            f'{prefix}.{key}': value
            for prefix, layer in self.layers()
            for key, value in layer.state.items()
        }

    def num_parameters(self) -> int:
        """参数总数."""
        return sum(layer.num_parameters() for _, layer in self.layers())

    def snapshot_state(self) -> dict[str, Tensor]:
        """滑动统计量的副本."""
        return {
            name: value.copy() for name, value in self.named_state().items()
        }

    def restore_state(self, snapshot: dict[str, Tensor]) -> None:
        """恢复 snapshot_state 保存的滑动统计量."""
        for prefix, layer in self.layers():
            for key in layer.state:
                layer.state[key] = snapshot[f'{prefix}.{key}'].copy()

    def load_arrays(
        self,
        params: dict[str, Tensor],
        state: dict[str, Tensor]
    ) -> None:
        """
        写入参数与统计量.

        Args:
            params: 名称 -> 参数
            state: 名称 -> 滑动统计量
        """
        for prefix, layer in self.layers():
            for store, source in (
                (layer.params, params), (layer.state, state)
            ):
                for key in store:
                    name = f'{prefix}.{key}'
                    if name not in source:
                        raise ShapeError(f"Missing array '{name}'")
                    value = np.asarray(source[name], dtype=np.float64)
                    if value.shape != store[key].shape:
                        raise ShapeError(
                            f"Array '{name}' has shape {value.shape}, "
                            f"expected {store[key].shape}"
                        )
                    store[key] = value.copy()

    # ------------------------------------------------------------------
    # 前向 / 反向
    # ------------------------------------------------------------------

    def _as_batch(self, x: Tensor) -> tuple[Tensor, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape == self.input_shape:
            return x[None, ...], True
        if x.ndim == len(self.input_shape) + 1 and (
            x.shape[1:] == self.input_shape
        ):
            return x, False
        raise ShapeError(
            f"Input shape {x.shape} does not match network input "
            f"{self.input_shape}"
        )

    def _labels(self, y: Labels, n: int) -> np.ndarray | None:
        if y is None:
            return None
        labels = np.broadcast_to(np.asarray(y, dtype=np.int64), (n,))
        if labels.size and (
            labels.min() < 0 or labels.max() >= self.num_classes
        ):
            raise ShapeError(
                f"Labels must lie in [0, {self.num_classes})"
            )
        return labels

    def _forward_body(
        self, h: Tensor, mode: BNMode, update_stats: bool
    ) -> tuple[Tensor, list[Any]]:
        caches = []
        out = h
        for layer in self.body:
            out, cache = layer.forward(out, mode, update_stats)
            caches.append(cache)
        return out, caches

    def _forward(
        self, xb: Tensor, mode: BNMode, update_stats: bool = False
    ) -> tuple[Tensor, tuple[Any, list[Any]]]:
        h, first_cache = self.first_layer.forward(xb, mode, update_stats)
        logits, body_caches = self._forward_body(h, mode, update_stats)
        return logits, (first_cache, body_caches)

    def _backward_body(
        self, grad: Tensor, caches: list[Any], grads: dict[str, Tensor]
    ) -> Tensor:
        for index in range(len(self.body) - 1, -1, -1):
            grad, layer_grads = self.body[index].backward(
                grad, caches[index]
            )
            for key, value in layer_grads.items():
                grads[f'body.{index}.{key}'] = value
        return grad

    def _backward(
        self, grad_logits: Tensor, caches: tuple[Any, list[Any]]
    ) -> tuple[Tensor, dict[str, Tensor]]:
        first_cache, body_caches = caches
        grads: dict[str, Tensor] = {}
        grad_h = self._backward_body(grad_logits, body_caches, grads)
        grad_x, first_grads = self.first_layer.backward(grad_h, first_cache)
        for key, value in first_grads.items():
            grads[f'first.{key}'] = value
        return grad_x, grads

    @staticmethod
    def _check_finite(logits: Tensor) -> None:
        if not np.isfinite(logits).all():
            raise DivergenceError("Non-finite logits encountered")

    def _energy_terms(
        self, logits: Tensor, labels: np.ndarray | None
    ) -> tuple[Tensor, Tensor]:
        """能量及其对 logits 的梯度."""
        self._check_finite(logits)
        if labels is None:
            energies = -logsumexp(logits, axis=1)
            grad = -softmax(logits, axis=1)
        else:
            rows = np.arange(logits.shape[0])
            energies = -logits[rows, labels]
            grad = np.zeros_like(logits)
            grad[rows, labels] = -1.0
        return energies, grad

    # ------------------------------------------------------------------
    # 公开运算
    # ------------------------------------------------------------------

    def forward_logits(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        update_stats: bool = False
    ) -> Tensor:
        """
        计算 logits f(x).

        Args:
            x: 单个样本或批量
            bn_mode: 批归一化模式
            update_stats: TRAIN 模式下是否更新滑动统计量

        Returns:
            logits，单样本为 (C,)，批量为 (n, C)
        """
        xb, single = self._as_batch(x)
        logits, _ = self._forward(xb, bn_mode, update_stats)
        return logits[0] if single else logits

    def predict_proba(
        self, x: Tensor, bn_mode: BNMode = BNMode.EVAL
    ) -> Tensor:
        """类别后验 p(y|x)."""
        logits = self.forward_logits(x, bn_mode)
        self._check_finite(logits)
        return softmax(logits, axis=-1)

    def energy(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        y: Labels = None
    ) -> float | Tensor:
        """
        能量 E(x) = -LSE(f(x))，带标签时为 -f(x)[y].

        Raises:
            DivergenceError: logits 非有限
        """
        xb, single = self._as_batch(x)
        logits, _ = self._forward(xb, bn_mode)
        energies, _ = self._energy_terms(
            logits, self._labels(y, xb.shape[0])
        )
        return float(energies[0]) if single else energies

    def energy_and_grad(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        y: Labels = None
    ) -> tuple[Tensor, Tensor]:
        """
        一次完整前向+反向，得到能量与输入梯度.

        Returns:
            (每个样本的能量 (n,), 与 x 同形状的梯度)
        """
        xb, single = self._as_batch(x)
        logits, caches = self._forward(xb, bn_mode)
        energies, grad_logits = self._energy_terms(
            logits, self._labels(y, xb.shape[0])
        )
        grad_x, _ = self._backward(grad_logits, caches)
        return energies, grad_x[0] if single else grad_x

    def grad_energy_input(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        y: Labels = None
    ) -> Tensor:
        """完整反向传播得到 ∇x E(x)."""
        return self.energy_and_grad(x, bn_mode, y)[1]

    def energy_and_slack(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        y: Labels = None
    ) -> tuple[Tensor, Tensor]:
        """
        一次完整前向 + 仅主体反向，得到能量与松弛变量 p = ∂E/∂f0(x).

        Returns:
            (每个样本的能量 (n,), 与 f0 输出同形状的 p)
        """
        xb, single = self._as_batch(x)
        h, _ = self.first_layer.forward(xb, bn_mode)
        logits, body_caches = self._forward_body(h, bn_mode, False)
        energies, grad_logits = self._energy_terms(
            logits, self._labels(y, xb.shape[0])
        )
        p = self._backward_body(grad_logits, body_caches, {})
        return energies, p[0] if single else p

    def slack(
        self,
        x: Tensor,
        bn_mode: BNMode = BNMode.EVAL,
        y: Labels = None
    ) -> Tensor:
        """松弛变量 p = -∇_{f0(x)} LSE(g(f0(x)))（返回副本，冻结后不随 x 变化）."""
        return self.energy_and_slack(x, bn_mode, y)[1].copy()

    def grad_first_input(
        self,
        x: Tensor,
        p: Tensor,
        bn_mode: BNMode = BNMode.EVAL
    ) -> Tensor:
        """
        仅经过首层的向量-雅可比积 pᵀ·J_{f0}(x).

        Args:
            x: 输入
            p: 冻结的松弛变量
            bn_mode: 批归一化模式（首层不受影响，保留以统一接口）

        Returns:
            与 x 同形状的梯度
        """
        xb, single = self._as_batch(x)
        pb = np.asarray(p, dtype=np.float64)
        if single:
            pb = pb[None, ...]
        expected = (xb.shape[0],) + self.feature_shape
        if pb.shape != expected:
            raise ShapeError(
                f"Slack shape {pb.shape} does not match first layer "
                f"output {expected}"
            )
        _, cache = self.first_layer.forward(xb, bn_mode)
        grad_x, _ = self.first_layer.backward(pb, cache)
        return grad_x[0] if single else grad_x

    def ce_and_grad_input(
        self,
        x: Tensor,
        y: Labels,
        bn_mode: BNMode = BNMode.EVAL
    ) -> tuple[Tensor, Tensor]:
        """
        每个样本的交叉熵及其输入梯度（供对抗攻击使用）.

        Returns:
            (交叉熵 (n,), 与 x 同形状的梯度)
        """
        xb, single = self._as_batch(x)
        labels = self._labels(y, xb.shape[0])
        if labels is None:
            raise ShapeError("Cross-entropy requires labels")
        logits, caches = self._forward(xb, bn_mode)
        self._check_finite(logits)
        rows = np.arange(xb.shape[0])
        ce = logsumexp(logits, axis=1) - logits[rows, labels]
        grad_logits = softmax(logits, axis=1)
        grad_logits[rows, labels] -= 1.0
        grad_x, _ = self._backward(grad_logits, caches)
        return ce, grad_x[0] if single else grad_x

    def param_grad_joint(
        self,
        x_real: Tensor,
        y_real: Labels,
        x_sampled: Tensor,
        bn_mode: BNMode = BNMode.TRAIN,
        update_stats: bool = False
    ) -> JointGradient:
        """
        联合目标 CE(x_r, y_r) + mean E(x_r) - mean E(x_s) 对参数的梯度.

        真实批次与采样批次分别前向；滑动统计量只在真实批次上更新.
        能量差项单独反向，x_s == x_r 时该项的贡献精确为零.

        Args:
            x_real: 真实样本
            y_real: 真实标签
            x_sampled: 链采样得到的样本
            bn_mode: 批归一化模式
            update_stats: 是否用真实批次更新滑动统计量

        Returns:
            JointGradient
        """
        xr, _ = self._as_batch(x_real)
        xs, _ = self._as_batch(x_sampled)
        labels = self._labels(y_real, xr.shape[0])
        if labels is None:
            raise ShapeError("Joint objective requires labels")

        logits_r, caches_r = self._forward(xr, bn_mode, update_stats)
        logits_s, caches_s = self._forward(xs, bn_mode, False)
        self._check_finite(logits_r)
        self._check_finite(logits_s)

        n_r, n_s = xr.shape[0], xs.shape[0]
        rows = np.arange(n_r)
        lse_r = logsumexp(logits_r, axis=1)
        lse_s = logsumexp(logits_s, axis=1)
        prob_r = softmax(logits_r, axis=1)
        prob_s = softmax(logits_s, axis=1)

        ce_grad = prob_r.copy()
        ce_grad[rows, labels] -= 1.0
        _, ce_grads = self._backward(ce_grad / n_r, caches_r)
        _, real_grads = self._backward(-prob_r / n_r, caches_r)
        _, sample_grads = self._backward(prob_s / n_s, caches_s)

        grads = {
            name: ce_grads[name] + (real_grads[name] + sample_grads[name])
            for name in ce_grads
        }
        real_energy = -lse_r
        sample_energy = -lse_s
        return JointGradient(
            grads=grads,
            ce_loss=float(np.mean(lse_r - logits_r[rows, labels])),
            energy_gap=float(real_energy.mean() - sample_energy.mean()),
            real_energy=real_energy,
            sample_energy=sample_energy,
            real_logits=logits_r,
        )

    def param_grad_ce(
        self,
        x: Tensor,
        y: Labels,
        bn_mode: BNMode = BNMode.TRAIN,
        update_stats: bool = False
    ) -> JointGradient:
        """
        仅交叉熵的参数梯度（判别式基线，不涉及采样）.

        返回结构与 param_grad_joint 相同，样本能量为空数组、能量差为 0.
        """
        xb, _ = self._as_batch(x)
        labels = self._labels(y, xb.shape[0])
        if labels is None:
            raise ShapeError("Cross-entropy requires labels")
        logits, caches = self._forward(xb, bn_mode, update_stats)
        self._check_finite(logits)
        n = xb.shape[0]
        rows = np.arange(n)
        lse = logsumexp(logits, axis=1)
        grad_logits = softmax(logits, axis=1)
        grad_logits[rows, labels] -= 1.0
        _, grads = self._backward(grad_logits / n, caches)
        return JointGradient(
            grads=grads,
            ce_loss=float(np.mean(lse - logits[rows, labels])),
            energy_gap=0.0,
            real_energy=-lse,
            sample_energy=np.empty(0),
            real_logits=logits,
        )

    def loss_value(
        self,
        x_real: Tensor,
        y_real: Labels,
        x_sampled: Tensor,
        bn_mode: BNMode = BNMode.TRAIN
    ) -> tuple[float, float]:
        """
        联合目标的两个标量分量（不修改任何状态）.

        Returns:
            (平均交叉熵, mean E(x_r) - mean E(x_s))
        """
        xr, _ = self._as_batch(x_real)
        xs, _ = self._as_batch(x_sampled)
        labels = self._labels(y_real, xr.shape[0])
        if labels is None:
            raise ShapeError("Joint objective requires labels")
        logits_r, _ = self._forward(xr, bn_mode)
        logits_s, _ = self._forward(xs, bn_mode)
        self._check_finite(logits_r)
        self._check_finite(logits_s)
        lse_r = logsumexp(logits_r, axis=1)
        lse_s = logsumexp(logits_s, axis=1)
        rows = np.arange(xr.shape[0])
        ce = float(np.mean(lse_r - logits_r[rows, labels]))
        gap = float(np.mean(-lse_r) - np.mean(-lse_s))
        return ce, gap

    # ------------------------------------------------------------------
    # 架构描述与构建
    # ------------------------------------------------------------------

    def describe(self) -> dict[str, Any]:
        """架构描述（可JSON序列化）."""
        return {
            'num_classes': self.num_classes,
            'input_shape': list(self.input_shape),
            'first_layer': self.first_layer.describe(),
            'body': [layer.describe() for layer in self.body],
        }

    @classmethod
    def from_descriptor(cls, desc: dict[str, Any]) -> 'SplitNetwork':
        """
        根据架构描述重建网络（参数为零）.

        Args:
            desc: describe() 生成的字典

        Returns:
            SplitNetwork
        """
        first = layer_from_descriptor(desc['first_layer'])
        if list(first.input_shape) != list(desc['input_shape']):
            raise ShapeError("First layer input shape mismatch")
        body = [layer_from_descriptor(d) for d in desc['body']]
        return cls(first, body, int(desc['num_classes']))

    @staticmethod
    def _hidden_stack(
        shape: tuple[int, ...],
        hidden: tuple[int, ...],
        num_classes: int,
        batch_norm: bool,
        rng: np.random.Generator
    ) -> list[Layer]:
        body: list[Layer] = []
        if batch_norm:
            body.append(BatchNorm(shape))
        body.append(ReLU(shape))
        for width in hidden:
            dense = Dense(shape, width, rng)
            body.append(dense)
            shape = dense.output_shape
            if batch_norm:
                body.append(BatchNorm(shape))
            body.append(ReLU(shape))
        body.append(Dense(shape, num_classes, rng))
        return body

    @classmethod
    def build_mlp(
        cls,
        input_shape: tuple[int, ...],
        hidden: tuple[int, ...],
        num_classes: int,
        batch_norm: bool = True,
        rng: np.random.Generator | None = None
    ) -> 'SplitNetwork':
        """
        构建多层感知机: dense 首层 -> [BN] -> ReLU -> 隐藏块 -> dense logits.

        Args:
            input_shape: 输入形状
            hidden: 各隐藏层宽度，首个宽度属于首层
            num_classes: 类别数
            batch_norm: 是否加入批归一化
            rng: 权重初始化随机源

        Returns:
            SplitNetwork
        """
        if not hidden:
            raise ShapeError("MLP needs at least one hidden width")
        rng = rng or np.random.default_rng(0)
        first = Dense(input_shape, hidden[0], rng)
        body = cls._hidden_stack(
            first.output_shape, tuple(hidden[1:]), num_classes,
            batch_norm, rng
        )
        net = cls(first, body, num_classes)
        logger.info(
            f"Built MLP {math.prod(input_shape)}->"
            f"{'->'.join(str(h) for h in hidden)}->{num_classes} "
            f"(batch_norm={batch_norm}, params={net.num_parameters()})"
        )
        return net

    @classmethod
    def build_conv(
        cls,
        input_shape: tuple[int, ...],
        channels: int,
        hidden: tuple[int, ...],
        num_classes: int,
        batch_norm: bool = True,
        rng: np.random.Generator | None = None
    ) -> 'SplitNetwork':
        """
        构建卷积网络: 3x3 卷积首层 -> [BN] -> ReLU -> dense 隐藏块 -> logits.

        Args:
            input_shape: (C, H, W)
            channels: 卷积输出通道数
            hidden: 卷积之后的 dense 隐藏层宽度
            num_classes: 类别数
            batch_norm: 是否加入批归一化
            rng: 权重初始化随机源

        Returns:
            SplitNetwork
        """
        rng = rng or np.random.default_rng(0)
        first = Conv2d(input_shape, channels, rng=rng)
        body = cls._hidden_stack(
            first.output_shape, tuple(hidden), num_classes, batch_norm, rng
        )
        net = cls(first, body, num_classes)
        logger.info(
            f"Built conv net {input_shape} conv{channels} "
            f"hidden={list(hidden)} -> {num_classes} "
            f"(batch_norm={batch_norm}, params={net.num_parameters()})"
        )
        return net
