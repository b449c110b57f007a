"""采样器所需的能量模型协议及解析能量."""
from typing import Protocol

import numpy as np

from core.exceptions import DivergenceError, ShapeError
from core.layers import BNMode, Tensor
from core.network import Labels


class EnergyModel(Protocol):
    """采样器可驱动的能量模型（SplitNetwork 满足该协议）."""

    @property
    def input_shape(self) -> tuple[int, ...]: ...

    def energy(
        self, x: Tensor, bn_mode: BNMode = ..., y: Labels = ...
    ) -> float | Tensor: ...

    def energy_and_grad(
        self, x: Tensor, bn_mode: BNMode = ..., y: Labels = ...
    ) -> tuple[Tensor, Tensor]: ...

    def energy_and_slack(
        self, x: Tensor, bn_mode: BNMode = ..., y: Labels = ...
    ) -> tuple[Tensor, Tensor]: ...

    def grad_first_input(
        self, x: Tensor, p: Tensor, bn_mode: BNMode = ...
    ) -> Tensor: ...


class QuadraticEnergy:
    """
    解析二次能量 E(x) = ½·scale·‖x - center‖².

    首层视为恒等映射，因此松弛变量等于梯度本身.
    """

    def __init__(
        self,
        input_shape: tuple[int, ...],
        scale: float = 1.0,
        center: Tensor | None = None
    ):
        self._input_shape = tuple(input_shape)
        self.scale = float(scale)
        self.center = (
            np.zeros(self._input_shape) if center is None
            else np.asarray(center, dtype=np.float64)
        )

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self._input_shape

    def _as_batch(self, x: Tensor) -> tuple[Tensor, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape == self._input_shape:
            return x[None, ...], True
        if x.shape[1:] == self._input_shape:
            return x, False
        raise ShapeError(
            f"Input shape {x.shape} does not match {self._input_shape}"
        )

    def _terms(self, x: Tensor) -> tuple[Tensor, Tensor, bool]:
        xb, single = self._as_batch(x)
        diff = xb - self.center
        axes = tuple(range(1, xb.ndim))
        energies = 0.5 * self.scale * np.sum(diff * diff, axis=axes)
        if not np.isfinite(energies).all():
            raise DivergenceError("Non-finite quadratic energy")
        return energies, self.scale * diff, single

    def energy(self, x, bn_mode=BNMode.EVAL, y=None):
        energies, _, single = self._terms(x)
        return float(energies[0]) if single else energies

    def energy_and_grad(self, x, bn_mode=BNMode.EVAL, y=None):
        energies, grad, single = self._terms(x)
        return energies, grad[0] if single else grad

    def energy_and_slack(self, x, bn_mode=BNMode.EVAL, y=None):
        return self.energy_and_grad(x, bn_mode, y)

    def grad_first_input(self, x, p, bn_mode=BNMode.EVAL):
        return np.array(p, dtype=np.float64)
