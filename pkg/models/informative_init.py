"""信息初始化（按类别高斯混合）模型."""
import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from core.exceptions import ShapeError
from core.layers import Tensor


class CovarianceForm(StrEnum):
    """协方差形式."""

    FULL = 'full'
    DIAG = 'diag'


class InitKind(StrEnum):
    """链初始分布."""

    INFORMATIVE = 'informative'
    UNIFORM = 'uniform'


@dataclass(frozen=True, eq=False)
class InformativeInit:
    """
    拟合好的按类别高斯混合 p0(x) = Σ_y π_y N(μ_y, Σ_y).

    Attributes:
        pi: 混合权重 (C,)
        mu: 各类均值 (C, *input_shape)
        cov_factor: FULL 时为下三角 Cholesky 因子 (C, d, d)，
            DIAG 时为标准差 (C, d)；满足 L·Lᵀ = Σ_y + jitter_y·I
        jitter: 每个类别实际使用的对角抖动 (C,)
        covariance: 协方差形式
    """

    pi: Tensor
    mu: Tensor
    cov_factor: Tensor
    jitter: Tensor
    covariance: CovarianceForm = CovarianceForm.FULL

    def __post_init__(self) -> None:
        num_classes = self.pi.shape[0]
        if self.mu.shape[0] != num_classes:
            raise ShapeError("mu must have one row per class")
        if np.any(self.pi < 0) or abs(float(self.pi.sum()) - 1.0) > 1e-12:
            raise ShapeError(
                f"Mixture weights must be non-negative and sum to 1: "
                f"{self.pi}"
            )
        d = self.dim
        expected = (
            (num_classes, d, d) if self.covariance == CovarianceForm.FULL
            else (num_classes, d)
        )
        if self.cov_factor.shape != expected:
            raise ShapeError(
                f"cov_factor shape {self.cov_factor.shape} != {expected}"
            )

    @property
    def num_classes(self) -> int:
        """类别数."""
        return int(self.pi.shape[0])

    @property
    def input_shape(self) -> tuple[int, ...]:
        """单个样本形状."""
        return tuple(int(v) for v in self.mu.shape[1:])

    @property
    def dim(self) -> int:
        """展平后的维度 d."""
        return math.prod(self.input_shape)

    def covariance_of(self, y: int) -> Tensor:
        """
        重建第 y 类的 Σ_y + jitter·I.

        Args:
            y: 类别

        Returns:
            (d, d) 矩阵
        """
        factor = self.cov_factor[y]
        if self.covariance == CovarianceForm.DIAG:
            return np.diag(factor * factor)
        return factor @ factor.T


class GapReference(StrEnum):
    """统计量差距的参照初始分布."""

    INFORMATIVE = 'informative'
    UNIFORM = 'uniform'


@dataclass(frozen=True)
class StatisticGap:
    """初始样本与真实数据的逐特征统计量差距（已对特征取平均）."""

    reference: GapReference
    mean_gap: float
    var_gap: float
