"""回放缓冲状态."""
from collections.abc import Iterator
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from core.layers import Tensor


class Origin(StrEnum):
    """链起点来源."""

    BUFFER = 'buffer'
    FRESH = 'fresh'


@dataclass
class DrawResult:
    """
    一次抽取的结果.

    Attributes:
        states: 链起点 (B, *input_shape)
        origins: 每个起点的来源
        labels: 新鲜起点使用的混合分量，来自缓冲的为 -1
    """

    states: Tensor
    origins: list[Origin]
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.origins)

    def __iter__(self) -> Iterator[tuple[Tensor, Origin]]:
        return iter(zip(self.states, self.origins, strict=True))

    def fresh_count(self) -> int:
        """新鲜起点数量."""
        return sum(1 for o in self.origins if o == Origin.FRESH)


class ReplayBuffer:
    """
    固定容量的持久链状态存储.

    存储在首次写入时按样本形状分配；只保存有限值状态.
    """

    def __init__(self, capacity: int = 10_000, rho: float = 0.05,
                 seed: int = 0):
        """
        初始化缓冲.

        Args:
            capacity: 容量 |B|
            rho: 重新初始化概率 ρ
            seed: 随机种子
        """
        if capacity < 1:
            raise ValueError(f"capacity must be positive: {capacity}")
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1]: {rho}")
        self.capacity = int(capacity)
        self.rho = float(rho)
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.slots: Tensor | None = None
        self.size = 0

    def __len__(self) -> int:
        return self.size

    @property
    def is_full(self) -> bool:
        """是否已满."""
        return self.size >= self.capacity

    def occupied(self) -> Tensor:
        """已占用的槽位视图."""
        if self.slots is None:
            return np.empty((0,))
        return self.slots[:self.size]

    def scan_finite(self) -> bool:
        """检查所有已存储状态均为有限值."""
        return bool(np.isfinite(self.occupied()).all())
