"""回放缓冲Service."""
import logging
from collections.abc import Sequence
from typing import ClassVar

import numpy as np

from core.exceptions import BufferStateError, ShapeError
from core.layers import Tensor
from models.informative_init import InformativeInit
from models.replay_buffer import DrawResult, Origin, ReplayBuffer
from services.init_service import InitService

logger = logging.getLogger(__name__)


class BufferService:
    """
    回放缓冲业务逻辑层.

    抽取为有放回抽样；缓冲满后新状态覆盖均匀随机的槽位.
    所有随机性来自缓冲自身的 rng，固定种子下抽取与替换序列可复现.
    """

    _instance: ClassVar['BufferService | None'] = None

    def __init__(self, init_service: InitService):
        """
        初始化Service.

        Args:
            init_service: 信息初始化Service
        """
        self._init_service = init_service

    @classmethod
    def get_instance(cls) -> 'BufferService':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            BufferService实例
        """
        if cls._instance is None:
            cls._instance = cls(InitService.get_instance())
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    def draw(
        self,
        buf: ReplayBuffer,
        init: InformativeInit | None,
        batch_size: int,
        input_shape: tuple[int, ...] | None = None
    ) -> DrawResult:
        """
        抽取链起点.

        每个起点以 1-ρ 的概率来自均匀随机的已占用槽位，否则新鲜抽取；
        缓冲为空时全部新鲜抽取. init 为 None 时新鲜起点取 U[-1, 1].

        Args:
            buf: 回放缓冲
            init: 信息初始化（None 表示均匀初始化）
            batch_size: 抽取数量
            input_shape: 均匀初始化时的样本形状

        Returns:
            DrawResult
        """
        if batch_size < 1:
            raise ShapeError(f"batch_size must be >= 1: {batch_size}")
        if init is not None:
            shape = init.input_shape
        elif input_shape is not None:
            shape = tuple(input_shape)
        elif buf.slots is not None:
            shape = buf.slots.shape[1:]
        else:
            raise ShapeError("Uniform draws need an input shape")

        rng = buf.rng
        states = np.empty((batch_size,) + tuple(shape))
        labels = np.full(batch_size, -1, dtype=np.int64)
        origins: list[Origin] = []

        for i in range(batch_size):
            if buf.size > 0 and rng.random() >= buf.rho:
                slot = int(rng.integers(buf.size))
                states[i] = buf.slots[slot]
                origins.append(Origin.BUFFER)
                continue
            if init is not None:
                states[i], labels[i] = self._init_service.sample_marginal(
                    init, rng
                )
            else:
                states[i] = self._init_service.uniform(shape, 1, rng)[0]
            origins.append(Origin.FRESH)

        return DrawResult(states=states, origins=origins, labels=labels)

    def push(self, buf: ReplayBuffer, states: Sequence[Tensor]) -> None:
        """
        写入链状态.

        未满时追加，满后每个新状态覆盖均匀随机的槽位.

        Args:
            buf: 回放缓冲
            states: 状态序列或批量数组

        Raises:
            BufferStateError: 存在非有限状态（整批拒绝）
        """
        batch = np.asarray(states, dtype=np.float64)
        if batch.shape[0] == 0:
            return
        if not np.isfinite(batch).all():
            raise BufferStateError(
                "Refusing to store non-finite chain states"
            )
        if buf.slots is None:
            buf.slots = np.empty((buf.capacity,) + batch.shape[1:])
        elif batch.shape[1:] != buf.slots.shape[1:]:
            raise ShapeError(
                f"State shape {batch.shape[1:]} does not match buffer "
                f"{buf.slots.shape[1:]}"
            )

        for state in batch:
            if buf.size < buf.capacity:
                buf.slots[buf.size] = state
                buf.size += 1
            else:
                buf.slots[int(buf.rng.integers(buf.capacity))] = state
