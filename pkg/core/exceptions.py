"""异常定义."""
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from models.sampler_config import ChainTrace


class JemDeskError(Exception):
    """所有项目异常的基类."""


class ShapeError(JemDeskError, ValueError):
    """输入形状或标签不合法."""


class DivergenceError(JemDeskError, ArithmeticError):
    """
    数值发散（能量、梯度或链状态出现非有限值）.

    Attributes:
        trace: 发散时已记录的链轨迹（可选）
    """

    def __init__(
        self, message: str, trace: 'ChainTrace | None' = None
    ):
        super().__init__(message)
        self.trace = trace


class FitError(JemDeskError, ValueError):
    """信息初始化拟合失败."""


class BufferStateError(JemDeskError, ValueError):
    """向回放缓冲写入非有限状态."""


class CheckpointError(JemDeskError, ValueError):
    """检查点文件损坏或缺少必要内容."""


class CheckpointVersionError(CheckpointError):
    """检查点格式版本不匹配."""

    def __init__(self, found: int, expected: int):
        super().__init__(
            f"Checkpoint format version {found} is not supported "
            f"(expected {expected})"
        )
        self.found = found
        self.expected = expected


class ConfigError(JemDeskError, ValueError):
    """实验配置不合法."""


class DatasetError(JemDeskError, ValueError):
    """数据集无法读取或格式错误."""


class TrainingAbortedError(JemDeskError, RuntimeError):
    """
    训练因连续发散而中止.

    Attributes:
        records: 中止前已完成的每轮指标
    """

    def __init__(self, message: str, records: list[Any] | None = None):
        super().__init__(message)
        self.records = records or []
