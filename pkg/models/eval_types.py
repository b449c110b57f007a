"""评估相关类型."""
from dataclasses import dataclass
from enum import StrEnum


class AttackNorm(StrEnum):
    """对抗扰动范数."""

    LINF = 'linf'
    L2 = 'l2'


class OODScoreKind(StrEnum):
    """OOD 打分函数."""

    LOG_DENSITY = 'log_density'  # -E(x)，相差常数 -log Z
    MAX_SOFTMAX = 'max_softmax'  # max_y p(y|x)


@dataclass(frozen=True)
class ScoredPrediction:
    """带置信度的预测."""

    confidence: float
    predicted: int
    truth: int

    @property
    def correct(self) -> bool:
        """预测是否正确."""
        return self.predicted == self.truth


@dataclass(frozen=True)
class AttackConfig:
    """
    PGD 攻击配置.

    Attributes:
        norm: 范数
        radius: 球半径（0 表示不扰动）
        step_size: 单步步长
        steps: 迭代次数
        random_start: 是否在球内随机起点
        clip_min: 数据域下界（None 表示不裁剪）
        clip_max: 数据域上界
    """

    norm: AttackNorm = AttackNorm.LINF
    radius: float = 8 / 255
    step_size: float = 2 / 255
    steps: int = 40
    random_start: bool = True
    clip_min: float | None = None
    clip_max: float | None = None

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError(f"radius must be non-negative: {self.radius}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1: {self.steps}")


@dataclass(frozen=True)
class ReliabilityBucket:
    """校准分桶统计."""

    index: int
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float

    def to_row(self) -> dict:
        """转换为CSV行."""
        return {
            'bucket': self.index,
            'lower': self.lower,
            'upper': self.upper,
            'count': self.count,
            'accuracy': self.accuracy,
            'confidence': self.confidence,
        }
