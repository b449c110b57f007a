"""训练配置与每轮指标."""
from dataclasses import dataclass, field
from enum import StrEnum

from core.optim import scale_decay_epochs
from models.sampler_config import SamplerConfig, SamplerKind


class OptimizerKind(StrEnum):
    """优化器类型."""

    SGD = 'sgd'
    SGD_MOMENTUM = 'sgd_momentum'
    ADAM = 'adam'


class TrainObjective(StrEnum):
    """训练目标."""

    JOINT = 'joint'            # 交叉熵 + 能量差
    CLASSIFIER = 'classifier'  # 仅交叉熵（对照基线）


class GuardDecision(StrEnum):
    """发散守卫的判定."""

    CONTINUE = 'continue'
    SKIP_BATCH = 'skip_batch'
    ABORT = 'abort'


@dataclass(frozen=True)
class TrainConfig:
    """
    训练配置.

    decay_epochs 为空时按 epochs 从参考衰减点 [50, 100, 125]/150 等比例缩放.
    """

    epochs: int = 200
    batch_size: int = 64
    lr: float = 0.1
    lr_decay: float = 0.2
    decay_epochs: tuple[int, ...] = ()
    optimizer: OptimizerKind = OptimizerKind.SGD_MOMENTUM
    momentum: float = 0.9
    weight_decay: float = 0.0
    objective: TrainObjective = TrainObjective.JOINT
    sampler_kind: SamplerKind = SamplerKind.PYLD
    rho: float = 0.05
    buffer_capacity: int = 10_000
    domain_radius: float = 1.0
    max_abs_factor: float = 10.0
    max_consecutive_skips: int = 50
    checkpoint_every: int = 10
    sampler: SamplerConfig = field(
        default_factory=SamplerConfig, metadata={'derived': True}
    )
    seed: int = field(default=0, metadata={'derived': True})

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError(
                f"Invalid epochs={self.epochs} batch_size={self.batch_size}"
            )
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative: {self.lr}")
        if not self.decay_epochs:
            object.__setattr__(
                self, 'decay_epochs', scale_decay_epochs(self.epochs)
            )
        else:
            object.__setattr__(
                self, 'decay_epochs', tuple(int(d) for d in self.decay_epochs)
            )
        if any(
            b <= a for a, b in zip(
                self.decay_epochs, self.decay_epochs[1:], strict=False
            )
        ):
            raise ValueError(
                f"decay_epochs must be strictly increasing: "
                f"{self.decay_epochs}"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1]: {self.rho}")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be positive")
        if self.max_consecutive_skips < 1:
            raise ValueError("max_consecutive_skips must be positive")

    @property
    def max_abs_state(self) -> float:
        """链状态绝对值上界（默认 10 倍数据域半径）."""
        return self.max_abs_factor * self.domain_radius


@dataclass
class MetricsRecord:
    """每轮训练指标."""

    epoch: int
    lr: float
    train_acc: float
    eval_acc: float
    mean_real_energy: float
    mean_sample_energy: float
    energy_gap: float
    grad_norm: float
    divergence_count: int
    full_propagations_cumulative: int

    COLUMNS = (
        'epoch', 'lr', 'train_acc', 'eval_acc', 'mean_real_energy',
        'mean_sample_energy', 'energy_gap', 'grad_norm',
        'divergence_count', 'full_propagations_cumulative',
    )

    def to_row(self) -> dict:
        """转换为CSV行."""
        return {name: getattr(self, name) for name in self.COLUMNS}

