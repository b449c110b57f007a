"""采样器配置与链轨迹."""
from dataclasses import dataclass, field
from enum import StrEnum


class SamplerKind(StrEnum):
    """采样算法."""

    SGLD = 'sgld'
    PROXIMAL_SGLD = 'proximal_sgld'
    PYLD = 'pyld'


@dataclass(frozen=True)
class SamplerConfig:
    """
    Langevin 采样配置（默认值取自 CIFAR10 超参数表）.

    Attributes:
        alpha: 步长 α
        epsilon: 梯度截断半径 ε，math.inf 表示不截断
        k_steps: SGLD / 近端 SGLD 步数 K
        m_steps: PYLD 外层步数 M
        n_steps: PYLD 内层步数 N
        noise_scale: 噪声系数，缺省取 alpha（与原始更新式一致），0 关闭噪声
        seed: 噪声随机种子（由实验种子派生，不写入配置文件）
    """

    alpha: float = 0.2
    epsilon: float = 1.0
    k_steps: int = 20
    m_steps: int = 10
    n_steps: int = 5
    noise_scale: float | None = None
    seed: int = field(default=0, metadata={'derived': True})

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive: {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive: {self.epsilon}")
        if self.k_steps < 0 or self.m_steps < 0 or self.n_steps < 1:
            raise ValueError(
                f"Invalid step counts K={self.k_steps} "
                f"M={self.m_steps} N={self.n_steps}"
            )
        if self.noise_scale is None:
            object.__setattr__(self, 'noise_scale', self.alpha)
        if not self.noise_scale >= 0:
            raise ValueError(
                f"noise_scale must be non-negative: {self.noise_scale}"
            )
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed out of range: {self.seed}")


@dataclass
class ChainStep:
    """单步记录（批量链取均值/最大值）."""

    step: int
    energy: float
    grad_max_abs: float | None
    x_max_abs: float

    def to_row(self) -> dict:
        """转换为CSV行."""
        return {
            'step': self.step,
            'energy': self.energy,
            'grad_max_abs': (
                '' if self.grad_max_abs is None else self.grad_max_abs
            ),
            'x_max_abs': self.x_max_abs,
        }


@dataclass
class ChainTrace:
    """
    链运行的精确计数.

    计数器为所有链之和；full_propagations 统计完整网络前向+反向次数，
    first_layer_props 统计仅首层的向量-雅可比积次数. 计数与是否记录无关.
    """

    num_chains: int = 1
    full_propagations: int = 0
    first_layer_props: int = 0
    steps: list[ChainStep] | None = None

    @property
    def recording(self) -> bool:
        """是否记录每步能量."""
        return self.steps is not None

    def per_chain_full(self) -> float:
        """每条链的完整传播次数."""
        return self.full_propagations / max(self.num_chains, 1)

    def per_chain_first_layer(self) -> float:
        """每条链的首层传播次数."""
        return self.first_layer_props / max(self.num_chains, 1)
