"""实验配置（与TOML配置文件一一对应）."""
from dataclasses import dataclass, field, replace
from enum import StrEnum

from models.eval_types import AttackNorm, OODScoreKind
from models.informative_init import CovarianceForm, InitKind
from models.sampler_config import SamplerConfig
from models.train_config import TrainConfig
from utils.seeding import derive_seeds


class DatasetName(StrEnum):
    """数据来源."""

    TWO_MOONS = 'two_moons'
    GAUSSIAN_MIXTURE = 'gaussian_mixture'
    CSV = 'csv'
    IDX = 'idx'


class ArchitectureKind(StrEnum):
    """网络结构."""

    MLP = 'mlp'
    CONV = 'conv'


@dataclass(frozen=True)
class DatasetConfig:
    """
    数据集描述.

    合成数据按 n_train / n_eval 生成；文件数据在未提供 eval 文件时
    按 eval_fraction 划分（划分种子由实验种子派生）.
    """

    name: DatasetName = DatasetName.TWO_MOONS
    path: str | None = None
    labels_path: str | None = None
    eval_path: str | None = None
    eval_labels_path: str | None = None
    n_train: int = 1000
    n_eval: int = 500
    noise: float = 0.1
    components: int = 4
    eval_fraction: float = 0.2
    max_samples: int = 0
    flatten: bool = True


@dataclass(frozen=True)
class ArchitectureConfig:
    """网络结构描述."""

    kind: ArchitectureKind = ArchitectureKind.MLP
    hidden: tuple[int, ...] = (64, 64)
    channels: int = 8
    batch_norm: bool = True


@dataclass(frozen=True)
class InitOptions:
    """链初始化选项."""

    kind: InitKind = InitKind.INFORMATIVE
    covariance: CovarianceForm = CovarianceForm.FULL
    dequantize: bool = False


@dataclass(frozen=True)
class EvalOptions:
    """评估选项."""

    ece_buckets: int = 20
    ood_score: OODScoreKind = OODScoreKind.LOG_DENSITY
    ood_count: int = 500
    ood_box_inflation: float = 0.5
    attack_norm: AttackNorm = AttackNorm.LINF
    attack_radii: tuple[float, ...] = (1 / 255, 2 / 255, 4 / 255, 8 / 255)
    attack_steps: int = 40
    attack_step_fraction: float = 0.25
    random_start: bool = True
    clip_domain: bool = True
    clip_min: float | None = None
    clip_max: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """
    完整实验配置.

    所有随机性都来自 seed；采样器与训练的子种子在 resolve 时派生.
    """

    seed: int = 0
    out_dir: str = 'runs/default'
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    architecture: ArchitectureConfig = field(
        default_factory=ArchitectureConfig
    )
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    init: InitOptions = field(default_factory=InitOptions)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def with_overrides(
        self, seed: int | None = None, out_dir: str | None = None
    ) -> 'ExperimentConfig':
        """
        应用命令行覆盖.

        Args:
            seed: 新种子
            out_dir: 新输出目录

        Returns:
            新配置
        """
        changes: dict = {}
        if seed is not None:
            changes['seed'] = seed
        if out_dir is not None:
            changes['out_dir'] = out_dir
        return replace(self, **changes) if changes else self

    def resolved(self) -> 'ExperimentConfig':
        """
        派生子种子并把采样配置挂到训练配置上.

        Returns:
            可直接用于训练与采样的配置
        """
        seeds = derive_seeds(self.seed)
        sampler = replace(self.sampler, seed=seeds['chain'])
        train = replace(self.train, sampler=sampler, seed=self.seed)
        return replace(self, sampler=sampler, train=train)
