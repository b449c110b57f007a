"""数据模型初始化."""
from models.checkpoint import FORMAT_VERSION, Checkpoint
from models.dataset import Dataset
from models.eval_types import (
    AttackConfig,
    AttackNorm,
    OODScoreKind,
    ReliabilityBucket,
    ScoredPrediction,
)
from models.experiment_config import (
    ArchitectureConfig,
    ArchitectureKind,
    DatasetConfig,
    DatasetName,
    EvalOptions,
    ExperimentConfig,
    InitOptions,
)
from models.informative_init import (
    CovarianceForm,
    GapReference,
    InformativeInit,
    InitKind,
    StatisticGap,
)
from models.replay_buffer import DrawResult, Origin, ReplayBuffer
from models.sampler_config import (
    ChainStep,
    ChainTrace,
    SamplerConfig,
    SamplerKind,
)
from models.train_config import (
    GuardDecision,
    MetricsRecord,
    OptimizerKind,
    TrainConfig,
    TrainObjective,
)

__all__ = [
    'FORMAT_VERSION',
    'ArchitectureConfig',
    'ArchitectureKind',
    'AttackConfig',
    'AttackNorm',
    'ChainStep',
    'ChainTrace',
    'Checkpoint',
    'CovarianceForm',
    'Dataset',
    'DatasetConfig',
    'DatasetName',
    'DrawResult',
    'EvalOptions',
    'ExperimentConfig',
    'GapReference',
    'GuardDecision',
    'InformativeInit',
    'InitKind',
    'InitOptions',
    'MetricsRecord',
    'OODScoreKind',
    'OptimizerKind',
    'Origin',
    'ReliabilityBucket',
    'ReplayBuffer',
    'SamplerConfig',
    'SamplerKind',
    'ScoredPrediction',
    'StatisticGap',
    'TrainConfig',
    'TrainObjective',
]
