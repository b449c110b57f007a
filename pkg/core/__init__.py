"""核心层初始化."""
from core.energies import EnergyModel, QuadraticEnergy
from core.exceptions import (
    BufferStateError,
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    DatasetError,
    DivergenceError,
    FitError,
    JemDeskError,
    ShapeError,
    TrainingAbortedError,
)
from core.layers import BatchNorm, BNMode, Conv2d, Dense, LayerKind, ReLU
from core.network import JointGradient, SplitNetwork

__all__ = [
    'BNMode',
    'BatchNorm',
    'BufferStateError',
    'CheckpointError',
    'CheckpointVersionError',
    'ConfigError',
    'Conv2d',
    'DatasetError',
    'Dense',
    'DivergenceError',
    'EnergyModel',
    'FitError',
    'JemDeskError',
    'JointGradient',
    'LayerKind',
    'QuadraticEnergy',
    'ReLU',
    'ShapeError',
    'SplitNetwork',
    'TrainingAbortedError',
]
