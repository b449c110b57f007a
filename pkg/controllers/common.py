"""控制器公共部分: 错误到退出码的映射、配置与网络的装配."""
import functools
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import ParamSpec

import numpy as np

from core.exceptions import (
    CheckpointVersionError,
    ConfigError,
    DatasetError,
    JemDeskError,
    ShapeError,
    TrainingAbortedError,
)
from core.network import SplitNetwork
from models.checkpoint import Checkpoint
from models.dataset import Dataset
from models.experiment_config import (
    ArchitectureConfig,
    ArchitectureKind,
    ExperimentConfig,
)
from models.informative_init import InformativeInit
from repositories import (
    BaseRepository,
    CheckpointRepository,
    ConfigRepository,
    DatasetRepository,
)

logger = logging.getLogger(__name__)

P = ParamSpec('P')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_ABORTED = 3
EXIT_VERSION = 4

# 按顺序匹配，子类在前
_EXIT_CODES: tuple[tuple[type[BaseException], int], ...] = (
    (CheckpointVersionError, EXIT_VERSION),
    (TrainingAbortedError, EXIT_ABORTED),
    (ConfigError, EXIT_INPUT),
    (DatasetError, EXIT_INPUT),
    (ShapeError, EXIT_INPUT),
    (JemDeskError, EXIT_FAILURE),
    (OSError, EXIT_FAILURE),
)


def exit_code_for(error: BaseException) -> int:
    """
    异常对应的退出码.

    Args:
        error: 异常

    Returns:
        退出码
    """
    for kind, code in _EXIT_CODES:
        if isinstance(error, kind):
            return code
    return EXIT_FAILURE


def command(name: str) -> Callable[[Callable[P, int]], Callable[P, int]]:
    """
    子命令装饰器: 在边界捕获异常，记录日志并转为退出码.

    Args:
        name: 子命令名称（用于日志与诊断信息）
    """

    def decorator(func: Callable[P, int]) -> Callable[P, int]:
        @functools.wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> int:
            try:
                return func(*args, **kwargs)
            except (JemDeskError, OSError) as e:
                logger.error(f"{name} failed: {e}", exc_info=True)
                print(f"jemdesk {name}: error: {e}", file=sys.stderr)
                return exit_code_for(e)
            except Exception as e:
                logger.error(f"{name} crashed: {e}", exc_info=True)
                print(
                    f"jemdesk {name}: internal error: {e}", file=sys.stderr
                )
                return EXIT_FAILURE

        return wrapper

    return decorator


def load_experiment(
    config_path: str | None,
    seed: int | None = None,
    out_dir: str | None = None
) -> ExperimentConfig:
    """
    读取实验配置并应用命令行覆盖（未给出配置文件时使用默认值）.

    Returns:
        已派生子种子的配置
    """
    if config_path:
        cfg = ConfigRepository.get_instance().load(config_path)
    else:
        cfg = ExperimentConfig()
    return cfg.with_overrides(seed=seed, out_dir=out_dir).resolved()


def checkpoint_experiment(
    checkpoint: Checkpoint,
    seed: int | None = None,
    out_dir: str | None = None
) -> ExperimentConfig:
    """
    从检查点中恢复实验配置（缺失时使用默认值）.

    Returns:
        已派生子种子的配置
    """
    if checkpoint.config_text:
        cfg = ConfigRepository.get_instance().loads(
            checkpoint.config_text, '<checkpoint>'
        )
    else:
        cfg = ExperimentConfig()
    return cfg.with_overrides(seed=seed, out_dir=out_dir).resolved()


def build_network(
    arch: ArchitectureConfig,
    input_shape: tuple[int, ...],
    num_classes: int,
    rng: np.random.Generator
) -> SplitNetwork:
    """
    按结构配置构建网络.

    Raises:
        ShapeError: 卷积网络需要 (C, H, W) 输入
    """
    if arch.kind == ArchitectureKind.CONV:
        if len(input_shape) != 3:
            raise ShapeError(
                f"Conv architecture needs (C, H, W) inputs, dataset has "
                f"{input_shape}; set dataset.flatten = false"
            )
        return SplitNetwork.build_conv(
            input_shape, arch.channels, arch.hidden, num_classes,
            arch.batch_norm, rng
        )
    return SplitNetwork.build_mlp(
        input_shape, arch.hidden, num_classes, arch.batch_norm, rng
    )


def select_dataset(
    net: SplitNetwork,
    cfg: ExperimentConfig,
    path: str | None = None,
    labels_path: str | None = None,
    split: str = 'eval'
) -> Dataset:
    """
    选择评估数据: 给出文件时读取文件，否则按检查点配置重建训练/评估划分.

    Raises:
        ShapeError: 数据形状与网络输入不一致
    """
    repo = DatasetRepository.get_instance()
    if path:
        dataset = repo.load_file(
            path, labels_path, flatten=len(net.input_shape) == 1,
            num_classes=net.num_classes
        )
    else:
        train, evaluation = repo.load(cfg.dataset, cfg.seed)
        dataset = train if split == 'train' else evaluation
        dataset = Dataset(
            dataset.x, dataset.y, net.num_classes, dataset.name
        )
    if dataset.input_shape != net.input_shape:
        raise ShapeError(
            f"Dataset {dataset.name} has sample shape "
            f"{dataset.input_shape}, checkpoint expects {net.input_shape}"
        )
    return dataset


def output_dir(cfg: ExperimentConfig, out: str | None = None) -> Path:
    """输出目录（命令行优先）."""
    return BaseRepository.ensure_dir(out or cfg.out_dir)


def load_initializer(
    path: str,
    input_shape: tuple[int, ...],
    num_classes: int
) -> InformativeInit:
    """
    读取 fit-init 写出的信息初始化并检查与网络是否匹配.

    Raises:
        ShapeError: 样本形状或类别数不一致
    """
    init = CheckpointRepository.get_instance().load_init(path)
    if init.input_shape != tuple(input_shape):
        raise ShapeError(
            f"{path}: initializer sample shape {init.input_shape} does not "
            f"match {tuple(input_shape)}"
        )
    if init.num_classes != num_classes:
        raise ShapeError(
            f"{path}: initializer has {init.num_classes} classes, "
            f"expected {num_classes}"
        )
    logger.info(f"Using informative initializer from {path}")
    return init
