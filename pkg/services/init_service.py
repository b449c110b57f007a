"""信息初始化Service."""
import logging
from typing import ClassVar

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from core.exceptions import FitError, ShapeError
from core.layers import Tensor
from models.dataset import Dataset
from models.informative_init import (
    CovarianceForm,
    GapReference,
    InformativeInit,
    StatisticGap,
)

logger = logging.getLogger(__name__)

JITTER_START = 1e-6
JITTER_FACTOR = 10.0
MAX_ESCALATIONS = 6
DEQUANTIZE_WIDTH = 1.0 / 256.0
UNIFORM_LOW = -1.0
UNIFORM_HIGH = 1.0


class InitService:
    """
    信息初始化业务逻辑层.

    拟合按类别的高斯混合，并为采样链抽取初始样本.
    """

    _instance: ClassVar['InitService | None'] = None

    def __init__(
        self,
        jitter_start: float = JITTER_START,
        max_escalations: int = MAX_ESCALATIONS
    ):
        """
        初始化Service.

        Args:
            jitter_start: 初始抖动系数（乘以 trace(Σ)/d）
            max_escalations: 最大抖动升级次数
        """
        self.jitter_start = jitter_start
        self.max_escalations = max_escalations

    @classmethod
    def get_instance(cls) -> 'InitService':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            InitService实例
        """
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    def _factor_full(
        self, cov: Tensor, label: int
    ) -> tuple[Tensor, float]:
        """带抖动升级的 Cholesky 分解."""
        d = cov.shape[0]
        trace = float(np.trace(cov))
        if trace <= 0.0:
            logger.warning(
                f"Class {label} has zero covariance; using a degenerate "
                f"point-mass component"
            )
            return np.zeros_like(cov), 0.0

        jitter = self.jitter_start * trace / d
        for attempt in range(self.max_escalations + 1):
            try:
                factor = cholesky(
                    cov + jitter * np.eye(d), lower=True, check_finite=True
                )
                if attempt:
                    logger.warning(
                        f"Class {label} needed {attempt} jitter "
                        f"escalation(s), jitter={jitter:.3g}"
                    )
                return factor, jitter
            except LinAlgError:
                jitter *= JITTER_FACTOR
        raise FitError(
            f"Covariance of class {label} is not positive definite after "
            f"{self.max_escalations} jitter escalations"
        )

    def fit(
        self,
        dataset: Dataset,
        covariance: CovarianceForm = CovarianceForm.FULL,
        dequantize: bool = False,
        rng: np.random.Generator | None = None
    ) -> InformativeInit:
        """
        拟合按类别的高斯混合.

        π_y 为类别频率，μ_y 为类均值，Σ_y 为总体归一化（1/|D_y|）协方差.

        Args:
            dataset: 带标签数据集
            covariance: 协方差形式
            dequantize: 拟合前是否加宽度 1/256 的均匀去量化噪声
            rng: 去量化随机源

        Returns:
            InformativeInit

        Raises:
            FitError: 某类样本少于2个或协方差无法分解
        """
        if len(dataset) == 0:
            raise FitError("Cannot fit an initializer on an empty dataset")
        counts = dataset.class_counts()
        for label, count in enumerate(counts):
            if count < 2:
                raise FitError(
                    f"Class {label} has {count} sample(s); at least 2 "
                    f"are required to estimate a covariance"
                )

        flat = dataset.x.reshape(len(dataset), -1)
        if dequantize:
            rng = rng or np.random.default_rng(0)
            flat = flat + rng.uniform(0.0, DEQUANTIZE_WIDTH, size=flat.shape)

        num_classes = dataset.num_classes
        d = flat.shape[1]
        pi = counts / counts.sum()
        mu = np.empty((num_classes, d))
        if covariance == CovarianceForm.FULL:
            factors = np.empty((num_classes, d, d))
        else:
            factors = np.empty((num_classes, d))
        jitters = np.zeros(num_classes)

        for label in range(num_classes):
            members = flat[dataset.y == label]
            mu[label] = members.mean(axis=0)
            centered = members - mu[label]
            if covariance == CovarianceForm.FULL:
                cov = centered.T @ centered / members.shape[0]
                factors[label], jitters[label] = self._factor_full(
                    cov, label
                )
            else:
                var = np.mean(centered * centered, axis=0)
                factors[label] = np.sqrt(var)
            logger.info(
                f"Fitted class {label}: count={counts[label]} "
                f"jitter={jitters[label]:.3g}"
            )

        return InformativeInit(
            pi=pi,
            mu=mu.reshape((num_classes,) + dataset.input_shape),
            cov_factor=factors,
            jitter=jitters,
            covariance=covariance,
        )

    def sample_class(
        self,
        init: InformativeInit,
        y: int,
        rng: np.random.Generator,
        n: int | None = None
    ) -> Tensor:
        """
        从第 y 类分量抽样: μ_y + L_y·z.

        Args:
            init: 拟合好的初始化
            y: 类别
            rng: 随机源
            n: 样本数，None 表示返回单个样本

        Returns:
            单个样本或 (n, *input_shape) 批量
        """
        if not 0 <= int(y) < init.num_classes:
            raise ShapeError(
                f"Label {y} out of range [0, {init.num_classes})"
            )
        count = 1 if n is None else int(n)
        z = rng.standard_normal((count, init.dim))
        factor = init.cov_factor[y]
        if init.covariance == CovarianceForm.FULL:
            draws = z @ factor.T
        else:
            draws = z * factor
        draws = draws + init.mu[y].reshape(-1)
        draws = draws.reshape((count,) + init.input_shape)
        return draws[0] if n is None else draws

    def sample_marginal(
        self,
        init: InformativeInit,
        rng: np.random.Generator
    ) -> tuple[Tensor, int]:
        """
        先按 π 抽类别，再从该类分量抽样.

        Returns:
            (样本, 类别)
        """
        y = int(rng.choice(init.num_classes, p=init.pi))
        return self.sample_class(init, y, rng), y

    def sample_batch(
        self,
        init: InformativeInit,
        n: int,
        rng: np.random.Generator
    ) -> tuple[Tensor, np.ndarray]:
        """
        批量抽取 n 个边缘样本（逐个调用 sample_marginal，随机流一致）.

        Returns:
            (样本 (n, *input_shape), 类别 (n,))
        """
        states = np.empty((n,) + init.input_shape)
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            states[i], labels[i] = self.sample_marginal(init, rng)
        return states, labels

    @staticmethod
    def uniform(
        input_shape: tuple[int, ...],
        n: int,
        rng: np.random.Generator
    ) -> Tensor:
        """
        基线初始化: 每个坐标独立 U[-1, 1].

        Args:
            input_shape: 单个样本形状
            n: 样本数
            rng: 随机源

        Returns:
            (n, *input_shape)
        """
        return rng.uniform(
            UNIFORM_LOW, UNIFORM_HIGH, size=(n,) + tuple(input_shape)
        )

    def statistic_gap(
        self,
        init: InformativeInit,
        dataset: Dataset,
        reference: GapReference,
        rng: np.random.Generator,
        batch_size: int = 10_000
    ) -> StatisticGap:
        """
        初始样本与真实数据的逐特征均值/方差差距（对特征取平均）.

        Args:
            init: 拟合好的初始化
            dataset: 参照数据集
            reference: 初始分布（信息初始化或均匀分布）
            rng: 随机源
            batch_size: 初始样本数

        Returns:
            StatisticGap
        """
        if len(dataset) == 0:
            raise ShapeError("statistic_gap requires a nonempty dataset")
        if reference == GapReference.INFORMATIVE:
            draws, _ = self.sample_batch(init, batch_size, rng)
        else:
            draws = self.uniform(dataset.input_shape, batch_size, rng)

        draws = draws.reshape(batch_size, -1)
        data = dataset.x.reshape(len(dataset), -1)
        mean_gap = np.abs(draws.mean(axis=0) - data.mean(axis=0))
        var_gap = np.abs(draws.var(axis=0) - data.var(axis=0))
        gap = StatisticGap(
            reference=reference,
            mean_gap=float(mean_gap.mean()),
            var_gap=float(var_gap.mean()),
        )
        logger.info(
            f"Statistic gap ({reference}): mean={gap.mean_gap:.4g} "
            f"var={gap.var_gap:.4g}"
        )
        return gap
