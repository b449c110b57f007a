"""评估Service: 准确率、校准、OOD 与对抗鲁棒性."""
import logging
from collections.abc import Sequence
from dataclasses import replace
from typing import ClassVar

import numpy as np
from scipy.special import softmax
from scipy.stats import rankdata

from config import Config
from core.exceptions import ShapeError
from core.layers import BNMode, Tensor
from core.network import SplitNetwork
from models.dataset import Dataset
from models.eval_types import (
    AttackConfig,
    AttackNorm,
    OODScoreKind,
    ReliabilityBucket,
    ScoredPrediction,
)

logger = logging.getLogger(__name__)


def _bucket_index(confidence: np.ndarray, buckets: int) -> np.ndarray:
    """
    分桶: 第 m 桶覆盖 ((m-1)/M, m/M]，置信度 0 归入第一个桶.

    返回 0 起计的桶序号.
    """
    edges = np.arange(1, buckets + 1) / buckets
    index = np.searchsorted(edges, confidence, side='left')
    return np.minimum(index, buckets - 1)


class EvalService:
    """
    评估业务逻辑层.

    所有评估均在 EVAL 批归一化模式下只读地使用网络，按块计算以限制内存.
    """

    _instance: ClassVar['EvalService | None'] = None

    def __init__(self, chunk_size: int | None = None):
        """
        初始化Service.

        Args:
            chunk_size: 单次前向的最大样本数
        """
        self.chunk_size = chunk_size or Config.EVAL_CHUNK_SIZE

    @classmethod
    def get_instance(cls) -> 'EvalService':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            EvalService实例
        """
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    def _logits(self, net: SplitNetwork, x: Tensor) -> Tensor:
        if len(x) == 0:
            return np.empty((0, net.num_classes))
        parts = [
            net.forward_logits(x[i:i + self.chunk_size], BNMode.EVAL)
            for i in range(0, len(x), self.chunk_size)
        ]
        return np.concatenate(parts, axis=0)

    @staticmethod
    def _require_nonempty(dataset: Dataset) -> None:
        if len(dataset) == 0:
            raise ShapeError(f"{dataset.name}: dataset is empty")

    def accuracy(self, net: SplitNetwork, dataset: Dataset) -> float:
        """
        分类准确率（argmax 预测）.

        Args:
            net: 网络
            dataset: 非空数据集

        Returns:
            准确率
        """
        self._require_nonempty(dataset)
        logits = self._logits(net, dataset.x)
        return float(np.mean(np.argmax(logits, axis=1) == dataset.y))

    def predictions(
        self, net: SplitNetwork, dataset: Dataset
    ) -> list[ScoredPrediction]:
        """
        带置信度 max_y p(y|x) 的预测.

        Returns:
            ScoredPrediction 列表
        """
        self._require_nonempty(dataset)
        probs = softmax(self._logits(net, dataset.x), axis=1)
        predicted = np.argmax(probs, axis=1)
        confidence = probs[np.arange(len(dataset)), predicted]
        return [
            ScoredPrediction(float(c), int(p), int(t))
            for c, p, t in zip(confidence, predicted, dataset.y, strict=True)
        ]

    @staticmethod
    def _arrays(
        preds: Sequence[ScoredPrediction]
    ) -> tuple[np.ndarray, np.ndarray]:
        if not preds:
            raise ShapeError("Calibration needs at least one prediction")
        confidence = np.array([p.confidence for p in preds], dtype=float)
        correct = np.array([p.correct for p in preds], dtype=float)
        return confidence, correct

    def ece(
        self, preds: Sequence[ScoredPrediction], buckets: int = 20
    ) -> float:
        """
        期望校准误差 Σ_m (|B_m|/n)·|acc(B_m) - conf(B_m)|.

        Args:
            preds: 预测列表
            buckets: 等宽桶数 M

        Returns:
            ECE，空桶贡献 0
        """
        confidence, correct = self._arrays(preds)
        index = _bucket_index(confidence, buckets)
        counts = np.bincount(index, minlength=buckets)
        acc_sum = np.bincount(index, weights=correct, minlength=buckets)
        conf_sum = np.bincount(index, weights=confidence, minlength=buckets)
        total = 0.0
        n = len(confidence)
        for m in range(buckets):
            if counts[m]:
                total += counts[m] / n * abs(
                    acc_sum[m] / counts[m] - conf_sum[m] / counts[m]
                )
        return float(total)

    def reliability(
        self, preds: Sequence[ScoredPrediction], buckets: int = 20
    ) -> list[ReliabilityBucket]:
        """
        可靠性图的逐桶统计（空桶的准确率与置信度为 0）.

        Returns:
            每个桶一条记录
        """
        confidence, correct = self._arrays(preds)
        index = _bucket_index(confidence, buckets)
        rows = []
        for m in range(buckets):
            members = index == m
            count = int(members.sum())
            rows.append(ReliabilityBucket(
                index=m,
                lower=m / buckets,
                upper=(m + 1) / buckets,
                count=count,
                accuracy=float(correct[members].mean()) if count else 0.0,
                confidence=(
                    float(confidence[members].mean()) if count else 0.0
                ),
            ))
        return rows

    @staticmethod
    def auroc(
        scores_in: Sequence[float], scores_out: Sequence[float]
    ) -> float:
        """
        AUROC: 随机分布内分数高于随机 OOD 分数的概率，平局计 ½.

        基于秩和（Mann-Whitney U），auroc(A, B) + auroc(B, A) 恒为 1.

        Args:
            scores_in: 分布内分数
            scores_out: 分布外分数

        Returns:
            AUROC ∈ [0, 1]
        """
        a = np.asarray(scores_in, dtype=np.float64)
        b = np.asarray(scores_out, dtype=np.float64)
        if a.size == 0 or b.size == 0:
            raise ShapeError("AUROC needs nonempty score lists")
        ranks = rankdata(np.concatenate([a, b]), method='average')
        u = float(ranks[:a.size].sum()) - a.size * (a.size + 1) / 2.0
        pairs = float(a.size) * float(b.size)
        if 2.0 * u <= pairs:
            return u / pairs
        return 1.0 - (pairs - u) / pairs

    def ood_scores(
        self,
        net: SplitNetwork,
        dataset: Dataset,
        kind: OODScoreKind = OODScoreKind.LOG_DENSITY
    ) -> np.ndarray:
        """
        OOD 分数.

        LOG_DENSITY 返回 -E(x)（log p(x) 相差常数 -log Z），
        MAX_SOFTMAX 返回 max_y p(y|x).

        Raises:
            DivergenceError: 能量非有限
        """
        self._require_nonempty(dataset)
        parts = []
        for i in range(0, len(dataset), self.chunk_size):
            chunk = dataset.x[i:i + self.chunk_size]
            if kind == OODScoreKind.LOG_DENSITY:
                parts.append(-np.atleast_1d(net.energy(chunk, BNMode.EVAL)))
            else:
                probs = net.predict_proba(chunk, BNMode.EVAL)
                parts.append(np.max(np.atleast_2d(probs), axis=1))
        return np.concatenate(parts)

    @staticmethod
    def _per_sample_norm(v: Tensor) -> Tensor:
        flat = v.reshape(v.shape[0], -1)
        norms = np.sqrt(np.sum(flat * flat, axis=1))
        return norms.reshape((-1,) + (1,) * (v.ndim - 1))

    def _project(
        self, x_adv: Tensor, x: Tensor, cfg: AttackConfig
    ) -> Tensor:
        delta = x_adv - x
        if cfg.norm == AttackNorm.LINF:
            delta = np.clip(delta, -cfg.radius, cfg.radius)
        else:
            norms = self._per_sample_norm(delta)
            scale = np.where(
                norms > cfg.radius,
                cfg.radius / np.where(norms > 0, norms, 1.0),
                1.0,
            )
            delta = delta * scale
        out = x + delta
        if cfg.clip_min is not None or cfg.clip_max is not None:
            # 界限包含原始点，裁剪只会把坐标拉回 x，不破坏范数约束
            lo = -np.inf if cfg.clip_min is None else cfg.clip_min
            hi = np.inf if cfg.clip_max is None else cfg.clip_max
            out = np.clip(out, np.minimum(lo, x), np.maximum(hi, x))
        return out

    def _random_start(
        self, x: Tensor, cfg: AttackConfig, rng: np.random.Generator
    ) -> Tensor:
        if cfg.norm == AttackNorm.LINF:
            delta = rng.uniform(-cfg.radius, cfg.radius, size=x.shape)
        else:
            direction = rng.standard_normal(x.shape)
            norms = self._per_sample_norm(direction)
            direction = direction / np.where(norms > 0, norms, 1.0)
            d = int(np.prod(x.shape[1:]))
            radius = cfg.radius * rng.uniform(size=norms.shape) ** (1.0 / d)
            delta = direction * radius
        return self._project(x + delta, x, cfg)

    def pgd_attack(
        self,
        net: SplitNetwork,
        x: Tensor,
        y: int | np.ndarray,
        cfg: AttackConfig,
        rng: np.random.Generator | None = None
    ) -> Tensor:
        """
        白盒 PGD 攻击.

        迭代 x ← Π(x + step_size·dir(∇x CE))，L∞ 取符号方向，L2 取归一化梯度；
        Π 投影回以原始点为中心的半径球并裁剪到数据域.

        Args:
            net: 网络
            x: 单个样本或批量
            y: 真实标签
            cfg: 攻击配置
            rng: 随机起点的随机源

        Returns:
            对抗样本（与 x 同形状）
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == net.input_shape
        xb = x[None, ...] if single else x
        yb = np.broadcast_to(np.asarray(y, dtype=np.int64), (xb.shape[0],))
        if cfg.radius == 0:
            return x.copy()

        rng = rng or np.random.default_rng(0)
        if cfg.random_start:
            x_adv = self._random_start(xb, cfg, rng)
        else:
            x_adv = xb.copy()
        for _ in range(cfg.steps):
            _, grad = net.ce_and_grad_input(x_adv, yb, BNMode.EVAL)
            if cfg.norm == AttackNorm.LINF:
                direction = np.sign(grad)
            else:
                norms = self._per_sample_norm(grad)
                direction = grad / np.where(norms > 0, norms, 1.0)
            x_adv = self._project(
                x_adv + cfg.step_size * direction, xb, cfg
            )
        return x_adv[0] if single else x_adv

    def robust_accuracy(
        self,
        net: SplitNetwork,
        dataset: Dataset,
        cfg: AttackConfig,
        rng: np.random.Generator | None = None
    ) -> float:
        """
        PGD 扰动后的准确率.

        Returns:
            鲁棒准确率
        """
        self._require_nonempty(dataset)
        rng = rng or np.random.default_rng(0)
        correct = 0
        for i in range(0, len(dataset), self.chunk_size):
            xb = dataset.x[i:i + self.chunk_size]
            yb = dataset.y[i:i + self.chunk_size]
            x_adv = self.pgd_attack(net, xb, yb, cfg, rng)
            logits = net.forward_logits(x_adv, BNMode.EVAL)
            correct += int(np.sum(np.argmax(logits, axis=1) == yb))
        acc = correct / len(dataset)
        logger.info(
            f"Robust accuracy ({cfg.norm}, radius={cfg.radius:.4g}, "
            f"steps={cfg.steps}): {acc:.4f}"
        )
        return acc

    def robustness_sweep(
        self,
        net: SplitNetwork,
        dataset: Dataset,
        base: AttackConfig,
        radii: Sequence[float],
        step_fraction: float = 0.25,
        rng: np.random.Generator | None = None
    ) -> list[tuple[float, float]]:
        """
        对一组半径依次评估鲁棒准确率，步长取半径的固定比例.

        Returns:
            [(半径, 鲁棒准确率)]
        """
        rng = rng or np.random.default_rng(0)
        results = []
        for radius in radii:
            cfg = replace(
                base, radius=float(radius),
                step_size=float(radius) * step_fraction
            )
            results.append(
                (float(radius), self.robust_accuracy(net, dataset, cfg, rng))
            )
        return results
