"""训练Service."""
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from core.exceptions import (
    DatasetError,
    DivergenceError,
    ShapeError,
    TrainingAbortedError,
)
from core.layers import BNMode, Tensor
from core.network import JointGradient, SplitNetwork
from core.optim import SGD, Adam, lr_at
from models.dataset import Dataset
from models.informative_init import InformativeInit
from models.replay_buffer import ReplayBuffer
from models.train_config import (
    GuardDecision,
    MetricsRecord,
    OptimizerKind,
    TrainConfig,
    TrainObjective,
)
from services.buffer_service import BufferService
from services.sampler_service import SamplerService
from utils.seeding import stream

logger = logging.getLogger(__name__)

EpochHook = Callable[[MetricsRecord], None]
CheckpointHook = Callable[[int, str], None]


class DivergenceGuard:
    """
    发散守卫.

    每次链批次与梯度计算之后调用 check；批次完成后调用 batch_completed
    清零连续跳过计数.
    """

    def __init__(self, max_abs: float, max_consecutive_skips: int = 50):
        """
        初始化守卫.

        Args:
            max_abs: 链状态绝对值上界
            max_consecutive_skips: 连续跳过多少次后中止
        """
        self.max_abs = max_abs
        self.max_consecutive_skips = max_consecutive_skips
        self.divergence_count = 0
        self.consecutive = 0

    def _skip(self, reason: str) -> GuardDecision:
        self.divergence_count += 1
        self.consecutive += 1
        logger.warning(
            f"Skipping batch: {reason} "
            f"(consecutive={self.consecutive}, "
            f"total={self.divergence_count})"
        )
        if self.consecutive >= self.max_consecutive_skips:
            return GuardDecision.ABORT
        return GuardDecision.SKIP_BATCH

    def check(
        self,
        energies: Tensor | None = None,
        states: Tensor | None = None,
        reason: str | None = None
    ) -> GuardDecision:
        """
        判定当前批次是否可继续.

        Args:
            energies: 链能量（可选）
            states: 链状态（可选）
            reason: 已知失败原因（如计算中抛出的发散异常）

        Returns:
            GuardDecision
        """
        if reason is not None:
            return self._skip(reason)
        if energies is not None and not np.isfinite(energies).all():
            return self._skip('non-finite chain energy')
        if states is not None:
            if not np.isfinite(states).all():
                return self._skip('non-finite chain state')
            peak = float(np.max(np.abs(states))) if states.size else 0.0
            if peak > self.max_abs:
                return self._skip(
                    f"chain state |x|={peak:.4g} exceeds {self.max_abs:.4g}"
                )
        return GuardDecision.CONTINUE

    def batch_completed(self) -> None:
        """批次成功完成，清零连续跳过计数."""
        self.consecutive = 0


@dataclass
class _EpochStats:
    correct: int = 0
    seen: int = 0
    real_energy: list[float] = field(default_factory=list)
    sample_energy: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)

    @staticmethod
    def _mean(values: list[float]) -> float:
        return float(np.mean(values)) if values else float('nan')

    def add(self, result: JointGradient, labels: np.ndarray) -> None:
        predicted = np.argmax(result.real_logits, axis=1)
        self.correct += int(np.sum(predicted == labels))
        self.seen += int(labels.size)
        self.real_energy.append(float(np.mean(result.real_energy)))
        if result.sample_energy.size:
            self.sample_energy.append(float(np.mean(result.sample_energy)))
        self.grad_norm.append(float(np.sqrt(sum(
            float(np.sum(g * g)) for g in result.grads.values()
        ))))

    def summary(self) -> tuple[float, float, float, float]:
        train_acc = self.correct / self.seen if self.seen else float('nan')
        return (
            train_acc,
            self._mean(self.real_energy),
            self._mean(self.sample_energy),
            self._mean(self.grad_norm),
        )


class TrainerService:
    """
    训练业务逻辑层.

    每个小批次: 抽真实批次 -> 从缓冲抽链起点 -> 运行采样器 ->
    计算联合梯度 -> 优化器更新 -> 有限末状态写回缓冲.
    """

    _instance: ClassVar['TrainerService | None'] = None

    def __init__(
        self,
        sampler_service: SamplerService,
        buffer_service: BufferService
    ):
        """
        初始化Service.

        Args:
            sampler_service: 采样Service
            buffer_service: 回放缓冲Service
        """
        self._sampler = sampler_service
        self._buffer = buffer_service

    @classmethod
    def get_instance(cls) -> 'TrainerService':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            TrainerService实例
        """
        if cls._instance is None:
            cls._instance = cls(
                SamplerService.get_instance(), BufferService.get_instance()
            )
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    @staticmethod
    def build_optimizer(cfg: TrainConfig) -> SGD | Adam:
        """根据配置创建优化器."""
        if cfg.optimizer == OptimizerKind.ADAM:
            return Adam(weight_decay=cfg.weight_decay)
        momentum = (
            cfg.momentum if cfg.optimizer == OptimizerKind.SGD_MOMENTUM
            else 0.0
        )
        return SGD(momentum=momentum, weight_decay=cfg.weight_decay)

    def loss_value(
        self,
        net: SplitNetwork,
        x_real: Tensor,
        y_real: np.ndarray,
        x_sampled: Tensor
    ) -> tuple[float, float]:
        """
        联合目标的两个分量: (平均交叉熵, mean E(x_r) - mean E(x_s)).

        标量目标为两者之和.
        """
        return net.loss_value(x_real, y_real, x_sampled, BNMode.TRAIN)

    def _joint_step(
        self,
        net: SplitNetwork,
        xb: Tensor,
        yb: np.ndarray,
        init: InformativeInit | None,
        buf: ReplayBuffer,
        cfg: TrainConfig,
        chain_rng: np.random.Generator,
        guard: DivergenceGuard
    ) -> tuple[GuardDecision, JointGradient | None, Tensor | None, int]:
        starts = self._buffer.draw(
            buf, init, xb.shape[0], input_shape=net.input_shape
        )
        try:
            x_sampled, trace = self._sampler.run_chain(
                net, starts.states, cfg.sampler, cfg.sampler_kind,
                rng=chain_rng
            )
        except DivergenceError as e:
            props = e.trace.full_propagations if e.trace else 0
            return guard.check(reason=str(e)), None, None, props

        decision = guard.check(states=x_sampled)
        if decision != GuardDecision.CONTINUE:
            return decision, None, None, trace.full_propagations

        # 跳过的批次不能改变批归一化统计量
        stats = net.snapshot_state()
        try:
            result = net.param_grad_joint(
                xb, yb, x_sampled, BNMode.TRAIN, update_stats=True
            )
        except DivergenceError as e:
            net.restore_state(stats)
            return (
                guard.check(reason=str(e)), None, None,
                trace.full_propagations
            )
        decision = guard.check(energies=result.sample_energy)
        if decision == GuardDecision.CONTINUE and not all(
            np.isfinite(g).all() for g in result.grads.values()
        ):
            decision = guard.check(reason='non-finite parameter gradient')
        if decision != GuardDecision.CONTINUE:
            net.restore_state(stats)
        return decision, result, x_sampled, trace.full_propagations

    def _classifier_step(
        self,
        net: SplitNetwork,
        xb: Tensor,
        yb: np.ndarray,
        guard: DivergenceGuard
    ) -> tuple[GuardDecision, JointGradient | None]:
        stats = net.snapshot_state()
        try:
            result = net.param_grad_ce(
                xb, yb, BNMode.TRAIN, update_stats=True
            )
        except DivergenceError as e:
            net.restore_state(stats)
            return guard.check(reason=str(e)), None
        if not all(np.isfinite(g).all() for g in result.grads.values()):
            net.restore_state(stats)
            return guard.check(reason='non-finite parameter gradient'), None
        return GuardDecision.CONTINUE, result

    def _evaluate(self, net: SplitNetwork, dataset: Dataset | None) -> float:
        if dataset is None or len(dataset) == 0:
            return float('nan')
        logits = net.forward_logits(dataset.x, BNMode.EVAL)
        return float(np.mean(np.argmax(logits, axis=1) == dataset.y))

    def train(
        self,
        net: SplitNetwork,
        dataset: Dataset,
        init: InformativeInit | None,
        buf: ReplayBuffer,
        cfg: TrainConfig,
        eval_dataset: Dataset | None = None,
        on_epoch_end: EpochHook | None = None,
        on_checkpoint: CheckpointHook | None = None,
        start_epoch: int = 0
    ) -> tuple[SplitNetwork, list[MetricsRecord]]:
        """
        训练网络.

        Args:
            net: 待训练网络（原地更新）
            dataset: 训练集
            init: 信息初始化（None 表示均匀初始化）
            buf: 回放缓冲
            cfg: 训练配置
            eval_dataset: 每轮评估用数据集
            on_epoch_end: 每轮结束回调（如追加指标CSV）
            on_checkpoint: 检查点回调 (epoch, reason)，reason 为
                'periodic' / 'final' / 'abort'
            start_epoch: 起始轮次（续训）

        Returns:
            (训练后的网络, 每轮指标)

        Raises:
            TrainingAbortedError: 连续跳过次数达到上限
        """
        if len(dataset) == 0:
            raise DatasetError("Training dataset is empty")
        if init is not None and init.input_shape != net.input_shape:
            raise ShapeError(
                f"Initializer shape {init.input_shape} does not match "
                f"network input {net.input_shape}"
            )

        shuffle_rng = stream(cfg.seed, 'shuffle')
        chain_rng = stream(cfg.seed, 'chain')
        optimizer = self.build_optimizer(cfg)
        guard = DivergenceGuard(cfg.max_abs_state, cfg.max_consecutive_skips)
        params = net.named_parameters()
        records: list[MetricsRecord] = []
        propagations = 0
        joint = cfg.objective == TrainObjective.JOINT

        logger.info(
            f"Training {cfg.objective} objective for {cfg.epochs} epochs "
            f"on {len(dataset)} samples (sampler={cfg.sampler_kind}, "
            f"batch={cfg.batch_size}, decay at {list(cfg.decay_epochs)})"
        )

        for epoch in range(start_epoch, cfg.epochs):
            lr = lr_at(cfg.lr, cfg.lr_decay, cfg.decay_epochs, epoch)
            stats = _EpochStats()
            order = shuffle_rng.permutation(len(dataset))

            for begin in range(0, len(order), cfg.batch_size):
                index = order[begin:begin + cfg.batch_size]
                xb, yb = dataset.x[index], dataset.y[index]

                x_sampled = None
                if joint:
                    decision, result, x_sampled, props = self._joint_step(
                        net, xb, yb, init, buf, cfg, chain_rng, guard
                    )
                    propagations += props
                else:
                    decision, result = self._classifier_step(
                        net, xb, yb, guard
                    )

                if decision == GuardDecision.ABORT:
                    logger.error(
                        f"Aborting training at epoch {epoch}: "
                        f"{guard.consecutive} consecutive skipped batches"
                    )
                    if on_checkpoint is not None:
                        on_checkpoint(epoch, 'abort')
                    raise TrainingAbortedError(
                        f"Training diverged: {guard.consecutive} "
                        f"consecutive skipped batches at epoch {epoch}",
                        records=records,
                    )
                if decision == GuardDecision.SKIP_BATCH or result is None:
                    continue

                optimizer.step(params, result.grads, lr)
                if x_sampled is not None:
                    self._buffer.push(buf, x_sampled)
                stats.add(result, yb)
                guard.batch_completed()

            if not buf.scan_finite():
                raise DivergenceError(
                    f"Replay buffer holds non-finite states after epoch "
                    f"{epoch}"
                )

            train_acc, real_e, sample_e, grad_norm = stats.summary()
            record = MetricsRecord(
                epoch=epoch,
                lr=lr,
                train_acc=train_acc,
                eval_acc=self._evaluate(net, eval_dataset),
                mean_real_energy=real_e,
                mean_sample_energy=sample_e,
                energy_gap=real_e - sample_e,
                grad_norm=grad_norm,
                divergence_count=guard.divergence_count,
                full_propagations_cumulative=propagations,
            )
            records.append(record)
            logger.info(
                f"Epoch {epoch}: lr={lr:.4g} train_acc={train_acc:.4f} "
                f"eval_acc={record.eval_acc:.4f} "
                f"E_real={real_e:.4f} E_sample={sample_e:.4f} "
                f"diverged={guard.divergence_count}"
            )
            if on_epoch_end is not None:
                on_epoch_end(record)
            if on_checkpoint is not None and cfg.checkpoint_every > 0 and (
                (epoch + 1) % cfg.checkpoint_every == 0
            ):
                on_checkpoint(epoch, 'periodic')

        if on_checkpoint is not None and records:
            on_checkpoint(records[-1].epoch, 'final')
        return net, records
