"""Langevin 采样服务: SGLD、近端 SGLD 与 PYLD-M-N."""
import logging
from typing import ClassVar

import numpy as np

from core.energies import EnergyModel
from core.exceptions import DivergenceError
from core.layers import BNMode, Tensor
from core.network import Labels
from models.sampler_config import (
    ChainStep,
    ChainTrace,
    SamplerConfig,
    SamplerKind,
)

logger = logging.getLogger(__name__)


def clamp(v: Tensor, epsilon: float) -> Tensor:
    """
    逐坐标截断到 [-ε, ε]（L∞ 投影），ε 为无穷时原样返回.

    Args:
        v: 梯度
        epsilon: 截断半径

    Returns:
        截断后的数组
    """
    if np.isinf(epsilon):
        return v
    return np.clip(v, -epsilon, epsilon)


class SamplerService:
    """
    采样业务逻辑.

    采样过程中批归一化固定为 EVAL 模式，链是 (θ, x0, 噪声序列) 的确定函数.
    输入可为单个样本或批量链；计数器按链数累加.
    """

    _instance: ClassVar['SamplerService | None'] = None

    def __init__(self, bn_mode: BNMode = BNMode.EVAL):
        """
        初始化Service.

        Args:
            bn_mode: 采样时的批归一化模式
        """
        self.bn_mode = bn_mode
        self._step_streams: dict[int, np.random.Generator] = {}

    @classmethod
    def get_instance(cls) -> 'SamplerService':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            SamplerService实例
        """
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    @staticmethod
    def _num_chains(model: EnergyModel, x: Tensor) -> int:
        return 1 if x.shape == tuple(model.input_shape) else x.shape[0]

    @staticmethod
    def _rng(
        cfg: SamplerConfig, rng: np.random.Generator | None
    ) -> np.random.Generator:
        return rng if rng is not None else np.random.default_rng(cfg.seed)

    def _step_rng(
        self, cfg: SamplerConfig, rng: np.random.Generator | None
    ) -> np.random.Generator:
        # 同一种子的单步调用共享一个噪声流
        if rng is not None:
            return rng
        if cfg.seed not in self._step_streams:
            self._step_streams[cfg.seed] = np.random.default_rng(cfg.seed)
        return self._step_streams[cfg.seed]

    @staticmethod
    def _mean_energy(energies: Tensor) -> float:
        return float(np.mean(energies))

    @staticmethod
    def _guard_state(x: Tensor, trace: ChainTrace, where: str) -> None:
        if not np.isfinite(x).all():
            raise DivergenceError(
                f"Non-finite chain state after {where}", trace=trace
            )

    def _step(
        self,
        model: EnergyModel,
        x: Tensor,
        cfg: SamplerConfig,
        rng: np.random.Generator,
        proximal: bool,
        trace: ChainTrace,
        y: Labels = None
    ) -> Tensor:
        try:
            energies, grad = model.energy_and_grad(x, self.bn_mode, y)
        except DivergenceError as e:
            raise DivergenceError(str(e), trace=trace) from e
        trace.full_propagations += self._num_chains(model, x)
        if trace.steps is not None:
            trace.steps.append(ChainStep(
                step=len(trace.steps),
                energy=self._mean_energy(energies),
                grad_max_abs=float(np.max(np.abs(grad))),
                x_max_abs=float(np.max(np.abs(x))),
            ))
        if proximal:
            grad = clamp(grad, cfg.epsilon)
        noise = rng.standard_normal(x.shape)
        return x - (cfg.alpha / 2.0) * grad + cfg.noise_scale * noise

    def sgld_step(
        self,
        model: EnergyModel,
        x: Tensor,
        cfg: SamplerConfig,
        rng: np.random.Generator | None = None,
        trace: ChainTrace | None = None,
        y: Labels = None
    ) -> Tensor:
        """
        一步 SGLD: x - (α/2)·∇E(x) + noise_scale·η.

        Args:
            model: 能量模型
            x: 当前状态
            cfg: 采样配置
            rng: 噪声随机源（缺省使用 cfg.seed 对应的持续噪声流）
            trace: 计数轨迹（可选）
            y: 条件采样标签（可选）

        Returns:
            新状态
        """
        x = np.asarray(x, dtype=np.float64)
        trace = trace or ChainTrace(num_chains=self._num_chains(model, x))
        x_new = self._step(
            model, x, cfg, self._step_rng(cfg, rng), False, trace, y
        )
        self._guard_state(x_new, trace, 'SGLD step')
        return x_new

    def proximal_sgld_step(
        self,
        model: EnergyModel,
        x: Tensor,
        cfg: SamplerConfig,
        rng: np.random.Generator | None = None,
        trace: ChainTrace | None = None,
        y: Labels = None
    ) -> Tensor:
        """
        一步近端 SGLD: x - (α/2)·clamp(∇E(x), ε) + noise_scale·η.

        噪声不截断.

        Returns:
            新状态
        """
        x = np.asarray(x, dtype=np.float64)
        trace = trace or ChainTrace(num_chains=self._num_chains(model, x))
        x_new = self._step(
            model, x, cfg, self._step_rng(cfg, rng), True, trace, y
        )
        self._guard_state(x_new, trace, 'proximal SGLD step')
        return x_new

    def _record_final(
        self,
        model: EnergyModel,
        x: Tensor,
        trace: ChainTrace,
        y: Labels
    ) -> None:
        # 末状态能量只做前向，不计入传播次数
        if trace.steps is None:
            return
        try:
            energies = model.energy(x, self.bn_mode, y)
        except DivergenceError as e:
            raise DivergenceError(str(e), trace=trace) from e
        trace.steps.append(ChainStep(
            step=len(trace.steps),
            energy=self._mean_energy(np.atleast_1d(energies)),
            grad_max_abs=None,
            x_max_abs=float(np.max(np.abs(x))),
        ))

    def _log_state(self, x: Tensor, model: EnergyModel) -> None:
        if not logger.isEnabledFor(logging.DEBUG):
            return
        xb = x if x.ndim > len(model.input_shape) else x[None, ...]
        per_chain = np.abs(xb.reshape(xb.shape[0], -1)).max(axis=1)
        logger.debug(
            f"Chain max-abs state: max={per_chain.max():.4g} "
            f"mean={per_chain.mean():.4g} over {per_chain.size} chains"
        )

    def pyld_sample(
        self,
        model: EnergyModel,
        x0: Tensor,
        cfg: SamplerConfig,
        rng: np.random.Generator | None = None,
        record: bool = False,
        y: Labels = None
    ) -> tuple[Tensor, ChainTrace]:
        """
        PYLD-M-N 采样.

        每个外层迭代计算一次松弛变量 p（完整前向 + 主体反向），随后执行
        N 次仅首层的内层更新 x ← x - (α/2)·clamp(pᵀ∇f0(x), ε)，
        最后加一次噪声 noise_scale·η.

        Args:
            model: 能量模型
            x0: 初始状态
            cfg: 采样配置
            rng: 噪声随机源
            record: 是否记录每步能量
            y: 条件采样标签

        Returns:
            (x^M, 轨迹)

        Raises:
            DivergenceError: 出现非有限值，异常携带部分轨迹
        """
        rng = self._rng(cfg, rng)
        x = np.array(x0, dtype=np.float64)
        chains = self._num_chains(model, x)
        trace = ChainTrace(
            num_chains=chains, steps=[] if record else None
        )
        self._guard_state(x, trace, 'initialization')
        half_step = cfg.alpha / 2.0

        for _ in range(cfg.m_steps):
            try:
                energies, p = model.energy_and_slack(x, self.bn_mode, y)
            except DivergenceError as e:
                raise DivergenceError(str(e), trace=trace) from e
            trace.full_propagations += chains

            grad_max = 0.0
            x_max = float(np.max(np.abs(x)))
            for _ in range(cfg.n_steps):
                grad = model.grad_first_input(x, p, self.bn_mode)
                trace.first_layer_props += chains
                grad_max = max(grad_max, float(np.max(np.abs(grad))))
                x = x - half_step * clamp(grad, cfg.epsilon)
                self._guard_state(x, trace, 'PYLD inner update')

            if trace.steps is not None:
                trace.steps.append(ChainStep(
                    step=len(trace.steps),
                    energy=self._mean_energy(energies),
                    grad_max_abs=grad_max,
                    x_max_abs=x_max,
                ))
            x = x + cfg.noise_scale * rng.standard_normal(x.shape)
            self._guard_state(x, trace, 'PYLD noise')

        self._record_final(model, x, trace, y)
        self._log_state(x, model)
        return x, trace

    def run_chain(
        self,
        model: EnergyModel,
        x0: Tensor,
        cfg: SamplerConfig,
        kind: SamplerKind,
        rng: np.random.Generator | None = None,
        record: bool = False,
        y: Labels = None
    ) -> tuple[Tensor, ChainTrace]:
        """
        统一驱动三种采样器: SGLD / 近端 SGLD 运行 K 步，PYLD 运行 M×N.

        Args:
            model: 能量模型
            x0: 初始状态
            cfg: 采样配置
            kind: 采样算法
            rng: 噪声随机源
            record: 是否记录每步能量
            y: 条件采样标签

        Returns:
            (末状态, 轨迹)
        """
        if kind == SamplerKind.PYLD:
            return self.pyld_sample(model, x0, cfg, rng, record, y)

        rng = self._rng(cfg, rng)
        x = np.array(x0, dtype=np.float64)
        trace = ChainTrace(
            num_chains=self._num_chains(model, x),
            steps=[] if record else None,
        )
        self._guard_state(x, trace, 'initialization')
        proximal = kind == SamplerKind.PROXIMAL_SGLD
        where = 'proximal SGLD step' if proximal else 'SGLD step'
        for _ in range(cfg.k_steps):
            x = self._step(model, x, cfg, rng, proximal, trace, y)
            self._guard_state(x, trace, where)

        self._record_final(model, x, trace, y)
        self._log_state(x, model)
        return x, trace
