"""Service层初始化."""
from services.buffer_service import BufferService
from services.eval_service import EvalService
from services.init_service import InitService
from services.sampler_service import SamplerService
from services.trainer_service import DivergenceGuard, TrainerService


class Services:
    """服务容器类，提供类型安全的服务访问."""

    _sampler: 'SamplerService | None' = None
    _init: 'InitService | None' = None
    _buffer: 'BufferService | None' = None
    _trainer: 'TrainerService | None' = None
    _eval: 'EvalService | None' = None

    @property
    def sampler(self) -> SamplerService:
        """获取采样服务."""
        if self._sampler is None:
            self._sampler = SamplerService.get_instance()
        return self._sampler

    @sampler.setter
    def sampler(self, value):
        """设置采样服务."""
        self._sampler = value

    @property
    def init(self) -> InitService:
        """获取信息初始化服务."""
        if self._init is None:
            self._init = InitService.get_instance()
        return self._init

    @init.setter
    def init(self, value):
        """设置信息初始化服务."""
        self._init = value

    @property
    def buffer(self) -> BufferService:
        """获取回放缓冲服务."""
        if self._buffer is None:
            self._buffer = BufferService.get_instance()
        return self._buffer

    @buffer.setter
    def buffer(self, value):
        """设置回放缓冲服务."""
        self._buffer = value

    @property
    def trainer(self) -> TrainerService:
        """获取训练服务."""
        if self._trainer is None:
            self._trainer = TrainerService.get_instance()
        return self._trainer

    @trainer.setter
    def trainer(self, value):
        """设置训练服务."""
        self._trainer = value

    @property
    def eval(self) -> EvalService:
        """获取评估服务."""
        if self._eval is None:
            self._eval = EvalService.get_instance()
        return self._eval

    @eval.setter
    def eval(self, value):
        """设置评估服务."""
        self._eval = value


# 全局实例
services = Services()


__all__ = [
    'BufferService',
    'DivergenceGuard',
    'EvalService',
    'InitService',
    'SamplerService',
    'Services',
    'TrainerService',
    'services',
]
