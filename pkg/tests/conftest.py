"""测试公共夹具."""
import os
from pathlib import Path

import numpy as np
import pytest

from core.network import SplitNetwork
from models.dataset import Dataset
from repositories import (
    BaseRepository,
    CheckpointRepository,
    ConfigRepository,
    DatasetRepository,
    ReportRepository,
)
from services import (
    BufferService,
    EvalService,
    InitService,
    SamplerService,
    TrainerService,
    services,
)
from tests.helpers import randomize_batch_norm
from utils.synthetic import two_moons

MNIST_ENV = 'JEMDESK_MNIST_DIR'


@pytest.fixture(autouse=True)
def _fresh_singletons():
    """每个测试使用新的Service/Repository单例."""
    for cls in (
        SamplerService, InitService, BufferService, TrainerService,
        EvalService, BaseRepository, CheckpointRepository,
        ConfigRepository, DatasetRepository, ReportRepository,
    ):
        cls.reset()
    for name in ('sampler', 'init', 'buffer', 'trainer', 'eval'):
        setattr(services, name, None)
    yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def mlp(rng) -> SplitNetwork:
    net = SplitNetwork.build_mlp((2,), (16, 16), 2, batch_norm=True, rng=rng)
    randomize_batch_norm(net, rng)
    return net


@pytest.fixture
def moons() -> Dataset:
    return two_moons(200, noise=0.1, seed=0)


@pytest.fixture
def tiny_config(tmp_path) -> Path:
    """两月牙上几轮即可跑完的实验配置."""
    path = tmp_path / 'tiny.toml'
    path.write_text(
        '\n'.join([
            '[experiment]',
            'seed = 7',
            f'out_dir = "{(tmp_path / "run").as_posix()}"',
            '',
            '[dataset]',
            'name = "two_moons"',
            'n_train = 64',
            'n_eval = 32',
            '',
            '[architecture]',
            'hidden = [8, 8]',
            '',
            '[sampler]',
            'm_steps = 2',
            'n_steps = 2',
            'k_steps = 3',
            '',
            '[train]',
            'epochs = 2',
            'batch_size = 16',
            'buffer_capacity = 128',
            'checkpoint_every = 1',
            '',
            '[eval]',
            'ood_count = 32',
            'attack_radii = [0.05, 0.1]',
            'attack_steps = 3',
            '',
        ]),
        encoding='utf-8',
    )
    return path


@pytest.fixture
def mnist_dir() -> Path:
    """MNIST IDX 文件目录（未设置环境变量时跳过）."""
    value = os.environ.get(MNIST_ENV)
    if not value or not Path(value).is_dir():
        pytest.skip(f'{MNIST_ENV} not set')
    return Path(value)
