"""实验配置读写测试."""
import math
from dataclasses import replace

import pytest

from core.exceptions import ConfigError
from models.experiment_config import (
    ArchitectureKind,
    DatasetName,
    ExperimentConfig,
)
from models.sampler_config import SamplerConfig, SamplerKind
from models.train_config import TrainConfig
from repositories import ConfigRepository
from utils.seeding import STREAMS, derive_seeds


@pytest.fixture
def repo() -> ConfigRepository:
    return ConfigRepository.get_instance()


class TestParse:

    def test_defaults_from_empty_file(self, repo):
        assert repo.loads('') == ExperimentConfig()

    def test_sections(self, repo):
        cfg = repo.loads(
            '[experiment]\nseed = 5\n'
            '[dataset]\nname = "gaussian_mixture"\ncomponents = 3\n'
            '[architecture]\nkind = "conv"\nhidden = [32]\n'
            '[sampler]\nepsilon = inf\nm_steps = 4\n'
            '[train]\nsampler_kind = "sgld"\nlr = 1\n'
        )
        assert cfg.seed == 5
        assert cfg.dataset.name == DatasetName.GAUSSIAN_MIXTURE
        assert cfg.architecture.kind == ArchitectureKind.CONV
        assert cfg.architecture.hidden == (32,)
        assert math.isinf(cfg.sampler.epsilon)
        assert cfg.train.sampler_kind == SamplerKind.SGLD
        assert cfg.train.lr == 1.0 and isinstance(cfg.train.lr, float)

    @pytest.mark.parametrize('text, where', [
        ('[train]\nlearning_rate = 0.1\n', 'train.learning_rate'),
        ('[experiment]\nname = "x"\n', 'experiment.name'),
        ('[sampler]\nseed = 3\n', 'sampler.seed'),
    ])
    def test_unknown_key_is_named(self, repo, text, where):
        with pytest.raises(ConfigError, match=where):
            repo.loads(text)

    def test_unknown_section(self, repo):
        with pytest.raises(ConfigError, match='logging'):
            repo.loads('[logging]\nlevel = "DEBUG"\n')

    @pytest.mark.parametrize('text', [
        '[sampler]\nalpha = -1.0\n',
        '[sampler]\nk_steps = 2.5\n',
        '[train]\nsampler_kind = "hmc"\n',
        '[architecture]\nbatch_norm = 1\n',
        'seed = 1\n',
        '[train\n',
    ])
    def test_invalid_values(self, repo, text):
        with pytest.raises(ConfigError):
            repo.loads(text)

    def test_missing_file(self, repo, tmp_path):
        with pytest.raises(ConfigError, match='missing.toml'):
            repo.load(tmp_path / 'missing.toml')


class TestWrite:

    def test_round_trip(self, repo):
        cfg = replace(
            ExperimentConfig(seed=11, out_dir='runs/x'),
            sampler=SamplerConfig(epsilon=math.inf, alpha=0.05),
            train=TrainConfig(epochs=3, decay_epochs=(1, 2)),
        )
        assert repo.loads(repo.dumps(cfg)) == cfg

    def test_derived_fields_not_written(self, repo):
        text = repo.dumps(ExperimentConfig(seed=3).resolved())
        assert 'sampler =' not in text
        assert repo.loads(text).resolved() == (
            ExperimentConfig(seed=3).resolved()
        )

    def test_save_does_not_overwrite(self, repo, tmp_path):
        first = repo.save(ExperimentConfig(), tmp_path / 'config.toml')
        second = repo.save(ExperimentConfig(seed=1), tmp_path / 'config.toml')
        assert first.name == 'config.toml'
        assert second.name == 'config.1.toml'
        assert repo.load(first).seed == 0
        assert repo.load(second).seed == 1


class TestSeeds:

    def test_streams_are_distinct_and_stable(self):
        seeds = derive_seeds(0)
        assert list(seeds) == list(STREAMS)
        assert len(set(seeds.values())) == len(STREAMS)
        assert derive_seeds(0) == seeds
        assert derive_seeds(1) != seeds

    def test_resolved_attaches_sampler(self):
        cfg = ExperimentConfig(seed=9).resolved()
        assert cfg.train.sampler is cfg.sampler
        assert cfg.sampler.seed == derive_seeds(9)['chain']
        assert cfg.train.seed == 9
