"""命令行端到端测试（小配置，几秒内完成）."""
import csv
from dataclasses import replace

import numpy as np
import pytest

from app import create_parser, main
from config import Config
from controllers import (
    EXIT_FAILURE,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_VERSION,
    exit_code_for,
)
from controllers.common import command
from controllers.eval_controller import attack_domain
from core.exceptions import (
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    DivergenceError,
    TrainingAbortedError,
)
from models.checkpoint import FORMAT_VERSION
from models.dataset import Dataset
from models.experiment_config import (
    DatasetConfig,
    DatasetName,
    EvalOptions,
    ExperimentConfig,
)
from repositories import CheckpointRepository
from services import InitService


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


def read_report(path):
    return {row['metric']: row['value'] for row in read_rows(path)}


@pytest.fixture(autouse=True)
def _log_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(Config, 'LOG_DIR', str(tmp_path / 'logs'))


@pytest.fixture
def run_dir(tiny_config, tmp_path):
    """用小配置训练一次后的输出目录."""
    assert main(['train', '--config', str(tiny_config)]) == EXIT_OK
    return tmp_path / 'run'


class TestTrain:

    def test_outputs(self, run_dir):
        names = {p.name for p in run_dir.iterdir()}
        assert {
            'metrics.csv', 'config.resolved.toml', 'checkpoint.npz',
            'checkpoint_epoch0001.npz', 'checkpoint_epoch0002.npz',
        } <= names
        rows = read_rows(run_dir / 'metrics.csv')
        assert [row['epoch'] for row in rows] == ['0', '1']
        assert rows[-1]['divergence_count'] == '0'
        assert int(rows[-1]['full_propagations_cumulative']) == 2 * 64 * 2

    def test_same_seed_gives_identical_metrics(
        self, run_dir, tiny_config, tmp_path
    ):
        other = tmp_path / 'again'
        assert main([
            'train', '--config', str(tiny_config), '--out', str(other)
        ]) == EXIT_OK
        assert (other / 'metrics.csv').read_bytes() == (
            (run_dir / 'metrics.csv').read_bytes()
        )

    def test_rerun_does_not_overwrite(self, run_dir, tiny_config):
        assert main(['--config', str(tiny_config), 'train']) == EXIT_OK
        assert (run_dir / 'metrics.1.csv').exists()
        assert (run_dir / 'checkpoint.1.npz').exists()

    def test_default_seed(self, tiny_config, tmp_path):
        out = tmp_path / 'seed0'
        assert main([
            'train', '--config', str(tiny_config), '--seed', '0',
            '--out', str(out),
        ]) == EXIT_OK
        assert (out / 'checkpoint.npz').exists()

    def test_missing_config(self, tmp_path):
        assert main(
            ['train', '--config', str(tmp_path / 'none.toml')]
        ) == EXIT_INPUT

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / 'bad.toml'
        path.write_text('[train]\nepoch = 3\n')
        assert main(['train', '--config', str(path)]) == EXIT_INPUT


class TestSample:

    def test_pyld_trace_and_counters(self, run_dir, tmp_path):
        target = tmp_path / 'samples.csv'
        assert main([
            'sample', str(run_dir / 'checkpoint.npz'), '-n', '5',
            '-o', str(target),
        ]) == EXIT_OK
        rows = read_rows(target)
        assert len(rows) == 5
        assert list(rows[0]) == [
            'x0', 'x1', 'label', 'energy', 'confidence'
        ]
        trace = read_rows(tmp_path / 'samples.trace.csv')
        assert [row['step'] for row in trace] == ['0', '1', '2']
        assert trace[-1]['grad_max_abs'] == ''
        counters = read_rows(tmp_path / 'samples.counters.csv')[0]
        assert int(counters['full_propagations']) == 5 * 2
        assert int(counters['first_layer_props']) == 5 * 2 * 2

    def test_zero_samples(self, run_dir, tmp_path):
        target = tmp_path / 'none.csv'
        assert main([
            'sample', str(run_dir / 'checkpoint.npz'), '-n', '0',
            '-o', str(target),
        ]) == EXIT_OK
        assert read_rows(target) == []
        counters = read_rows(tmp_path / 'none.counters.csv')[0]
        assert counters['full_propagations'] == '0'

    def test_conditional_ranked_by_energy(self, run_dir, tmp_path):
        target = tmp_path / 'ranked.csv'
        assert main([
            'sample', str(run_dir / 'checkpoint.npz'), '-n', '6',
            '--conditional', '--rank', 'energy', '--kind', 'sgld',
            '-o', str(target),
        ]) == EXIT_OK
        rows = read_rows(target)
        energy = [float(row['energy']) for row in rows]
        assert energy == sorted(energy)
        assert sorted(row['label'] for row in rows) == ['0'] * 3 + ['1'] * 3
        counters = read_rows(tmp_path / 'ranked.counters.csv')[0]
        assert int(counters['full_propagations']) == 6 * 3

    def test_from_buffer(self, run_dir, tmp_path):
        target = tmp_path / 'buffer.csv'
        assert main([
            'sample', str(run_dir / 'checkpoint.npz'), '-n', '4',
            '--from-buffer', '-o', str(target),
        ]) == EXIT_OK
        assert len(read_rows(target)) == 4

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / 'old.npz'
        np.savez(path, format_version=np.int64(FORMAT_VERSION + 1))
        assert main(
            ['sample', str(path), '-o', str(tmp_path / 's.csv')]
        ) == EXIT_VERSION


class TestEvaluate:

    def test_eval_and_attack_agree_at_zero_radius(self, run_dir):
        ckpt = str(run_dir / 'checkpoint.npz')
        assert main(['eval', ckpt]) == EXIT_OK
        report = read_report(run_dir / 'eval.csv')
        assert report['samples'] == '32'
        assert 0.0 <= float(report['ece']) <= 1.0
        assert len(read_rows(run_dir / 'reliability.csv')) == 20

        assert main(['attack', ckpt]) == EXIT_OK
        rows = read_rows(run_dir / 'robustness.csv')
        assert [float(row['radius']) for row in rows] == [0.0, 0.05, 0.1]
        assert float(rows[0]['robust_accuracy']) == float(report['accuracy'])

    def test_eval_train_split(self, run_dir):
        ckpt = str(run_dir / 'checkpoint.npz')
        assert main(
            ['eval', ckpt, '--split', 'train', '--buckets', '5']
        ) == EXIT_OK
        report = read_report(run_dir / 'eval.csv')
        assert report['samples'] == '64'
        assert report['buckets'] == '5'

    def test_eval_on_csv_file(self, run_dir, tmp_path):
        from repositories import DatasetRepository
        from utils.synthetic import two_moons

        path = DatasetRepository.get_instance().write_dataset_csv(
            two_moons(20, seed=9), tmp_path / 'extra.csv'
        )
        ckpt = str(run_dir / 'checkpoint.npz')
        assert main(
            ['eval', ckpt, '--dataset', str(path), '--out', str(tmp_path)]
        ) == EXIT_OK
        assert read_report(tmp_path / 'eval.csv')['samples'] == '20'

    def test_ood_against_noise(self, run_dir):
        assert main(['ood', str(run_dir / 'checkpoint.npz')]) == EXIT_OK
        report = read_report(run_dir / 'ood.csv')
        for key in ('auroc_log_density', 'auroc_max_softmax'):
            assert 0.0 <= float(report[key]) <= 1.0
        scores = read_rows(run_dir / 'ood_scores.csv')
        assert sum(row['split'] == 'in' for row in scores) == 32
        assert sum(row['split'] == 'out' for row in scores) == 32

    def test_attack_options(self, run_dir):
        assert main([
            'attack', str(run_dir / 'checkpoint.npz'), '--norm', 'l2',
            '--radius', '0.2', '--steps', '2', '--no-random-start',
        ]) == EXIT_OK
        rows = read_rows(run_dir / 'robustness.csv')
        assert [row['norm'] for row in rows] == ['l2', 'l2']
        assert [row['steps'] for row in rows] == ['2', '2']

    def test_attack_domain_resolution(self):
        cfg = ExperimentConfig(dataset=DatasetConfig(name=DatasetName.IDX))
        data = Dataset(np.full((2, 3), 0.5), [0, 1], 2)
        assert attack_domain(cfg, data, None) == (-1.0, 1.0)
        assert attack_domain(cfg, data, 'extra.csv') == (0.5, 0.5)
        pinned = replace(cfg, eval=EvalOptions(clip_min=0.0))
        assert attack_domain(pinned, data, None) == (0.0, 1.0)
        off = replace(cfg, eval=EvalOptions(clip_domain=False))
        assert attack_domain(off, data, None) == (None, None)

    def test_negative_radius(self, run_dir):
        assert main([
            'attack', str(run_dir / 'checkpoint.npz'), '--radius', '-0.1'
        ]) == EXIT_INPUT


class TestFitInit:

    def test_writes_init_and_gaps(self, tiny_config, tmp_path):
        assert main(['fit-init', '--config', str(tiny_config)]) == EXIT_OK
        out = tmp_path / 'run'
        assert (out / 'init.npz').exists()
        report = read_report(out / 'init_gap.csv')
        assert set(report) == {
            'informative_mean_gap', 'informative_var_gap',
            'uniform_mean_gap', 'uniform_var_gap',
        }

    def test_train_and_sample_reuse_fitted_init(self, tiny_config, tmp_path):
        assert main(['fit-init', '--config', str(tiny_config)]) == EXIT_OK
        init_path = str(tmp_path / 'run' / 'init.npz')
        out = tmp_path / 'reused'
        assert main([
            'train', '--config', str(tiny_config), '--out', str(out),
            '--init', init_path,
        ]) == EXIT_OK
        fitted = CheckpointRepository.get_instance().load_init(init_path)
        stored = CheckpointRepository.get_instance().load(
            out / 'checkpoint.npz'
        ).init
        np.testing.assert_array_equal(stored.mu, fitted.mu)
        assert main([
            'sample', str(out / 'checkpoint.npz'), '-n', '3',
            '--init', init_path, '-o', str(tmp_path / 's.csv'),
        ]) == EXIT_OK

    def test_mismatched_init_rejected(self, run_dir, tmp_path):
        wide = Dataset(np.random.default_rng(0).normal(size=(20, 3)),
                       [0, 1] * 10, 2)
        init = InitService.get_instance().fit(wide)
        path = CheckpointRepository.get_instance().save_init(
            init, tmp_path / 'wide.npz'
        )
        assert main([
            'sample', str(run_dir / 'checkpoint.npz'), '--init', str(path),
            '-o', str(tmp_path / 's.csv'),
        ]) == EXIT_INPUT


class TestParser:

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            create_parser().parse_args(['--version'])
        assert info.value.code == 0
        assert 'jemdesk' in capsys.readouterr().out

    def test_global_options_after_command(self):
        args = create_parser().parse_args(
            ['train', '--config', 'a.toml', '--seed', '3']
        )
        assert args.config == 'a.toml' and args.seed == 3

    def test_global_options_before_command(self):
        args = create_parser().parse_args(['--seed', '4', 'fit-init'])
        assert args.seed == 4 and args.config is None

    @pytest.mark.parametrize('error, code', [
        (ConfigError('x'), 2),
        (CheckpointVersionError(2, 1), 4),
        (CheckpointError('x'), 1),
        (TrainingAbortedError('x'), 3),
        (DivergenceError('x'), 1),
        (OSError('x'), 1),
    ])
    def test_exit_codes(self, error, code):
        assert exit_code_for(error) == code

    def test_unexpected_error_maps_to_failure(self):
        @command('boom')
        def boom() -> int:
            raise RuntimeError('boom')

        assert boom() == EXIT_FAILURE
