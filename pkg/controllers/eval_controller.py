"""评估控制器: eval / ood / attack."""
import logging
from collections.abc import Sequence

import numpy as np

from controllers.common import (
    EXIT_OK,
    checkpoint_experiment,
    command,
    output_dir,
    select_dataset,
)
from core.exceptions import ConfigError
from models.dataset import Dataset
from models.eval_types import AttackConfig, AttackNorm, OODScoreKind
from models.experiment_config import ExperimentConfig
from repositories import (
    CheckpointRepository,
    DatasetRepository,
    ReportRepository,
)
from services import services
from utils.seeding import stream
from utils.synthetic import uniform_noise

logger = logging.getLogger(__name__)


@command('eval')
def cmd_eval(
    checkpoint: str,
    dataset_path: str | None = None,
    labels_path: str | None = None,
    split: str = 'eval',
    buckets: int | None = None,
    out: str | None = None
) -> int:
    """
    评估准确率与校准: 写出 eval.csv 与 reliability.csv.

    Args:
        checkpoint: 检查点路径
        dataset_path: 数据文件（缺省按检查点配置重建划分）
        labels_path: IDX 标签文件
        split: 未给出文件时使用的划分 train / eval
        buckets: ECE 桶数（缺省取配置）
        out: 输出目录

    Returns:
        退出码
    """
    ckpt = CheckpointRepository.get_instance().load(checkpoint)
    cfg = checkpoint_experiment(ckpt, out_dir=out)
    dataset = select_dataset(ckpt.net, cfg, dataset_path, labels_path, split)
    buckets = buckets or cfg.eval.ece_buckets
    report_repo = ReportRepository.get_instance()
    out_dir = output_dir(cfg)

    accuracy = services.eval.accuracy(ckpt.net, dataset)
    preds = services.eval.predictions(ckpt.net, dataset)
    ece = services.eval.ece(preds, buckets)
    report_repo.write_eval_report(out_dir / 'eval.csv', {
        'dataset': dataset.name,
        'samples': len(dataset),
        'accuracy': accuracy,
        'ece': ece,
        'buckets': buckets,
    })
    report_repo.write_reliability(
        out_dir / 'reliability.csv', services.eval.reliability(preds, buckets)
    )
    logger.info(
        f"Evaluated {dataset.name}: accuracy={accuracy:.4f} ece={ece:.4f}"
    )
    print(f"accuracy={accuracy:.6f} ece={ece:.6f}")
    return EXIT_OK


def _noise_dataset(
    reference: Dataset, count: int, inflation: float,
    rng: np.random.Generator
) -> Dataset:
    """参照数据包围盒（按比例膨胀）内的均匀噪声."""
    flat = reference.x.reshape(len(reference), -1)
    low, high = flat.min(axis=0), flat.max(axis=0)
    margin = (high - low) * inflation / 2.0
    noise = uniform_noise(
        count, low - margin, high + margin, (flat.shape[1],), rng
    )
    return Dataset(
        noise.reshape((count,) + reference.input_shape),
        np.zeros(count, dtype=np.int64), reference.num_classes,
        'uniform_noise'
    )


@command('ood')
def cmd_ood(
    checkpoint: str,
    in_path: str | None = None,
    in_labels_path: str | None = None,
    out_path: str | None = None,
    out_labels_path: str | None = None,
    score: OODScoreKind | None = None,
    seed: int | None = None,
    out: str | None = None
) -> int:
    """
    OOD 检测: 两种打分函数的 AUROC 写入 ood.csv，所选打分写入 ood_scores.csv.

    未给出分布外数据时使用分布内数据包围盒内的均匀噪声.

    Returns:
        退出码
    """
    ckpt = CheckpointRepository.get_instance().load(checkpoint)
    cfg = checkpoint_experiment(ckpt, seed, out)
    net = ckpt.net
    in_data = select_dataset(net, cfg, in_path, in_labels_path, 'eval')
    if out_path:
        out_data = select_dataset(net, cfg, out_path, out_labels_path)
    else:
        out_data = _noise_dataset(
            in_data, cfg.eval.ood_count, cfg.eval.ood_box_inflation,
            stream(cfg.seed, 'ood')
        )
    score = score or cfg.eval.ood_score
    report_repo = ReportRepository.get_instance()
    out_dir = output_dir(cfg)

    report: dict[str, object] = {
        'in_dataset': in_data.name,
        'out_dataset': out_data.name,
    }
    dumped = None
    for kind in OODScoreKind:
        scores_in = services.eval.ood_scores(net, in_data, kind)
        scores_out = services.eval.ood_scores(net, out_data, kind)
        report[f'auroc_{kind}'] = services.eval.auroc(scores_in, scores_out)
        if kind == score:
            dumped = (scores_in, scores_out)

    assert dumped is not None
    report_repo.write_ood_scores(out_dir / 'ood_scores.csv', *dumped)
    report_repo.write_eval_report(out_dir / 'ood.csv', report)
    logger.info(
        f"OOD {in_data.name} vs {out_data.name}: "
        + ' '.join(
            f"{k}={v:.4f}" for k, v in report.items()
            if isinstance(v, float)
        )
    )
    print(f"auroc({score})={report[f'auroc_{score}']:.6f}")
    return EXIT_OK


def attack_domain(
    cfg: ExperimentConfig, dataset: Dataset, dataset_path: str | None
) -> tuple[float | None, float | None]:
    """攻击裁剪的数据域（配置中给出的界限优先）."""
    options = cfg.eval
    if not options.clip_domain:
        return None, None
    name = (
        DatasetRepository.file_kind(dataset_path) if dataset_path
        else cfg.dataset.name
    )
    low, high = DatasetRepository.domain_of(name, dataset)
    return (
        low if options.clip_min is None else options.clip_min,
        high if options.clip_max is None else options.clip_max,
    )


@command('attack')
def cmd_attack(
    checkpoint: str,
    dataset_path: str | None = None,
    labels_path: str | None = None,
    norm: AttackNorm | None = None,
    radii: Sequence[float] | None = None,
    steps: int | None = None,
    random_start: bool | None = None,
    seed: int | None = None,
    out: str | None = None
) -> int:
    """
    PGD 鲁棒性扫描: 每个半径一行写入 robustness.csv.

    Returns:
        退出码
    """
    ckpt = CheckpointRepository.get_instance().load(checkpoint)
    cfg = checkpoint_experiment(ckpt, seed, out)
    net = ckpt.net
    dataset = select_dataset(net, cfg, dataset_path, labels_path, 'eval')
    options = cfg.eval
    low, high = attack_domain(cfg, dataset, dataset_path)
    base = AttackConfig(
        norm=norm or options.attack_norm,
        steps=steps or options.attack_steps,
        random_start=(
            options.random_start if random_start is None else random_start
        ),
        clip_min=low,
        clip_max=high,
    )
    radii = tuple(radii) if radii else options.attack_radii
    if any(r < 0 for r in radii):
        raise ConfigError(f"radii must be non-negative: {radii}")
    # 半径 0 即干净准确率
    if 0.0 not in radii:
        radii = (0.0,) + radii

    sweep = services.eval.robustness_sweep(
        net, dataset, base, radii, options.attack_step_fraction,
        rng=stream(cfg.seed, 'attack')
    )
    rows = [
        {
            'norm': str(base.norm),
            'radius': radius,
            'step_size': radius * options.attack_step_fraction,
            'steps': base.steps,
            'robust_accuracy': acc,
        }
        for radius, acc in sweep
    ]
    report_repo = ReportRepository.get_instance()
    report_repo.write_sweep(output_dir(cfg) / 'robustness.csv', rows)
    for radius, acc in sweep:
        print(f"radius={radius:.6g} robust_accuracy={acc:.6f}")
    return EXIT_OK
