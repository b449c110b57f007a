"""训练控制器."""
import logging
from pathlib import Path

from controllers.common import (
    EXIT_OK,
    build_network,
    command,
    load_experiment,
    load_initializer,
    output_dir,
)
from models.checkpoint import Checkpoint
from models.informative_init import InitKind
from models.replay_buffer import ReplayBuffer
from models.train_config import MetricsRecord
from repositories import (
    CheckpointRepository,
    ConfigRepository,
    DatasetRepository,
    ReportRepository,
)
from services import services
from utils.seeding import derive_seeds, stream

logger = logging.getLogger(__name__)

CHECKPOINT_NAMES = {
    'periodic': 'checkpoint_epoch{epoch:04d}.npz',
    'final': 'checkpoint.npz',
    'abort': 'checkpoint_abort.npz',
}


@command('train')
def cmd_train(
    config_path: str | None,
    seed: int | None = None,
    out: str | None = None,
    init_path: str | None = None
) -> int:
    """
    按配置训练模型.

    输出目录中写入 config.resolved.toml、metrics.csv 与检查点.

    Args:
        config_path: TOML配置文件
        seed: 覆盖实验种子
        out: 覆盖输出目录
        init_path: fit-init 写出的初始化容器（给出时不再重新拟合）

    Returns:
        退出码（中止时为 3）
    """
    cfg = load_experiment(config_path, seed, out)
    out_dir = output_dir(cfg)
    config_repo = ConfigRepository.get_instance()
    checkpoint_repo = CheckpointRepository.get_instance()
    report_repo = ReportRepository.get_instance()

    train, evaluation = DatasetRepository.get_instance().load(
        cfg.dataset, cfg.seed
    )
    net = build_network(
        cfg.architecture, train.input_shape, train.num_classes,
        stream(cfg.seed, 'network')
    )
    init = None
    if init_path:
        init = load_initializer(
            init_path, train.input_shape, train.num_classes
        )
    elif cfg.init.kind == InitKind.INFORMATIVE:
        init = services.init.fit(
            train, cfg.init.covariance, cfg.init.dequantize,
            rng=stream(cfg.seed, 'init')
        )
    buf = ReplayBuffer(
        capacity=cfg.train.buffer_capacity,
        rho=cfg.train.rho,
        seed=derive_seeds(cfg.seed)['buffer'],
    )

    config_text = config_repo.dumps(cfg)
    config_repo.save(cfg, out_dir / 'config.resolved.toml')
    metrics_path = report_repo.create_metrics(out_dir)

    def on_epoch_end(record: MetricsRecord) -> None:
        report_repo.append_metrics(metrics_path, record)

    def on_checkpoint(epoch: int, reason: str) -> None:
        name = CHECKPOINT_NAMES[reason].format(epoch=epoch + 1)
        checkpoint_repo.save(
            Checkpoint(
                net=net, init=init, buffer=buf, epoch=epoch,
                config_text=config_text,
            ),
            Path(out_dir) / name,
        )

    _, records = services.trainer.train(
        net, train, init, buf, cfg.train,
        eval_dataset=evaluation,
        on_epoch_end=on_epoch_end,
        on_checkpoint=on_checkpoint,
    )
    if records:
        last = records[-1]
        logger.info(
            f"Training finished: eval_acc={last.eval_acc:.4f} "
            f"energy_gap={last.energy_gap:.4f} "
            f"diverged={last.divergence_count}"
        )
    print(f"metrics written to {metrics_path}")
    return EXIT_OK
