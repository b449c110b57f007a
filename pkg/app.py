"""命令行应用主文件."""
import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from config import VERSION, Config
from controllers import (
    RANK_KEYS,
    cmd_attack,
    cmd_eval,
    cmd_fit_init,
    cmd_ood,
    cmd_sample,
    cmd_train,
)
from models.eval_types import AttackNorm, OODScoreKind
from models.sampler_config import SamplerKind

logger = logging.getLogger(__name__)


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """
    全局参数，既可写在子命令前也可写在子命令后.

    Args:
        suppress: 子命令层使用 SUPPRESS，避免覆盖主命令层已解析的值
    """
    default = argparse.SUPPRESS if suppress else None
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        '--config', default=default, help='实验配置文件（TOML）'
    )
    parser.add_argument(
        '--seed', type=int, default=default, help='覆盖实验种子'
    )
    parser.add_argument('--out', default=default, help='覆盖输出目录')
    return parser


def create_parser() -> argparse.ArgumentParser:
    """
    创建命令行解析器.

    Returns:
        带 train / sample / eval / ood / attack / fit-init 子命令的解析器
    """
    parser = argparse.ArgumentParser(
        prog='jemdesk',
        description='Desk-scale joint energy-based model experiments',
        parents=[_global_options(suppress=False)],
    )
    parser.add_argument(
        '--version', action='version', version=f'%(prog)s {VERSION}'
    )
    common = _global_options(suppress=True)
    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', parents=[common], help='训练模型')
    train.add_argument(
        '--init', default=None, dest='init_path',
        help='fit-init 写出的初始化容器（默认按配置重新拟合）'
    )

    sample = sub.add_parser('sample', parents=[common], help='生成样本')
    sample.add_argument('checkpoint', help='检查点路径')
    sample.add_argument('-n', type=int, default=64, help='样本数')
    sample.add_argument(
        '--kind', choices=[k.value for k in SamplerKind], default=None,
        help='采样算法（默认沿用训练配置）'
    )
    sample.add_argument(
        '-o', '--output', default=None,
        help='样本CSV路径（默认 <out>/samples.csv）'
    )
    sample.add_argument(
        '--conditional', action='store_true', help='按类别条件采样'
    )
    sample.add_argument('--rank', choices=RANK_KEYS, default=None)
    sample.add_argument(
        '--from-buffer', action='store_true', help='从回放缓冲抽取起点'
    )
    sample.add_argument(
        '--init', default=None, dest='init_path',
        help='替代检查点中信息初始化的初始化容器'
    )

    evaluate = sub.add_parser('eval', parents=[common], help='准确率与校准')
    evaluate.add_argument('checkpoint')
    evaluate.add_argument('--dataset', default=None)
    evaluate.add_argument('--labels', default=None)
    evaluate.add_argument(
        '--split', choices=('train', 'eval'), default='eval'
    )
    evaluate.add_argument('--buckets', type=int, default=None)

    ood = sub.add_parser('ood', parents=[common], help='OOD 检测')
    ood.add_argument('checkpoint')
    ood.add_argument('--in-dataset', default=None)
    ood.add_argument('--in-labels', default=None)
    ood.add_argument(
        '--out-dataset', default=None,
        help='分布外数据（默认包围盒内均匀噪声）'
    )
    ood.add_argument('--out-labels', default=None)
    ood.add_argument(
        '--score', choices=[k.value for k in OODScoreKind], default=None
    )

    attack = sub.add_parser('attack', parents=[common], help='PGD 鲁棒性')
    attack.add_argument('checkpoint')
    attack.add_argument('--dataset', default=None)
    attack.add_argument('--labels', default=None)
    attack.add_argument(
        '--norm', choices=[k.value for k in AttackNorm], default=None
    )
    attack.add_argument(
        '--radius', type=float, nargs='+', default=None, dest='radii'
    )
    attack.add_argument('--steps', type=int, default=None)
    attack.add_argument(
        '--random-start', action=argparse.BooleanOptionalAction,
        default=None
    )

    sub.add_parser('fit-init', parents=[common], help='拟合信息初始化')
    return parser


def setup_logging() -> None:
    """配置日志系统."""
    os.makedirs(Config.LOG_DIR, exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(
                Path(Config.LOG_DIR) / Config.LOG_FILE,
                encoding='utf-8',
                errors='ignore'
            ),
        ]
    )


def dispatch(args: argparse.Namespace) -> int:
    """
    把解析结果分派到对应的控制器.

    Args:
        args: 命令行参数

    Returns:
        退出码
    """
    match args.command:
        case 'train':
            return cmd_train(
                args.config, seed=args.seed, out=args.out,
                init_path=args.init_path
            )
        case 'sample':
            output = args.output or str(
                Path(args.out or '.') / 'samples.csv'
            )
            return cmd_sample(
                args.checkpoint, args.n, args.kind, output,
                conditional=args.conditional, rank=args.rank,
                from_buffer=args.from_buffer, seed=args.seed,
                init_path=args.init_path
            )
        case 'eval':
            return cmd_eval(
                args.checkpoint, args.dataset, args.labels,
                split=args.split, buckets=args.buckets, out=args.out
            )
        case 'ood':
            return cmd_ood(
                args.checkpoint, args.in_dataset, args.in_labels,
                args.out_dataset, args.out_labels, score=args.score,
                seed=args.seed, out=args.out
            )
        case 'attack':
            return cmd_attack(
                args.checkpoint, args.dataset, args.labels,
                norm=args.norm, radii=args.radii, steps=args.steps,
                random_start=args.random_start, seed=args.seed,
                out=args.out
            )
        case 'fit-init':
            return cmd_fit_init(args.config, seed=args.seed, out=args.out)
    raise ValueError(f"Unknown command: {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    """
    命令行入口.

    Args:
        argv: 参数列表（默认取 sys.argv）

    Returns:
        退出码
    """
    args = create_parser().parse_args(argv)
    setup_logging()
    logger.info(f"jemdesk {VERSION}: {args.command}")
    return dispatch(args)


if __name__ == '__main__':
    sys.exit(main())
