"""CSV报告Repository."""
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from core.layers import Tensor
from models.eval_types import ReliabilityBucket
from models.sampler_config import ChainTrace
from models.train_config import MetricsRecord
from repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ('step', 'energy', 'grad_max_abs', 'x_max_abs')
COUNTER_COLUMNS = (
    'num_chains', 'full_propagations', 'first_layer_props',
    'per_chain_full', 'per_chain_first_layer',
)
RELIABILITY_COLUMNS = (
    'bucket', 'lower', 'upper', 'count', 'accuracy', 'confidence'
)
OOD_COLUMNS = ('score', 'split')
SWEEP_COLUMNS = ('norm', 'radius', 'step_size', 'steps', 'robust_accuracy')


class ReportRepository(BaseRepository):
    """
    各子命令输出的CSV写入.

    除指标文件按轮追加外，每次写入都新建文件（不覆盖）.
    """

    _instance: ClassVar['ReportRepository | None'] = None

    def create_metrics(self, out_dir: str | Path) -> Path:
        """
        创建新的指标文件（只写表头）.

        Args:
            out_dir: 输出目录

        Returns:
            指标文件路径
        """
        return self.write_csv(
            Path(out_dir) / 'metrics.csv', MetricsRecord.COLUMNS, []
        )

    def append_metrics(self, path: str | Path, record: MetricsRecord) -> None:
        """追加一轮指标."""
        self.append_csv_row(path, MetricsRecord.COLUMNS, record.to_row())

    def write_trace(self, path: str | Path, trace: ChainTrace) -> Path:
        """
        写出每步能量轨迹.

        Returns:
            实际写入的路径
        """
        return self.write_csv(
            path, TRACE_COLUMNS, (s.to_row() for s in trace.steps or [])
        )

    def write_counters(self, path: str | Path, trace: ChainTrace) -> Path:
        """写出链计数器."""
        row = {
            'num_chains': trace.num_chains,
            'full_propagations': trace.full_propagations,
            'first_layer_props': trace.first_layer_props,
            'per_chain_full': trace.per_chain_full(),
            'per_chain_first_layer': trace.per_chain_first_layer(),
        }
        return self.write_csv(path, COUNTER_COLUMNS, [row])

    def write_samples(
        self,
        path: str | Path,
        samples: Tensor,
        labels: np.ndarray,
        energy: np.ndarray,
        confidence: np.ndarray
    ) -> Path:
        """
        写出样本: x0..x{d-1},label,energy,confidence.

        Args:
            path: 目标路径
            samples: (n, *input_shape)
            labels: 条件类别（无条件为 -1）
            energy: 每个样本的末能量
            confidence: max_y p(y|x)

        Returns:
            实际写入的路径
        """
        n = samples.shape[0]
        flat = samples.reshape(n, -1)
        features = [f'x{i}' for i in range(flat.shape[1])]
        columns = features + ['label', 'energy', 'confidence']
        rows = (
            {
                **dict(zip(features, map(float, flat[i]), strict=True)),
                'label': int(labels[i]),
                'energy': float(energy[i]),
                'confidence': float(confidence[i]),
            }
            for i in range(n)
        )
        return self.write_csv(path, columns, rows)

    def write_eval_report(
        self, path: str | Path, metrics: Mapping[str, Any]
    ) -> Path:
        """写出 metric,value 两列的评估报告."""
        rows = ({'metric': k, 'value': v} for k, v in metrics.items())
        return self.write_csv(path, ('metric', 'value'), rows)

    def write_reliability(
        self, path: str | Path, buckets: Sequence[ReliabilityBucket]
    ) -> Path:
        """写出可靠性图分桶表."""
        return self.write_csv(
            path, RELIABILITY_COLUMNS, (b.to_row() for b in buckets)
        )

    def write_ood_scores(
        self,
        path: str | Path,
        scores_in: np.ndarray,
        scores_out: np.ndarray
    ) -> Path:
        """写出 OOD 分数: score,split（split 为 in / out）."""
        rows = [{'score': float(s), 'split': 'in'} for s in scores_in]
        rows += [{'score': float(s), 'split': 'out'} for s in scores_out]
        return self.write_csv(path, OOD_COLUMNS, rows)

    def write_sweep(
        self, path: str | Path, rows: Sequence[Mapping[str, Any]]
    ) -> Path:
        """写出鲁棒性半径扫描，每个半径一行."""
        return self.write_csv(path, SWEEP_COLUMNS, rows)
