"""数据集Repository: 带标签CSV、IDX 图像文件与内置合成数据."""
import gzip
import logging
import struct
from pathlib import Path
from typing import BinaryIO, ClassVar

import numpy as np

from core.exceptions import DatasetError
from models.dataset import Dataset
from models.experiment_config import DatasetConfig, DatasetName
from repositories.base_repository import BaseRepository
from utils.seeding import derive_seeds, stream
from utils.synthetic import gaussian_mixture_2d, two_moons

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
LABEL_COLUMN = 'label'
PIXEL_DOMAIN = (-1.0, 1.0)


def _open(path: Path) -> BinaryIO:
    if path.suffix == '.gz':
        return gzip.open(path, 'rb')  # type: ignore[return-value]
    return open(path, 'rb')


def _require(path: str | None, field: str) -> Path:
    if not path:
        raise DatasetError(f"dataset.{field} is required for this dataset")
    resolved = Path(path)
    if not resolved.exists():
        raise DatasetError(f"Dataset file not found: {resolved}")
    return resolved


class DatasetRepository(BaseRepository):
    """
    数据集读写.

    图像像素 v ∈ [0, 255] 映射到 v/255·2-1 ∈ [-1, 1].
    """

    _instance: ClassVar['DatasetRepository | None'] = None

    # ------------------------------------------------------------------
    # 文件格式
    # ------------------------------------------------------------------

    @staticmethod
    def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
        """
        读取带标签CSV: 表头 x0,...,x{d-1},label.

        Args:
            path: 文件路径

        Returns:
            (特征 (n, d), 标签 (n,))
        """
        path = Path(path)
        try:
            with open(path, encoding='utf-8') as f:
                header = f.readline().strip().split(',')
                if len(header) < 2 or header[-1] != LABEL_COLUMN:
                    raise DatasetError(
                        f"{path}: header must be x0,...,x{{d-1}},label"
                    )
                expected = [f'x{i}' for i in range(len(header) - 1)]
                if header[:-1] != expected:
                    raise DatasetError(
                        f"{path}: feature columns must be named "
                        f"x0..x{len(header) - 2}"
                    )
                data = np.loadtxt(
                    f, delimiter=',', dtype=np.float64, ndmin=2
                )
        except DatasetError:
            raise
        except OSError as e:
            raise DatasetError(f"Cannot read dataset {path}: {e}") from e
        except ValueError as e:
            raise DatasetError(f"{path}: malformed CSV row: {e}") from e

        if data.size == 0:
            data = data.reshape(0, len(header))
        if data.shape[1] != len(header):
            raise DatasetError(
                f"{path}: expected {len(header)} columns, "
                f"got {data.shape[1]}"
            )
        labels = data[:, -1]
        if np.any(labels < 0) or np.any(labels != np.floor(labels)):
            raise DatasetError(
                f"{path}: labels must be non-negative integers"
            )
        return data[:, :-1], labels.astype(np.int64)

    def write_dataset_csv(self, dataset: Dataset, path: str | Path) -> Path:
        """
        按带标签CSV格式写出数据集（样本展平）.

        Returns:
            实际写入的路径
        """
        flat = dataset.x.reshape(len(dataset), -1)
        columns = [f'x{i}' for i in range(flat.shape[1])] + [LABEL_COLUMN]
        rows = (
            {**{f'x{i}': repr(float(v)) for i, v in enumerate(row)},
             LABEL_COLUMN: int(label)}
            for row, label in zip(flat, dataset.y, strict=True)
        )
        return self.write_csv(path, columns, rows)

    @staticmethod
    def read_idx_images(path: str | Path) -> np.ndarray:
        """
        读取 IDX uint8 图像文件（magic 0x00000803）.

        Returns:
            (N, H, W) 的 uint8 数组
        """
        path = Path(path)
        try:
            with _open(path) as f:
                magic, count, rows, cols = struct.unpack('>IIII', f.read(16))
                if magic != IDX_IMAGES_MAGIC:
                    raise DatasetError(
                        f"{path}: bad IDX image magic {magic:#010x}"
                    )
                data = np.frombuffer(f.read(), dtype=np.uint8)
        except DatasetError:
            raise
        except (OSError, struct.error) as e:
            raise DatasetError(f"Cannot read IDX images {path}: {e}") from e
        if data.size != count * rows * cols:
            raise DatasetError(
                f"{path}: expected {count * rows * cols} pixels, "
                f"found {data.size}"
            )
        return data.reshape(count, rows, cols)

    @staticmethod
    def read_idx_labels(path: str | Path) -> np.ndarray:
        """
        读取 IDX uint8 标签文件（magic 0x00000801）.

        Returns:
            (N,) 的 int64 数组
        """
        path = Path(path)
        try:
            with _open(path) as f:
                magic, count = struct.unpack('>II', f.read(8))
                if magic != IDX_LABELS_MAGIC:
                    raise DatasetError(
                        f"{path}: bad IDX label magic {magic:#010x}"
                    )
                data = np.frombuffer(f.read(), dtype=np.uint8)
        except DatasetError:
            raise
        except (OSError, struct.error) as e:
            raise DatasetError(f"Cannot read IDX labels {path}: {e}") from e
        if data.size != count:
            raise DatasetError(
                f"{path}: header announces {count} labels, found {data.size}"
            )
        return data.astype(np.int64)

    @staticmethod
    def scale_pixels(images: np.ndarray) -> np.ndarray:
        """uint8 像素映射到 PIXEL_DOMAIN."""
        low, high = PIXEL_DOMAIN
        return images.astype(np.float64) / 255.0 * (high - low) + low

    @staticmethod
    def file_kind(path: str | Path) -> DatasetName:
        """按扩展名判断文件格式（.csv 为带标签CSV，否则为 IDX）."""
        if Path(path).suffix.lower() == '.csv':
            return DatasetName.CSV
        return DatasetName.IDX

    @staticmethod
    def domain_of(
        name: DatasetName, dataset: Dataset
    ) -> tuple[float, float]:
        """
        数据域的坐标上下界.

        IDX 图像为像素映射后的区间，其余数据取样本的取值范围.

        Args:
            name: 数据来源
            dataset: 数据集

        Returns:
            (下界, 上界)
        """
        if name == DatasetName.IDX or len(dataset) == 0:
            return PIXEL_DOMAIN
        return float(dataset.x.min()), float(dataset.x.max())

    # ------------------------------------------------------------------
    # 组装
    # ------------------------------------------------------------------

    def _read_pair(
        self, cfg: DatasetConfig, images: str | None, labels: str | None,
        prefix: str
    ) -> tuple[np.ndarray, np.ndarray]:
        if cfg.name == DatasetName.CSV:
            return self.read_csv(_require(images, f'{prefix}path'))
        pixels = self.read_idx_images(_require(images, f'{prefix}path'))
        targets = self.read_idx_labels(
            _require(labels, f'{prefix}labels_path')
        )
        if pixels.shape[0] != targets.shape[0]:
            raise DatasetError(
                f"{images}: {pixels.shape[0]} images but "
                f"{targets.shape[0]} labels"
            )
        x = self.scale_pixels(pixels)
        if cfg.flatten:
            x = x.reshape(x.shape[0], -1)
        else:
            x = x[:, None, :, :]
        return x, targets

    def _split(
        self, dataset: Dataset, fraction: float, seed: int
    ) -> tuple[Dataset, Dataset]:
        order = stream(seed, 'split').permutation(len(dataset))
        n_eval = int(round(fraction * len(dataset)))
        eval_index = np.sort(order[:n_eval])
        train_index = np.sort(order[n_eval:])
        return (
            dataset.subset(train_index, f'{dataset.name}:train'),
            dataset.subset(eval_index, f'{dataset.name}:eval'),
        )

    @staticmethod
    def _truncate(dataset: Dataset, max_samples: int) -> Dataset:
        if max_samples <= 0 or len(dataset) <= max_samples:
            return dataset
        return dataset.subset(np.arange(max_samples))

    def load(
        self, cfg: DatasetConfig, seed: int
    ) -> tuple[Dataset, Dataset]:
        """
        按配置加载训练集与评估集.

        Args:
            cfg: 数据集配置
            seed: 实验种子（用于合成数据与划分）

        Returns:
            (训练集, 评估集)

        Raises:
            DatasetError: 文件缺失或格式错误，信息中包含路径
        """
        if cfg.name in (DatasetName.TWO_MOONS, DatasetName.GAUSSIAN_MIXTURE):
            data_seed = derive_seeds(seed)['split']
            total = cfg.n_train + cfg.n_eval
            if cfg.name == DatasetName.TWO_MOONS:
                full = two_moons(total, cfg.noise, data_seed)
            else:
                full = gaussian_mixture_2d(
                    total, cfg.components, cfg.noise, data_seed
                )
            train = full.subset(np.arange(cfg.n_train), f'{full.name}:train')
            evaluation = full.subset(
                np.arange(cfg.n_train, total), f'{full.name}:eval'
            )
        else:
            x, y = self._read_pair(cfg, cfg.path, cfg.labels_path, '')
            if cfg.eval_path:
                x_eval, y_eval = self._read_pair(
                    cfg, cfg.eval_path, cfg.eval_labels_path, 'eval_'
                )
                if x_eval.shape[1:] != x.shape[1:]:
                    raise DatasetError(
                        f"{cfg.eval_path}: sample shape {x_eval.shape[1:]} "
                        f"does not match training data {x.shape[1:]}"
                    )
            else:
                x_eval = np.empty((0,) + x.shape[1:])
                y_eval = np.empty(0, dtype=np.int64)
            num_classes = int(max(
                y.max(initial=-1), y_eval.max(initial=-1)
            )) + 1
            if num_classes < 1:
                raise DatasetError(f"{cfg.path}: dataset has no samples")
            name = Path(cfg.path or str(cfg.name)).stem
            train = Dataset(x, y, num_classes, f'{name}:train')
            if cfg.eval_path:
                evaluation = Dataset(
                    x_eval, y_eval, num_classes, f'{name}:eval'
                )
            else:
                train, evaluation = self._split(
                    Dataset(x, y, num_classes, name), cfg.eval_fraction, seed
                )

        train = self._truncate(train, cfg.max_samples)
        evaluation = self._truncate(evaluation, cfg.max_samples)
        logger.info(
            f"Loaded dataset {cfg.name}: train={len(train)} "
            f"eval={len(evaluation)} shape={train.input_shape} "
            f"classes={train.num_classes}"
        )
        return train, evaluation

    def load_file(
        self,
        path: str | Path,
        labels_path: str | Path | None = None,
        flatten: bool = True,
        num_classes: int | None = None
    ) -> Dataset:
        """
        按扩展名读取单个数据文件（.csv 为带标签CSV，否则为 IDX）.

        Args:
            path: 数据文件
            labels_path: IDX 标签文件
            flatten: IDX 图像是否展平
            num_classes: 类别数（缺省取最大标签 + 1）

        Returns:
            Dataset
        """
        path = Path(path)
        cfg = DatasetConfig(
            name=self.file_kind(path),
            path=str(path),
            labels_path=str(labels_path) if labels_path else None,
            flatten=flatten,
        )
        x, y = self._read_pair(
            cfg, cfg.path, cfg.labels_path, ''
        )
        if num_classes is None:
            num_classes = max(int(y.max(initial=-1)) + 1, 1)
        return Dataset(x, y, num_classes, path.stem)
