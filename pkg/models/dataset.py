"""带标签数据集."""
from dataclasses import dataclass

import numpy as np

from core.exceptions import DatasetError
from core.layers import Tensor


@dataclass
class Dataset:
    """
    内存中的带标签数据集.

    Attributes:
        x: 样本 (n, *input_shape)，float64
        y: 标签 (n,)，int64
        num_classes: 类别数
        name: 名称（用于日志）
    """

    x: Tensor
    y: np.ndarray
    num_classes: int
    name: str = 'dataset'

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.shape[0] != self.y.shape[0]:
            raise DatasetError(
                f"{self.name}: {self.x.shape[0]} samples but "
                f"{self.y.shape[0]} labels"
            )
        if self.y.size and (
            self.y.min() < 0 or self.y.max() >= self.num_classes
        ):
            raise DatasetError(
                f"{self.name}: labels must lie in [0, {self.num_classes})"
            )

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def input_shape(self) -> tuple[int, ...]:
        """单个样本形状."""
        return tuple(int(v) for v in self.x.shape[1:])

    def subset(self, index: np.ndarray, name: str | None = None) -> 'Dataset':
        """
        按索引取子集.

        Args:
            index: 样本索引
            name: 新名称

        Returns:
            子数据集
        """
        return Dataset(
            self.x[index], self.y[index], self.num_classes,
            name or self.name
        )

    def class_counts(self) -> np.ndarray:
        """各类别样本数."""
        return np.bincount(self.y, minlength=self.num_classes)

    def reshaped(self, input_shape: tuple[int, ...]) -> 'Dataset':
        """改变样本形状（如图像展平）."""
        return Dataset(
            self.x.reshape((len(self),) + tuple(input_shape)),
            self.y, self.num_classes, self.name
        )
