"""合成数据生成器."""
import numpy as np
from sklearn.datasets import make_blobs, make_moons

from models.dataset import Dataset


def two_moons(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """
    双月牙二维数据.

    Args:
        n: 样本数
        noise: 高斯噪声标准差
        seed: 随机种子

    Returns:
        两类数据集
    """
    x, y = make_moons(
        n_samples=n, noise=noise, random_state=seed % 2 ** 32
    )
    return Dataset(x, y, 2, name='two_moons')


def gaussian_mixture_2d(
    n: int,
    components: int = 4,
    noise: float = 0.1,
    seed: int = 0
) -> Dataset:
    """
    k 个分量的二维高斯混合，分量中心均匀分布在单位圆上，每个分量一类.

    Args:
        n: 样本数
        components: 分量（类别）数
        noise: 分量标准差
        seed: 随机种子

    Returns:
        k 类数据集
    """
    angles = 2.0 * np.pi * np.arange(components) / components
    centers = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    x, y = make_blobs(
        n_samples=n,
        centers=centers,
        cluster_std=noise,
        random_state=seed % 2 ** 32,
    )
    return Dataset(x, y, components, name='gaussian_mixture')


def uniform_noise(
    n: int,
    low: np.ndarray | float,
    high: np.ndarray | float,
    shape: tuple[int, ...],
    rng: np.random.Generator
) -> np.ndarray:
    """
    逐坐标均匀噪声（OOD 参照样本）.

    Args:
        n: 样本数
        low: 下界（标量或按坐标）
        high: 上界
        shape: 单个样本形状
        rng: 随机源

    Returns:
        (n, *shape) 数组
    """
    return rng.uniform(low, high, size=(n,) + tuple(shape))
