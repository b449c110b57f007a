"""测试用的小型网络构造函数."""
import numpy as np

from core.layers import BatchNorm, Conv2d, Dense, ReLU
from core.network import SplitNetwork


def randomize_batch_norm(net: SplitNetwork, rng: np.random.Generator) -> None:
    """把批归一化的参数与滑动统计量设为非平凡值."""
    for _, layer in net.layers():
        if isinstance(layer, BatchNorm):
            features = layer.params['weight'].shape
            layer.params['weight'] = rng.uniform(0.5, 1.5, size=features)
            layer.params['bias'] = rng.normal(0.0, 0.2, size=features)
            layer.state['running_mean'] = rng.normal(0.0, 0.3, size=features)
            layer.state['running_var'] = rng.uniform(0.5, 2.0, size=features)


def smooth_network(
    input_dim: int, width: int, num_classes: int, rng: np.random.Generator
) -> SplitNetwork:
    """无 ReLU 的 dense -> BN -> dense 网络（处处光滑，适合有限差分）."""
    first = Dense((input_dim,), width, rng)
    body = [BatchNorm((width,)), Dense((width,), num_classes, rng)]
    net = SplitNetwork(first, body, num_classes)
    randomize_batch_norm(net, rng)
    return net


def smooth_conv_network(
    input_shape: tuple[int, int, int],
    channels: int,
    num_classes: int,
    rng: np.random.Generator
) -> SplitNetwork:
    """无 ReLU 的 conv -> BN -> dense 网络."""
    first = Conv2d(input_shape, channels, rng=rng)
    body = [
        BatchNorm(first.output_shape),
        Dense(first.output_shape, num_classes, rng),
    ]
    net = SplitNetwork(first, body, num_classes)
    randomize_batch_norm(net, rng)
    return net


def relu_network(
    input_dim: int, num_classes: int, rng: np.random.Generator
) -> SplitNetwork:
    """dense -> ReLU -> dense 网络（无批归一化）."""
    first = Dense((input_dim,), 6, rng)
    body = [ReLU((6,)), Dense((6,), num_classes, rng)]
    return SplitNetwork(first, body, num_classes)


def linear_network(
    input_dim: int, num_classes: int, rng: np.random.Generator
) -> SplitNetwork:
    """单个 dense 层的线性分类器."""
    first = Dense((input_dim,), num_classes, rng)
    first.params['bias'] = rng.normal(size=num_classes)
    return SplitNetwork(first, [], num_classes)
