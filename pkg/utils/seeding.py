"""随机种子派生."""
import numpy as np

# 顺序固定，新增流只能追加在末尾
STREAMS = (
    'network',
    'split',
    'shuffle',
    'chain',
    'buffer',
    'init',
    'attack',
    'ood',
    'sample',
)


def derive_seeds(seed: int) -> dict[str, int]:
    """
    从单一实验种子派生各随机流的种子.

    Args:
        seed: 实验种子

    Returns:
        流名称 -> 64位种子
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {
        name: int(child.generate_state(1, dtype=np.uint64)[0])
        for name, child in zip(STREAMS, children, strict=True)
    }


def stream(seed: int, name: str) -> np.random.Generator:
    """
    获取指定随机流的生成器.

    Args:
        seed: 实验种子
        name: 流名称

    Returns:
        numpy Generator
    """
    if name not in STREAMS:
        raise KeyError(f"Unknown random stream '{name}'")
    return np.random.default_rng(derive_seeds(seed)[name])
