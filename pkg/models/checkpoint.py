"""检查点内容."""
from dataclasses import dataclass

from core.network import SplitNetwork
from models.informative_init import InformativeInit
from models.replay_buffer import ReplayBuffer

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """
    一次训练状态快照.

    Attributes:
        net: 网络（结构 + 参数 + 批归一化统计量）
        init: 信息初始化（均匀初始化时为 None）
        buffer: 回放缓冲（可选）
        epoch: 已完成的最后一轮，-1 表示尚未训练
        config_text: 生成该检查点的实验配置（TOML文本）
        version: 写入时的程序版本
    """

    net: SplitNetwork
    init: InformativeInit | None = None
    buffer: ReplayBuffer | None = None
    epoch: int = -1
    config_text: str = ''
    version: str = ''
