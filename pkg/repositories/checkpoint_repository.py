"""检查点Repository（NumPy .npz 容器）."""
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from config import Config
from core.exceptions import CheckpointError, CheckpointVersionError
from core.layers import Tensor
from core.network import SplitNetwork
from models.checkpoint import FORMAT_VERSION, Checkpoint
from models.informative_init import CovarianceForm, InformativeInit
from models.replay_buffer import ReplayBuffer
from repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)


def _le(value: Any) -> np.ndarray:
    """转换为小端存储的数组."""
    array = np.asarray(value)
    if array.dtype.kind in 'fiu':
        return array.astype(array.dtype.newbyteorder('<'))
    if array.dtype.kind == 'U':
        return array.astype(f'<U{max(array.dtype.itemsize // 4, 1)}')
    return array


def _text(value: str) -> np.ndarray:
    return _le(np.array(value))


class CheckpointRepository(BaseRepository):
    """
    检查点读写.

    容器中的数组全部以小端存储，分组前缀为 param/ state/ init/ replay/ meta/.
    """

    _instance: ClassVar['CheckpointRepository | None'] = None

    # ------------------------------------------------------------------
    # 分组编码
    # ------------------------------------------------------------------

    @staticmethod
    def _encode_init(init: InformativeInit) -> dict[str, np.ndarray]:
        return {
            'init/pi': _le(init.pi),
            'init/mu': _le(init.mu),
            'init/cov_factor': _le(init.cov_factor),
            'init/jitter': _le(init.jitter),
            'init/covariance': _text(str(init.covariance)),
        }

    @staticmethod
    def _decode_init(arrays: dict[str, np.ndarray]) -> InformativeInit | None:
        if 'init/pi' not in arrays:
            return None
        return InformativeInit(
            pi=arrays['init/pi'].astype(np.float64),
            mu=arrays['init/mu'].astype(np.float64),
            cov_factor=arrays['init/cov_factor'].astype(np.float64),
            jitter=arrays['init/jitter'].astype(np.float64),
            covariance=CovarianceForm(str(arrays['init/covariance'])),
        )

    @staticmethod
    def _encode_buffer(buf: ReplayBuffer) -> dict[str, np.ndarray]:
        encoded = {
            'replay/capacity': _le(np.int64(buf.capacity)),
            'replay/rho': _le(np.float64(buf.rho)),
            'replay/seed': _le(np.uint64(buf.seed)),
            'replay/size': _le(np.int64(buf.size)),
            'replay/rng_state': _text(json.dumps(buf.rng.bit_generator.state)),
        }
        if buf.slots is not None:
            encoded['replay/slots'] = _le(buf.occupied())
        return encoded

    @staticmethod
    def _decode_buffer(arrays: dict[str, np.ndarray]) -> ReplayBuffer | None:
        if 'replay/capacity' not in arrays:
            return None
        buf = ReplayBuffer(
            capacity=int(arrays['replay/capacity']),
            rho=float(arrays['replay/rho']),
            seed=int(arrays['replay/seed']),
        )
        buf.rng.bit_generator.state = json.loads(
            str(arrays['replay/rng_state'])
        )
        size = int(arrays['replay/size'])
        if size:
            stored = arrays['replay/slots'].astype(np.float64)
            buf.slots = np.empty((buf.capacity,) + stored.shape[1:])
            buf.slots[:size] = stored
            buf.size = size
        return buf

    # ------------------------------------------------------------------
    # 读写
    # ------------------------------------------------------------------

    def _write(self, path: str | Path, arrays: dict[str, np.ndarray]) -> Path:
        target = self.unique_path(path)
        self.ensure_dir(target.parent)
        with open(target, 'wb') as f:
            np.savez(f, **arrays)
        return target

    def _read(self, path: str | Path) -> dict[str, np.ndarray]:
        path = Path(path)
        try:
            with np.load(path, allow_pickle=False) as data:
                arrays = {key: data[key] for key in data.files}
        except (zipfile.BadZipFile, ValueError) as e:
            raise CheckpointError(
                f"{path} is not a valid checkpoint container: {e}"
            ) from e
        if 'format_version' not in arrays:
            raise CheckpointError(f"{path} has no format_version entry")
        found = int(arrays['format_version'])
        if found != FORMAT_VERSION:
            raise CheckpointVersionError(found, FORMAT_VERSION)
        return arrays

    def save(self, checkpoint: Checkpoint, path: str | Path) -> Path:
        """
        保存检查点（目标已存在时自动加后缀）.

        Args:
            checkpoint: 检查点内容
            path: 目标路径

        Returns:
            实际写入的路径
        """
        net = checkpoint.net
        arrays: dict[str, np.ndarray] = {
            'format_version': _le(np.int64(FORMAT_VERSION)),
            'architecture': _text(json.dumps(net.describe(), sort_keys=True)),
            'meta/epoch': _le(np.int64(checkpoint.epoch)),
            'meta/config': _text(checkpoint.config_text),
            'meta/version': _text(checkpoint.version or Config.VERSION),
        }
        for name, value in net.named_parameters().items():
            arrays[f'param/{name}'] = _le(value)
        for name, value in net.named_state().items():
            arrays[f'state/{name}'] = _le(value)
        if checkpoint.init is not None:
            arrays.update(self._encode_init(checkpoint.init))
        if checkpoint.buffer is not None:
            arrays.update(self._encode_buffer(checkpoint.buffer))

        target = self._write(path, arrays)
        logger.info(
            f"Saved checkpoint (epoch {checkpoint.epoch}) to {target}"
        )
        return target

    def load(self, path: str | Path) -> Checkpoint:
        """
        读取检查点.

        Args:
            path: 检查点路径

        Returns:
            Checkpoint

        Raises:
            CheckpointVersionError: 格式版本不匹配
            CheckpointError: 容器损坏或缺少内容
        """
        arrays = self._read(path)
        if 'architecture' not in arrays:
            raise CheckpointError(f"{path} holds no network architecture")
        try:
            net = SplitNetwork.from_descriptor(
                json.loads(str(arrays['architecture']))
            )
            params: dict[str, Tensor] = {
                key[len('param/'):]: value
                for key, value in arrays.items() if key.startswith('param/')
            }
            state: dict[str, Tensor] = {
                key[len('state/'):]: value
                for key, value in arrays.items() if key.startswith('state/')
            }
            net.load_arrays(params, state)
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"{path}: corrupt network data: {e}") from e

        checkpoint = Checkpoint(
            net=net,
            init=self._decode_init(arrays),
            buffer=self._decode_buffer(arrays),
            epoch=int(arrays.get('meta/epoch', -1)),
            config_text=str(arrays.get('meta/config', '')),
            version=str(arrays.get('meta/version', '')),
        )
        logger.info(
            f"Loaded checkpoint from {path} (epoch {checkpoint.epoch}, "
            f"{net.num_parameters()} parameters)"
        )
        return checkpoint

    def save_init(self, init: InformativeInit, path: str | Path) -> Path:
        """
        单独保存信息初始化（不含网络的容器）.

        Returns:
            实际写入的路径
        """
        arrays = {'format_version': _le(np.int64(FORMAT_VERSION))}
        arrays.update(self._encode_init(init))
        target = self._write(path, arrays)
        logger.info(f"Saved informative initializer to {target}")
        return target

    def load_init(self, path: str | Path) -> InformativeInit:
        """
        读取信息初始化（接受完整检查点或单独的初始化容器）.

        Raises:
            CheckpointError: 容器中没有初始化分组
        """
        init = self._decode_init(self._read(path))
        if init is None:
            raise CheckpointError(f"{path} holds no informative initializer")
        return init
