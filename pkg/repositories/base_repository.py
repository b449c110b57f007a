"""基础Repository类."""
import csv
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any, ClassVar

logger = logging.getLogger(__name__)


class BaseRepository:
    """
    基础Repository，提供输出目录与文件写入的通用操作.

    新文件从不覆盖已有文件: name.ext 已存在时依次尝试 name.1.ext、name.2.ext …
    """

    _instance: ClassVar['BaseRepository | None'] = None

    @classmethod
    def get_instance(cls) -> 'BaseRepository':
        """
        获取单例实例，如果不存在则创建.

        Returns:
            Repository实例
        """
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """重置单例实例."""
        cls._instance = None

    @staticmethod
    def ensure_dir(directory: str | Path) -> Path:
        """
        创建目录（已存在则忽略）.

        Args:
            directory: 目录路径

        Returns:
            目录 Path
        """
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def unique_path(path: str | Path) -> Path:
        """
        返回不与已有文件冲突的路径.

        Args:
            path: 期望路径

        Returns:
            path 本身或带数字后缀的路径
        """
        path = Path(path)
        if not path.exists():
            return path
        suffix = ''.join(path.suffixes[-1:])
        stem = path.name[:len(path.name) - len(suffix)]
        index = 1
        while True:
            candidate = path.with_name(f'{stem}.{index}{suffix}')
            if not candidate.exists():
                return candidate
            index += 1

    def write_csv(
        self,
        path: str | Path,
        columns: Sequence[str],
        rows: Iterable[Mapping[str, Any]],
        unique: bool = True
    ) -> Path:
        """
        写入CSV文件（LF换行，'.' 小数点）.

        Args:
            path: 目标路径
            columns: 列名
            rows: 行字典
            unique: 是否避免覆盖已有文件

        Returns:
            实际写入的路径
        """
        target = self.unique_path(path) if unique else Path(path)
        self.ensure_dir(target.parent)
        with open(target, 'w', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=list(columns),
                                    lineterminator='\n')
            writer.writeheader()
            count = 0
            for row in rows:
                writer.writerow(row)
                count += 1
        logger.info(f"Wrote {count} rows to {target}")
        return target

    @staticmethod
    def append_csv_row(
        path: str | Path,
        columns: Sequence[str],
        row: Mapping[str, Any]
    ) -> None:
        """
        追加一行（文件为空时先写表头）.

        Args:
            path: 已选定的文件路径
            columns: 列名
            row: 行字典
        """
        target = Path(path)
        new_file = not target.exists() or target.stat().st_size == 0
        with open(target, 'a', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=list(columns),
                                    lineterminator='\n')
            if new_file:
                writer.writeheader()
            writer.writerow(row)
