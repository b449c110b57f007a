"""实验配置Repository（TOML）."""
import json
import logging
import math
import tomllib
import types
from dataclasses import fields
from enum import Enum
from pathlib import Path
from typing import Any, ClassVar, Union, get_args, get_origin, get_type_hints

from core.exceptions import ConfigError
from models.experiment_config import (
    ArchitectureConfig,
    DatasetConfig,
    EvalOptions,
    ExperimentConfig,
    InitOptions,
)
from models.sampler_config import SamplerConfig
from models.train_config import TrainConfig
from repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)

EXPERIMENT_SECTION = 'experiment'
EXPERIMENT_KEYS = ('seed', 'out_dir')

# 段名 -> (ExperimentConfig 字段, 数据类)
SECTIONS: dict[str, tuple[str, type]] = {
    'dataset': ('dataset', DatasetConfig),
    'architecture': ('architecture', ArchitectureConfig),
    'sampler': ('sampler', SamplerConfig),
    'train': ('train', TrainConfig),
    'init': ('init', InitOptions),
    'eval': ('eval', EvalOptions),
}


def _is_derived(f: Any) -> bool:
    return bool(f.metadata.get('derived', False))


def _coerce(value: Any, hint: Any, where: str) -> Any:
    """按类型注解转换TOML值."""
    origin = get_origin(hint)
    if origin in (Union, types.UnionType):
        options = [a for a in get_args(hint) if a is not type(None)]
        return _coerce(value, options[0], where)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        item = get_args(hint)[0]
        return tuple(_coerce(v, item, where) for v in value)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as e:
            choices = ', '.join(str(m.value) for m in hint)
            raise ConfigError(
                f"{where}: {value!r} is not one of {choices}"
            ) from e
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported field type {hint}")


def _build(cls: type, section: str, table: dict[str, Any]) -> Any:
    """根据TOML表构造数据类，未知键报错."""
    hints = get_type_hints(cls)
    allowed = {f.name: f for f in fields(cls) if not _is_derived(f)}
    kwargs = {}
    for key, value in table.items():
        if key not in allowed:
            raise ConfigError(f"Unknown config key '{section}.{key}'")
        kwargs[key] = _coerce(value, hints[key], f'{section}.{key}')
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [{section}] section: {e}") from e


def _format(value: Any) -> str:
    """格式化单个TOML值."""
    if isinstance(value, Enum):
        return json.dumps(str(value.value))
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, tuple | list):
        return '[' + ', '.join(_format(v) for v in value) + ']'
    raise ConfigError(f"Cannot serialize value {value!r}")


def _table_lines(obj: Any) -> list[str]:
    lines = []
    for f in fields(obj):
        if _is_derived(f):
            continue
        value = getattr(obj, f.name)
        if value is None:
            continue
        lines.append(f'{f.name} = {_format(value)}')
    return lines


class ConfigRepository(BaseRepository):
    """实验配置的读写."""

    _instance: ClassVar['ConfigRepository | None'] = None

    def loads(self, text: str, source: str = '<string>') -> ExperimentConfig:
        """
        解析TOML文本.

        Args:
            text: TOML内容
            source: 来源（用于错误信息）

        Returns:
            ExperimentConfig

        Raises:
            ConfigError: 语法错误、未知段/键或取值不合法
        """
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{source}: invalid TOML: {e}") from e

        kwargs: dict[str, Any] = {}
        for section, table in data.items():
            if not isinstance(table, dict):
                raise ConfigError(
                    f"{source}: top-level key '{section}' must be a section"
                )
            if section == EXPERIMENT_SECTION:
                hints = get_type_hints(ExperimentConfig)
                for key, value in table.items():
                    if key not in EXPERIMENT_KEYS:
                        raise ConfigError(
                            f"Unknown config key '{section}.{key}'"
                        )
                    kwargs[key] = _coerce(
                        value, hints[key], f'{section}.{key}'
                    )
            elif section in SECTIONS:
                name, cls = SECTIONS[section]
                kwargs[name] = _build(cls, section, table)
            else:
                raise ConfigError(f"Unknown config section '[{section}]'")
        return ExperimentConfig(**kwargs)

    def load(self, path: str | Path) -> ExperimentConfig:
        """
        读取配置文件.

        Args:
            path: TOML文件路径

        Returns:
            ExperimentConfig
        """
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        config = self.loads(text, str(path))
        logger.info(f"Loaded experiment config from {path}")
        return config

    def dumps(self, config: ExperimentConfig) -> str:
        """
        序列化为TOML文本（派生字段不写入）.

        Args:
            config: 实验配置

        Returns:
            TOML文本
        """
        lines = [f'[{EXPERIMENT_SECTION}]']
        lines += [
            f'{key} = {_format(getattr(config, key))}'
            for key in EXPERIMENT_KEYS
        ]
        for section, (name, _) in SECTIONS.items():
            lines.append('')
            lines.append(f'[{section}]')
            lines += _table_lines(getattr(config, name))
        return '\n'.join(lines) + '\n'

    def save(
        self,
        config: ExperimentConfig,
        path: str | Path,
        unique: bool = True
    ) -> Path:
        """
        写入配置文件.

        Args:
            config: 实验配置
            path: 目标路径
            unique: 是否避免覆盖已有文件

        Returns:
            实际写入的路径
        """
        target = self.unique_path(path) if unique else Path(path)
        self.ensure_dir(target.parent)
        target.write_text(self.dumps(config), encoding='utf-8')
        logger.info(f"Saved experiment config to {target}")
        return target

