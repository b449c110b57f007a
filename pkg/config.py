"""应用配置."""
import os
import tomllib
from pathlib import Path

from dotenv import load_dotenv

# 加载环境变量
load_dotenv(override=False)


# 读取pyproject.toml获取版本号
def _load_version() -> str:
    """
    从pyproject.toml中读取项目版本.

    Returns:
        版本号，读取失败时为'0.0.0'
    """

    try:
        pyproject_path = Path(__file__).parent / 'pyproject.toml'
        if not pyproject_path.exists():
            return '0.0.0'

        with open(pyproject_path, 'rb') as f:
            data = tomllib.load(f)

        if 'project' in data:
            return str(data['project'].get('version', '0.0.0'))

        return '0.0.0'
    except Exception:
        # 如果读取失败，返回默认值
        return '0.0.0'


VERSION = _load_version()


class Config:
    """
    进程级配置类.

    只影响日志等运行环境，实验数值结果只由实验配置文件决定.
    """

    # 日志配置
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
    LOG_DIR = os.getenv('LOG_DIR', 'logs')
    LOG_FILE = os.getenv('LOG_FILE', 'jemdesk.log')

    # 版本号（写入检查点元数据）
    VERSION = VERSION

    # 评估时单次前向的最大样本数
    EVAL_CHUNK_SIZE = int(
        os.getenv('EVAL_CHUNK_SIZE', 1024)
    )
