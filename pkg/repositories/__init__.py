"""Repository层初始化."""
from repositories.base_repository import BaseRepository
from repositories.checkpoint_repository import CheckpointRepository
from repositories.config_repository import ConfigRepository
from repositories.dataset_repository import DatasetRepository
from repositories.report_repository import ReportRepository

__all__ = [
    'BaseRepository',
    'CheckpointRepository',
    'ConfigRepository',
    'DatasetRepository',
    'ReportRepository',
]
