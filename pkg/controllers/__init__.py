"""Controllers包初始化: 每个子命令一个入口函数，返回退出码."""
from controllers.common import (
    EXIT_ABORTED,
    EXIT_FAILURE,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_VERSION,
    exit_code_for,
)
from controllers.eval_controller import cmd_attack, cmd_eval, cmd_ood
from controllers.init_controller import cmd_fit_init
from controllers.sample_controller import RANK_KEYS, cmd_sample
from controllers.train_controller import cmd_train

__all__ = [
    'EXIT_ABORTED',
    'EXIT_FAILURE',
    'EXIT_INPUT',
    'EXIT_OK',
    'EXIT_VERSION',
    'RANK_KEYS',
    'cmd_attack',
    'cmd_eval',
    'cmd_fit_init',
    'cmd_ood',
    'cmd_sample',
    'cmd_train',
    'exit_code_for',
]
