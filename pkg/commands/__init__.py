from .experiment_commands import (
    COMMANDS, CommandResult, cmd_families, cmd_generate, cmd_hard_instance, cmd_learn,
    cmd_sample, cmd_sweep, cmd_test, cmd_verify,
)

__all__ = [
    'COMMANDS', 'CommandResult', 'cmd_families', 'cmd_generate', 'cmd_hard_instance', 'cmd_learn',
    'cmd_sample', 'cmd_sweep', 'cmd_test', 'cmd_verify',
]
