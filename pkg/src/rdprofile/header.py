"""Code that creates the opening header panel."""
from __future__ import annotations

import sys
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import scipy
from rich.columns import Columns
from rich.console import Group
from rich.panel import Panel

from . import __version__

if TYPE_CHECKING:
    from pathlib import Path

    from .config import PipelineConfig


def generate_header_panel(
        command: str, config: PipelineConfig, out_dir: Path | None) -> Panel:
    """Create the panel shown before a command runs."""
    columns = [
        _generate_sysinfo_col(),
        _generate_run_col(command, config),
    ]
    if out_dir is not None:
        columns.append(Columns([f'output [cyan][bold]{out_dir}']))
    return Panel(Group(*columns), title=f'rdprofile {__version__}')


def _generate_sysinfo_col() -> Columns:
    v = sys.version_info
    return Columns([
        f'platform [green]{sys.platform}',
        f'python [cyan]{v.major}.{v.minor}.{v.micro}',
        f'numpy [cyan]{np.__version__}',
        f'scipy [cyan]{scipy.__version__}',
        f'pandas [cyan]{pd.__version__}',
    ])


def _generate_run_col(command: str, config: PipelineConfig) -> Columns:
    return Columns([
        f'command [cyan][bold]{command}',
        f'seed [cyan]{config.seed}',
        f'window [cyan]{config.window_len}',
        f'jobs [cyan]{config.n_jobs}',
    ])
