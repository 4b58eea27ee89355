"""Console reporting; logging, stage timing, summary tables and errors.

All human oriented output goes to a Rich console on stderr, so that stdout
stays free and result files never contain log text.
"""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from typing import TYPE_CHECKING

import numpy as np
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.padding import Padding
from rich.panel import Panel
from rich.table import Table
from rich.traceback import Traceback

from .progress import CountingBar, ProgressDisplay, TextBar

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping, Sequence

    import pandas as pd

    from .classify import CvReport
    from .compression import RdCurve
    from .errors import RdProfileError
    from .reduce import SelectionResult

HORIZONTAL_PAD = (0, 1, 0, 1)

log_levels = {
    'quiet': logging.WARNING,
    'normal': logging.INFO,
    'verbose': logging.DEBUG,
}


class TimeStatCollector:
    """A collector of timing statistics."""

    def __init__(self):
        self.stats: dict[str, list[float | None]] = {}

    def start(self, name: str) -> None:
        """Start timing something."""
        self.stats[name] = [time.monotonic(), None]

    def stop(self, name: str) -> None:
        """Stop timing something."""
        if name in self.stats and self.stats[name][1] is None:
            self.stats[name][1] = time.monotonic()

    def __iter__(self) -> Iterator[tuple[str, float]]:
        """Iterate over the timing stats of finished items."""
        for name, (start, stop) in self.stats.items():
            if stop is not None:
                yield name, stop - start


class Reporter:
    """Console, progress display and timing for one command run.

    :verbosity: One of 'quiet', 'normal' or 'verbose'.
    :console:   The console to use; by default a new stderr console.
    """

    def __init__(
            self, verbosity: str = 'normal', *,
            console: Console | None = None):
        self.console = console or Console(stderr=True, highlighter=None)
        self.verbosity = verbosity
        self.progress = ProgressDisplay(
            self.console,
            enabled=verbosity != 'quiet' and self.console.is_terminal)
        self.time_stats = TimeStatCollector()
        self.start_time = time.monotonic()

    def setup_logging(self) -> None:
        """Route the package's log records to this reporter's console."""
        logger = logging.getLogger('rdprofile')
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
        handler = RichHandler(
            console=self.console, show_path=False, markup=False,
            rich_tracebacks=False)
        handler.setFormatter(logging.Formatter('%(message)s'))
        logger.addHandler(handler)
        logger.setLevel(log_levels.get(self.verbosity, logging.INFO))
        logger.propagate = False

    def print(self, *renderables, **kwargs) -> None:
        """Print, deferring output while the progress display is live."""
        if self.verbosity == 'quiet':
            return
        self.progress.handle_output(
            self.console.print, *renderables, **kwargs)

    @contextmanager
    def stage(
            self, name: str, total: int | None = None,
        ) -> Iterator[StageHandle]:
        """Time a pipeline stage and show its progress.

        :name:  The stage name, also used as its progress label.
        :total: The number of items, if known. Without a total the stage
                shows descriptive text instead of a percentage.
        """
        bar = CountingBar(total=total, label=name) if total is not None \
            else TextBar(label=name)
        self.progress.add_bar(name, bar=bar)
        self.time_stats.start(name)
        try:
            yield StageHandle(self, name, bar)
        finally:
            self.time_stats.stop(name)
            self.progress.update(name, refresh=True)

    def finish(self) -> None:
        """Stop live output and print the timing summary."""
        self.progress.stop()
        if self.verbosity != 'quiet':
            self.console.print(self.format_timing_summary())

    def format_timing_summary(self) -> Panel:
        """Format the stage timings."""
        def add_row(value, text):
            a = Padding(str(value), pad=HORIZONTAL_PAD)
            b = Padding(text, pad=HORIZONTAL_PAD)
            table.add_row(a, b)

        table = Table.grid()
        table.add_column(justify='right', no_wrap=True)
        table.add_column(no_wrap=True)
        for name, t in self.time_stats:
            add_row(f'{t:6.2f}s', name)
        add_row(f'{time.monotonic() - self.start_time:6.2f}s', 'Overall')
        return Panel(
            table, title='Summary', style='bold blue', expand=False,
            border_style='bold blue')


class StageHandle:
    """Lets a running stage report progress."""

    def __init__(
            self, reporter: Reporter, name: str,
            bar: TextBar | CountingBar):
        self.reporter = reporter
        self.name = name
        self.bar = bar

    def advance(self, n: int = 1, text: str | None = None) -> None:
        """Count ``n`` more items as done."""
        self.reporter.progress.update(self.name, advance=n, text=text)

    def describe(self, text: str) -> None:
        """Change the text shown for the stage."""
        self.reporter.progress.update(self.name, text=text)


def format_curves_table(
        curves: Sequence[RdCurve], xi: Sequence[float]) -> Table:
    """Tabulate the rates of some curves at a few distortion values."""
    table = Table(title='Rate at distortion', box=box.SIMPLE_HEAD)
    table.add_column('curve')
    table.add_column('windows', justify='right')
    for x in xi:
        table.add_column(f'{x:g}%', justify='right')
    for c in curves:
        rates = np.interp(xi, c.distortions, c.rates)
        table.add_row(
            f'{c.algorithm.value}:{c.label}', str(c.n_windows),
            *(f'{r:.3f}' for r in rates))
    return table


def format_accuracy_table(reports: Mapping[str, CvReport]) -> Table:
    """Tabulate cross-validation results, one row per configuration."""
    class_names = sorted({
        name for r in reports.values() for name in r.class_accuracy})
    table = Table(title='Cross-validated accuracy', box=box.SIMPLE_HEAD)
    table.add_column('configuration')
    table.add_column('features', justify='right')
    table.add_column('accuracy', justify='right', style='bold')
    for name in class_names:
        table.add_column(name, justify='right')
    for config_name, r in reports.items():
        table.add_row(
            config_name, str(r.n_features), f'{r.accuracy:.3f}',
            *(f'{r.class_accuracy.get(n, float("nan")):.3f}'
                for n in class_names))
    return table


def format_selection_table(result: SelectionResult) -> Table:
    """Tabulate the features chosen by greedy selection."""
    table = Table(title='Selected features', box=box.SIMPLE_HEAD)
    table.add_column('step', justify='right')
    table.add_column('feature')
    table.add_column('accuracy', justify='right')
    for step, (name, acc) in enumerate(
            zip(result.feature_names, result.accuracy_trajectory), start=1):
        table.add_row(str(step), name, f'{acc:.3f}')
    return table


def format_simulation_table(summary: pd.DataFrame) -> Table:
    """Tabulate the all-node simulation aggregates."""
    table = Table(title='Energy per report period', box=box.SIMPLE_HEAD)
    for name in (
            'strategy', 'xi %', 'energy mJ', 'mean err %', 'max err %'):
        justify = 'left' if name == 'strategy' else 'right'
        table.add_column(name, justify=justify)
    overall = summary[summary['class'] == 'all']
    for row in overall.itertuples(index=False):
        table.add_row(
            row.strategy, f'{row.xi_pct:g}',
            f'{row.mean_energy_j * 1e3:.4f}',
            f'{row.mean_distortion_pct:.3f}',
            f'{row.max_distortion_pct:.3f}')
    return table


def format_error(exc: RdProfileError) -> Panel:
    """Format an expected error for the user."""
    return Panel(
        str(exc), title=type(exc).__name__, border_style='bold red',
        expand=False)


def format_internal_error(exc: BaseException) -> Panel:
    """Format details of an unexpected, internal, error."""
    trace = Traceback.extract(
        exc_type=type(exc), exc_value=exc, traceback=exc.__traceback__,
        show_locals=True)
    traceback = Traceback(trace=trace)
    return Panel(
        traceback, title='INTERNAL ERROR', subtitle='INTERNAL ERROR',
        border_style='bold red', box=box.DOUBLE_EDGE)
