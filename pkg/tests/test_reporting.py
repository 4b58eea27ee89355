"""Tests for console reporting and the progress display."""
from __future__ import annotations

import io
import logging

import pandas as pd
import pytest
from rich.console import Console

from rdprofile import progress, reporting
from rdprofile.classify import CvReport
from rdprofile.compression import Algorithm, RdCurve, RdPoint
from rdprofile.errors import ScenarioError
from rdprofile.progress import CountingBar, ProgressDisplay, TextBar
from rdprofile.reduce import SelectionResult
from rdprofile.reporting import Reporter


@pytest.fixture
def console() -> Console:
    """A console that records to a string."""
    return Console(file=io.StringIO(), width=100, highlighter=None)


def rendered(console: Console, *renderables) -> str:
    """Print renderables and return all the text output so far."""
    for r in renderables:
        console.print(r)
    return console.file.getvalue()


def test_long_enough():
    """The trigger fires only after the interval has passed."""
    assert next(progress.long_enough(0.0))
    assert not next(progress.long_enough(1000.0))


def test_counting_bar(console):
    """Counting bars show a percentage and the item count."""
    display = ProgressDisplay(console, enabled=False)
    display.add_bar('RD sweep', bar=CountingBar(total=4, label='RD sweep'))
    display.update('RD sweep', advance=1, text='noisy')
    line = display.get_renderable()
    assert '[25 %]' in line
    assert '1/4 noisy' in line
    display.update('RD sweep', advance=3)
    assert '[100%]' in display.get_renderable()


def test_text_bar_alignment(console):
    """Labels are padded to the longest label."""
    display = ProgressDisplay(console, enabled=False)
    display.add_bar('a', bar=TextBar(label='a'))
    display.add_bar('longer', bar=TextBar(label='longer'))
    display.update('a', text='working [x]')
    first = display.get_renderable().splitlines()[0]
    assert first.startswith('a      ')
    assert first.endswith(r'working \[x]')
    assert display.status_width == 0


def test_output_is_immediate_when_not_live(console):
    """Without a live display, output requests run at once."""
    display = ProgressDisplay(console, enabled=False)
    calls = []
    display.handle_output(calls.append, 'hello')
    assert calls == ['hello']


def test_stage_timing(console):
    """Stages are timed and appear in the summary."""
    reporter = Reporter(console=console)
    with reporter.stage('Features', total=2) as stage:
        stage.advance(2)
    assert [name for name, _ in reporter.time_stats] == ['Features']
    reporter.finish()
    text = console.file.getvalue()
    assert 'Summary' in text
    assert 'Features' in text
    assert 'Overall' in text


def test_quiet_reporter_prints_nothing(console):
    """A quiet reporter suppresses normal output."""
    reporter = Reporter('quiet', console=console)
    reporter.print('hello')
    reporter.finish()
    assert console.file.getvalue() == ''


def test_setup_logging(console):
    """Package log records go to the reporter's console."""
    reporter = Reporter('verbose', console=console)
    reporter.setup_logging()
    reporter.setup_logging()
    logger = logging.getLogger('rdprofile')
    assert len(logger.handlers) == 1
    assert logger.level == logging.DEBUG
    logging.getLogger('rdprofile.netsim').debug('node %s', 'n-1')
    assert 'node n-1' in console.file.getvalue()


def test_curves_table(console):
    """The curves table shows interpolated rates."""
    curve = RdCurve(
        (RdPoint(0.0, 1.0), RdPoint(10.0, 0.5)), Algorithm.DCT, n_windows=3)
    text = rendered(console, reporting.format_curves_table([curve], [2.0]))
    assert 'dct:all' in text
    assert '0.900' in text


def test_accuracy_table(console):
    """The accuracy table has a column per class."""
    report = CvReport(
        'svm', 0.875, (0.75, 1.0), {'noisy': 1.0, 'trend': 0.75}, 2, 0, 5)
    text = rendered(
        console, reporting.format_accuracy_table({'svm/all': report}))
    for part in ('svm/all', '0.875', 'noisy', 'trend', '0.750'):
        assert part in text


def test_selection_table(console):
    """The selection table lists features by step."""
    result = SelectionResult((3, 1), (0.8, 0.9), ('acf_lag1', 'std'))
    text = rendered(console, reporting.format_selection_table(result))
    assert 'acf_lag1' in text
    assert '0.900' in text


def test_simulation_table(console):
    """The simulation table only shows the all-node aggregates."""
    summary = pd.DataFrame({
        'strategy': ['none', 'none'], 'class': ['all', 'noisy'],
        'xi_pct': [1.0, 1.0], 'mean_energy_j': [0.002, 0.003],
        'mean_distortion_pct': [0.0, 0.0], 'max_distortion_pct': [0.0, 0.0],
    })
    text = rendered(console, reporting.format_simulation_table(summary))
    assert '2.0000' in text
    assert '3.0000' not in text


def test_error_panels(console):
    """Expected errors are short; internal errors carry a traceback."""
    try:
        raise ScenarioError('node ids must be unique')          # noqa: TRY301
    except ScenarioError as exc:
        text = rendered(console, reporting.format_error(exc))
    assert 'ScenarioError' in text
    assert 'node ids must be unique' in text
    try:
        raise KeyError('boom')                                  # noqa: TRY301
    except KeyError as exc:
        text = rendered(console, reporting.format_internal_error(exc))
    assert 'INTERNAL ERROR' in text
