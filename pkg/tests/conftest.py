"""Pytest configuration module."""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from rdprofile import features, timeseries
from rdprofile.timeseries import TimeSeriesWindow

if TYPE_CHECKING:
    from pathlib import Path


def pytest_addoption(parser):
    """Add command line options for the rdprofile tests."""
    group = parser.getgroup('rdprofile', 'rdprofile tests')
    group.addoption(
        '--acceptance',
        action='store_true',
        help='Run the slow, full size, acceptance tests.',
    )


def pytest_configure(config):
    config.addinivalue_line(
        'markers', 'acceptance: Full size runs of the synthetic corpus.')


@pytest.hookimpl
def pytest_collection_modifyitems(
        session: pytest.Session,                                 # noqa: ARG001
        config: pytest.Config,
        items: list[pytest.Item],
    ):
    """Skip acceptance tests unless they are asked for."""
    if config.getoption('--acceptance'):
        return
    skip = pytest.mark.skip(reason='needs --acceptance')
    for item in items:
        if 'acceptance' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded random number generator."""
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def small_corpus() -> list[TimeSeriesWindow]:
    """Twelve synthetic windows of every class, 200 samples each."""
    return timeseries.gen_corpus(12, 200, seed=100)


@pytest.fixture(scope='session')
def small_matrix(small_corpus) -> features.SignalFeatureMatrix:
    """The normalized feature matrix of the small corpus."""
    return features.normalize(features.build_matrix(small_corpus))


@pytest.fixture
def csv_file(tmp_path: Path):
    """Create a CSV file of values; returns a function."""
    def make(values, name='series.csv', header=None, timestamps=False):
        lines = [header] if header else []
        for i, v in enumerate(values):
            lines.append(f'{i},{v}' if timestamps else f'{v}')
        path = tmp_path / name
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path

    return make
