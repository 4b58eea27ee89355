"""Tests for the command line."""
from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest
from typer.testing import CliRunner

from rdprofile import cli, timeseries
from rdprofile.cli import FeatureSet, app
from rdprofile.errors import InputError
from rdprofile.timeseries import SignalClass

runner = CliRunner()

SMALL_CONFIG = '''\
[pipeline]
window_len = 100
eps_grid = [0.5, 2.0, 5.0, 10.0]
synthetic_per_class = 12
folds = 3
selection_k = 3
nodes_per_class = 2
xi_grid = [1.0, 4.0]
ffnn_epochs = 30
pca_max = 2
'''

PIPELINE_FILES = (
    'windows.csv', 'windows.json',
    'rd_ltc_noisy.csv', 'rd_ltc_all.csv', 'rd_dct_trend.csv',
    'rd_dct_all.json', 'rd_dct_windows.csv',
    'features.csv', 'features.json', 'pca_scatter.csv',
    'selection.json',
    'accuracy_grid.csv', 'accuracy_grid.json',
    'model_svm_all.json', 'model_ffnn_selected.json',
    'model_svm_selected.json',
    'simulation.csv', 'simulation.json', 'simulation_summary.csv',
)


def invoke(*args):
    """Run the command line, returning the click result."""
    return runner.invoke(app, [str(a) for a in args])


@pytest.fixture(scope='module')
def small_config(tmp_path_factory) -> Path:
    """A configuration for a fast run of the whole pipeline."""
    path = tmp_path_factory.mktemp('config') / 'small.toml'
    path.write_text(SMALL_CONFIG, encoding='utf-8')
    return path


@pytest.fixture(scope='module')
def pipeline_out(tmp_path_factory, small_config) -> Path:
    """The output directory of a small pipeline run."""
    out = tmp_path_factory.mktemp('pipeline')
    result = invoke('pipeline', '--config', small_config, '--out', out, '-q')
    assert result.exit_code == 0, result.output
    return out


def test_pipeline_writes_everything(pipeline_out):
    """The pipeline writes the results of every stage."""
    missing = [n for n in PIPELINE_FILES if not (pipeline_out / n).exists()]
    assert missing == []


def test_outputs_embed_the_config(pipeline_out):
    """JSON results carry the effective configuration."""
    data = json.loads((pipeline_out / 'selection.json').read_text())
    assert data['command'] == 'pipeline'
    assert data['config']['window_len'] == 100
    assert data['config']['energy']['e_tx_per_bit'] == 2.3e-7
    assert len(data['selected']) == 3


def test_pipeline_is_repeatable(tmp_path, small_config, pipeline_out):
    """A rerun with the same configuration gives identical files."""
    result = invoke('pipeline', '--config', small_config, '--out', tmp_path,
                    '-q')
    assert result.exit_code == 0, result.output
    for name in PIPELINE_FILES:
        assert (tmp_path / name).read_bytes() == \
            (pipeline_out / name).read_bytes(), name


def test_stages_run_separately(tmp_path, small_config, pipeline_out):
    """Single commands can pick up where the pipeline left off."""
    out = tmp_path / 'out'
    shutil.copytree(pipeline_out, out)
    args = ('--config', small_config, '--out', out, '-q')
    result = invoke(
        'train-eval', '--classifier', 'ffnn', '--features', 'selected-pca:2',
        *args)
    assert result.exit_code == 0, result.output
    data = json.loads(
        (out / 'accuracy_ffnn_selected-pca2.json').read_text())
    report = data['reports']['ffnn/selected-pca:2']
    assert report['n_features'] == 2
    assert len(report['fold_accuracy']) == 3

    scenario = tmp_path / 'scenario.json'
    scenario.write_text(json.dumps({
        'nodes': [{'id': 'q', 'class': 'quasi-periodic', 'seed': 3,
                   'assigned_class': 'quasi-periodic'}],
        'strategies': ['dct-ca'], 'xi_grid': [2]}))
    result = invoke('simulate', '--scenario', scenario, *args)
    assert result.exit_code == 0, result.output
    table = (out / 'simulation.csv').read_text().splitlines()
    assert len(table) == 2


def test_ingest_csv_with_class(tmp_path, csv_file):
    """CSV inputs can be given a class label."""
    path = csv_file([float(v % 7) for v in range(250)])
    result = invoke(
        'ingest', f'trend={path}', '--window-len', 50, '--out', tmp_path,
        '-q')
    assert result.exit_code == 0, result.output
    windows = timeseries.read_windows(tmp_path / 'windows.csv')
    assert len(windows) == 5
    assert all(w.class_label is SignalClass.TREND for w in windows)
    sources = json.loads((tmp_path / 'windows.json').read_text())['sources']
    assert sources[0]['class'] == 'trend'


@pytest.mark.parametrize('args', [
    ('ingest', 'missing.csv'),
    ('rd',),
    ('rd', '--algorithm', 'zip'),
    ('features',),
    ('simulate',),
])
def test_input_errors_exit_2(tmp_path, args):
    """Missing inputs and bad options give exit code 2."""
    result = invoke(*args, '--out', tmp_path, '-q')
    assert result.exit_code == 2


def test_bad_config_exits_2(tmp_path):
    """An invalid configuration file gives exit code 2."""
    config = tmp_path / 'bad.toml'
    config.write_text('[pipeline]\nfolds = 1\n')
    result = invoke('ingest', '--config', config, '--out', tmp_path, '-q')
    assert result.exit_code == 2


@pytest.mark.parametrize(('classifier', 'features'), [
    ('tree', 'all'), ('svm', 'pca'), ('svm', 'selected')])
def test_bad_train_eval_options_exit_2(pipeline_out, tmp_path, classifier,
                                       features):
    """Unknown classifiers and feature sets give exit code 2."""
    matrix = pipeline_out / 'features.csv'
    result = invoke(
        'train-eval', '--classifier', classifier, '--features', features,
        '--matrix', matrix, '--out', tmp_path, '-q')
    assert result.exit_code == 2


def test_computation_error_exits_3(tmp_path):
    """Too few samples for the folds gives exit code 3."""
    config = tmp_path / 'tiny.toml'
    config.write_text(
        '[pipeline]\nwindow_len = 60\nsynthetic_per_class = 2\n')
    common = ('--config', config, '--out', tmp_path, '-q')
    assert invoke('ingest', *common).exit_code == 0
    assert invoke('features', *common).exit_code == 0
    result = invoke('select', '--folds', 5, *common)
    assert result.exit_code == 3


def test_internal_error_exits_1(tmp_path, monkeypatch):
    """An unexpected exception gives exit code 1."""
    def broken(run, inputs):
        raise RuntimeError('unexpected')

    monkeypatch.setattr(cli, 'do_ingest', broken)
    result = invoke('ingest', '--out', tmp_path, '-q')
    assert result.exit_code == 1


@pytest.mark.parametrize(('text', 'expected'), [
    ('all', FeatureSet('all')),
    ('Selected', FeatureSet('selected')),
    ('pca:3', FeatureSet('all', 3)),
    ('selected-pca:2', FeatureSet('selected', 2)),
])
def test_feature_set_parse(text, expected):
    """Feature sets are parsed from their command line form."""
    fs = FeatureSet.parse(text)
    assert fs == expected
    assert str(fs) == text.lower()


@pytest.mark.parametrize('text', ['pca', 'all:3', 'pca:0', 'pca:x', 'raw'])
def test_feature_set_parse_errors(text):
    """Malformed feature sets are input errors."""
    with pytest.raises(InputError):
        FeatureSet.parse(text)


@pytest.mark.parametrize(('text', 'expected'), [
    ('noisy=a.csv', (SignalClass.NOISY, Path('a.csv'))),
    ('a.csv', (None, Path('a.csv'))),
    ('x=y.csv', (None, Path('x=y.csv'))),
])
def test_parse_input(text, expected):
    """Inputs may carry a class prefix."""
    assert cli._parse_input(text) == expected
