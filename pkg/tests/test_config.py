"""Tests for configuration loading."""
from __future__ import annotations

import pytest

from rdprofile.config import (
    DEFAULT_EPS_GRID, EnergyConfig, GeneratorConfig, PipelineConfig,
    load_config)
from rdprofile.errors import ConfigError, InputError


@pytest.fixture
def toml_file(tmp_path):
    """Create a TOML file; returns a function."""
    def make(text, name='rdprofile.toml'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path

    return make


def test_defaults():
    """Without a file the documented defaults are used."""
    config = load_config()
    assert config.window_len == 500
    assert config.selection_k == 20
    assert config.folds == 10
    assert config.eps_grid == DEFAULT_EPS_GRID
    assert config.energy == EnergyConfig()
    assert config.generator == GeneratorConfig()
    assert config.energy.max_payload_bytes == 114
    assert config.energy.header_bytes_per_packet == 13


def test_file_values(toml_file):
    """File values override the defaults, section by section."""
    path = toml_file(
        '[pipeline]\n'
        'window_len = 200\n'
        'eps_grid = [1.0, 2.0]\n'
        '[generator]\n'
        'harmonics = [0.3]\n'
        '[energy]\n'
        'e_tx_per_bit = 1e-7\n')
    config = load_config(path)
    assert config.window_len == 200
    assert config.eps_grid == (1.0, 2.0)
    assert config.generator.harmonics == (0.3,)
    assert config.energy.e_tx_per_bit == 1e-7
    assert config.folds == 10


def test_overrides(toml_file):
    """Overrides beat the file; None means not overridden."""
    path = toml_file('[pipeline]\nseed = 4\nfolds = 5\n')
    config = load_config(path, seed=9, folds=None)
    assert config.seed == 9
    assert config.folds == 5


@pytest.mark.parametrize('text', [
    '[pipeline]\ncolour = 1\n',
    '[plotting]\nwidth = 3\n',
    '[pipeline]\nfolds = 1\n',
    '[pipeline]\neps_grid = [2.0, 1.0]\n',
    '[generator]\njitter = 1.5\n',
    '[energy]\nmax_payload_bytes = 0\n',
    '[energy]\nbits_per_sample = 32\n',
    'this is not toml\n',
])
def test_bad_config(toml_file, text):
    """Invalid configurations are configuration errors."""
    with pytest.raises(ConfigError):
        load_config(toml_file(text))


def test_config_errors_are_input_errors(tmp_path):
    """A missing file is a configuration, and so an input, error."""
    with pytest.raises(InputError):
        load_config(tmp_path / 'missing.toml')


@pytest.mark.parametrize('energy_text', [
    'e_tx_per_bit = 5e-8\n',
    '[energy]\ne_tx_per_bit = 5e-8\n',
])
def test_energy_config_file(toml_file, energy_text):
    """A separate energy file may be flat or hold an energy table."""
    energy = toml_file(energy_text, name='energy.toml')
    path = toml_file(
        f'[pipeline]\nenergy_config_path = "{energy.as_posix()}"\n')
    assert load_config(path).energy.e_tx_per_bit == 5e-8


def test_replace_ignores_none():
    """Replacing with None values changes nothing."""
    config = PipelineConfig()
    assert config.replace(seed=None) == config
    assert config.replace(seed=3).seed == 3


def test_to_dict():
    """The dictionary form nests sections and uses lists."""
    data = PipelineConfig().to_dict()
    assert data['eps_grid'] == list(DEFAULT_EPS_GRID)
    assert data['energy']['e_tx_per_bit'] == 2.3e-7
    assert data['generator']['harmonics'] == [0.5, 0.25]
    assert EnergyConfig.from_mapping(data['energy']) == EnergyConfig()
