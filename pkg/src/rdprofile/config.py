"""Configuration values and their loading from TOML files.

All configuration is held in frozen dataclasses whose defaults are the
documented defaults of the owning modules. A configuration file can override
any of them::

    [pipeline]
    window_len = 500
    folds = 10

    [generator]
    walk_amplitude = 0.2

    [energy]
    e_tx_per_bit = 2.3e-7
"""
from __future__ import annotations

import dataclasses
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Self

from .errors import ConfigError

DEFAULT_EPS_GRID = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0)
DEFAULT_XI_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)


class ConfigSection:
    """Mixin providing mapping conversion for configuration dataclasses."""

    section: ClassVar[str] = ''

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> Self:
        """Create an instance from a (TOML derived) mapping.

        Lists are converted to tuples. Unknown keys are rejected.
        """
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            msg = f'Unknown [{cls.section}] key(s): {", ".join(unknown)}'
            raise ConfigError(msg)
        values = {
            k: tuple(v) if isinstance(v, list) else v
            for k, v in data.items()}
        try:
            return cls(**values)
        except TypeError as exc:
            msg = f'Bad [{cls.section}] value: {exc}'
            raise ConfigError(msg) from exc

    def replace(self, **overrides: Any) -> Self:
        """Create a copy with some values replaced, ignoring ``None``."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON friendly dictionary."""
        def convert(value):
            if isinstance(value, ConfigSection):
                return value.to_dict()
            if isinstance(value, tuple):
                return list(value)
            return value

        return {
            f.name: convert(getattr(self, f.name))
            for f in dataclasses.fields(self)}


def _require(condition: bool, section: str, text: str) -> None:
    if not condition:
        msg = f'[{section}] {text}'
        raise ConfigError(msg)


@dataclass(frozen=True)
class GeneratorConfig(ConfigSection):
    """Parameters of the synthetic signal class generators."""

    section: ClassVar[str] = 'generator'

    walk_amplitude: float = 0.2
    period_min_divisor: float = 25.0
    period_max_divisor: float = 10.0
    jitter: float = 0.1
    amplitude: float = 1.0
    harmonics: tuple[float, ...] = (0.5, 0.25)
    periodic_noise: float = 0.05
    knot_spacing: int = 100
    trend_slope_min: float = 1.0
    trend_slope_max: float = 3.0
    knot_jitter: float = 0.1
    trend_noise: float = 0.01

    def __post_init__(self):
        name = self.section
        _require(self.walk_amplitude >= 0, name, 'walk_amplitude must be >= 0')
        _require(
            self.period_min_divisor >= self.period_max_divisor > 0, name,
            'need period_min_divisor >= period_max_divisor > 0')
        _require(0 <= self.jitter < 1, name, 'jitter must be in [0, 1)')
        _require(self.amplitude > 0, name, 'amplitude must be > 0')
        _require(self.periodic_noise >= 0, name, 'periodic_noise must be >= 0')
        _require(self.knot_spacing >= 1, name, 'knot_spacing must be >= 1')
        _require(
            0 <= self.trend_slope_min <= self.trend_slope_max, name,
            'need 0 <= trend_slope_min <= trend_slope_max')
        _require(self.knot_jitter >= 0, name, 'knot_jitter must be >= 0')
        _require(self.trend_noise >= 0, name, 'trend_noise must be >= 0')


@dataclass(frozen=True)
class EnergyConfig(ConfigSection):
    """Energy and radio parameters of the report period model.

    The default values are only calibrated to keep qualitative orderings
    between strategies; they do not describe a particular radio.
    """

    section: ClassVar[str] = 'energy'

    e_tx_per_bit: float = 2.3e-7
    comp_c0: float = 1e-9
    comp_c1: float = 5e-9
    header_bytes_per_packet: int = 13
    max_payload_bytes: int = 114
    bits_per_sample: int = 16
    sampling_interval_s: float = 10.0
    retransmission_factor: float = 1.0

    def __post_init__(self):
        name = self.section
        for attr in (
                'e_tx_per_bit', 'comp_c0', 'comp_c1',
                'header_bytes_per_packet', 'sampling_interval_s',
                'retransmission_factor'):
            _require(getattr(self, attr) > 0, name, f'{attr} must be > 0')
        _require(
            self.max_payload_bytes >= 1, name,
            'max_payload_bytes must be >= 1')
        _require(
            8 <= self.bits_per_sample <= 64, name,
            'bits_per_sample must be in [8, 64]')


@dataclass(frozen=True)
class PipelineConfig(ConfigSection):
    """Effective configuration of the command line pipeline."""

    section: ClassVar[str] = 'pipeline'

    window_len: int = 500
    eps_grid: tuple[float, ...] = DEFAULT_EPS_GRID
    average_grid_step: float = 0.25
    average_grid_max: float = 20.0
    bank_version: str = 'bank-24/1'
    selection_k: int = 20
    folds: int = 10
    seed: int = 0
    bits_per_sample: int = 16
    svm_c: float = 1.0
    ffnn_hidden: int = 10
    ffnn_epochs: int = 500
    ffnn_rate: float = 0.1
    pca_max: int = 10
    synthetic_per_class: int = 100
    nodes_per_class: int = 10
    xi_grid: tuple[float, ...] = DEFAULT_XI_GRID
    n_jobs: int = 1
    energy_config_path: str = ''
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)

    def __post_init__(self):
        name = self.section
        _require(self.window_len >= 2, name, 'window_len must be >= 2')
        _require(bool(self.eps_grid), name, 'eps_grid must not be empty')
        _require(
            all(e >= 0 for e in self.eps_grid)
                and list(self.eps_grid) == sorted(self.eps_grid),
            name, 'eps_grid must be non-negative and ascending')
        _require(
            self.average_grid_step > 0 and self.average_grid_max > 0, name,
            'average grid step and max must be > 0')
        _require(self.selection_k >= 1, name, 'selection_k must be >= 1')
        _require(self.folds >= 2, name, 'folds must be >= 2')
        _require(self.seed >= 0, name, 'seed must be >= 0')
        _require(
            8 <= self.bits_per_sample <= 64, name,
            'bits_per_sample must be in [8, 64]')
        _require(self.svm_c > 0, name, 'svm_c must be > 0')
        _require(self.ffnn_hidden >= 1, name, 'ffnn_hidden must be >= 1')
        _require(self.ffnn_epochs >= 1, name, 'ffnn_epochs must be >= 1')
        _require(self.ffnn_rate > 0, name, 'ffnn_rate must be > 0')
        _require(self.pca_max >= 1, name, 'pca_max must be >= 1')
        _require(
            self.synthetic_per_class >= 1, name,
            'synthetic_per_class must be >= 1')
        _require(
            self.nodes_per_class >= 1, name, 'nodes_per_class must be >= 1')
        _require(bool(self.xi_grid), name, 'xi_grid must not be empty')
        _require(self.n_jobs != 0, name, 'n_jobs must not be 0')


def load_config(path: Path | None = None, **overrides: Any) -> PipelineConfig:
    """Load the pipeline configuration.

    :path:      An optional TOML file with ``[pipeline]``, ``[generator]`` and
                ``[energy]`` sections.
    :overrides: Pipeline values that take precedence over the file. A value
                of ``None`` means "not overridden".
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with Path(path).open('rb') as f:
                data = tomllib.load(f)
        except OSError as exc:
            msg = f'Cannot read config file {path}: {exc.strerror}'
            raise ConfigError(msg) from exc
        except tomllib.TOMLDecodeError as exc:
            msg = f'Invalid TOML in {path}: {exc}'
            raise ConfigError(msg) from exc
    unknown = sorted(set(data) - {'pipeline', 'generator', 'energy'})
    if unknown:
        msg = f'Unknown config section(s): {", ".join(unknown)}'
        raise ConfigError(msg)

    pipeline = dict(data.get('pipeline', {}))
    energy_path = overrides.get('energy_config_path') or pipeline.get(
        'energy_config_path')
    energy_data = dict(data.get('energy', {}))
    if energy_path:
        energy_data.update(_load_energy_file(Path(energy_path)))
    pipeline['generator'] = GeneratorConfig.from_mapping(
        data.get('generator', {}))
    pipeline['energy'] = EnergyConfig.from_mapping(energy_data)
    config = PipelineConfig.from_mapping(pipeline)
    config = config.replace(**overrides)
    if config.energy.bits_per_sample != config.bits_per_sample:
        msg = (
            f'[energy] bits_per_sample ({config.energy.bits_per_sample}) does'
            ' not match [pipeline] bits_per_sample'
            f' ({config.bits_per_sample})')
        raise ConfigError(msg)
    return config


def _load_energy_file(path: Path) -> dict[str, Any]:
    """Load an energy configuration file.

    The file may hold the values at top level or in an ``[energy]`` table.
    """
    try:
        with path.open('rb') as f:
            data = tomllib.load(f)
    except OSError as exc:
        msg = f'Cannot read energy config {path}: {exc.strerror}'
        raise ConfigError(msg) from exc
    except tomllib.TOMLDecodeError as exc:
        msg = f'Invalid TOML in {path}: {exc}'
        raise ConfigError(msg) from exc
    return dict(data.get('energy', data))
