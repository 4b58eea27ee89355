"""Report period energy model of a single-hop (star) low-power network.

Each node collects one window of N samples per report period and sends it to
the sink either raw or as a DCT model whose size is chosen from a
rate-distortion curve:

none
    The window is sent uncompressed.
dct-cl
    The coefficient count comes from the classless (all classes) curve.
dct-ca
    The coefficient count comes from the curve of the node's assigned class.

Energy is the sum of radio transmission energy, including per-packet header
overhead, and compression processing energy. Medium access is reduced to a
retransmission multiplier.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import store
from .compression import (
    Algorithm, RdCurve, dct_compress_rate, fallback_raw,
    min_rate_for_tolerance, model_bits, model_distortion)
from .config import EnergyConfig
from .errors import InputError, MissingCurveError, ScenarioError
from .features import NormalizationParams, apply_normalization, extract
from .timeseries import (
    SampleEncoding, SignalClass, TimeSeriesWindow, gen_synthetic, load_csv,
    raw_bits)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from .classify import Classifier
    from .config import GeneratorConfig

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    """How a node chooses its payload."""

    NO_COMPRESSION = 'none'
    DCT_CLASSLESS = 'dct-cl'
    DCT_CLASS_AWARE = 'dct-ca'

    @classmethod
    def parse(cls, text: str | Strategy) -> Strategy:
        """Convert an external name, such as 'dct-ca', to a strategy."""
        if isinstance(text, Strategy):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            names = ', '.join(s.value for s in cls)
            msg = f'Unknown strategy {text!r}, expected one of: {names}'
            raise ScenarioError(msg) from None


@dataclass(frozen=True)
class NodeSpec:
    """A sensor node.

    Exactly one window source must be given.

    :node_id:        A unique name.
    :true_class:     The class of the node's signal.
    :assigned_class: The class the sink believes the node has; ``None``
                     until the node has been classified.
    :seed:           Seed of a synthetic window source.
    :csv_path:       A CSV file window source.
    """

    node_id: str
    true_class: SignalClass
    assigned_class: SignalClass | None = None
    seed: int | None = None
    csv_path: Path | None = None

    def __post_init__(self):
        if (self.seed is None) == (self.csv_path is None):
            msg = f'Node {self.node_id!r} needs exactly one of seed or csv'
            raise ScenarioError(msg)


@dataclass(frozen=True)
class CurveSet:
    """The DCT rate-distortion curves available to the sink."""

    per_class: dict[SignalClass, RdCurve]
    classless: RdCurve

    def __post_init__(self):
        curves = [self.classless, *self.per_class.values()]
        if any(c.algorithm is not Algorithm.DCT for c in curves):
            msg = 'Simulation curves must be DCT curves'
            raise InputError(msg)
        if len({(c.n_samples, c.encoding) for c in curves}) > 1:
            msg = 'Simulation curves differ in window size or encoding'
            raise InputError(msg)

    @property
    def n_samples(self) -> int:
        """The window length the curves were measured on."""
        return self.classless.n_samples

    def curve_for(
            self, strategy: Strategy,
            assigned_class: SignalClass | None) -> RdCurve:
        """The curve a DCT strategy uses for a node.

        :raise MissingCurveError: If the class curve is not available.
        """
        if strategy is Strategy.DCT_CLASSLESS:
            return self.classless
        if assigned_class is None or assigned_class not in self.per_class:
            name = assigned_class.label if assigned_class else 'unassigned'
            msg = f'No rate-distortion curve for class {name}'
            raise MissingCurveError(msg)
        return self.per_class[assigned_class]


@dataclass(frozen=True)
class ReportPeriodResult:
    """The cost and outcome of one node, strategy and tolerance."""

    node_id: str
    true_class: SignalClass
    assigned_class: SignalClass | None
    strategy: Strategy
    xi_pct: float
    period: int
    coefficients: int
    payload_bits: int
    bits_sent: int
    packets: int
    energy_tx: float
    energy_comp: float
    measured_distortion_pct: float

    @property
    def energy(self) -> float:
        """Total energy of the period, in joules."""
        return self.energy_tx + self.energy_comp

    def to_row(self) -> dict[str, Any]:
        """Convert to a flat table row."""
        return {
            'node_id': self.node_id,
            'true_class': self.true_class.label,
            'assigned_class': (
                self.assigned_class.label if self.assigned_class else ''),
            'strategy': self.strategy.value,
            'xi_pct': self.xi_pct,
            'period': self.period,
            'coefficients': self.coefficients,
            'payload_bits': self.payload_bits,
            'bits_sent': self.bits_sent,
            'packets': self.packets,
            'energy_tx_j': self.energy_tx,
            'energy_comp_j': self.energy_comp,
            'energy_j': self.energy,
            'distortion_pct': self.measured_distortion_pct,
        }


def packetize(payload_bits: int, cfg: EnergyConfig) -> tuple[int, int]:
    """Split a payload into packets.

    :return: A tuple of (packets, total bits including headers).
    """
    if payload_bits < 0:
        msg = f'payload_bits must be >= 0, got {payload_bits}'
        raise InputError(msg)
    packets = -(-payload_bits // (8 * cfg.max_payload_bytes))
    return packets, payload_bits + packets * 8 * cfg.header_bytes_per_packet


def compression_energy(n: int, cfg: EnergyConfig) -> float:
    """Processing energy of one DCT compression of N samples."""
    return cfg.comp_c0 * n * math.log2(n) + cfg.comp_c1 * n


def report_period_s(n: int, cfg: EnergyConfig) -> float:
    """The time taken to collect one window, in seconds."""
    return n * cfg.sampling_interval_s


def run_period(
        node: NodeSpec, window: TimeSeriesWindow, strategy: Strategy,
        xi_pct: float, curves: CurveSet, cfg: EnergyConfig, *,
        period: int = 0) -> ReportPeriodResult:
    """Evaluate one report period of a node under a strategy.

    A DCT model that would not be smaller than the raw window is replaced by
    the raw window.
    """
    if window.n != curves.n_samples:
        msg = (
            f'Window of {window.n} samples, but the curves are for'
            f' {curves.n_samples}')
        raise InputError(msg)
    enc = SampleEncoding(cfg.bits_per_sample)
    raw = raw_bits(window, enc)
    coefficients = window.n
    payload = raw
    energy_comp = 0.0
    distortion = 0.0
    if strategy is not Strategy.NO_COMPRESSION:
        curve = curves.curve_for(strategy, node.assigned_class)
        _, k = min_rate_for_tolerance(curve, xi_pct)
        model = dct_compress_rate(window, k)
        energy_comp = compression_energy(window.n, cfg)
        if not fallback_raw(model, enc):
            coefficients = model.k
            payload = model_bits(model, enc)
            distortion = model_distortion(window, model)

    packets, total = packetize(payload, cfg)
    return ReportPeriodResult(
        node.node_id, node.true_class, node.assigned_class, strategy,
        float(xi_pct), period, coefficients, payload, total, packets,
        total * cfg.e_tx_per_bit * cfg.retransmission_factor, energy_comp,
        distortion)


class WindowSource:
    """Supplies the window each node collects in each report period.

    Synthetic windows of period ``p`` are generated from the seed sequence
    (seed, node seed, p). CSV sources cycle through their windows.
    """

    def __init__(
            self, n: int, seed: int,
            generator: GeneratorConfig | None = None):
        self.n = n
        self.seed = seed
        self.generator = generator
        self._csv_windows: dict[Path, list[TimeSeriesWindow]] = {}

    def window(self, node: NodeSpec, period: int) -> TimeSeriesWindow:
        """The window of a node in a report period."""
        if node.csv_path is not None:
            windows = self._csv_windows.get(node.csv_path)
            if windows is None:
                windows = load_csv(node.csv_path, self.n).windows
                self._csv_windows[node.csv_path] = windows
            return windows[period % len(windows)]
        sequence = np.random.SeedSequence([self.seed, node.seed, period])
        window_seed = int(sequence.generate_state(1, np.uint64)[0])
        return gen_synthetic(
            node.true_class, self.n, window_seed, self.generator)


@dataclass(frozen=True)
class Scenario:
    """A simulation setup: nodes, strategies and tolerance values."""

    nodes: tuple[NodeSpec, ...]
    strategies: tuple[Strategy, ...] = tuple(Strategy)
    xi_grid: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    periods: int = 1
    energy: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.nodes or not self.strategies or not self.xi_grid:
            msg = 'A scenario needs nodes, strategies and xi values'
            raise ScenarioError(msg)
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            msg = 'Scenario node ids must be unique'
            raise ScenarioError(msg)
        if self.periods < 1:
            msg = f'periods must be >= 1, got {self.periods}'
            raise ScenarioError(msg)


def default_scenario(
        nodes_per_class: int, xi_grid: Sequence[float], *,
        assign: bool = True) -> Scenario:
    """Nodes of every class with synthetic sources.

    :assign: Give every node its true class as the assigned class; otherwise
             nodes are left to be classified by the sink.
    """
    nodes = tuple(
        NodeSpec(
            f'{cls.label}-{i}', cls, cls if assign else None,
            seed=int(cls) * nodes_per_class + i)
        for cls in SignalClass for i in range(nodes_per_class))
    return Scenario(nodes, xi_grid=tuple(float(x) for x in xi_grid))


def load_scenario(path: Path) -> Scenario:
    """Load a JSON scenario file.

    Example::

        {
          "nodes": [
            {"id": "n1", "class": "noisy", "seed": 7},
            {"id": "n2", "class": "trend", "assigned_class": "noisy",
             "csv": "data/trend.csv"}
          ],
          "strategies": ["none", "dct-cl", "dct-ca"],
          "xi_grid": [1, 2, 5],
          "periods": 1,
          "energy": {"e_tx_per_bit": 2.3e-7}
        }

    Relative CSV paths are taken relative to the scenario file.
    """
    path = Path(path)
    data = store.read_json(path)
    unknown = sorted(
        set(data) - {'nodes', 'strategies', 'xi_grid', 'periods', 'energy'})
    if unknown:
        msg = f'{path}: unknown scenario key(s): {", ".join(unknown)}'
        raise ScenarioError(msg)
    try:
        nodes = tuple(_parse_node(d, path.parent) for d in data['nodes'])
    except (KeyError, TypeError) as exc:
        msg = f'{path}: bad node entry: {exc}'
        raise ScenarioError(msg) from exc
    except InputError as exc:
        msg = f'{path}: {exc}'
        raise ScenarioError(msg) from exc
    strategies = tuple(
        Strategy.parse(s)
        for s in data.get('strategies', [s.value for s in Strategy]))
    xi_grid = tuple(float(x) for x in data.get('xi_grid', (1, 2, 3, 4, 5)))
    return Scenario(
        nodes, strategies, xi_grid, int(data.get('periods', 1)),
        dict(data.get('energy', {})))


def _parse_node(data: dict[str, Any], base: Path) -> NodeSpec:
    assigned = data.get('assigned_class')
    csv = data.get('csv')
    return NodeSpec(
        str(data['id']), SignalClass.parse(data['class']),
        SignalClass.parse(assigned) if assigned else None,
        seed=int(data['seed']) if 'seed' in data else None,
        csv_path=(base / csv) if csv else None)


def classify_nodes(
        nodes: Sequence[NodeSpec], source: WindowSource,
        classifier: Classifier, feature_names: Sequence[str],
        normalization: NormalizationParams) -> list[NodeSpec]:
    """Assign classes to unassigned nodes at the sink.

    Each unassigned node first sends one uncompressed window (its period 0
    window). The sink extracts the named features, normalizes them with the
    stored parameters and classifies the result. Nodes that already have an
    assigned class are returned unchanged.
    """
    result = []
    for node in nodes:
        if node.assigned_class is not None:
            result.append(node)
            continue
        values = extract(source.window(node, 0)).as_dict()
        row = [[values[name] for name in feature_names]]
        predicted = classifier.predict(apply_normalization(normalization, row))
        assigned = SignalClass(int(predicted[0]))
        log.debug(
            'Node %s (%s) classified as %s', node.node_id,
            node.true_class.label, assigned.label)
        result.append(replace(node, assigned_class=assigned))
    return result


def _node_periods(
        node: NodeSpec, source: WindowSource, scenario: Scenario,
        curves: CurveSet, cfg: EnergyConfig) -> list[ReportPeriodResult]:
    results = []
    for period in range(scenario.periods):
        window = source.window(node, period)
        for strategy in scenario.strategies:
            for xi in scenario.xi_grid:
                results.append(run_period(
                    node, window, strategy, xi, curves, cfg, period=period))
    return results


def simulate(
        scenario: Scenario, curves: CurveSet, cfg: EnergyConfig, seed: int,
        *, generator: GeneratorConfig | None = None,
        n_jobs: int = 1) -> list[ReportPeriodResult]:
    """Evaluate every node, strategy and tolerance.

    All strategies and tolerances of a node's report period see the same
    window. Results are ordered by node, period, strategy then tolerance.
    """
    source = WindowSource(curves.n_samples, seed, generator)
    per_node = Parallel(n_jobs=n_jobs)(
        delayed(_node_periods)(node, source, scenario, curves, cfg)
        for node in scenario.nodes)
    return [r for results in per_node for r in results]


def results_table(results: Sequence[ReportPeriodResult]) -> pd.DataFrame:
    """One row per report period result."""
    return pd.DataFrame([r.to_row() for r in results])


def aggregate(results: Sequence[ReportPeriodResult]) -> pd.DataFrame:
    """Mean energy and mean and max distortion per strategy, class and xi.

    Rows with class ``all`` aggregate over every node.
    """
    table = results_table(results)
    by_class = table.assign(**{'class': table['true_class']})
    overall = table.assign(**{'class': 'all'})
    combined = pd.concat([by_class, overall], ignore_index=True)
    summary = combined.groupby(
        ['strategy', 'class', 'xi_pct'], sort=True).agg(
            nodes=('node_id', 'nunique'),
            mean_energy_j=('energy_j', 'mean'),
            mean_energy_tx_j=('energy_tx_j', 'mean'),
            mean_energy_comp_j=('energy_comp_j', 'mean'),
            mean_bits_sent=('bits_sent', 'mean'),
            mean_distortion_pct=('distortion_pct', 'mean'),
            max_distortion_pct=('distortion_pct', 'max'))
    return summary.reset_index()


def write_results(
        path: Path, results: Sequence[ReportPeriodResult],
        **metadata) -> Path:
    """Write per-period results as CSV and aggregates as the JSON sidecar."""
    store.write_table(path, results_table(results))
    summary = aggregate(results)
    store.write_json(store.sidecar_path(path), {
        'aggregates': summary.to_dict(orient='records'),
        **metadata,
    })
    return path
