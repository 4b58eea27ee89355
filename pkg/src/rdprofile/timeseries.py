"""Windows of univariate time series, CSV ingestion and synthetic signals.

Everything else in rdprofile consumes `TimeSeriesWindow` values; fixed length
runs of real valued samples, optionally labelled with a `SignalClass`.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from . import store
from .config import GeneratorConfig
from .errors import (
    InputError, InvalidWindowError, NoCompleteWindowsError,
    NoNumericColumnError, TimestampOrderError, UnreadableInputError)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike

log = logging.getLogger(__name__)


class SignalClass(enum.IntEnum):
    """The three rate-distortion signal classes.

    The integer values define the fixed iteration order.
    """

    NOISY = 0
    QUASI_PERIODIC = 1
    TREND = 2

    @property
    def label(self) -> str:
        """The external (file and command line) name of this class."""
        return _class_labels[self]

    @classmethod
    def parse(cls, text: str | SignalClass) -> SignalClass:
        """Convert an external name, such as 'quasi-periodic', to a class."""
        if isinstance(text, SignalClass):
            return text
        key = str(text).strip().lower().replace('-', '').replace('_', '')
        for member in cls:
            if member.label.replace('-', '') == key:
                return member
        msg = f'Unknown signal class {text!r}'
        raise InputError(msg)


_class_labels = {
    SignalClass.NOISY: 'noisy',
    SignalClass.QUASI_PERIODIC: 'quasi-periodic',
    SignalClass.TREND: 'trend',
}


@dataclass(frozen=True, eq=False)
class TimeSeriesWindow:
    """A window of N >= 2 finite samples.

    The samples are copied into a read-only float array on construction.
    """

    samples: np.ndarray
    source_id: str = ''
    class_label: SignalClass | None = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            msg = (
                f'A window needs at least 2 samples, got shape'
                f' {samples.shape}')
            raise InvalidWindowError(msg)
        if not np.all(np.isfinite(samples)):
            msg = f'Window {self.source_id!r} contains non-finite samples'
            raise InvalidWindowError(msg)
        samples.flags.writeable = False
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n(self) -> int:
        """The number of samples."""
        return self.samples.size

    @property
    def value_range(self) -> float:
        """The window's value range, max - min."""
        return float(np.ptp(self.samples))

    def with_label(self, class_label: SignalClass | None) -> TimeSeriesWindow:
        """A copy of this window with a different class label."""
        return TimeSeriesWindow(self.samples, self.source_id, class_label)


@dataclass(frozen=True)
class SampleEncoding:
    """Fixed-point representation of a single sample."""

    bits_per_sample: int = 16

    def __post_init__(self):
        if not 8 <= self.bits_per_sample <= 64:
            msg = (
                'bits_per_sample must be in [8, 64], got'
                f' {self.bits_per_sample}')
            raise InputError(msg)


@dataclass(frozen=True)
class IngestResult:
    """The outcome of splitting a stream into windows.

    :windows:           The complete, finite windows in stream order.
    :dropped_windows:   Complete windows dropped for non-finite samples.
    :discarded_samples: Trailing samples that did not fill a window.
    :header:            The detected header line, if any.
    """

    windows: list[TimeSeriesWindow] = field(default_factory=list)
    dropped_windows: int = 0
    discarded_samples: int = 0
    header: str | None = None


def raw_bits(w: TimeSeriesWindow, enc: SampleEncoding) -> int:
    """The number of bits of the uncompressed window."""
    return w.n * enc.bits_per_sample


def split_windows(
        values: ArrayLike, window_len: int, *, source_id: str = '',
        class_label: SignalClass | None = None) -> IngestResult:
    """Split a sample stream into consecutive non-overlapping windows.

    Trailing samples that do not fill a window are discarded. Windows that
    contain any non-finite value are dropped and counted.
    """
    if window_len < 2:
        msg = f'window_len must be >= 2, got {window_len}'
        raise InputError(msg)
    stream = np.asarray(values, dtype=float)
    n_windows, discarded = divmod(stream.size, window_len)
    if n_windows == 0:
        msg = (
            f'{source_id or "stream"}: zero complete windows'
            f' ({stream.size} samples, window_len={window_len})')
        raise NoCompleteWindowsError(msg)

    windows: list[TimeSeriesWindow] = []
    dropped = 0
    for i in range(n_windows):
        chunk = stream[i * window_len:(i + 1) * window_len]
        if np.all(np.isfinite(chunk)):
            windows.append(TimeSeriesWindow(
                chunk, source_id=f'{source_id}:{i}', class_label=class_label))
        else:
            dropped += 1
    if dropped:
        log.info(
            '%s: dropped %d of %d windows with non-finite samples',
            source_id, dropped, n_windows)
    if not windows:
        msg = f'{source_id}: zero complete windows without non-finite samples'
        raise NoCompleteWindowsError(msg)
    return IngestResult(windows, dropped, discarded)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(
        path: Path | str, window_len: int, *, source_id: str | None = None,
        class_label: SignalClass | None = None) -> IngestResult:
    """Load a CSV file of ``value`` or ``timestamp,value`` records.

    The first line is taken as a header when its value field is not numeric.
    When a timestamp column is present it is only used to check that the
    records are in order.

    :path:        The CSV file.
    :window_len:  The number of samples per window.
    :source_id:   A name for the stream; the file stem by default.
    :class_label: An optional class to attach to every window.
    """
    if window_len < 2:
        msg = f'window_len must be >= 2, got {window_len}'
        raise InputError(msg)
    path = Path(path)
    source_id = source_id or path.stem
    try:
        table = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False,
            skip_blank_lines=True, encoding='utf-8', skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        msg = f'{path}: no parseable numeric column'
        raise NoNumericColumnError(msg) from exc
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as exc:
        msg = f'Cannot read {path}: {exc}'
        raise UnreadableInputError(msg) from exc

    header = None
    if len(table) and not _is_number(str(table.iloc[0, -1]).strip()):
        header = ','.join(map(str, table.iloc[0].tolist()))
        table = table.iloc[1:]
    values = pd.to_numeric(
        table.iloc[:, -1].str.strip(), errors='coerce').to_numpy(dtype=float)
    if not np.any(np.isfinite(values)):
        msg = f'{path}: no parseable numeric column'
        raise NoNumericColumnError(msg)
    if table.shape[1] >= 2:
        _check_timestamp_order(table.iloc[:, 0], path)

    result = split_windows(
        values, window_len, source_id=source_id, class_label=class_label)
    return IngestResult(
        result.windows, result.dropped_windows, result.discarded_samples,
        header)


def _check_timestamp_order(stamps: pd.Series, path: Path) -> None:
    """Verify that timestamps never go backwards.

    Timestamps are compared as numbers when they all parse as numbers, else
    as datetimes when they all parse as ISO 8601. Other timestamps are not
    checked.
    """
    as_numbers = pd.to_numeric(stamps.str.strip(), errors='coerce')
    if as_numbers.notna().all():
        ordered = np.all(np.diff(as_numbers.to_numpy(dtype=float)) >= 0)
    else:
        as_times = pd.to_datetime(
            stamps.str.strip(), errors='coerce', format='ISO8601')
        if not as_times.notna().all():
            log.debug('%s: timestamps not validated', path)
            return
        ordered = as_times.is_monotonic_increasing
    if not ordered:
        msg = f'{path}: timestamps are not in order'
        raise TimestampOrderError(msg)


def _rng(signal_class: SignalClass, seed: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(
            [seed & 0xFFFF_FFFF_FFFF_FFFF, int(signal_class)]))


def gen_synthetic(
        signal_class: SignalClass, n: int, seed: int,
        config: GeneratorConfig | None = None) -> TimeSeriesWindow:
    """Generate a synthetic window for a signal class.

    The result is a pure function of (signal_class, n, seed, config).
    """
    if n < 2:
        msg = f'n must be >= 2, got {n}'
        raise InputError(msg)
    config = config or GeneratorConfig()
    signal_class = SignalClass.parse(signal_class)
    rng = _rng(signal_class, seed)
    generator = _generators[signal_class]
    samples = generator(rng, n, config)
    return TimeSeriesWindow(
        samples, source_id=f'synthetic:{signal_class.label}:{seed}',
        class_label=signal_class)


def _gen_noisy(
        rng: np.random.Generator, n: int, config: GeneratorConfig,
    ) -> np.ndarray:
    noise = rng.standard_normal(n)
    walk = np.cumsum(rng.standard_normal(n))
    walk -= walk.mean()
    spread = walk.std()
    if spread > 0:
        walk *= config.walk_amplitude / spread
    return noise + walk


def _gen_quasi_periodic(
        rng: np.random.Generator, n: int, config: GeneratorConfig,
    ) -> np.ndarray:
    amplitude = config.amplitude
    jitter = config.jitter
    period = rng.uniform(
        n / config.period_min_divisor, n / config.period_max_divisor)
    n_cycles = math.ceil(n / (period * (1.0 - jitter))) + 2
    periods = period * (1.0 + rng.uniform(-jitter, jitter, n_cycles))
    amplitudes = amplitude * (1.0 + rng.uniform(-jitter, jitter, n_cycles))
    offset = rng.uniform(0.0, periods[0])
    starts = np.concatenate(([0.0], np.cumsum(periods))) - offset

    t = np.arange(n, dtype=float)
    cycle = np.searchsorted(starts, t, side='right') - 1
    phase = 2.0 * np.pi * (cycle + (t - starts[cycle]) / periods[cycle])
    shape = np.sin(phase)
    for order, weight in enumerate(config.harmonics, start=2):
        shape += weight * np.sin(order * phase)
    noise = rng.normal(0.0, config.periodic_noise * amplitude, n)
    return amplitudes[cycle] * shape + noise


def _gen_trend(
        rng: np.random.Generator, n: int, config: GeneratorConfig,
    ) -> np.ndarray:
    n_knots = math.ceil(n / config.knot_spacing) + 2
    knot_t = np.linspace(0.0, n - 1.0, n_knots)
    slope = rng.uniform(config.trend_slope_min, config.trend_slope_max)
    slope *= rng.choice((-1.0, 1.0))
    knot_v = slope * np.linspace(0.0, 1.0, n_knots)
    knot_v += rng.normal(0.0, config.knot_jitter, n_knots)
    base = CubicSpline(knot_t, knot_v)(np.arange(n, dtype=float))
    noise = rng.normal(0.0, config.trend_noise * np.ptp(knot_v), n)
    return base + noise


_generators = {
    SignalClass.NOISY: _gen_noisy,
    SignalClass.QUASI_PERIODIC: _gen_quasi_periodic,
    SignalClass.TREND: _gen_trend,
}


def gen_corpus(
        per_class: int, n: int, seed: int,
        config: GeneratorConfig | None = None,
        classes: Sequence[SignalClass] = tuple(SignalClass),
    ) -> list[TimeSeriesWindow]:
    """Generate ``per_class`` synthetic windows of every class.

    Window ``i`` of each class uses seed ``seed + i``. The windows are
    ordered by class, then by seed.
    """
    return [
        gen_synthetic(cls, n, seed + i, config)
        for cls in classes for i in range(per_class)]


def write_windows(
        path: Path, windows: Sequence[TimeSeriesWindow], **metadata) -> Path:
    """Write windows as CSV, one per row, plus a JSON sidecar.

    The columns are ``source_id``, ``label`` and then one column per sample.
    All windows must have the same length.
    """
    lengths = {w.n for w in windows}
    if len(lengths) != 1:
        msg = 'Can only store a non-empty set of equal length windows'
        raise InputError(msg)
    n = lengths.pop()
    table = pd.DataFrame(
        np.vstack([w.samples for w in windows]),
        columns=[f's{i}' for i in range(n)])
    table.insert(0, 'label', [
        w.class_label.label if w.class_label is not None else ''
        for w in windows])
    table.insert(0, 'source_id', [w.source_id for w in windows])
    store.write_table(path, table)
    store.write_json(store.sidecar_path(path), {
        'window_len': n, 'windows': len(windows), **metadata})
    return path


def read_windows(path: Path) -> list[TimeSeriesWindow]:
    """Read windows written by `write_windows`."""
    table = store.read_table(
        path, dtype={'source_id': str, 'label': str}, keep_default_na=False)
    if list(table.columns[:2]) != ['source_id', 'label']:
        msg = f'{path}: not a window store'
        raise InputError(msg)
    samples = table.iloc[:, 2:].to_numpy(dtype=float)
    return [
        TimeSeriesWindow(
            row, source_id=source_id,
            class_label=SignalClass.parse(label) if label else None)
        for source_id, label, row in zip(
            table['source_id'], table['label'], samples)]
