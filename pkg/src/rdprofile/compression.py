"""Lossy compressors, rate and distortion metrics and rate-distortion curves.

Two compressors are provided, both with a hard per-sample error guarantee:

LTC
    Lightweight temporal compression; a greedy piecewise linear approximation
    whose model is the list of segment end points.
DCT
    Retention of the shortest prefix of orthonormal DCT-II coefficients whose
    reconstruction meets the error budget.

Error budgets and distortions are both expressed as a percentage of the
window's value range, so a requested budget and a measured distortion can be
compared directly.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import fft

from . import store
from .errors import (
    ComputationError, InputError, MalformedModelError,
    ZeroRangeDistortionError)
from .timeseries import (
    SampleEncoding, SignalClass, TimeSeriesWindow, raw_bits)

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike

log = logging.getLogger(__name__)

# Relative (to the window range) slack allowed on every error bound check.
BOUND_TOLERANCE = 1e-9

# DCT basis vectors generated at once when measuring prefix errors.
PREFIX_BLOCK = 64


class Algorithm(enum.Enum):
    """A compression algorithm."""

    LTC = 'ltc'
    DCT = 'dct'


@dataclass(frozen=True)
class ErrorBudget:
    """A per-sample error budget, in percent of the window's value range."""

    epsilon_pct: float

    def __post_init__(self):
        if not self.epsilon_pct >= 0:
            msg = f'epsilon_pct must be >= 0, got {self.epsilon_pct}'
            raise InputError(msg)

    def absolute(self, x: TimeSeriesWindow) -> float:
        """The budget in the units of the window's samples."""
        return self.epsilon_pct / 100.0 * x.value_range


@dataclass(frozen=True, eq=False)
class LtcModel:
    """Segment end points of an LTC approximation.

    :endpoints:  (position, value) pairs; positions are zero based, strictly
                 increasing and run from 0 to n_original - 1.
    :n_original: The length of the compressed window.
    """

    endpoints: tuple[tuple[int, float], ...]
    n_original: int

    def validate(self) -> None:
        """Check the model invariants.

        :raise MalformedModelError: If any invariant does not hold.
        """
        positions = [p for p, _ in self.endpoints]
        if len(positions) < 2:
            msg = 'An LTC model needs at least 2 end points'
            raise MalformedModelError(msg)
        if any(b <= a for a, b in zip(positions, positions[1:])):
            msg = 'LTC end point positions are not strictly increasing'
            raise MalformedModelError(msg)
        if positions[0] != 0 or positions[-1] != self.n_original - 1:
            msg = (
                f'LTC end points must span 0..{self.n_original - 1}, got'
                f' {positions[0]}..{positions[-1]}')
            raise MalformedModelError(msg)

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'algorithm': Algorithm.LTC.value,
            'n_original': self.n_original,
            'endpoints': [[p, v] for p, v in self.endpoints],
        }


@dataclass(frozen=True, eq=False)
class DctModel:
    """A prefix of orthonormal DCT-II coefficients, lowest frequency first."""

    coeffs: np.ndarray
    n_original: int

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if not 1 <= coeffs.size <= self.n_original:
            msg = (
                f'A DCT model needs 1..{self.n_original} coefficients, got'
                f' {coeffs.size}')
            raise MalformedModelError(msg)
        if not np.all(np.isfinite(coeffs)):
            msg = 'DCT coefficients must be finite'
            raise MalformedModelError(msg)
        coeffs.flags.writeable = False
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def k(self) -> int:
        """The number of retained coefficients."""
        return self.coeffs.size

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'algorithm': Algorithm.DCT.value,
            'n_original': self.n_original,
            'coeffs': self.coeffs.tolist(),
        }


Model = LtcModel | DctModel


@dataclass(frozen=True)
class RdPoint:
    """A (distortion, rate) measurement."""

    distortion_pct: float
    rate: float


@dataclass(frozen=True)
class RdCurve:
    """An empirical rate-distortion curve.

    Points are sorted by strictly increasing distortion and have
    non-increasing rates; use `regularize` to build a curve from raw
    measurements.

    :n_samples: The window length the rates refer to.
    :encoding:  The sample encoding the rates refer to.
    :n_windows: The number of windows that contributed to the curve.
    """

    points: tuple[RdPoint, ...]
    algorithm: Algorithm
    class_label: SignalClass | None = None
    n_samples: int = 500
    encoding: SampleEncoding = SampleEncoding()
    n_windows: int = 1

    @property
    def distortions(self) -> np.ndarray:
        """The curve's distortion values."""
        return np.array([p.distortion_pct for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        """The curve's rate values."""
        return np.array([p.rate for p in self.points])

    @property
    def label(self) -> str:
        """The class name of the curve, 'all' for a classless curve."""
        if self.class_label is None:
            return 'all'
        return self.class_label.label


def _index_bits(n: int) -> int:
    """Bits needed for a sample position or count; ceil(log2 n)."""
    return (n - 1).bit_length()


def ltc_compress(x: TimeSeriesWindow, eps: ErrorBudget) -> LtcModel:
    """Compress a window using lightweight temporal compression.

    Starting from an anchor point, the interval of slopes that keeps every
    following sample within the budget is narrowed one sample at a time. When
    the next sample would empty the interval, the segment ends at the
    previous sample with the interval's mid slope and that point becomes the
    next anchor.
    """
    n = x.n
    value_range = x.value_range
    samples = x.samples.tolist()
    if value_range == 0:
        return LtcModel(((0, samples[0]), (n - 1, samples[-1])), n)

    bound = eps.absolute(x) + BOUND_TOLERANCE * value_range
    anchor_i, anchor_v = 0, samples[0]
    endpoints = [(0, anchor_v)]
    lo, hi = -math.inf, math.inf
    j = 1
    while j < n:
        d = j - anchor_i
        new_lo = max(lo, (samples[j] - bound - anchor_v) / d)
        new_hi = min(hi, (samples[j] + bound - anchor_v) / d)
        if new_lo <= new_hi:
            lo, hi = new_lo, new_hi
            j += 1
            continue
        end = j - 1
        anchor_v += (lo + hi) / 2.0 * (end - anchor_i)
        anchor_i = end
        endpoints.append((anchor_i, anchor_v))
        lo, hi = -math.inf, math.inf

    # A sample one step from the anchor always fits, so lo and hi are finite.
    end = n - 1
    endpoints.append((end, anchor_v + (lo + hi) / 2.0 * (end - anchor_i)))
    return LtcModel(tuple(endpoints), n)


def ltc_reconstruct(m: LtcModel) -> TimeSeriesWindow:
    """Rebuild a window by linear interpolation between the end points."""
    m.validate()
    positions = np.array([p for p, _ in m.endpoints], dtype=float)
    values = np.array([v for _, v in m.endpoints], dtype=float)
    samples = np.interp(
        np.arange(m.n_original, dtype=float), positions, values)
    return TimeSeriesWindow(samples, source_id='ltc-reconstruction')


def dct_forward(x: TimeSeriesWindow | ArrayLike) -> np.ndarray:
    """The orthonormal DCT-II of a window or sample array."""
    samples = x.samples if isinstance(x, TimeSeriesWindow) else x
    return fft.dct(np.asarray(samples, dtype=float), type=2, norm='ortho')


def dct_inverse(
        coeffs: ArrayLike, *, n: int | None = None) -> TimeSeriesWindow:
    """The inverse (DCT-III) of `dct_forward`.

    :coeffs: The leading coefficients.
    :n:      The output length; missing trailing coefficients are zero.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.size if n is None else n
    padded = np.zeros(n)
    padded[:coeffs.size] = coeffs
    samples = fft.idct(padded, type=2, norm='ortho')
    return TimeSeriesWindow(samples, source_id='dct-reconstruction')


def _prefix_errors(x: TimeSeriesWindow, coeffs: np.ndarray) -> np.ndarray:
    """Maximum absolute reconstruction error for every prefix length.

    Element ``k - 1`` is the error when the first ``k`` coefficients are kept.
    The weighted basis vectors are generated ``PREFIX_BLOCK`` at a time, so
    memory grows linearly with the window length.
    """
    n = x.n
    errors = np.empty(n)
    partial = np.zeros(n)
    for start in range(0, n, PREFIX_BLOCK):
        rows = np.arange(start, min(start + PREFIX_BLOCK, n))
        weighted = np.zeros((rows.size, n))
        weighted[np.arange(rows.size), rows] = coeffs[rows]
        steps = fft.idct(weighted, type=2, norm='ortho', axis=1)
        running = partial + np.cumsum(steps, axis=0)
        errors[rows] = np.max(np.abs(x.samples - running), axis=1)
        partial = running[-1]
    return errors


def _smallest_prefix(errors: np.ndarray, bound: float) -> int:
    ok = np.flatnonzero(errors <= bound)
    return int(ok[0]) + 1 if ok.size else errors.size


def dct_compress(x: TimeSeriesWindow, eps: ErrorBudget) -> DctModel:
    """Keep the fewest leading DCT coefficients that meet the budget."""
    coeffs = dct_forward(x)
    if x.value_range == 0:
        return DctModel(coeffs[:1], x.n)
    bound = eps.absolute(x) + BOUND_TOLERANCE * x.value_range
    k = _smallest_prefix(_prefix_errors(x, coeffs), bound)
    return DctModel(coeffs[:k], x.n)


def dct_compress_rate(x: TimeSeriesWindow, k: int) -> DctModel:
    """Keep exactly the first ``k`` DCT coefficients.

    A zero-range window is always reduced to its single DC coefficient.
    """
    if not 1 <= k <= x.n:
        msg = f'k must be in [1, {x.n}], got {k}'
        raise InputError(msg)
    coeffs = dct_forward(x)
    if x.value_range == 0:
        k = 1
    return DctModel(coeffs[:k], x.n)


def dct_reconstruct(m: DctModel) -> TimeSeriesWindow:
    """Rebuild a window from a DCT model, zero padding the coefficients."""
    return dct_inverse(m.coeffs, n=m.n_original)


def compress(
        x: TimeSeriesWindow, algorithm: Algorithm, eps: ErrorBudget) -> Model:
    """Compress a window with the given algorithm."""
    if algorithm is Algorithm.LTC:
        return ltc_compress(x, eps)
    return dct_compress(x, eps)


def reconstruct(m: Model) -> TimeSeriesWindow:
    """Rebuild a window from either kind of model."""
    if isinstance(m, LtcModel):
        return ltc_reconstruct(m)
    return dct_reconstruct(m)


def model_bits(m: Model, enc: SampleEncoding) -> int:
    """The number of bits needed to represent a model.

    An LTC end point costs a value and a position. A DCT model costs its
    coefficient values plus one coefficient count field.
    """
    index_bits = _index_bits(m.n_original)
    if isinstance(m, LtcModel):
        return len(m.endpoints) * (enc.bits_per_sample + index_bits)
    return m.k * enc.bits_per_sample + index_bits


def fallback_raw(m: Model, enc: SampleEncoding) -> bool:
    """True when the model is no smaller than the raw window.

    Such a window is sent uncompressed.
    """
    return model_bits(m, enc) >= m.n_original * enc.bits_per_sample


def rate(m: Model, x: TimeSeriesWindow, enc: SampleEncoding) -> float:
    """The compression rate, capped at 1 (sending the raw window)."""
    return min(1.0, model_bits(m, enc) / raw_bits(x, enc))


def distortion(
        x: TimeSeriesWindow | ArrayLike,
        x_hat: TimeSeriesWindow | ArrayLike) -> float:
    """The maximum absolute error as a percentage of the range of ``x``.

    For a zero-range ``x`` the distortion is 0 when the reconstruction is
    exact, else `math.inf`.
    """
    a = x.samples if isinstance(x, TimeSeriesWindow) else np.asarray(x, float)
    b = (
        x_hat.samples if isinstance(x_hat, TimeSeriesWindow)
        else np.asarray(x_hat, float))
    if a.shape != b.shape:
        msg = f'Length mismatch: {a.size} != {b.size}'
        raise InputError(msg)
    max_error = float(np.max(np.abs(a - b)))
    value_range = float(np.ptp(a))
    if value_range == 0:
        if max_error == 0:
            return 0.0
        log.warning('Imperfect reconstruction of a zero-range window')
        return math.inf
    return 100.0 * max_error / value_range


def model_distortion(x: TimeSeriesWindow, m: Model) -> float:
    """The distortion of a model's reconstruction of ``x``.

    The trivial model of a zero-range window is exact; its reconstruction
    is not evaluated, so DCT rounding noise cannot make it undefined.

    :raise ZeroRangeDistortionError:
        For a non-trivial model of a zero-range window that does not
        reconstruct it exactly.
    """
    trivial = (
        len(m.endpoints) == 2 if isinstance(m, LtcModel) else m.k == 1)
    if x.value_range == 0 and trivial:
        return 0.0
    measured = distortion(x, reconstruct(m))
    if math.isinf(measured):
        msg = f'Window {x.source_id!r}: distortion undefined'
        raise ZeroRangeDistortionError(msg)
    return measured


def _rd_point(
        x: TimeSeriesWindow, m: Model, enc: SampleEncoding) -> RdPoint:
    if fallback_raw(m, enc):
        return RdPoint(0.0, 1.0)
    return RdPoint(model_distortion(x, m), rate(m, x, enc))


def regularize(points: Iterable[RdPoint]) -> tuple[RdPoint, ...]:
    """Sort, de-duplicate and make rates non-increasing.

    Points with equal distortion are merged keeping the lowest rate. The
    rates are then replaced by their running minimum.
    """
    best: dict[float, float] = {}
    for p in points:
        best[p.distortion_pct] = min(
            p.rate, best.get(p.distortion_pct, math.inf))
    result = []
    running = math.inf
    for d in sorted(best):
        running = min(running, best[d])
        result.append(RdPoint(d, running))
    return tuple(result)


def sweep_models(
        x: TimeSeriesWindow, algorithm: Algorithm,
        eps_grid: Sequence[ErrorBudget],
        enc: SampleEncoding = SampleEncoding()) -> list[Model]:
    """Compress a window at every budget of an ascending grid.

    A model that meets a budget also meets every looser one. Each budget
    therefore gets the smaller of its own model and the model chosen for the
    previous budget, so model size never grows along the grid.
    """
    if not eps_grid:
        msg = 'eps_grid must not be empty'
        raise InputError(msg)
    budgets = [e.epsilon_pct for e in eps_grid]
    if budgets != sorted(budgets):
        msg = 'eps_grid must be sorted ascending'
        raise InputError(msg)

    if algorithm is Algorithm.DCT and x.value_range > 0:
        coeffs = dct_forward(x)
        errors = _prefix_errors(x, coeffs)
        slack = BOUND_TOLERANCE * x.value_range
        sizes = [
            _smallest_prefix(errors, e.absolute(x) + slack) for e in eps_grid]
        return [DctModel(coeffs[:k], x.n) for k in sizes]

    models: list[Model] = []
    for eps in eps_grid:
        m = compress(x, algorithm, eps)
        if models and model_bits(models[-1], enc) < model_bits(m, enc):
            m = models[-1]
        models.append(m)
    return models


def rd_sweep(
        x: TimeSeriesWindow, algorithm: Algorithm,
        eps_grid: Sequence[ErrorBudget],
        enc: SampleEncoding = SampleEncoding()) -> RdCurve:
    """Measure a window's rate-distortion curve over a grid of budgets.

    The models come from `sweep_models`.
    """
    models = sweep_models(x, algorithm, eps_grid, enc)
    points = [_rd_point(x, m, enc) for m in models]
    return RdCurve(
        regularize(points), algorithm, x.class_label, x.n, enc, n_windows=1)


def average_curve(
        curves: Sequence[RdCurve], grid: ArrayLike, *,
        classless: bool = False) -> RdCurve:
    """Average curves point-wise on a common distortion grid.

    Each curve is linearly interpolated onto the grid, holding its end rates
    constant outside its own distortion range. The result carries the class
    shared by all the curves, if any, unless ``classless`` is set.
    """
    if not curves:
        msg = 'Cannot average an empty list of curves'
        raise ComputationError(msg)
    if len({c.algorithm for c in curves}) > 1:
        msg = 'Cannot average curves of different algorithms'
        raise InputError(msg)
    if len({(c.n_samples, c.encoding) for c in curves}) > 1:
        msg = 'Cannot average curves of different window sizes or encodings'
        raise InputError(msg)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        msg = 'The averaging grid must be non-empty and strictly ascending'
        raise InputError(msg)

    rates = np.array([
        np.interp(grid, c.distortions, c.rates) for c in curves])
    mean = rates.mean(axis=0)
    first = curves[0]
    labels = {c.class_label for c in curves}
    class_label = labels.pop() if len(labels) == 1 and not classless else None
    return RdCurve(
        tuple(RdPoint(float(d), float(r)) for d, r in zip(grid, mean)),
        first.algorithm, class_label, first.n_samples, first.encoding,
        n_windows=sum(c.n_windows for c in curves))


def default_average_grid(
        step: float = 0.25, maximum: float = 20.0) -> np.ndarray:
    """The default distortion grid for class averages, 0 to ``maximum``."""
    return np.arange(0.0, maximum + step / 2.0, step)


def sweep_windows(
        windows: Sequence[TimeSeriesWindow], algorithm: Algorithm,
        eps_grid: Sequence[ErrorBudget],
        enc: SampleEncoding = SampleEncoding(), *,
        n_jobs: int = 1) -> list[RdCurve]:
    """Run `rd_sweep` over many windows, returning curves in input order."""
    return Parallel(n_jobs=n_jobs)(
        delayed(rd_sweep)(w, algorithm, eps_grid, enc) for w in windows)


def class_curves(
        curves: Sequence[RdCurve], grid: ArrayLike,
    ) -> dict[SignalClass, RdCurve]:
    """Average per-window curves within each signal class.

    Unlabelled curves are ignored. Classes are returned in class order.
    """
    grouped: dict[SignalClass, list[RdCurve]] = {}
    for c in curves:
        if c.class_label is not None:
            grouped.setdefault(c.class_label, []).append(c)
    return {
        cls: average_curve(grouped[cls], grid)
        for cls in sorted(grouped)}


def classless_curve(
        per_class: dict[SignalClass, RdCurve], grid: ArrayLike) -> RdCurve:
    """The equally weighted point-wise mean of the class curves."""
    return average_curve(list(per_class.values()), grid, classless=True)


def min_rate_for_tolerance(c: RdCurve, xi: float) -> tuple[float, int]:
    """Look up the rate a curve gives for a distortion tolerance.

    :return:
        A tuple of the interpolated rate and the equivalent model size; the
        number of DCT coefficients for a DCT curve or of end points for an
        LTC curve.
    """
    if not c.points:
        msg = 'Cannot look up an empty curve'
        raise InputError(msg)
    eta = float(np.interp(xi, c.distortions, c.rates))
    raw = c.n_samples * c.encoding.bits_per_sample
    bps = c.encoding.bits_per_sample
    index_bits = _index_bits(c.n_samples)
    # The small offset stops rate * raw landing just below an integer.
    if c.algorithm is Algorithm.DCT:
        k = math.floor((eta * raw - index_bits) / bps + 1e-9)
        return eta, min(c.n_samples, max(1, k))
    k = math.floor(eta * raw / (bps + index_bits) + 1e-9)
    return eta, min(c.n_samples, max(2, k))


def write_curve(path: Path, c: RdCurve, **metadata) -> Path:
    """Write a curve as ``distortion_pct,rate`` CSV plus a JSON sidecar."""
    table = pd.DataFrame({
        'distortion_pct': c.distortions, 'rate': c.rates})
    store.write_table(path, table)
    store.write_json(store.sidecar_path(path), {
        'algorithm': c.algorithm.value,
        'class': c.label,
        'n_windows': c.n_windows,
        'n_samples': c.n_samples,
        'bits_per_sample': c.encoding.bits_per_sample,
        **metadata,
    })
    return path


def read_curve(path: Path) -> RdCurve:
    """Read a curve written by `write_curve`."""
    table = store.read_table(path)
    meta = store.read_json(store.sidecar_path(path))
    label = meta.get('class', 'all')
    return RdCurve(
        tuple(
            RdPoint(float(d), float(r))
            for d, r in zip(table['distortion_pct'], table['rate'])),
        Algorithm(meta['algorithm']),
        None if label == 'all' else SignalClass.parse(label),
        int(meta['n_samples']),
        SampleEncoding(int(meta['bits_per_sample'])),
        int(meta['n_windows']))
