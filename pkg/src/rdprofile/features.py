"""The fixed feature bank, signal-feature matrices and their normalization.

Every window is summarised by the same 24 features, covering distribution
statistics, linear correlation, spectral shape, stationarity, entropy and
complexity, nonlinearity, a simple autoregressive fit and a linear trend.

A window with zero standard deviation gives the sentinel value from
`SENTINELS` for every feature that would otherwise divide by the standard
deviation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, stats
from scipy.special import expit

from . import store
from .errors import EmptyMatrixError, InputError, WindowTooShortError
from .timeseries import SignalClass, TimeSeriesWindow

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike

log = logging.getLogger(__name__)

BANK_VERSION = 'bank-24/1'
MIN_WINDOW_LEN = 20

# Scale that makes 1.35 * IQR about one standard deviation for Gaussian data.
IQR_SCALE = 1.35

# Columns with more than this fraction of non-finite values are dropped.
MAX_NONFINITE_FRACTION = 0.01

FEATURE_NAMES = (
    'mean',
    'std',
    'skewness',
    'kurtosis',
    'median',
    'iqr',
    'outlier_fraction',
    'acf_lag1',
    'acf_lag2',
    'acf_lag5',
    'acf_lag10',
    'first_negative_acf',
    'spectral_centroid',
    'spectral_entropy',
    'low_band_energy',
    'stat_av',
    'sliding_std_ratio',
    'approximate_entropy',
    'permutation_entropy',
    'lz_complexity',
    'time_reversal_asymmetry',
    'ar2_residual_ratio',
    'trend_slope',
    'trend_r2',
)

SENTINELS = {
    'skewness': 0.0,
    'kurtosis': 0.0,
    'acf_lag1': 1.0,
    'acf_lag2': 1.0,
    'acf_lag5': 1.0,
    'acf_lag10': 1.0,
    'first_negative_acf': 1.0,
    'spectral_centroid': 0.0,
    'spectral_entropy': 0.0,
    'low_band_energy': 1.0,
    'stat_av': 0.0,
    'sliding_std_ratio': 0.0,
    'approximate_entropy': 0.0,
    'permutation_entropy': 0.0,
    'time_reversal_asymmetry': 0.0,
    'ar2_residual_ratio': 0.0,
    'trend_slope': 0.0,
    'trend_r2': 0.0,
}

ACF_LAGS = (1, 2, 5, 10)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """The feature bank output for one window."""

    values: np.ndarray
    bank_version: str = BANK_VERSION

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(FEATURE_NAMES),):
            msg = (
                f'A feature vector needs {len(FEATURE_NAMES)} values, got'
                f' shape {values.shape}')
            raise InputError(msg)
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def as_dict(self) -> dict[str, float]:
        """Map feature names to values."""
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    """Per-column parameters of the robust sigmoid normalization.

    :median:  Column medians.
    :iqr:     Column interquartile ranges.
    :low:     Minimum sigmoid output of each column, mapped to 0.
    :high:    Maximum sigmoid output of each column, mapped to 1.
    :flagged: Columns that could not be scaled; always normalized to 0.5.
    """

    median: np.ndarray
    iqr: np.ndarray
    low: np.ndarray
    high: np.ndarray
    flagged: np.ndarray

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'median': self.median, 'iqr': self.iqr, 'low': self.low,
            'high': self.high, 'flagged': self.flagged.astype(bool)}

    @classmethod
    def from_dict(cls, data: dict) -> NormalizationParams:
        """Create from a dictionary made by `to_dict`."""
        return cls(
            np.asarray(data['median'], dtype=float),
            np.asarray(data['iqr'], dtype=float),
            np.asarray(data['low'], dtype=float),
            np.asarray(data['high'], dtype=float),
            np.asarray(data['flagged'], dtype=bool))


@dataclass(frozen=True, eq=False)
class SignalFeatureMatrix:
    """An S x M matrix of features, one row per window.

    :values:          The S x M feature values.
    :labels:          The class of each row, ``None`` for unlabelled rows.
    :feature_names:   The M column names.
    :normalized:      Set once `normalize` has been applied.
    :source_ids:      The window source id of each row.
    :dropped_rows:    Input row numbers dropped for non-finite features.
    :dropped_columns: Feature names dropped for non-finite values.
    :normalization:   The parameters used to normalize, if normalized.
    """

    values: np.ndarray
    labels: tuple[SignalClass | None, ...]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    normalized: bool = False
    source_ids: tuple[str, ...] = ()
    dropped_rows: tuple[int, ...] = ()
    dropped_columns: tuple[str, ...] = ()
    normalization: NormalizationParams | None = None
    bank_version: str = BANK_VERSION

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            msg = f'A feature matrix must be 2-D, got shape {values.shape}'
            raise InputError(msg)
        s, m = values.shape
        if len(self.labels) != s:
            msg = f'{len(self.labels)} labels for {s} rows'
            raise InputError(msg)
        if len(self.feature_names) != m:
            msg = f'{len(self.feature_names)} feature names for {m} columns'
            raise InputError(msg)
        source_ids = tuple(self.source_ids) or tuple(
            str(i) for i in range(s))
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'labels', tuple(self.labels))
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        object.__setattr__(self, 'source_ids', source_ids)

    @property
    def shape(self) -> tuple[int, int]:
        """The (S, M) shape of the matrix."""
        return self.values.shape

    @property
    def flagged_columns(self) -> tuple[str, ...]:
        """Names of columns that normalization could not scale."""
        if self.normalization is None:
            return ()
        return tuple(
            name for name, flag in zip(
                self.feature_names, self.normalization.flagged) if flag)

    def label_array(self) -> np.ndarray:
        """The row labels as integers.

        :raise InputError: If any row is unlabelled.
        """
        if any(label is None for label in self.labels):
            msg = 'The feature matrix has unlabelled rows'
            raise InputError(msg)
        return np.array([int(label) for label in self.labels], dtype=int)

    def select_columns(self, indices: Sequence[int]) -> SignalFeatureMatrix:
        """A matrix holding only the given columns, in the given order."""
        indices = list(indices)
        params = self.normalization
        if params is not None:
            params = NormalizationParams(
                params.median[indices], params.iqr[indices],
                params.low[indices], params.high[indices],
                params.flagged[indices])
        return replace(
            self, values=self.values[:, indices],
            feature_names=tuple(self.feature_names[i] for i in indices),
            normalization=params)

    def column_indices(self, names: Sequence[str]) -> list[int]:
        """Look up column positions by feature name."""
        lookup = {name: i for i, name in enumerate(self.feature_names)}
        missing = [name for name in names if name not in lookup]
        if missing:
            msg = f'Unknown feature(s): {", ".join(missing)}'
            raise InputError(msg)
        return [lookup[name] for name in names]


def autocorrelation(x: ArrayLike) -> np.ndarray:
    """The sample autocorrelation function for lags 0 to N-1.

    Lag k is sum((x_t - m)(x_{t+k} - m)) / sum((x_t - m)^2), so the values
    shrink towards zero at long lags.
    """
    d = np.asarray(x, dtype=float)
    d = d - d.mean()
    denom = float(np.dot(d, d))
    if denom == 0:
        return np.ones(d.size)
    full = np.correlate(d, d, mode='full')[d.size - 1:]
    return full / denom


def approximate_entropy(
        x: ArrayLike, m: int = 2, r: float | None = None) -> float:
    """Approximate entropy ApEn(m, r).

    Template matches use the Chebyshev distance and include self matches.
    The tolerance ``r`` defaults to 0.2 times the (ddof=0) standard deviation.
    """
    x = np.asarray(x, dtype=float)
    if r is None:
        r = 0.2 * float(x.std())

    def phi(length: int) -> float:
        templates = sliding_window_view(x, length)
        dist = np.abs(
            templates[:, None, :] - templates[None, :, :]).max(axis=2)
        counts = (dist <= r).mean(axis=1)
        return float(np.log(counts).mean())

    return phi(m) - phi(m + 1)


def permutation_entropy(x: ArrayLike, order: int = 3) -> float:
    """Normalized Shannon entropy of the ordinal patterns of ``order``."""
    x = np.asarray(x, dtype=float)
    patterns = np.argsort(sliding_window_view(x, order), axis=1, kind='stable')
    _, counts = np.unique(patterns, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(math.factorial(order)))


def lempel_ziv_complexity(bits: Sequence[bool] | np.ndarray) -> int:
    """The number of LZ76 phrases of a binary sequence.

    Uses the Kaspar and Schuster parsing.
    """
    s = np.asarray(bits, dtype=np.int8)
    n = s.size
    if n < 2:
        return n
    c, i, k, k_max, length = 1, 0, 1, 1, 1
    while True:
        if s[i + k - 1] == s[length + k - 1]:
            k += 1
            if length + k > n:
                c += 1
                break
        else:
            k_max = max(k, k_max)
            i += 1
            if i == length:
                c += 1
                length += k_max
                if length + 1 > n:
                    break
                i, k, k_max = 0, 1, 1
            else:
                k = 1
    return c


def _block_length(n: int) -> int:
    return 25 if n >= 50 else n // 2


def _spectral_features(x: np.ndarray) -> tuple[float, float, float]:
    coeffs = fft.dct(x - x.mean(), type=2, norm='ortho')
    power = coeffs ** 2
    total = float(power.sum())
    n = x.size
    if total == 0:
        return (
            SENTINELS['spectral_centroid'], SENTINELS['spectral_entropy'],
            SENTINELS['low_band_energy'])
    magnitude = np.abs(coeffs)
    centroid = float(np.dot(np.arange(n) / n, magnitude) / magnitude.sum())
    p = power[power > 0] / total
    entropy = float(-(p * np.log(p)).sum() / math.log(n))
    low = float(power[:max(1, math.ceil(0.1 * n))].sum() / total)
    return centroid, entropy, low


def _ar2_residual_ratio(acf: np.ndarray) -> float:
    r1, r2 = acf[1], acf[2]
    system = np.array([[1.0, r1], [r1, 1.0]])
    try:
        phi = np.linalg.solve(system, np.array([r1, r2]))
    except np.linalg.LinAlgError:
        return 0.0
    return float(1.0 - phi[0] * r1 - phi[1] * r2)


def extract(x: TimeSeriesWindow) -> FeatureVector:
    """Compute the feature bank for a window.

    :raise WindowTooShortError: If the window has fewer than 20 samples.
    """
    n = x.n
    if n < MIN_WINDOW_LEN:
        msg = f'Feature extraction needs >= {MIN_WINDOW_LEN} samples, got {n}'
        raise WindowTooShortError(msg)
    s = x.samples
    mean = float(s.mean())
    std = float(s.std())
    q1, median, q3 = np.quantile(s, (0.25, 0.5, 0.75))
    f: dict[str, float] = {
        'mean': mean,
        'std': std,
        'median': float(median),
        'iqr': float(q3 - q1),
        'outlier_fraction': float(np.mean(np.abs(s - mean) > 2.0 * std)),
    }
    f['lz_complexity'] = lempel_ziv_complexity(s > median) / (
        n / math.log2(n))
    if std == 0:
        f.update(SENTINELS)
        return FeatureVector([f[name] for name in FEATURE_NAMES])

    f['skewness'] = float(stats.skew(s, bias=True))
    f['kurtosis'] = float(stats.kurtosis(s, fisher=True, bias=True))
    acf = autocorrelation(s)
    for lag in ACF_LAGS:
        f[f'acf_lag{lag}'] = float(acf[lag])
    negative = np.flatnonzero(acf[1:] < 0)
    f['first_negative_acf'] = (negative[0] + 1) / n if negative.size else 1.0
    (f['spectral_centroid'], f['spectral_entropy'],
        f['low_band_energy']) = _spectral_features(s)

    block = _block_length(n)
    blocks = s[:n // block * block].reshape(-1, block)
    f['stat_av'] = float(blocks.mean(axis=1).std() / std)
    f['sliding_std_ratio'] = float(blocks.std(axis=1).mean() / std)
    f['approximate_entropy'] = approximate_entropy(s)
    f['permutation_entropy'] = permutation_entropy(s)

    delta = np.diff(s)
    mean_sq = float(np.mean(delta ** 2))
    f['time_reversal_asymmetry'] = (
        float(np.mean(delta ** 3)) / mean_sq ** 1.5 if mean_sq > 0 else 0.0)
    f['ar2_residual_ratio'] = _ar2_residual_ratio(acf)
    fit = stats.linregress(np.arange(n, dtype=float), s)
    f['trend_slope'] = float(fit.slope * n / std)
    f['trend_r2'] = float(fit.rvalue ** 2)
    return FeatureVector([f[name] for name in FEATURE_NAMES])


def build_matrix(
        windows: Sequence[TimeSeriesWindow],
        labels: Sequence[SignalClass | None] | None = None, *,
        n_jobs: int = 1) -> SignalFeatureMatrix:
    """Extract features for many windows and filter invalid values.

    Columns that are non-finite in more than 1% of the rows are dropped
    first; then any row still holding a non-finite value is dropped.

    :windows: The windows, one per row.
    :labels:  Row labels; by default the windows' own class labels.
    :n_jobs:  The joblib worker count for extraction.
    :raise EmptyMatrixError: If no row or no column survives.
    """
    if labels is None:
        labels = [w.class_label for w in windows]
    if len(labels) != len(windows):
        msg = f'{len(labels)} labels for {len(windows)} windows'
        raise InputError(msg)
    if not windows:
        msg = 'No windows to build a feature matrix from'
        raise EmptyMatrixError(msg)

    vectors = Parallel(n_jobs=n_jobs)(delayed(extract)(w) for w in windows)
    values = np.vstack([v.values for v in vectors])
    finite = np.isfinite(values)
    keep_cols = (~finite).mean(axis=0) <= MAX_NONFINITE_FRACTION
    keep_rows = finite[:, keep_cols].all(axis=1)
    dropped_columns = tuple(
        name for name, keep in zip(FEATURE_NAMES, keep_cols) if not keep)
    dropped_rows = tuple(int(i) for i in np.flatnonzero(~keep_rows))
    if dropped_columns:
        log.info('Dropped feature columns: %s', ', '.join(dropped_columns))
    if dropped_rows:
        log.info('Dropped %d rows with non-finite features', len(dropped_rows))
    if not keep_rows.any() or not keep_cols.any():
        msg = 'No rows or columns left after filtering non-finite features'
        raise EmptyMatrixError(msg)

    rows = np.flatnonzero(keep_rows)
    return SignalFeatureMatrix(
        values[np.ix_(rows, np.flatnonzero(keep_cols))],
        tuple(labels[i] for i in rows),
        tuple(n for n, keep in zip(FEATURE_NAMES, keep_cols) if keep),
        source_ids=tuple(windows[i].source_id for i in rows),
        dropped_rows=dropped_rows,
        dropped_columns=dropped_columns)


def robust_sigmoid(column: ArrayLike) -> tuple[np.ndarray, float, float]:
    """Apply the outlier-robust sigmoid to one column.

    :return:
        A tuple of (sigmoid values, median, iqr). Quantiles use linear
        interpolation between order statistics. When the iqr is zero the
        values are all 0.5.
    """
    column = np.asarray(column, dtype=float)
    q1, median, q3 = np.quantile(column, (0.25, 0.5, 0.75))
    iqr = float(q3 - q1)
    if iqr == 0:
        return np.full(column.shape, 0.5), float(median), iqr
    return expit((column - median) / (IQR_SCALE * iqr)), float(median), iqr


def normalize(m: SignalFeatureMatrix) -> SignalFeatureMatrix:
    """Robust sigmoid normalize every column, then rescale it to [0, 1].

    A column with a zero interquartile range is set to 0.5 and flagged.
    """
    if m.normalized:
        msg = 'The feature matrix is already normalized'
        raise InputError(msg)
    n_cols = m.shape[1]
    out = np.empty(m.shape)
    median, iqr = np.empty(n_cols), np.empty(n_cols)
    low, high = np.zeros(n_cols), np.ones(n_cols)
    flagged = np.zeros(n_cols, dtype=bool)
    for j in range(n_cols):
        sig, median[j], iqr[j] = robust_sigmoid(m.values[:, j])
        lo, hi = float(sig.min()), float(sig.max())
        if iqr[j] == 0 or hi <= lo:
            flagged[j] = True
            out[:, j] = 0.5
            continue
        low[j], high[j] = lo, hi
        out[:, j] = (sig - lo) / (hi - lo)
    if flagged.any():
        names = [n for n, f in zip(m.feature_names, flagged) if f]
        log.warning(
            'Feature column(s) with zero IQR set to 0.5: %s', ', '.join(names))
    params = NormalizationParams(median, iqr, low, high, flagged)
    return replace(m, values=out, normalized=True, normalization=params)


def apply_normalization(
        params: NormalizationParams, values: ArrayLike) -> np.ndarray:
    """Normalize new rows with stored parameters, clipping to [0, 1]."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != params.median.size:
        msg = (
            f'Expected {params.median.size} feature columns, got'
            f' {values.shape[1]}')
        raise InputError(msg)
    safe_iqr = np.where(params.flagged, 1.0, params.iqr)
    sig = expit((values - params.median) / (IQR_SCALE * safe_iqr))
    span = np.where(params.flagged, 1.0, params.high - params.low)
    out = np.clip((sig - params.low) / span, 0.0, 1.0)
    out[:, params.flagged] = 0.5
    return out


def _label_text(label: SignalClass | None) -> str:
    return label.label if label is not None else ''


def write_matrix(path: Path, m: SignalFeatureMatrix, **metadata) -> Path:
    """Write a matrix as CSV (label then features) plus a JSON sidecar."""
    table = pd.DataFrame(m.values, columns=list(m.feature_names))
    table.insert(0, 'label', [_label_text(label) for label in m.labels])
    store.write_table(path, table)
    sidecar = {
        'bank_version': m.bank_version,
        'dropped_rows': list(m.dropped_rows),
        'dropped_columns': list(m.dropped_columns),
        'normalized': m.normalized,
        'flagged_columns': list(m.flagged_columns),
        'source_ids': list(m.source_ids),
        **metadata,
    }
    if m.normalization is not None:
        sidecar['normalization'] = m.normalization.to_dict()
    store.write_json(store.sidecar_path(path), sidecar)
    return path


def read_matrix(path: Path) -> SignalFeatureMatrix:
    """Read a matrix written by `write_matrix`."""
    table = store.read_table(path, keep_default_na=False)
    meta = store.read_json(store.sidecar_path(path))
    if 'label' not in table.columns:
        msg = f'{path}: missing label column'
        raise InputError(msg)
    labels = tuple(
        SignalClass.parse(text) if text else None
        for text in table['label'].astype(str))
    features = table.drop(columns='label')
    params = meta.get('normalization')
    return SignalFeatureMatrix(
        features.to_numpy(dtype=float), labels,
        tuple(features.columns),
        normalized=bool(meta.get('normalized', False)),
        source_ids=tuple(meta.get('source_ids', ())),
        dropped_rows=tuple(meta.get('dropped_rows', ())),
        dropped_columns=tuple(meta.get('dropped_columns', ())),
        normalization=(
            NormalizationParams.from_dict(params) if params else None),
        bank_version=meta.get('bank_version', BANK_VERSION))
