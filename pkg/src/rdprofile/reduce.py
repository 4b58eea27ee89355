"""Principal component analysis and greedy forward feature selection."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from joblib import Parallel, delayed

from . import store
from .classify import SvmTrainer, cross_validate, stratified_folds
from .errors import DegenerateDataError, InputError
from .features import SignalFeatureMatrix

if TYPE_CHECKING:
    from pathlib import Path

    from numpy.typing import ArrayLike

log = logging.getLogger(__name__)

MatrixLike = SignalFeatureMatrix | np.ndarray


def _values(m: MatrixLike) -> np.ndarray:
    if isinstance(m, SignalFeatureMatrix):
        return m.values
    values = np.asarray(m, dtype=float)
    if values.ndim != 2:
        msg = f'Expected a 2-D matrix, got shape {values.shape}'
        raise InputError(msg)
    return values


@dataclass(frozen=True, eq=False)
class PcaModel:
    """A fitted principal component basis.

    :mean_vector:        The column means of the fit data.
    :components:         L x M orthonormal rows, in decreasing variance order.
    :explained_variance: The variance along each component.
    :total_variance:     The summed column variance of the fit data.
    """

    mean_vector: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self) -> int:
        """The number of retained components, L."""
        return self.components.shape[0]

    @property
    def explained_ratio(self) -> np.ndarray:
        """The fraction of the total variance along each component."""
        if self.total_variance == 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'mean_vector': self.mean_vector, 'components': self.components,
            'explained_variance': self.explained_variance,
            'total_variance': self.total_variance}


def pca_fit(m: MatrixLike, l: int) -> PcaModel:  # noqa: E741
    """Fit the top ``l`` principal components.

    Components are eigenvectors of the (ddof=1) covariance of the centered
    columns, each signed so that its largest magnitude entry is positive.

    :raise DegenerateDataError: If all rows are identical.
    """
    if isinstance(m, SignalFeatureMatrix) and not m.normalized:
        msg = 'PCA expects a normalized feature matrix'
        raise InputError(msg)
    x = _values(m)
    s, n_cols = x.shape
    if not 1 <= l <= min(s, n_cols):
        msg = f'l must be in [1, {min(s, n_cols)}], got {l}'
        raise InputError(msg)
    if s < 2 or np.all(x == x[0]):
        msg = 'PCA needs at least two distinct rows'
        raise DegenerateDataError(msg)

    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x - mean, rowvar=False, ddof=1))
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues, kind='stable')[::-1][:l]
    components = eigenvectors[:, order].T
    peaks = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(l), peaks])
    components = components * np.where(signs == 0, 1.0, signs)[:, None]
    return PcaModel(
        mean, components, np.clip(eigenvalues[order], 0.0, None),
        float(np.trace(cov)))


def pca_transform(p: PcaModel, m: MatrixLike) -> np.ndarray:
    """Project rows onto the components, giving an S x L score matrix."""
    x = _values(m)
    if x.shape[1] != p.mean_vector.size:
        msg = (
            f'PCA model expects {p.mean_vector.size} columns, got'
            f' {x.shape[1]}')
        raise InputError(msg)
    return (x - p.mean_vector) @ p.components.T


def pca_inverse(p: PcaModel, scores: ArrayLike) -> np.ndarray:
    """Map component scores back to feature space."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if scores.shape[1] != p.n_components:
        msg = f'Expected {p.n_components} score columns, got {scores.shape[1]}'
        raise InputError(msg)
    return scores @ p.components + p.mean_vector


@dataclass(frozen=True)
class SelectionResult:
    """The outcome of greedy forward feature selection.

    :selected_indices:    Column indices in selection order.
    :accuracy_trajectory: The best cross-validated accuracy of each step.
    :feature_names:       The names of the selected columns.
    """

    selected_indices: tuple[int, ...]
    accuracy_trajectory: tuple[float, ...]
    feature_names: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        """Convert to a JSON friendly dictionary."""
        return {
            'selected': list(self.feature_names),
            'indices': list(self.selected_indices),
            'trajectory': list(self.accuracy_trajectory)}


StepCallback = Callable[[int, int, float], None]


def _candidate_accuracy(
        x: np.ndarray, labels: np.ndarray, columns: list[int], folds: int,
        seed: int, c: float) -> float:
    return cross_validate(
        SvmTrainer(c), x[:, columns], labels, folds, seed).accuracy


def greedy_select(
        m: SignalFeatureMatrix, k: int, folds: int = 10, seed: int = 0, *,
        c: float = 1.0, n_jobs: int = 1,
        on_step: StepCallback | None = None) -> SelectionResult:
    """Select ``k`` features one at a time by cross-validated SVM accuracy.

    Each step adds the unselected feature that, together with the features
    already chosen, gives the highest stratified k-fold accuracy of the
    one-vs-one linear SVM. Ties go to the lowest feature index. The same
    fold assignment is used for every evaluation.

    :on_step: Called after each step with (step, feature index, accuracy).
    :raise TooFewSamplesError: If a class has fewer than ``folds`` samples.
    """
    x = _values(m)
    labels = m.label_array()
    n_cols = x.shape[1]
    if not 1 <= k <= n_cols:
        msg = f'k must be in [1, {n_cols}], got {k}'
        raise InputError(msg)
    stratified_folds(labels, folds, seed)

    selected: list[int] = []
    trajectory: list[float] = []
    for step in range(k):
        candidates = [j for j in range(n_cols) if j not in selected]
        scores = Parallel(n_jobs=n_jobs)(
            delayed(_candidate_accuracy)(
                x, labels, [*selected, j], folds, seed, c)
            for j in candidates)
        best_j, best_score = candidates[0], scores[0]
        for j, score in zip(candidates[1:], scores[1:]):
            if score > best_score:
                best_j, best_score = j, score
        selected.append(best_j)
        trajectory.append(float(best_score))
        log.info(
            'Selection step %d: %s, accuracy %.4f', step + 1,
            m.feature_names[best_j], best_score)
        if on_step is not None:
            on_step(step, best_j, best_score)

    return SelectionResult(
        tuple(selected), tuple(trajectory),
        tuple(m.feature_names[j] for j in selected))


def write_selection(path: Path, result: SelectionResult, **metadata) -> Path:
    """Write a selection result as JSON."""
    return store.write_json(path, {**result.to_dict(), **metadata})


def read_selection(path: Path) -> SelectionResult:
    """Read a selection result written by `write_selection`."""
    data = store.read_json(path)
    try:
        return SelectionResult(
            tuple(int(i) for i in data['indices']),
            tuple(float(a) for a in data['trajectory']),
            tuple(data['selected']))
    except KeyError as exc:
        msg = f'{path}: not a selection result, missing {exc}'
        raise InputError(msg) from exc
