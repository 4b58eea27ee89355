"""Tests for PCA and greedy feature selection."""
from __future__ import annotations

import numpy as np
import pytest

from rdprofile import features, reduce
from rdprofile.errors import (
    DegenerateDataError, InputError, TooFewSamplesError)
from rdprofile.features import SignalFeatureMatrix
from rdprofile.timeseries import SignalClass


def labelled_matrix(values, labels, names=None) -> SignalFeatureMatrix:
    """A normalized matrix with the given class values as labels."""
    values = np.asarray(values, dtype=float)
    if names is None:
        names = tuple(f'f{j}' for j in range(values.shape[1]))
    return SignalFeatureMatrix(
        values, tuple(SignalClass(v) for v in labels), names,
        normalized=True)


def separable_matrix(rng, per_class=10, separating=(0,), n_cols=4):
    """Noise columns, apart from ``separating`` columns that track class."""
    labels = np.repeat([0, 1, 2], per_class)
    values = rng.normal(size=(labels.size, n_cols))
    for j in separating:
        values[:, j] = 3.0 * labels + rng.normal(0.0, 0.1, labels.size)
    return labelled_matrix(values, labels)


def test_points_on_a_line(rng):
    """Collinear points put all their variance on the first component."""
    t = rng.normal(size=50)
    x = np.column_stack([t, t])
    p = reduce.pca_fit(x, 2)
    assert p.explained_ratio[0] == pytest.approx(1.0)
    assert p.explained_ratio[1] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(p.components[0], [0.5 ** 0.5] * 2)


def test_components_are_orthonormal(small_matrix):
    """The component rows form an orthonormal set."""
    p = reduce.pca_fit(small_matrix, 5)
    np.testing.assert_allclose(
        p.components @ p.components.T, np.eye(5), atol=1e-10)
    assert np.all(np.diff(p.explained_variance) <= 0)


def test_full_rank_reconstruction(small_matrix):
    """Keeping every component reconstructs the data."""
    p = reduce.pca_fit(small_matrix, small_matrix.shape[1])
    back = reduce.pca_inverse(p, reduce.pca_transform(p, small_matrix))
    np.testing.assert_allclose(back, small_matrix.values, atol=1e-10)


def test_score_variance_is_explained_variance(small_matrix):
    """Each score column has the variance its component explains."""
    p = reduce.pca_fit(small_matrix, 3)
    scores = reduce.pca_transform(p, small_matrix)
    np.testing.assert_allclose(
        scores.var(axis=0, ddof=1), p.explained_variance, rtol=1e-8)


def test_mean_row_maps_to_origin(small_matrix):
    """The mean row has zero scores."""
    p = reduce.pca_fit(small_matrix, 4)
    scores = reduce.pca_transform(p, small_matrix.values.mean(axis=0))
    np.testing.assert_allclose(scores, 0.0, atol=1e-12)


def test_pca_degenerate():
    """Identical rows have no principal components."""
    with pytest.raises(DegenerateDataError):
        reduce.pca_fit(np.ones((5, 3)), 1)


def test_pca_needs_normalized_matrix(small_corpus):
    """A raw feature matrix is rejected."""
    raw = features.build_matrix(small_corpus[:6])
    with pytest.raises(InputError):
        reduce.pca_fit(raw, 2)


@pytest.mark.parametrize('l', [0, 4])
def test_pca_component_count_range(rng, l):                  # noqa: E741
    """The component count is limited by the matrix shape."""
    with pytest.raises(InputError):
        reduce.pca_fit(rng.normal(size=(10, 3)), l)


def test_pca_transform_column_mismatch(small_matrix, rng):
    """Rows must have as many columns as the fit data."""
    p = reduce.pca_fit(small_matrix, 2)
    with pytest.raises(InputError):
        reduce.pca_transform(p, rng.normal(size=(3, 2)))


def test_greedy_picks_separating_feature(rng):
    """A perfectly separating feature is chosen first."""
    m = separable_matrix(rng, separating=(2,))
    steps = []
    result = reduce.greedy_select(
        m, 1, folds=5, seed=0, on_step=lambda *a: steps.append(a))
    assert result.selected_indices == (2,)
    assert result.accuracy_trajectory == (1.0,)
    assert result.feature_names == ('f2',)
    assert steps == [(0, 2, 1.0)]


def test_greedy_tie_goes_to_lower_index(rng):
    """Equally good features are chosen in index order."""
    m = separable_matrix(rng, separating=(1,))
    values = m.values.copy()
    values[:, 3] = values[:, 1]
    m = labelled_matrix(values, m.label_array())
    result = reduce.greedy_select(m, 1, folds=5)
    assert result.selected_indices == (1,)


def test_greedy_all_features(rng):
    """Selecting every feature gives a permutation of the columns."""
    m = separable_matrix(rng, per_class=6, n_cols=4)
    result = reduce.greedy_select(m, 4, folds=3, seed=2)
    assert sorted(result.selected_indices) == [0, 1, 2, 3]
    assert len(result.accuracy_trajectory) == 4


def test_greedy_k_out_of_range(rng):
    """k cannot exceed the number of features."""
    m = separable_matrix(rng)
    with pytest.raises(InputError):
        reduce.greedy_select(m, 5, folds=5)


def test_greedy_too_few_samples(rng):
    """A class smaller than the fold count stops selection up front."""
    m = separable_matrix(rng, per_class=3)
    with pytest.raises(TooFewSamplesError):
        reduce.greedy_select(m, 1, folds=5)


def test_selection_store(tmp_path):
    """A stored selection reads back unchanged."""
    result = reduce.SelectionResult((3, 0), (0.5, 0.75), ('d', 'a'))
    path = reduce.write_selection(tmp_path / 's.json', result, seed=1)
    assert reduce.read_selection(path) == result


def test_selection_store_rejects_other_json(tmp_path):
    """A JSON file that is not a selection is an input error."""
    path = tmp_path / 'x.json'
    path.write_text('{}\n', encoding='utf-8')
    with pytest.raises(InputError):
        reduce.read_selection(path)
