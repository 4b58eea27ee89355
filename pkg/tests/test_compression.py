"""Tests for the compressors, metrics and rate-distortion curves."""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from rdprofile import compression, timeseries
from rdprofile.compression import (
    Algorithm, DctModel, ErrorBudget, LtcModel, RdCurve, RdPoint)
from rdprofile.errors import (
    ComputationError, InputError, MalformedModelError,
    ZeroRangeDistortionError)
from rdprofile.timeseries import SampleEncoding, SignalClass, TimeSeriesWindow

ENC = SampleEncoding(16)


def window(samples, label=None) -> TimeSeriesWindow:
    """Create a window from a list of samples."""
    return TimeSeriesWindow(np.asarray(samples, dtype=float), 'test', label)


def random_windows(rng, count, n=64):
    """Random windows of assorted shapes."""
    result = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            samples = rng.normal(size=n)
        elif kind == 1:
            samples = np.cumsum(rng.normal(size=n))
        else:
            t = np.arange(n)
            samples = np.sin(t / rng.uniform(2, 10)) + rng.normal(0, 0.1, n)
        result.append(window(samples))
    return result


def feasible(samples, eps, start, end) -> bool:
    """True if some line through samples[start] fits samples[start..end].

    The line must start exactly at the first sample value, as an LTC anchor.
    """
    lo, hi = -math.inf, math.inf
    for j in range(start + 1, end + 1):
        d = j - start
        lo = max(lo, (samples[j] - eps - samples[start]) / d)
        hi = min(hi, (samples[j] + eps - samples[start]) / d)
    return lo <= hi


# LTC.
def test_ltc_affine_signal_has_two_end_points():
    """A straight line is a single segment."""
    x = window(3.0 * np.arange(500) - 7.0)
    for eps in (0.0, 1.0, 10.0):
        m = compression.ltc_compress(x, ErrorBudget(eps))
        assert [p for p, _ in m.endpoints] == [0, 499]
        np.testing.assert_allclose(
            [v for _, v in m.endpoints], [-7.0, 3.0 * 499 - 7.0])


def test_ltc_zero_budget_keeps_every_break():
    """With no error allowed every change of slope is an end point."""
    m = compression.ltc_compress(window([0, 1, 0, 1, 0]), ErrorBudget(0))
    assert [p for p, _ in m.endpoints] == [0, 1, 2, 3, 4]


def test_ltc_segmentation_matches_exhaustive_check():
    """The greedy ends each segment where extension becomes infeasible."""
    samples = [0.0, 1.0, 2.0, 3.0, 10.0]
    m = compression.ltc_compress(window(samples), ErrorBudget(10.0))
    # 0..3 is a line; the sample 10 cannot join it within 1.0.
    assert feasible(samples, 1.0, 0, 3)
    assert not feasible(samples, 1.0, 0, 4)
    assert [p for p, _ in m.endpoints] == [0, 3, 4]
    x_hat = compression.ltc_reconstruct(m).samples
    assert np.max(np.abs(x_hat - samples)) <= 1.0 + 1e-9


def test_ltc_reconstruct_interpolates():
    """Reconstruction draws straight lines between end points."""
    m = LtcModel(((0, 0.0), (4, 4.0)), 5)
    assert compression.ltc_reconstruct(m).samples.tolist() == [
        0.0, 1.0, 2.0, 3.0, 4.0]


def test_ltc_reconstruct_all_end_points():
    """With every position stored the values come back exactly."""
    values = [3.0, -1.0, 2.5, 7.0]
    m = LtcModel(tuple(enumerate(values)), 4)
    assert compression.ltc_reconstruct(m).samples.tolist() == values


@pytest.mark.parametrize('endpoints', [
    ((0, 0.0), (0, 1.0), (4, 1.0)),
    ((0, 0.0), (3, 1.0)),
    ((1, 0.0), (4, 1.0)),
    ((0, 0.0),),
])
def test_ltc_malformed_models(endpoints):
    """Models that break the end point rules are rejected."""
    with pytest.raises(MalformedModelError):
        compression.ltc_reconstruct(LtcModel(endpoints, 5))


def test_ltc_segments_are_maximal(rng):
    """No emitted segment could have been extended by one more sample."""
    for x in random_windows(rng, 30):
        eps = ErrorBudget(5.0)
        bound = eps.absolute(x)
        m = compression.ltc_compress(x, eps)
        positions = [p for p, _ in m.endpoints]
        x_hat = compression.ltc_reconstruct(m).samples
        for start, end in itertools.pairwise(positions[:-1]):
            anchor = x_hat[start]
            lo, hi = -math.inf, math.inf
            for j in range(start + 1, end + 2):
                d = j - start
                lo = max(lo, (x.samples[j] - bound - anchor) / d)
                hi = min(hi, (x.samples[j] + bound - anchor) / d)
            assert lo > hi + 1e-12 * x.value_range


def slope_interval(samples, bound, start, anchor, end) -> tuple[float, float]:
    """The slopes from (start, anchor) that fit samples[start + 1..end]."""
    lo, hi = -math.inf, math.inf
    for j in range(start + 1, end + 1):
        d = j - start
        lo = max(lo, (samples[j] - bound - anchor) / d)
        hi = min(hi, (samples[j] + bound - anchor) / d)
    return lo, hi


def exhaustive_segmentation(samples, bound) -> list[int]:
    """End point positions found by trying every possible segment end.

    Each segment is the longest feasible one from its anchor and the next
    anchor value is taken at the interval's mid slope.
    """
    n = len(samples)
    start, anchor = 0, samples[0]
    positions = [0]
    while start < n - 1:
        ends = []
        for e in range(start + 1, n):
            lo, hi = slope_interval(samples, bound, start, anchor, e)
            if lo <= hi:
                ends.append(e)
        end = max(ends)
        lo, hi = slope_interval(samples, bound, start, anchor, end)
        anchor += (lo + hi) / 2.0 * (end - start)
        start = end
        positions.append(end)
    return positions


def test_ltc_matches_exhaustive_segmentation():
    """On short random windows the greedy equals an exhaustive search."""
    rng = np.random.default_rng(4242)
    for i in range(200):
        n = int(rng.integers(2, 31))
        x = window(np.cumsum(rng.normal(size=n)) if i % 2
                   else rng.normal(size=n))
        eps = ErrorBudget(float(rng.choice([0.0, 1.0, 5.0, 10.0, 25.0])))
        bound = eps.absolute(x) + compression.BOUND_TOLERANCE * x.value_range
        samples = x.samples.tolist()
        m = compression.ltc_compress(x, eps)
        positions = [p for p, _ in m.endpoints]
        assert positions == exhaustive_segmentation(samples, bound)

        x_hat = compression.ltc_reconstruct(m).samples
        assert np.max(np.abs(x_hat - x.samples)) <= bound + 1e-12
        for start, end in itertools.pairwise(positions[:-1]):
            lo, hi = slope_interval(samples, bound, start, x_hat[start], end)
            assert lo <= hi
            lo, hi = slope_interval(
                samples, bound, start, x_hat[start], end + 1)
            assert lo > hi


# DCT.
def test_dct_of_constant():
    """A constant signal is all DC."""
    coeffs = compression.dct_forward(np.full(4, 2.5))
    np.testing.assert_allclose(coeffs, [2.5 * 2.0, 0, 0, 0], atol=1e-12)


def test_dct_round_trip_and_parseval(rng):
    """The transform is orthonormal."""
    for _ in range(100):
        x = rng.normal(size=500) * rng.uniform(0.1, 100)
        coeffs = compression.dct_forward(x)
        back = compression.dct_inverse(coeffs).samples
        assert np.max(np.abs(back - x)) < 1e-9 * np.ptp(x)
        assert math.isclose(
            np.sum(x ** 2), np.sum(coeffs ** 2), rel_tol=1e-9)


def test_dct_constant_needs_one_coefficient():
    """A constant window keeps only its DC coefficient."""
    for eps in (0.0, 5.0):
        m = compression.dct_compress(
            window(np.full(50, 3.0)), ErrorBudget(eps))
        assert m.k == 1


def test_dct_zero_budget_keeps_everything(rng):
    """A zero budget on a random window keeps all the coefficients."""
    x = window(rng.normal(size=100))
    assert compression.dct_compress(x, ErrorBudget(0.0)).k == 100


@pytest.mark.parametrize('k', [1, 3, 10])
def test_dct_single_basis_vector(k):
    """The prefix must reach the only active coefficient."""
    n = 64
    coeffs = np.zeros(n)
    coeffs[k] = 5.0
    x = compression.dct_inverse(coeffs)
    m = compression.dct_compress(x, ErrorBudget(1.0))
    assert m.k == k + 1
    assert compression.distortion(x, compression.dct_reconstruct(m)) <= 1.0


def test_dct_prefix_errors_across_blocks(rng):
    """Prefix errors agree with direct reconstruction over several blocks."""
    n = 2 * compression.PREFIX_BLOCK + 17
    x = window(np.cumsum(rng.normal(size=n)))
    coeffs = compression.dct_forward(x)
    errors = compression._prefix_errors(x, coeffs)
    direct = [
        np.max(np.abs(
            x.samples - compression.dct_inverse(coeffs[:k], n=n).samples))
        for k in range(1, n + 1)]
    np.testing.assert_allclose(
        errors, direct, rtol=0, atol=1e-9 * x.value_range)
    for eps in (0.5, 2.0, 10.0):
        k = compression.dct_compress(x, ErrorBudget(eps)).k
        bound = ErrorBudget(eps).absolute(x) + (
            compression.BOUND_TOLERANCE * x.value_range)
        assert direct[k - 1] <= bound + 1e-9 * x.value_range
        if k > 1:
            assert direct[k - 2] > bound - 1e-9 * x.value_range


def test_dct_compress_rate(rng):
    """The rate driven variant keeps exactly k coefficients."""
    x = window(rng.normal(size=40))
    assert compression.dct_compress_rate(x, 7).k == 7
    full = compression.dct_compress_rate(x, 40)
    back = compression.dct_reconstruct(full).samples
    assert np.max(np.abs(back - x.samples)) < 1e-9 * x.value_range
    flat = window(np.full(40, 1.5))
    assert compression.model_distortion(
        flat, compression.dct_compress_rate(flat, 1)) == 0.0
    with pytest.raises(InputError):
        compression.dct_compress_rate(x, 41)
    with pytest.raises(InputError):
        compression.dct_compress_rate(x, 0)


def test_dct_model_rejects_too_many_coefficients():
    """A DCT model cannot hold more coefficients than samples."""
    with pytest.raises(MalformedModelError):
        DctModel(np.ones(5), 4)


# Bits, rate and distortion.
def test_model_bits():
    """Model sizes follow the bit accounting rules."""
    ltc = LtcModel(((0, 0.0), (499, 1.0)), 500)
    assert compression.model_bits(ltc, ENC) == 50
    assert compression.model_bits(DctModel([1.0], 500), ENC) == 25
    full = DctModel(np.ones(500), 500)
    assert compression.model_bits(full, ENC) == 8009
    assert compression.fallback_raw(full, ENC)


def test_rate():
    """Rates are model bits over raw bits, capped at 1."""
    x = window(np.arange(500))
    ltc = compression.ltc_compress(x, ErrorBudget(1.0))
    assert compression.rate(ltc, x, ENC) == 50 / 8000
    full = DctModel(compression.dct_forward(x), 500)
    assert compression.rate(full, x, ENC) == 1.0


def test_distortion():
    """Distortion is the worst error as a percentage of the range."""
    assert compression.distortion([0.0, 10.0], [1.0, 10.0]) == 10.0
    assert compression.distortion([0.0, 10.0], [0.0, 10.0]) == 0.0
    assert compression.distortion([2.0, 2.0], [2.0, 2.0]) == 0.0
    assert compression.distortion([2.0, 2.0], [2.0, 2.1]) == math.inf
    with pytest.raises(InputError):
        compression.distortion([1.0, 2.0], [1.0, 2.0, 3.0])


def test_distortion_matches_direct_formula(rng):
    """Distortion agrees with a direct evaluation of the definition."""
    for _ in range(50):
        a, b = rng.normal(size=30), rng.normal(size=30)
        expected = 100.0 * max(abs(a - b)) / (max(a) - min(a))
        assert math.isclose(
            compression.distortion(a, b), expected, rel_tol=1e-12)


def test_zero_range_imperfect_model_is_an_error():
    """A non-trivial inexact model of a flat window has no distortion."""
    flat = window(np.full(4, 1.0))
    m = LtcModel(((0, 1.0), (1, 2.0), (3, 1.0)), 4)
    with pytest.raises(ZeroRangeDistortionError):
        compression.model_distortion(flat, m)


def test_error_budget_is_non_negative():
    """Negative budgets are rejected."""
    with pytest.raises(InputError):
        ErrorBudget(-0.1)


# Sweeps and curves.
@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_sweep_respects_budgets(rng, algorithm):
    """Measured distortion never exceeds the requested budget."""
    grid = [ErrorBudget(e) for e in (0.5, 1, 2, 5, 10, 20)]
    for x in random_windows(rng, 60):
        for eps in grid:
            m = compression.compress(x, algorithm, eps)
            assert compression.model_distortion(x, m) <= (
                eps.epsilon_pct + 1e-6)


def test_dct_model_size_is_monotone_in_budget(rng):
    """A bigger budget never gives a bigger DCT model."""
    budgets = [ErrorBudget(e) for e in (0.0, 0.5, 1, 2, 4, 8, 16)]
    for x in random_windows(rng, 30):
        sizes = [
            compression.dct_compress(x, e).k for e in budgets]
        assert sizes == sorted(sizes, reverse=True)


def test_ltc_zero_budget_gives_largest_model(rng):
    """No budget needs at least as many end points as any other."""
    for x in random_windows(rng, 30):
        exact = len(compression.ltc_compress(x, ErrorBudget(0)).endpoints)
        for eps in (0.5, 2, 8):
            m = compression.ltc_compress(x, ErrorBudget(eps))
            assert len(m.endpoints) <= exact


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_swept_model_sizes_never_grow(algorithm):
    """Along a sweep, model size is non-increasing and budgets are met."""
    grid = [ErrorBudget(e) for e in (0.5, 1, 2, 3, 4, 5, 7, 10, 15, 20)]
    for x in timeseries.gen_corpus(20, 200, seed=77):
        models = compression.sweep_models(x, algorithm, grid, ENC)
        sizes = [compression.model_bits(m, ENC) for m in models]
        assert all(a >= b for a, b in itertools.pairwise(sizes))
        for eps, m in zip(grid, models):
            assert compression.model_distortion(x, m) <= (
                eps.epsilon_pct + 1e-6)


def test_sweep_keeps_the_smaller_earlier_model(monkeypatch):
    """A looser budget reuses a tighter budget's model when it is smaller."""
    x = window([0.0, 1.0, 0.0, 1.0, 0.0])
    small = LtcModel(((0, 0.0), (4, 0.0)), 5)
    large = LtcModel(((0, 0.0), (2, 0.0), (4, 0.0)), 5)
    made = {1.0: small, 2.0: large, 3.0: small}

    def fake_compress(x, algorithm, eps):
        return made[eps.epsilon_pct]

    monkeypatch.setattr(compression, 'compress', fake_compress)
    grid = [ErrorBudget(e) for e in (1.0, 2.0, 3.0)]
    models = compression.sweep_models(x, Algorithm.LTC, grid, ENC)
    assert models == [small, small, small]


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_sweep_curves_are_monotone(rng, algorithm):
    """Swept curves have increasing distortion and non-increasing rate."""
    grid = [ErrorBudget(e) for e in (0.5, 1, 2, 3, 4, 5, 7, 10, 15, 20)]
    for x in random_windows(rng, 20):
        c = compression.rd_sweep(x, algorithm, grid, ENC)
        assert np.all(np.diff(c.distortions) > 0)
        assert np.all(np.diff(c.rates) <= 0)
        assert np.all((c.rates > 0) & (c.rates <= 1))


def test_sweep_of_constant_signal():
    """A constant window gives a single zero distortion point."""
    flat = window(np.full(500, 4.0))
    grid = [ErrorBudget(e) for e in (1, 2, 3)]
    ltc = compression.rd_sweep(flat, Algorithm.LTC, grid, ENC)
    dct = compression.rd_sweep(flat, Algorithm.DCT, grid, ENC)
    assert ltc.points == (RdPoint(0.0, 50 / 8000),)
    assert dct.points == (RdPoint(0.0, 25 / 8000),)


def test_sweep_single_budget(rng):
    """A grid of one budget gives a one point curve."""
    x = window(rng.normal(size=50))
    c = compression.rd_sweep(x, Algorithm.DCT, [ErrorBudget(5)], ENC)
    assert len(c.points) == 1


def test_sweep_rejects_unsorted_grid(rng):
    """Budgets must be ascending."""
    x = window(rng.normal(size=50))
    with pytest.raises(InputError):
        compression.rd_sweep(
            x, Algorithm.LTC, [ErrorBudget(5), ErrorBudget(1)], ENC)


def test_regularize():
    """Regularization sorts, merges and enforces non-increasing rates."""
    points = [RdPoint(2.0, 0.5), RdPoint(1.0, 0.4), RdPoint(2.0, 0.3),
              RdPoint(3.0, 0.35)]
    assert compression.regularize(points) == (
        RdPoint(1.0, 0.4), RdPoint(2.0, 0.3), RdPoint(3.0, 0.3))


def make_curve(points, label=None, algorithm=Algorithm.DCT) -> RdCurve:
    """Create a curve from (distortion, rate) pairs."""
    return RdCurve(
        tuple(RdPoint(d, r) for d, r in points), algorithm, label,
        n_samples=500)


def test_average_single_curve_on_own_grid():
    """Averaging one curve on its own distortions changes nothing."""
    c = make_curve([(0.0, 0.9), (1.0, 0.5), (4.0, 0.2)])
    avg = compression.average_curve([c], c.distortions)
    assert avg.points == c.points


def test_average_two_curves():
    """Rates are averaged point-wise; ends are held constant."""
    a = make_curve([(0.0, 0.8), (2.0, 0.4)], SignalClass.NOISY)
    b = make_curve([(1.0, 0.6), (3.0, 0.2)], SignalClass.NOISY)
    avg = compression.average_curve([a, b], [0.0, 2.0, 4.0])
    np.testing.assert_allclose(avg.rates, [0.7, 0.4, 0.3])
    assert avg.class_label is SignalClass.NOISY
    assert avg.n_windows == 2
    classless = compression.average_curve([a, b], [1.0], classless=True)
    assert classless.label == 'all'


def test_average_errors():
    """Averaging needs compatible curves and an ascending grid."""
    a = make_curve([(0.0, 0.8), (2.0, 0.4)])
    b = make_curve([(0.0, 0.8), (2.0, 0.4)], algorithm=Algorithm.LTC)
    with pytest.raises(ComputationError):
        compression.average_curve([], [0.0])
    with pytest.raises(InputError):
        compression.average_curve([a, b], [0.0])
    with pytest.raises(InputError):
        compression.average_curve([a], [1.0, 0.0])


def test_min_rate_for_tolerance():
    """Rates are interpolated and held constant beyond the curve."""
    c = make_curve([(1.0, 0.5), (3.0, 0.3), (5.0, 0.1)])
    assert compression.min_rate_for_tolerance(c, 3.0)[0] == 0.3
    assert math.isclose(compression.min_rate_for_tolerance(c, 2.0)[0], 0.4)
    assert compression.min_rate_for_tolerance(c, 0.0)[0] == 0.5
    assert compression.min_rate_for_tolerance(c, 9.0)[0] == 0.1
    # 0.1 * 8000 = 800 bits; (800 - 9) // 16 = 49 coefficients.
    assert compression.min_rate_for_tolerance(c, 5.0)[1] == 49


def test_min_rate_for_tolerance_at_least_one_coefficient():
    """The equivalent DCT model size is at least one coefficient."""
    c = make_curve([(0.0, 0.001)])
    assert compression.min_rate_for_tolerance(c, 1.0)[1] == 1


def test_class_curves_and_classless(small_corpus):
    """The classless curve is the equal weighted mean of the class curves."""
    grid = compression.default_average_grid(0.5, 20.0)
    budgets = [ErrorBudget(e) for e in (1, 2, 4, 8, 16)]
    curves = compression.sweep_windows(
        small_corpus, Algorithm.DCT, budgets, ENC)
    per_class = compression.class_curves(curves, grid)
    assert list(per_class) == list(SignalClass)
    classless = compression.classless_curve(per_class, grid)
    expected = np.mean([c.rates for c in per_class.values()], axis=0)
    np.testing.assert_allclose(classless.rates, expected)
    assert classless.class_label is None


def test_curve_store(tmp_path):
    """Curves survive being written and read."""
    c = make_curve([(0.0, 0.9), (2.5, 0.25)], SignalClass.TREND)
    path = compression.write_curve(tmp_path / 'c.csv', c, seed=3)
    back = compression.read_curve(path)
    assert back == c


def test_noisy_needs_more_rate_than_quasi_periodic():
    """At 4% distortion noisy windows compress worse than periodic ones."""
    budgets = [ErrorBudget(e) for e in (0.5, 1, 2, 3, 4, 5, 7, 10, 15, 20)]
    grid = compression.default_average_grid()
    rates = {}
    for cls in (SignalClass.NOISY, SignalClass.QUASI_PERIODIC):
        windows = timeseries.gen_corpus(20, 500, seed=0, classes=(cls,))
        curves = compression.sweep_windows(
            windows, Algorithm.LTC, budgets, ENC)
        avg = compression.average_curve(curves, grid)
        rates[cls] = compression.min_rate_for_tolerance(avg, 4.0)[0]
    assert rates[SignalClass.NOISY] > rates[SignalClass.QUASI_PERIODIC]
