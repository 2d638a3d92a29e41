import numpy as np
import pytest

from asca import errors
from asca.diagnostics import (
    control_limit,
    d_statistic,
    dispersion_frame,
    mspc_chart,
    q_statistic,
    residual_dispersion,
    sample_acf,
)


def test_q_statistic():
    np.testing.assert_allclose(q_statistic([[1.0, 2.0], [0.0, 3.0]]), [5.0, 9.0])
    np.testing.assert_allclose(q_statistic([2.0, -1.0]), [4.0, 1.0])


def test_d_statistic_matches_the_definition(rng):
    X = rng.normal(size=(30, 4))
    X -= X.mean(axis=0)
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    scores = u[:, :2] * s[:2]
    d = d_statistic(scores, s[:2])
    expected = np.sum(scores ** 2 / (s[:2] ** 2 / 29), axis=1)
    np.testing.assert_allclose(d, expected)
    # Over all rows the statistic averages to R (N - 1) / N.
    assert d.mean() == pytest.approx(2 * 29 / 30)


def test_d_statistic_errors():
    with pytest.raises(errors.ZeroSingularValue):
        d_statistic(np.ones((3, 1)), [0.0])
    with pytest.raises(errors.ShapeMismatch):
        d_statistic(np.ones((3, 2)), [1.0])
    with pytest.raises(errors.EmptyInput):
        d_statistic(np.ones((1, 1)), [1.0])


def test_control_limit_interpolates():
    assert control_limit(np.arange(1, 101), 99) == pytest.approx(99.01)
    assert control_limit([5.0], 95) == 5.0
    with pytest.raises(errors.EmptyInput):
        control_limit([])


def test_acf_of_alternating_series():
    acf = sample_acf([1.0, -1.0] * 10, 2)
    assert acf[0] == 1.0
    assert acf[1] == pytest.approx(-19 / 20)
    assert acf[2] == pytest.approx(18 / 20)


def test_acf_errors():
    with pytest.raises(errors.SeriesTooShort):
        sample_acf([1.0, 2.0, 3.0], 3)
    with pytest.raises(errors.ConstantSeries):
        sample_acf([2.0] * 5, 2)


def test_box_summary_quartiles_and_outliers():
    boxes = residual_dispersion(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 50.0, 0.0, 0.0]),
                                ['a'] * 5 + ['b'] * 5)
    a = boxes['a']
    assert (a.q1, a.median, a.q3) == (2.0, 3.0, 4.0)
    assert (a.whisker_low, a.whisker_high) == (1.0, 5.0)
    assert a.outliers == ()
    b = boxes['b']
    assert b.count == 5
    assert b.outliers == (50.0,)
    assert b.whisker_high == 0.0


def test_box_levels_follow_the_given_order():
    residuals = np.arange(8.0).reshape(4, 2)
    boxes = residual_dispersion(residuals, ['x', 'y', 'x', 'y'], levels=['y', 'x'])
    assert list(boxes) == ['y', 'x']
    assert boxes['x'].count == 4
    with pytest.raises(errors.EmptyLevel):
        residual_dispersion(residuals, ['x', 'y', 'x', 'y'], levels=['x', 'y', 'z'])
    with pytest.raises(errors.ShapeMismatch):
        residual_dispersion(residuals, ['x', 'y'])


def test_dispersion_frame():
    frame = dispersion_frame(residual_dispersion([1.0, 2.0, 3.0], ['a', 'a', 'a']))
    assert frame['level'].tolist() == ['a']
    assert frame['median'].tolist() == [2.0]


def test_mspc_chart(rng):
    fitted = np.repeat(rng.normal(size=(4, 6)), 5, axis=0)
    residuals = rng.normal(0, 0.1, size=(20, 6))
    residuals[7] += 3.0
    chart = mspc_chart(fitted, residuals, n_components=2, percentile=90)
    assert chart.components == 2
    assert chart.q.shape == (20,)
    assert chart.q_limit == pytest.approx(np.percentile(chart.q, 90))
    assert chart.q[7] > chart.q_limit
    frame = chart.to_frame([f'r{i}' for i in range(20)])
    assert list(frame.columns) == ['row', 'Q', 'D', 'Q_out', 'D_out']
    assert frame.loc[7, 'Q_out'] == 1


def test_mspc_chart_without_model_part():
    residuals = np.arange(12.0).reshape(4, 3)
    chart = mspc_chart(np.zeros((4, 3)), residuals)
    assert chart.components == 0
    np.testing.assert_array_equal(chart.d, 0)
    with pytest.raises(errors.ShapeMismatch):
        mspc_chart(np.zeros((3, 3)), residuals)


def test_acf_of_white_noise(rng):
    x = rng.normal(size=4000)
    acf = sample_acf(x, 10)
    assert np.all(np.abs(acf[1:]) < 0.1)
    assert np.all(np.abs(acf) <= 1.0)
    np.testing.assert_allclose(sample_acf(-x, 10), acf, atol=1e-12)


def test_control_limit_grows_with_the_percentile(rng):
    values = rng.chisquare(3, size=250)
    limits = [control_limit(values, p) for p in (50, 90, 95, 99, 99.9)]
    assert limits == sorted(limits)


def test_d_statistic_ignores_rotations_of_the_discarded_subspace(rng):
    X = rng.normal(size=(25, 6)) * np.array([5.0, 4.0, 1.0, 0.8, 0.5, 0.3])
    X -= X.mean(axis=0)
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    discarded = vt[2:]
    rotation, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    Q = np.eye(6) - discarded.T @ discarded + discarded.T @ rotation @ discarded
    np.testing.assert_allclose(Q.T @ Q, np.eye(6), atol=1e-12)

    residuals = rng.normal(size=(25, 6))
    before = mspc_chart(X, residuals, n_components=2)
    after = mspc_chart(X @ Q, residuals, n_components=2)
    np.testing.assert_allclose(after.d, before.d, rtol=1e-8)
