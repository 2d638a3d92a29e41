"""Residual diagnostics: Q and D statistics with empirical control limits,
sample autocorrelation and per-level residual box summaries.

Percentiles and quartiles use linear interpolation between order statistics
(``numpy.percentile(..., method='linear')``, Hyndman and Fan type 7), so the
99th percentile of ``1..100`` is ``99.01``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import ConstantSeries, EmptyInput, EmptyLevel, SeriesTooShort, ShapeMismatch, ZeroSingularValue

log = logging.getLogger(__name__)

PERCENTILE_METHOD = 'linear'


def q_statistic(residuals):
    """Squared residual norm of every row."""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim == 1:
        residuals = residuals.reshape(-1, 1)
    return np.sum(residuals ** 2, axis=1)


def d_statistic(scores, singular_values, n_observations=None):
    """Hotelling statistic ``sum_r t_r^2 / lambda_r`` with ``lambda_r = s_r^2 / (N - 1)``."""
    scores = np.asarray(scores, dtype=float)
    singular_values = np.asarray(singular_values, dtype=float)
    if scores.ndim != 2 or scores.shape[1] != singular_values.size:
        raise ShapeMismatch(f'{singular_values.size} singular values for scores of shape {scores.shape}')
    if np.any(singular_values <= 0):
        raise ZeroSingularValue('every retained component needs a positive singular value')
    n = n_observations or scores.shape[0]
    if n < 2:
        raise EmptyInput('the D statistic needs at least two observations')
    variances = singular_values ** 2 / (n - 1)
    return np.sum(scores ** 2 / variances, axis=1)


def control_limit(values, percentile=99.0):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput('cannot compute a control limit of no values')
    return float(np.percentile(values, percentile, method=PERCENTILE_METHOD))


def sample_acf(series, max_lag):
    """``r_k = sum (x_t - m)(x_t+k - m) / sum (x_t - m)^2`` for ``k = 0..max_lag``."""
    x = np.asarray(series, dtype=float).ravel()
    if max_lag < 0 or x.size <= max_lag:
        raise SeriesTooShort(f'a series of length {x.size} has no lag {max_lag}')
    d = x - x.mean()
    denominator = float(d @ d)
    if denominator == 0:
        raise ConstantSeries('the autocorrelation of a constant series is undefined')
    n = x.size
    return np.array([float(d[:n - k] @ d[k:]) / denominator for k in range(max_lag + 1)])


@dataclass(frozen=True)
class BoxSummary:
    level: str
    count: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: Tuple[float, ...]


def _box(level, values):
    q1, median, q3 = np.percentile(values, [25, 50, 75], method=PERCENTILE_METHOD)
    iqr = q3 - q1
    low_fence, high_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= low_fence) & (values <= high_fence)]
    outside = values[(values < low_fence) | (values > high_fence)]
    return BoxSummary(str(level), int(values.size), float(median), float(q1), float(q3),
                      float(inside.min()), float(inside.max()), tuple(float(v) for v in np.sort(outside)))


def residual_dispersion(residuals, groups: Sequence, levels: Sequence = ()) -> Dict[str, BoxSummary]:
    """Tukey box summary of the residuals of every level of ``groups``.

    ``groups`` labels the rows of ``residuals``; all columns of a row belong
    to its level. ``levels`` fixes the reported order and may list levels
    that must be present.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim == 1:
        residuals = residuals.reshape(-1, 1)
    groups = np.asarray([str(g) for g in groups])
    if groups.size != residuals.shape[0]:
        raise ShapeMismatch(f'{groups.size} group labels for {residuals.shape[0]} rows')

    order = [str(level) for level in levels] or list(dict.fromkeys(groups.tolist()))
    out = {}
    for level in order:
        values = residuals[groups == level].ravel()
        if values.size == 0:
            raise EmptyLevel(f'level {level!r} has no residuals')
        out[level] = _box(level, values)
    return out


def dispersion_frame(boxes: Dict[str, BoxSummary]):
    return pd.DataFrame.from_records(
        [
            (b.level, b.count, b.median, b.q1, b.q3, b.whisker_low, b.whisker_high, len(b.outliers))
            for b in boxes.values()
        ],
        columns=('level', 'count', 'median', 'q1', 'q3', 'whisker_low', 'whisker_high', 'outliers'),
    )


@dataclass(frozen=True, eq=False)
class MspcChart:
    q: np.ndarray
    d: np.ndarray
    q_limit: float
    d_limit: float
    percentile: float
    components: int

    def to_frame(self, row_labels=()):
        frame = pd.DataFrame({'Q': self.q, 'D': self.d})
        frame['Q_out'] = (self.q > self.q_limit).astype(int)
        frame['D_out'] = (self.d > self.d_limit).astype(int)
        frame.insert(0, 'row', list(row_labels) or list(range(len(frame))))
        return frame


def mspc_chart(fitted, residuals, n_components=2, percentile=99.0) -> MspcChart:
    """D from a PCA of the centred model part ``fitted``, Q from ``residuals``.

    Components with a zero singular value are not retained.
    """
    fitted = np.asarray(fitted, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if fitted.shape != residuals.shape:
        raise ShapeMismatch(f'model part {fitted.shape} and residuals {residuals.shape} differ in shape')
    if fitted.shape[0] == 0:
        raise EmptyInput('no observations')

    centered = fitted - fitted.mean(axis=0)
    u, s, _ = scipy.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(centered.shape) * np.finfo(float).eps if s.size else 0.0
    r = min(n_components, int(np.count_nonzero(s > tol)))

    q = q_statistic(residuals)
    if r > 0 and centered.shape[0] > 1:
        d = d_statistic(u[:, :r] * s[:r], s[:r])
    else:
        d = np.zeros(centered.shape[0])
    chart = MspcChart(q, d, control_limit(q, percentile), control_limit(d, percentile), percentile, r)
    log.info('MSPC chart: %d of %d rows above the Q limit, %d above the D limit.',
             int(np.sum(q > chart.q_limit)), q.size, int(np.sum(d > chart.d_limit)))
    return chart
