"""Row exclusion, mean imputation and column scaling.

The order is fixed: rows with too many missing cells are dropped first, the
remaining gaps are filled with column means computed on the kept rows, and
only then are columns centred or autoscaled.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import AllRowsDropped, ConfigError, EmptyColumn, ZeroVarianceWarning
from .tensor import DesignTable
from .utils.formats import TabularData, plural

log = logging.getLogger(__name__)

CENTER = 'center'
AUTOSCALE = 'autoscale'
METHODS = (CENTER, AUTOSCALE)


def missing_counts(table: DesignTable):
    return table.missing_mask.sum(axis=1)


def row_means(table: DesignTable):
    """Average of the observed values of each row; NaN for a row with none."""
    values = np.where(table.missing_mask, 0.0, table.matrix)
    counts = (~table.missing_mask).sum(axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(counts > 0, values.sum(axis=1) / counts, np.nan)


@dataclass(frozen=True)
class ExcludedRow:
    name: str
    missing: int


def _row_name(parts):
    return ' / '.join(parts)


def drop_rows_by_missing(table: DesignTable, threshold) -> Tuple[DesignTable, List[ExcludedRow]]:
    """Removes the rows with more than ``threshold`` missing cells."""
    if threshold < 0:
        raise ConfigError(f'the missing-value threshold must be non-negative, got {threshold}')
    counts = missing_counts(table)
    keep = np.flatnonzero(counts <= threshold)
    if keep.size == 0:
        raise AllRowsDropped(f'every row has more than {threshold} missing values')

    names = table.row_names()
    excluded = [ExcludedRow(_row_name(names[i]), int(counts[i])) for i in np.flatnonzero(counts > threshold)]
    if excluded:
        log.info('Excluded %s with more than %d missing values.', format(plural(len(excluded)), 'row'), threshold)
    return table.take_rows(keep), excluded


def impute_column_mean(table: DesignTable) -> DesignTable:
    """Fills every missing cell with the mean of the observed cells of its column."""
    mask = table.missing_mask
    if not mask.any():
        return table.with_matrix(table.matrix.copy())

    observed = (~mask).sum(axis=0)
    empty = np.flatnonzero(observed == 0)
    if empty.size:
        names = table.col_names()
        shown = ', '.join(_row_name(names[j]) for j in empty[:5])
        raise EmptyColumn(f'{format(plural(empty.size), "column")} without observations ({shown})')

    sums = np.where(mask, 0.0, table.matrix).sum(axis=0)
    means = sums / observed
    matrix = np.where(mask, means, table.matrix)
    log.info('Imputed %s with column means.', format(plural(int(mask.sum())), 'missing cell'))
    return table.with_matrix(matrix)


def mean_center(X):
    X = np.asarray(X, dtype=float)
    return X - X.mean(axis=0)


def autoscale(X):
    """Centres each column and divides by its sample standard deviation (``N - 1``).

    Zero-variance columns stay centred (all zeros) and raise a
    :class:`ZeroVarianceWarning`.
    """
    X = np.asarray(X, dtype=float)
    centered = X - X.mean(axis=0)
    if X.shape[0] < 2:
        return centered
    sd = centered.std(axis=0, ddof=1)
    flat = sd == 0
    if flat.any():
        message = f'{format(plural(int(flat.sum())), "column")} with zero variance left unscaled'
        warnings.warn(message, ZeroVarianceWarning, stacklevel=2)
        log.warning(message)
    return centered / np.where(flat, 1.0, sd)


@dataclass
class PreprocessReport:
    threshold: float
    method: str
    rows_before: int
    rows_after: int = 0
    excluded: List[ExcludedRow] = field(default_factory=list)
    imputed: int = 0
    zero_variance: int = 0

    def render(self):
        lines = [
            f'Rows: {self.rows_before} in, {self.rows_after} kept '
            f'({len(self.excluded)} excluded with more than {self.threshold:g} missing values)',
            f'Imputed cells: {self.imputed} (column means of the kept rows)',
            f'Column preprocessing: {self.method}',
        ]
        if self.zero_variance:
            lines.append(f'Zero-variance columns: {self.zero_variance}')
        text = '\n'.join(lines) + '\n'
        if self.excluded:
            table = TabularData(align='<')
            table.set_columns(['excluded row', 'missing'])
            table.add_rows([(row.name, row.missing) for row in self.excluded])
            text += '\n' + table.render() + '\n'
        return text


def preprocess(table: DesignTable, threshold, method=CENTER) -> Tuple[DesignTable, PreprocessReport]:
    """Drop, impute, then centre or autoscale; returns the ready table and its report."""
    if method not in METHODS:
        raise ConfigError(f'unknown preprocessing {method!r}, expected {CENTER!r} or {AUTOSCALE!r}')

    report = PreprocessReport(threshold, method, table.shape[0])
    kept, report.excluded = drop_rows_by_missing(table, threshold)
    report.rows_after = kept.shape[0]
    report.imputed = int(kept.missing_mask.sum())
    filled = impute_column_mean(kept)

    if method == AUTOSCALE:
        report.zero_variance = int(np.count_nonzero(filled.matrix.std(axis=0) == 0))
        matrix = autoscale(filled.matrix)
    else:
        matrix = mean_center(filled.matrix)
    return filled.with_matrix(matrix), report
