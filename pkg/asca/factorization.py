"""Least-squares ASCA+ factorization and the ANOVA table.

``X = 1 m' + sum_t X_t + E`` where ``X_t = D_t Theta_t`` and ``Theta`` is the
least-squares solution of ``X = D Theta + E``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg

from .design import INTERCEPT, DesignMatrix
from .errors import (
    NonFiniteInput,
    RankDeficientWarning,
    SaturatedModel,
    ShapeMismatch,
    UnknownTerm,
    ZeroResidualVarianceWarning,
)
from .utils.formats import TabularData, format_number, format_p

log = logging.getLogger(__name__)

RESIDUALS = 'Residuals'
TOTAL = 'Total'
TABLE_COLUMNS = ('SS', '%SS', 'df', 'MS', 'F', 'p')


def resolve_reference(reference):
    """Maps any spelling of "residuals" onto the residual row name."""
    if reference is None or str(reference).lower() == RESIDUALS.lower():
        return RESIDUALS
    return reference


def solve_least_squares(matrix, data):
    """Returns ``(Theta, rank)`` for ``data ~ matrix @ Theta``.

    Uses a column-pivoted economy QR. When ``matrix`` is rank deficient the
    minimum-norm solution is returned and a :class:`RankDeficientWarning`
    is issued.
    """
    n, p = matrix.shape
    q, r, piv = scipy.linalg.qr(matrix, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.count_nonzero(diag > tol))

    if rank == p:
        theta = np.empty((p, data.shape[1]))
        theta[piv] = scipy.linalg.solve_triangular(r, q.T @ data)
        return theta, rank

    message = f'design matrix has rank {rank} < {p} columns; using the minimum-norm solution'
    warnings.warn(message, RankDeficientWarning, stacklevel=3)
    log.warning(message)
    theta = scipy.linalg.lstsq(matrix, data, lapack_driver='gelsd')[0]
    return theta, rank


@dataclass(frozen=True, eq=False)
class EffectDecomposition:
    data: np.ndarray
    grand_mean: np.ndarray
    effects: Dict[str, np.ndarray]
    residuals: np.ndarray
    coefficients: np.ndarray
    design: DesignMatrix
    rank: int

    @property
    def shape(self):
        return self.data.shape

    def effect(self, term):
        try:
            return self.effects[term]
        except KeyError:
            raise UnknownTerm(f'no effect matrix for {term!r}') from None

    def reconstruction(self):
        """``1 m' + sum of effects + residuals``; equals the data up to rounding."""
        total = np.broadcast_to(self.grand_mean, self.data.shape).copy()
        for effect in self.effects.values():
            total += effect
        return total + self.residuals

    def centered(self):
        return self.data - self.data.mean(axis=0)

    @property
    def residual_df(self):
        return self.data.shape[0] - self.rank


def fit(X, design: DesignMatrix) -> EffectDecomposition:
    """Fits the factorization of ``X`` (N x M, or a length-N vector) onto ``design``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] != design.n_observations:
        raise ShapeMismatch(f'data of shape {X.shape} does not match {design.n_observations} design rows')
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput('data holds NaN or infinite values; impute missing cells first')

    # Solve for the centred data and give the column means to the intercept,
    # so a minimum-norm solution never moves part of the mean into an effect.
    means = X.mean(axis=0)
    theta, rank = solve_least_squares(design.matrix, X - means)
    theta[0] += means

    effects = {}
    for block in design.term_blocks:
        if block.name == INTERCEPT:
            continue
        effects[block.name] = design.matrix[:, block.columns] @ theta[block.columns]

    residuals = X - design.matrix @ theta
    log.debug('Fitted %d x %d data on %d design columns (rank %d).', *X.shape, design.shape[1], rank)
    return EffectDecomposition(X, theta[0].copy(), effects, residuals, theta, design, rank)


@dataclass(frozen=True)
class AnovaRow:
    term: str
    ss: float
    pct_ss: float
    df: int
    ms: float
    f: Optional[float] = None
    p: Optional[float] = None


@dataclass(frozen=True)
class AnovaTable:
    rows: List[AnovaRow]
    residual: AnovaRow
    total: AnovaRow
    reference: str = RESIDUALS
    permutations: Optional[int] = None
    seed: Optional[int] = None
    labels: Dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        yield from self.rows
        yield self.residual
        yield self.total

    def term(self, name) -> AnovaRow:
        for row in self:
            if row.term == name:
                return row
        raise UnknownTerm(f'no ANOVA row for {name!r}')

    def display_name(self, term):
        return self.labels.get(term, term)

    def to_frame(self):
        """One row per term plus residual and total, columns SS, %SS, df, MS, F, p."""
        records = [
            (self.display_name(row.term), row.ss, row.pct_ss, row.df, row.ms, row.f, row.p)
            for row in self
        ]
        frame = pd.DataFrame.from_records(records, columns=('term',) + TABLE_COLUMNS)
        return frame.set_index('term')

    def to_csv(self, path):
        self.to_frame().to_csv(path, float_format='%.12g', na_rep='', lineterminator='\n')

    def render(self):
        table = TabularData(align='>')
        table.set_columns(['', *TABLE_COLUMNS])
        for row in self:
            if row is self.total:
                table.add_separator()
            p = format_p(row.p, self.permutations or 0)
            table.add_row([
                self.display_name(row.term),
                format_number(row.ss),
                f'{row.pct_ss:.2f}',
                row.df,
                format_number(row.ms),
                format_number(row.f, 3) if row.f is not None else '--',
                p,
            ])

        footer = [f'F reference: {self.reference}']
        if self.permutations is not None:
            footer.append(f'permutations: {self.permutations}, seed: {self.seed}')
        return table.render() + '\n' + '; '.join(footer) + '\n'


def f_ratio(ms, ms_reference):
    """``ms / ms_reference``; ``inf`` for a positive MS over zero, NaN for 0/0."""
    ms = np.asarray(ms, dtype=float)
    ms_reference = np.asarray(ms_reference, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return ms / ms_reference


def anova_table(dec: EffectDecomposition, design: Optional[DesignMatrix] = None, reference=RESIDUALS,
                tests: Sequence = (), labels: Optional[Dict[str, str]] = None) -> AnovaTable:
    """Sums of squares, mean squares and F-ratios of every term.

    ``SS`` of a term is the squared Frobenius norm of its effect matrix,
    ``%SS`` is relative to the column-centred data, and ``F`` divides each
    term's MS by the MS of ``reference`` (the residuals unless another term
    is named). ``tests`` are :class:`~asca.inference.PermutationResult`
    objects whose p-values fill the ``p`` column.
    """
    design = design or dec.design
    reference = resolve_reference(reference)
    n = dec.data.shape[0]
    df_res = dec.residual_df
    if df_res <= 0:
        raise SaturatedModel(f'no residual degrees of freedom ({n} rows, rank {dec.rank})')

    ss_total = float(np.sum(dec.centered() ** 2))
    ss_res = float(np.sum(dec.residuals ** 2))

    def pct(ss):
        return 100.0 * ss / ss_total if ss_total > 0 else float('nan')

    terms = [b for b in design.term_blocks if b.name != INTERCEPT]
    ss = {b.name: float(np.sum(dec.effect(b.name) ** 2)) for b in terms}
    ms = {b.name: ss[b.name] / b.df if b.df else float('nan') for b in terms}
    ms_res = ss_res / df_res

    if reference == RESIDUALS:
        ms_ref = ms_res
    elif reference in ms:
        ms_ref = ms[reference]
    else:
        raise UnknownTerm(f'unknown reference term {reference!r}')

    if ms_ref == 0:
        message = f'reference {reference!r} has zero mean square; F-ratios are infinite or undefined'
        warnings.warn(message, ZeroResidualVarianceWarning, stacklevel=2)
        log.warning(message)

    p_values = {t.term: t.p for t in tests}
    permutations = tests[0].k if tests else None
    seed = tests[0].seed if tests else None

    rows = []
    for block in terms:
        f = None if block.name == reference else float(f_ratio(ms[block.name], ms_ref))
        rows.append(AnovaRow(block.name, ss[block.name], pct(ss[block.name]), block.df, ms[block.name], f,
                             p_values.get(block.name)))

    residual = AnovaRow(RESIDUALS, ss_res, pct(ss_res), df_res, ms_res)
    pct_sum = sum(r.pct_ss for r in rows) + residual.pct_ss
    total = AnovaRow(TOTAL, ss_total, pct_sum, n - 1, ss_total / (n - 1) if n > 1 else float('nan'))
    return AnovaTable(rows, residual, total, reference, permutations, seed, dict(labels or {}))


def variable_pct_ss(dec: EffectDecomposition):
    """Per-column %SS of the whole factorization (all terms plus residuals).

    Equals 100 for every column of a balanced design; under unbalance the
    overlap between terms shows up variable by variable. Zero-variance
    columns give NaN.
    """
    explained = np.sum(dec.residuals ** 2, axis=0)
    for effect in dec.effects.values():
        explained = explained + np.sum(effect ** 2, axis=0)
    total = np.sum(dec.centered() ** 2, axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(total > 0, 100.0 * explained / total, np.nan)


def univariate_anova(x, design: DesignMatrix, permutations, seed, reference=RESIDUALS, **options) -> AnovaTable:
    """Permutation ANOVA of a single response: the factorization and tests with ``M = 1``."""
    from .inference import permutation_test

    x = np.asarray(x, dtype=float).reshape(-1, 1)
    dec = fit(x, design)
    tests = permutation_test(x, design, None, permutations, seed, reference=reference, **options)
    return anova_table(dec, design, reference, tests)
