"""Permutation tests of the term F-ratios.

The rows of ``X`` are permuted against a fixed design and every term is
re-evaluated on the same permutation. All permutations are drawn up front
from a ``PCG64`` generator seeded with the configured seed; they are then
evaluated in fixed-size chunks, optionally on several worker threads, so the
null distributions do not depend on the number of workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import joblib
import numpy as np
import pandas as pd
import scipy.linalg

from .design import INTERCEPT, DesignMatrix
from .errors import KZero, NonFiniteInput, SaturatedModel, ShapeMismatch, UnknownTerm
from .factorization import RESIDUALS, f_ratio, resolve_reference

log = logging.getLogger(__name__)

RNG_ALGORITHM = 'PCG64'

# F* within this relative distance below F counts as a tie.
TIE_RTOL = 1e-10

CHUNK_BUDGET = 4_000_000


@dataclass(frozen=True, eq=False)
class PermutationResult:
    term: str
    f_observed: float
    f_null: np.ndarray
    k: int
    p: float
    seed: int


def permutation_indices(n, k, seed):
    """``k`` row permutations of ``range(n)`` as a ``(k, n)`` integer array."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty((k, n), dtype=np.intp)
    for i in range(k):
        out[i] = rng.permutation(n)
    return out


def count_exceedances(f_null, f_observed):
    """``#{F* >= F}``, treating values within :data:`TIE_RTOL` of ``F`` as ties."""
    f_null = np.asarray(f_null, dtype=float)
    if np.isnan(f_observed):
        return 0
    if np.isinf(f_observed):
        return int(np.count_nonzero(f_null >= f_observed))
    threshold = f_observed - TIE_RTOL * abs(f_observed)
    return int(np.count_nonzero(f_null >= threshold))


def p_value(f_null, f_observed):
    if np.isnan(f_observed):
        return float('nan')
    k = len(f_null)
    return (count_exceedances(f_null, f_observed) + 1) / (k + 1)


def default_chunk_size(n, p, m):
    return max(1, CHUNK_BUDGET // max(1, p * (n + m)))


class _PermutedStatistics:
    """Per-term sums of squares for batches of permuted fits.

    For a row permutation ``perm`` the permuted coefficients are
    ``pinv(D)[:, argsort(perm)] @ X``; a term's SS is
    ``sum((G_tt @ Theta_t) * Theta_t)`` with ``G = D'D`` and the residual SS
    is ``|X|^2 - |D Theta|^2``.
    """

    def __init__(self, X, design: DesignMatrix, blocks, reference):
        self.X = X - X.mean(axis=0)
        self.pinv = scipy.linalg.pinv(design.matrix)
        self.gram = design.matrix.T @ design.matrix
        self.total = float(np.sum(self.X ** 2))
        self.blocks = blocks
        self.reference = reference
        self.rank = int(np.linalg.matrix_rank(design.matrix))
        self.df_res = design.n_observations - self.rank

    def term_ss(self, theta):
        # theta: (c, P, M)
        out = {}
        for block in self.blocks:
            cols = block.columns
            t = theta[:, cols, :]
            g = self.gram[cols, cols]
            out[block.name] = np.einsum('cpm,cpm->c', np.einsum('pq,cqm->cpm', g, t), t)
        fitted = np.einsum('cpm,cpm->c', np.einsum('pq,cqm->cpm', self.gram, theta), theta)
        out[RESIDUALS] = np.maximum(self.total - fitted, 0.0)
        return out

    def f_ratios(self, permutations):
        inverse = np.argsort(permutations, axis=1)
        theta = np.matmul(self.pinv[:, inverse].transpose(1, 0, 2), self.X)
        ss = self.term_ss(theta)
        ms = {b.name: ss[b.name] / b.df for b in self.blocks}
        ms_ref = ss[RESIDUALS] / self.df_res if self.reference == RESIDUALS else ms[self.reference]
        return {b.name: f_ratio(ms[b.name], ms_ref) for b in self.blocks if b.name != self.reference}


def permutation_test(X, design: DesignMatrix, terms: Optional[Sequence[str]] = None, permutations=999, seed=0, *,
                     reference=RESIDUALS, n_jobs=1, chunk_size=None) -> List[PermutationResult]:
    """Permutation p-values ``(#{F* >= F} + 1) / (K + 1)`` for each of ``terms``.

    ``terms`` defaults to every term except ``reference``. The observed
    F-ratios come from the same computation applied to the identity
    permutation.
    """
    reference = resolve_reference(reference)
    if permutations < 1:
        raise KZero(f'the permutation count must be at least 1, got {permutations}')

    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] != design.n_observations:
        raise ShapeMismatch(f'data of shape {X.shape} does not match {design.n_observations} design rows')
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput('data holds NaN or infinite values; impute missing cells first')

    blocks = [b for b in design.term_blocks if b.name != INTERCEPT and b.df > 0]
    names = [b.name for b in blocks]
    if reference != RESIDUALS and reference not in names:
        raise UnknownTerm(f'unknown reference term {reference!r}')
    if terms is None:
        terms = [n for n in names if n != reference]
    for term in terms:
        if term not in names or term == reference:
            raise UnknownTerm(f'cannot test {term!r}')

    stats = _PermutedStatistics(X, design, blocks, reference)
    if stats.df_res <= 0 and reference == RESIDUALS:
        raise SaturatedModel(f'no residual degrees of freedom ({design.n_observations} rows, rank {stats.rank})')

    n, m = X.shape
    observed = stats.f_ratios(np.arange(n)[None, :])
    perms = permutation_indices(n, permutations, seed)
    chunk_size = chunk_size or default_chunk_size(n, design.shape[1], m)
    chunks = [perms[i:i + chunk_size] for i in range(0, permutations, chunk_size)]
    log.info('Running %d permutations in %d chunks (n_jobs=%s, %s seed %d).',
             permutations, len(chunks), n_jobs, RNG_ALGORITHM, seed)

    parts = joblib.Parallel(n_jobs=n_jobs, prefer='threads')(
        joblib.delayed(stats.f_ratios)(chunk) for chunk in chunks
    )

    results = []
    for term in terms:
        f_null = np.concatenate([part[term] for part in parts])
        f_obs = float(observed[term][0])
        p = p_value(f_null, f_obs)
        log.debug('Term %r: F = %.6g, p = %.6g.', term, f_obs, p)
        results.append(PermutationResult(term, f_obs, f_null, permutations, p, seed))
    return results


def null_distribution_frame(results: Sequence[PermutationResult]):
    """The permuted F-ratios, one column per term and one row per permutation."""
    if not results:
        return pd.DataFrame()
    frame = pd.DataFrame({r.term: r.f_null for r in results})
    frame.index = pd.RangeIndex(1, len(frame) + 1, name='permutation')
    return frame
