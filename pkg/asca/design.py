"""Coding matrices for crossed, nested, nominal and ordinal factors.

Nominal factors use sum coding with the last level (by index) as reference,
ordinal factors a single centred linear contrast, nested factors sum coding
within each level of the outer factor, and interactions the column-wise
products of their members' blocks.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateFactor,
    DuplicateFactorName,
    InteractionWithNestedPair,
    LevelOutOfRange,
    NotProperlyNested,
    RankDeficientWarning,
    ShapeMismatch,
    UnknownTerm,
)
from .utils.formats import human_join, plural

log = logging.getLogger(__name__)

NOMINAL = 'nominal'
ORDINAL = 'ordinal'
INTERCEPT = 'intercept'


def interaction_name(members):
    return ' x '.join(members)


@dataclass(frozen=True, eq=False)
class FactorSpec:
    name: str
    levels_per_observation: np.ndarray
    n_levels: int
    kind: str = NOMINAL
    nested_in: Optional[str] = None
    reference: Optional[int] = None
    level_names: Tuple[str, ...] = ()

    def __post_init__(self):
        levels = np.asarray(self.levels_per_observation)
        if levels.ndim != 1 or (levels.size and not np.issubdtype(levels.dtype, np.integer)):
            raise ShapeMismatch(f'factor {self.name!r}: levels must be a 1-D integer vector')
        object.__setattr__(self, 'levels_per_observation', levels.astype(int))
        if self.kind not in (NOMINAL, ORDINAL):
            raise DegenerateFactor(f'factor {self.name!r}: kind must be nominal or ordinal, not {self.kind!r}')
        _check_levels(self.levels_per_observation, self.n_levels, self.name)
        if self.kind == ORDINAL and self.n_levels < 2:
            raise DegenerateFactor(f'ordinal factor {self.name!r} needs at least 2 levels')

    @property
    def n_observations(self):
        return self.levels_per_observation.size

    def level_name(self, index):
        if self.level_names:
            return self.level_names[index]
        return str(index)


@dataclass(frozen=True)
class TermBlock:
    name: str
    start: int
    stop: int
    df: int
    members: Tuple[str, ...] = ()

    @property
    def columns(self):
        return slice(self.start, self.stop)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """The coding matrix ``D`` and the column range of every term.

    The first block is always the intercept, a single column of ones.
    """

    matrix: np.ndarray
    term_blocks: Tuple[TermBlock, ...]
    factors: Tuple[FactorSpec, ...] = field(default=())

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n_observations(self):
        return self.matrix.shape[0]

    @property
    def terms(self):
        """Term names without the intercept, in column order."""
        return [b.name for b in self.term_blocks if b.name != INTERCEPT]

    def block(self, name) -> TermBlock:
        for block in self.term_blocks:
            if block.name == name:
                return block
        raise UnknownTerm(f'unknown term {name!r}, expected {human_join(self.terms)}')

    def columns(self, name):
        return self.matrix[:, self.block(name).columns]

    @property
    def residual_df(self):
        return self.matrix.shape[0] - self.matrix.shape[1]

    def factor(self, name) -> FactorSpec:
        for factor in self.factors:
            if factor.name == name:
                return factor
        raise UnknownTerm(f'unknown factor {name!r}')


def _check_levels(levels, n_levels, name='factor'):
    levels = np.asarray(levels)
    if n_levels < 1:
        raise DegenerateFactor(f'{name}: needs at least one level')
    if levels.size and (levels.min() < 0 or levels.max() >= n_levels):
        raise LevelOutOfRange(f'{name}: level indices must lie in [0, {n_levels})')


def sum_code_nominal(levels, n_levels, reference=None):
    """Sum coding: level ``l`` gets the indicator row ``e_l``, the reference level all ``-1``.

    ``reference`` defaults to the last level. The returned block has
    ``n_levels - 1`` columns.
    """
    levels = np.asarray(levels, dtype=int)
    if n_levels < 2:
        raise DegenerateFactor(f'sum coding needs at least 2 levels, got {n_levels}')
    _check_levels(levels, n_levels)
    reference = n_levels - 1 if reference is None else reference
    if not 0 <= reference < n_levels:
        raise LevelOutOfRange(f'reference level {reference} outside [0, {n_levels})')

    kept = [l for l in range(n_levels) if l != reference]
    block = np.zeros((levels.size, n_levels - 1))
    for column, level in enumerate(kept):
        block[levels == level, column] = 1.0
    block[levels == reference, :] = -1.0
    return block


def code_ordinal(levels, n_levels):
    """Single centred linear trend column, ``l - (L - 1) / 2``."""
    levels = np.asarray(levels, dtype=int)
    if n_levels < 2:
        raise DegenerateFactor(f'an ordinal factor needs at least 2 levels, got {n_levels}')
    _check_levels(levels, n_levels)
    return (levels - (n_levels - 1) / 2.0).reshape(-1, 1).astype(float)


def interaction_block(block_a, block_b):
    """All element-wise products of a column of ``block_a`` with one of ``block_b``, A-major."""
    block_a = np.asarray(block_a, dtype=float)
    block_b = np.asarray(block_b, dtype=float)
    if block_a.ndim != 2 or block_b.ndim != 2 or block_a.shape[0] != block_b.shape[0]:
        raise ShapeMismatch(f'cannot cross blocks of shape {block_a.shape} and {block_b.shape}')
    n = block_a.shape[0]
    return (block_a[:, :, None] * block_b[:, None, :]).reshape(n, -1)


def nested_coding(outer: FactorSpec, inner: FactorSpec):
    """Sum coding of ``inner`` within each level of ``outer``, blocks concatenated.

    An outer level holding a single inner level contributes no columns.
    """
    if inner.nested_in != outer.name:
        raise NotProperlyNested(f'{inner.name!r} is not declared as nested in {outer.name!r}')
    if inner.n_observations != outer.n_observations:
        raise ShapeMismatch(f'{inner.name!r} and {outer.name!r} have different observation counts')

    o_levels = outer.levels_per_observation
    i_levels = inner.levels_per_observation
    owner = {}
    for o, i in zip(o_levels.tolist(), i_levels.tolist()):
        if owner.setdefault(i, o) != o:
            raise NotProperlyNested(
                f'level {inner.level_name(i)} of {inner.name!r} appears under levels '
                f'{outer.level_name(owner[i])} and {outer.level_name(o)} of {outer.name!r}'
            )

    blocks = []
    for o in sorted(set(o_levels.tolist())):
        within = sorted(i for i, parent in owner.items() if parent == o)
        if len(within) < 2:
            continue
        rows = o_levels == o
        local = np.searchsorted(within, i_levels[rows])
        block = np.zeros((o_levels.size, len(within) - 1))
        block[rows] = sum_code_nominal(local, len(within))
        blocks.append(block)

    if not blocks:
        return np.zeros((o_levels.size, 0))
    return np.hstack(blocks)


def factor_block(factor: FactorSpec, factors_by_name=None):
    """Coding block of one main-effect or nested term."""
    if factor.nested_in is not None:
        outer = (factors_by_name or {}).get(factor.nested_in)
        if outer is None:
            raise UnknownTerm(f'{factor.name!r} is nested in the undeclared factor {factor.nested_in!r}')
        return nested_coding(outer, factor)
    if factor.kind == ORDINAL:
        return code_ordinal(factor.levels_per_observation, factor.n_levels)
    return sum_code_nominal(factor.levels_per_observation, factor.n_levels, factor.reference)


def _nesting_chain(name, factors_by_name):
    chain = set()
    current = factors_by_name[name].nested_in
    while current is not None and current not in chain:
        chain.add(current)
        current = factors_by_name[current].nested_in if current in factors_by_name else None
    return chain


def assemble_design(factors: Sequence[FactorSpec], interactions: Sequence[Sequence[str]] = (),
                    n_observations: Optional[int] = None) -> DesignMatrix:
    """Builds ``D = [1 | factor blocks | interaction blocks]`` in declaration order."""
    factors = list(factors)
    names = [f.name for f in factors]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise DuplicateFactorName(f'duplicate factor names: {human_join(duplicates, final="and")}')

    if n_observations is None:
        n_observations = factors[0].n_observations if factors else 0
    for factor in factors:
        if factor.n_observations != n_observations:
            raise ShapeMismatch(
                f'factor {factor.name!r} has {factor.n_observations} observations, expected {n_observations}'
            )

    by_name = {f.name: f for f in factors}
    blocks = [np.ones((n_observations, 1))]
    term_blocks = [TermBlock(INTERCEPT, 0, 1, 1)]
    coded = {}
    start = 1

    def push(name, block, members):
        nonlocal start
        stop = start + block.shape[1]
        blocks.append(block)
        term_blocks.append(TermBlock(name, start, stop, block.shape[1], tuple(members)))
        start = stop

    for factor in factors:
        block = factor_block(factor, by_name)
        coded[factor.name] = block
        push(factor.name, block, (factor.name,))

    seen = set()
    for members in interactions:
        members = tuple(members)
        if len(members) < 2:
            raise UnknownTerm(f'an interaction needs at least two factors, got {members}')
        for member in members:
            if member not in by_name:
                raise UnknownTerm(f'interaction member {member!r} is not a declared factor')
        for a in members:
            for b in members:
                if a != b and b in _nesting_chain(a, by_name):
                    raise InteractionWithNestedPair(
                        f'{a!r} is nested in {b!r}; their interaction is confounded into {a!r}'
                    )
        name = interaction_name(members)
        if name in seen or name in by_name:
            raise DuplicateFactorName(f'duplicate term {name!r}')
        seen.add(name)

        block = coded[members[0]]
        for member in members[1:]:
            block = interaction_block(block, coded[member])
        push(name, block, members)

    matrix = np.hstack(blocks)
    for tb in term_blocks:
        if tb.df == 0:
            log.warning('Term %r has no degrees of freedom.', tb.name)
    log.debug('Design matrix %d x %d with terms %s.', *matrix.shape, human_join([t.name for t in term_blocks],
                                                                              final='and'))
    return DesignMatrix(matrix, tuple(term_blocks), tuple(factors))


def factor_from_labels(name, levels, n_levels, kind=NOMINAL, nested_in=None, level_names=(), *, compact=True):
    """Builds a :class:`FactorSpec` from the level indices of a table's row mode.

    When rows were excluded some nominal levels may be unobserved; with
    ``compact`` they are removed and the remaining levels renumbered, so the
    term keeps full column rank.
    """
    levels = np.asarray(levels, dtype=int)
    level_names = tuple(level_names) or tuple(str(i) for i in range(n_levels))
    if kind == NOMINAL and compact:
        observed = np.unique(levels)
        if observed.size < n_levels:
            missing = [level_names[i] for i in range(n_levels) if i not in set(observed.tolist())]
            message = (f'factor {name!r}: {format(plural(len(missing)), "level")} without observations '
                       f'({human_join(missing, final="and")}) removed')
            warnings.warn(message, RankDeficientWarning, stacklevel=2)
            log.warning(message)
            levels = np.searchsorted(observed, levels)
            level_names = tuple(level_names[i] for i in observed)
            n_levels = observed.size
    return FactorSpec(name, levels, int(n_levels), kind, nested_in, None, level_names)


def degrees_of_freedom(design: DesignMatrix) -> List[Tuple[str, int]]:
    """``(term, df)`` pairs, residuals last."""
    pairs = [(b.name, b.df) for b in design.term_blocks if b.name != INTERCEPT]
    pairs.append(('Residuals', design.residual_df))
    return pairs
