from __future__ import annotations

import os
from typing import Callable, Dict, Iterator, List, Optional

from ..context import output_conflict
from ..errors import InvalidModeSpec
from ..tensor import CalendarModeSpec
from .config import PipelineConfig
from .formats import human_join
from .time import DAYS_PER_YEAR

# Every check receives the config and yields ``(field, message)`` pairs.
# Checks are run in registration order and all of them always run, so a
# single validation reports every violation at once.

Check = Callable[[PipelineConfig], Iterator[tuple]]
_checks: List[Check] = []

KINDS = ('cyclostationary', 'evolution', 'non_temporal')
FACTOR_KINDS = ('nominal', 'ordinal')
PREPROCESSING = ('center', 'autoscale')


def check(func: Check) -> Check:
    _checks.append(func)
    return func


def is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def effective_modes(cfg: PipelineConfig) -> Dict[str, dict]:
    """Mode name -> ``{kind, cardinality}`` after the aggregation directives."""
    modes = {m.name: {'kind': m.kind, 'cardinality': m.resolved_cardinality()} for m in cfg.modes}
    for directive in cfg.aggregate:
        spec = modes.pop(directive.mode, None)
        if spec is None:
            continue
        card = spec['cardinality']
        if card is not None and is_int(directive.block) and directive.block >= 1:
            card = card // directive.block
        modes[directive.name or directive.mode] = {'kind': spec['kind'], 'cardinality': card}
    return modes


def factor_names(cfg: PipelineConfig):
    return [f.mode for f in cfg.factors]


@check
def check_input(cfg):
    if not os.path.isfile(cfg.input):
        yield 'input', f'file {cfg.input!r} not found'


@check
def check_output(cfg):
    conflict = output_conflict(cfg.output)
    if conflict is not None:
        yield 'output', conflict
    output = os.path.abspath(cfg.output)
    if os.path.commonpath([output, os.path.abspath(cfg.input)]) == output:
        yield 'output', 'the input file lies inside the output directory'


@check
def check_scalars(cfg):
    if not is_int(cfg.seed):
        yield 'seed', 'must be an integer'
    elif cfg.seed < 0:
        yield 'seed', 'must be non-negative'
    if not is_int(cfg.permutations) or cfg.permutations < 1:
        yield 'permutations', 'must be an integer of at least 1'
    if cfg.preprocessing not in PREPROCESSING:
        yield 'preprocessing', f'must be {human_join([repr(p) for p in PREPROCESSING])}'
    if not is_int(cfg.year_start) or not 1 <= cfg.year_start <= DAYS_PER_YEAR:
        yield 'year_start', f'must be a day of year in [1, {DAYS_PER_YEAR}]'
    if not is_int(cfg.components) or cfg.components < 1:
        yield 'components', 'must be an integer of at least 1'
    if not is_int(cfg.n_jobs) or cfg.n_jobs == 0:
        yield 'n_jobs', 'must be a non-zero integer (negative counts back from the CPU count)'
    if cfg.chunk_size is not None and (not is_int(cfg.chunk_size) or cfg.chunk_size < 1):
        yield 'chunk_size', 'must be a positive integer'
    if not is_int(cfg.acf_lags) or cfg.acf_lags < 1:
        yield 'acf_lags', 'must be an integer of at least 1'
    if not is_number(cfg.percentile) or not 0 < cfg.percentile < 100:
        yield 'percentile', 'must lie strictly between 0 and 100'
    if not is_number(cfg.missing_threshold) or cfg.missing_threshold < 0:
        yield 'missing_threshold', 'must be a non-negative count'


@check
def check_modes(cfg):
    if not cfg.modes:
        yield 'modes', 'at least one mode must be declared'
        return

    names = [m.name for m in cfg.modes]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        yield 'modes', f'duplicate mode names {human_join(duplicates, final="and")}'

    for i, mode in enumerate(cfg.modes):
        where = f'modes[{i}]'
        if mode.kind not in KINDS:
            yield f'{where}.kind', f'must be {human_join(list(KINDS))}'
            continue
        card = mode.resolved_cardinality()
        if card is None:
            yield f'{where}.cardinality', f'required for {mode.frequency}/{mode.period}'
            continue
        try:
            CalendarModeSpec(
                mode.name, mode.frequency, mode.period, card, mode.kind, mode.step, mode.origin, mode.labels
            ).check_calendar()
        except InvalidModeSpec as e:
            yield where, str(e)

    if sum(m.kind == 'evolution' for m in cfg.modes) > 1:
        yield 'modes', 'at most one evolution mode'

    if cfg.series_mode is not None:
        series = next((m for m in cfg.modes if m.name == cfg.series_mode), None)
        if series is None:
            yield 'series_mode', f'{cfg.series_mode!r} is not a declared mode'
        elif series.kind != 'non_temporal' or not series.labels:
            yield 'series_mode', 'must name a non_temporal mode with labels'


@check
def check_aggregate(cfg):
    cards = {m.name: m.resolved_cardinality() for m in cfg.modes}
    for i, directive in enumerate(cfg.aggregate):
        where = f'aggregate[{i}]'
        if directive.mode not in cards:
            yield f'{where}.mode', f'{directive.mode!r} is not a declared mode'
            continue
        if not is_int(directive.block) or directive.block < 1:
            yield f'{where}.block', 'must be a positive integer'
            continue
        card = cards[directive.mode]
        if card is None:
            continue
        if directive.block > card:
            yield f'{where}.block', f'{directive.block} exceeds the {card} levels of {directive.mode!r}'
        elif card % directive.block and not directive.absorb_remainder:
            yield f'{where}.block', f'{directive.block} does not divide {card}; set absorb_remainder'


@check
def check_unfold(cfg):
    modes = effective_modes(cfg)
    if not cfg.columns:
        yield 'unfold.columns', 'at least one mode must be assigned to the columns'
    listed = list(cfg.rows) + list(cfg.columns)
    unknown = [n for n in listed if n not in modes]
    if unknown:
        yield 'unfold', f'unknown modes {human_join(unknown, final="and")}'
    if sorted(listed) != sorted(modes) and not unknown:
        yield 'unfold', f'rows and columns must list every mode exactly once ({human_join(sorted(modes), final="and")})'
    for name in cfg.columns:
        if modes.get(name, {}).get('kind') == 'evolution':
            yield 'unfold.columns', f'the evolution mode {name!r} must be placed in the rows'


@check
def check_factors(cfg):
    names = factor_names(cfg)
    if not cfg.factors:
        yield 'factors', 'at least one factor is required'
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        yield 'factors', f'duplicate factors {human_join(duplicates, final="and")}'

    modes = effective_modes(cfg)
    nesting = {f.mode: f.nested_in for f in cfg.factors}
    for i, factor in enumerate(cfg.factors):
        where = f'factors[{i}]'
        if factor.mode not in cfg.rows:
            yield f'{where}.mode', f'{factor.mode!r} is not a row mode'
        if factor.kind not in FACTOR_KINDS:
            yield f'{where}.kind', f'must be {human_join(list(FACTOR_KINDS))}'
        card = modes.get(factor.mode, {}).get('cardinality')
        if card is not None and card < 2:
            yield f'{where}.mode', f'{factor.mode!r} has a single level'
        if factor.nested_in is not None:
            if factor.nested_in not in names:
                yield f'{where}.nested_in', f'{factor.nested_in!r} is not a declared factor'
            elif factor.nested_in == factor.mode:
                yield f'{where}.nested_in', 'a factor cannot be nested in itself'
            if factor.kind != 'nominal':
                yield f'{where}.kind', 'nested factors must be nominal'
            if factor.nested_in != factor.mode and factor.mode in _outer_chain(factor.mode, nesting):
                yield f'{where}.nested_in', 'nesting forms a cycle'


def _outer_chain(name, nesting: Dict[str, Optional[str]]):
    chain = []
    current = nesting.get(name)
    while current is not None and current not in chain:
        chain.append(current)
        current = nesting.get(current)
    return chain


@check
def check_interactions(cfg):
    names = factor_names(cfg)
    nesting = {f.mode: f.nested_in for f in cfg.factors}
    seen = set()
    for i, members in enumerate(cfg.interactions):
        where = f'interactions[{i}]'
        if len(members) < 2:
            yield where, 'an interaction needs at least two factors'
            continue
        unknown = [m for m in members if m not in names]
        if unknown:
            yield where, f'{human_join(unknown, final="and")} not declared as factors'
            continue
        for a in members:
            for b in members:
                if a != b and b in _outer_chain(a, nesting):
                    yield where, f'{a!r} is nested in {b!r}; interaction terms are confounded into the nested factor'
        key = tuple(members)
        if key in seen:
            yield where, 'duplicate interaction'
        seen.add(key)


@check
def check_reference(cfg):
    if not isinstance(cfg.reference, str):
        yield 'reference', 'must be a string'
        return
    if cfg.reference.lower() == 'residuals':
        return
    terms = factor_names(cfg) + [' x '.join(members) for members in cfg.interactions]
    if cfg.reference not in terms:
        yield 'reference', f'must be "residuals" or a term ({human_join(terms)})'


def validate(cfg: PipelineConfig) -> List[str]:
    """Every violation as a ``'field: message'`` string; empty when the config is runnable."""
    violations = []
    for func in _checks:
        violations.extend(f'{where}: {message}' for where, message in func(cfg))
    return violations
