"""Labeled multiway tensors built from timestamped records, and their unfolding.

Modes are addressed by name. Unfoldings order rows and columns
lexicographically with the first listed mode varying slowest, so the row
``r`` of an unfolding over modes ``(a, b)`` is ``r = ia * card(b) + ib``.
"""

from __future__ import annotations

import dataclasses
import datetime
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    BlockTooLarge,
    DuplicateCell,
    EmptyColumnModes,
    EvolutionModeInColumns,
    IndivisibleBlock,
    InputFormatError,
    InvalidModeSpec,
    ShapeMismatch,
    UnknownMode,
    UnknownSeries,
    UnmappableTimestamp,
)
from .utils.formats import human_join, plural
from .utils.time import CalendarClock, check_pair, describe_span, parse_timestamp

log = logging.getLogger(__name__)

CYCLOSTATIONARY = 'cyclostationary'
EVOLUTION = 'evolution'
NON_TEMPORAL = 'non_temporal'
KINDS = (CYCLOSTATIONARY, EVOLUTION, NON_TEMPORAL)

Label = Tuple[Tuple[str, int], ...]


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CalendarModeSpec:
    """One mode of a tensor.

    Temporal modes name their ``frequency_unit`` and ``period_unit`` (the
    "frequency of the period" convention, e.g. hour of the day). ``step``
    groups several frequency units into one level (three-hourly readings give
    an hour-of-day mode with step 3 and 8 levels). ``origin`` is the first
    cycle year of an evolution ``year/span`` mode. ``labels`` name the levels
    of a non-temporal mode.
    """

    name: str
    frequency_unit: str = ''
    period_unit: str = ''
    cardinality: int = 1
    kind: str = CYCLOSTATIONARY
    step: int = 1
    origin: int = 0
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidModeSpec(f'mode {self.name!r}: kind must be {human_join(list(KINDS))}, not {self.kind!r}')
        if int(self.cardinality) < 1:
            raise InvalidModeSpec(f'mode {self.name!r}: cardinality must be at least 1')
        object.__setattr__(self, 'labels', tuple(str(label) for label in self.labels))
        if self.labels and len(self.labels) != self.cardinality:
            raise InvalidModeSpec(
                f'mode {self.name!r}: {plural(len(self.labels)):label} for cardinality {self.cardinality}'
            )

    @property
    def is_temporal(self):
        return self.kind != NON_TEMPORAL

    def check_calendar(self):
        """Raises :class:`InvalidModeSpec` when timestamps cannot be mapped onto this mode."""
        if not self.is_temporal:
            return
        check_pair(
            self.frequency_unit,
            self.period_unit,
            step=self.step,
            cardinality=self.cardinality,
            exact=self.kind == CYCLOSTATIONARY,
        )

    def level_name(self, index, year_start=1):
        if self.labels:
            return self.labels[index]
        if (self.frequency_unit, self.period_unit) == ('year', 'span'):
            return CalendarClock(year_start).year_label(self.origin + index * self.step)
        return str(index)


@dataclass(frozen=True, eq=False)
class LabeledTensor:
    modes: Tuple[CalendarModeSpec, ...]
    values: np.ndarray
    missing_mask: np.ndarray
    year_start: int = 1

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, 'modes', modes)
        names = [m.name for m in modes]
        if len(set(names)) != len(names):
            raise InvalidModeSpec(f'mode names must be unique, got {human_join(names, final="and")}')
        if sum(m.kind == EVOLUTION for m in modes) > 1:
            raise InvalidModeSpec('a tensor has at most one evolution mode')

        shape = tuple(int(m.cardinality) for m in modes)
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.missing_mask, dtype=bool)
        if values.shape != shape or mask.shape != shape:
            raise ShapeMismatch(f'tensor arrays have shape {values.shape}/{mask.shape}, modes imply {shape}')
        if not np.all(np.isfinite(values[~mask])):
            raise InputFormatError('tensor holds non-finite values outside the missing mask')

        object.__setattr__(self, 'values', _frozen(values, float))
        object.__setattr__(self, 'missing_mask', _frozen(mask, bool))

    @property
    def shape(self):
        return self.values.shape

    @property
    def mode_names(self):
        return tuple(m.name for m in self.modes)

    def axis(self, name):
        try:
            return self.mode_names.index(name)
        except ValueError:
            raise UnknownMode(f'unknown mode {name!r}, expected {human_join(list(self.mode_names))}') from None

    def mode(self, name):
        return self.modes[self.axis(name)]

    @property
    def evolution_mode(self) -> Optional[CalendarModeSpec]:
        return next((m for m in self.modes if m.kind == EVOLUTION), None)

    def observed_total(self):
        return float(self.values[~self.missing_mask].sum())


@dataclass(frozen=True, eq=False)
class DesignTable:
    """An unfolded tensor: observations in rows, variables in columns."""

    matrix: np.ndarray
    row_labels: Tuple[Label, ...]
    col_labels: Tuple[Label, ...]
    missing_mask: np.ndarray
    row_modes: Tuple[CalendarModeSpec, ...] = ()
    col_modes: Tuple[CalendarModeSpec, ...] = ()
    year_start: int = 1

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        mask = np.asarray(self.missing_mask, dtype=bool)
        if matrix.ndim != 2 or matrix.shape != mask.shape:
            raise ShapeMismatch(f'matrix {matrix.shape} and mask {mask.shape} must be equal 2-D shapes')
        if len(self.row_labels) != matrix.shape[0] or len(self.col_labels) != matrix.shape[1]:
            raise ShapeMismatch('row/column labels do not match the matrix shape')
        object.__setattr__(self, 'row_labels', tuple(tuple(label) for label in self.row_labels))
        object.__setattr__(self, 'col_labels', tuple(tuple(label) for label in self.col_labels))
        object.__setattr__(self, 'row_modes', tuple(self.row_modes))
        object.__setattr__(self, 'col_modes', tuple(self.col_modes))
        object.__setattr__(self, 'matrix', _frozen(matrix, float))
        object.__setattr__(self, 'missing_mask', _frozen(mask, bool))

    @property
    def shape(self):
        return self.matrix.shape

    def row_levels(self, mode_name):
        """Level index of ``mode_name`` for every row."""
        names = [m.name for m in self.row_modes]
        if mode_name not in names:
            raise UnknownMode(f'{mode_name!r} is not a row mode, expected {human_join(names)}')
        position = names.index(mode_name)
        return np.array([label[position][1] for label in self.row_labels], dtype=int)

    def row_mode(self, mode_name):
        for mode in self.row_modes:
            if mode.name == mode_name:
                return mode
        raise UnknownMode(f'{mode_name!r} is not a row mode')

    def _names(self, labels, modes):
        lookup = {m.name: m for m in modes}
        return [
            tuple(lookup[name].level_name(index, self.year_start) for name, index in label)
            for label in labels
        ]

    def row_names(self):
        return self._names(self.row_labels, self.row_modes)

    def col_names(self):
        return self._names(self.col_labels, self.col_modes)

    def take_rows(self, keep):
        keep = np.asarray(keep, dtype=int)
        return dataclasses.replace(
            self,
            matrix=self.matrix[keep],
            missing_mask=self.missing_mask[keep],
            row_labels=tuple(self.row_labels[i] for i in keep),
        )

    def with_matrix(self, matrix, missing_mask=None):
        if missing_mask is None:
            missing_mask = np.zeros(np.shape(matrix), dtype=bool)
        return dataclasses.replace(self, matrix=matrix, missing_mask=missing_mask)


def read_records(path) -> List[Tuple[datetime.datetime, str, Optional[float]]]:
    """Reads ``timestamp,series,value`` text; an empty value field is missing."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputFormatError(f'cannot read {path}: {e}') from None

    header = [c.strip() for c in frame.columns]
    if header != ['timestamp', 'series', 'value']:
        raise InputFormatError(f'{path}: expected header timestamp,series,value, got {",".join(header)}')

    records = []
    for line, (ts, series, value) in enumerate(frame.itertuples(index=False, name=None), start=2):
        value = value.strip()
        if value:
            try:
                number = float(value)
            except ValueError:
                raise InputFormatError(f'{path}:{line}: invalid value {value!r}') from None
        else:
            number = None
        records.append((parse_timestamp(ts), series.strip(), number))

    log.info('Read %s from %s.', format(plural(len(records)), 'record'), path)
    return records


def build_tensor(records: Iterable[tuple], mode_specs: Sequence[CalendarModeSpec],
                 series_mode: Optional[str] = None, *, year_start=1) -> LabeledTensor:
    """Places every record in exactly one cell of a new tensor.

    Parameters
    -----------
    records: Iterable[tuple]
        ``(timestamp, series_id, value)`` triples. Timestamps may be
        ``datetime`` objects or ISO-8601 strings; ``None`` or NaN values
        occupy their cell but stay missing.
    mode_specs: Sequence[CalendarModeSpec]
        The modes in tensor order.
    series_mode: Optional[str]
        The non-temporal mode that series ids map onto.
    year_start: int
        No-leap day of year on which yearly cycles start.

    Returns
    --------
    LabeledTensor
        Cells that received no record are flagged missing.
    """
    modes = tuple(mode_specs)
    names = [m.name for m in modes]
    if len(set(names)) != len(names):
        raise InvalidModeSpec(f'mode names must be unique, got {human_join(names, final="and")}')
    if sum(m.kind == EVOLUTION for m in modes) > 1:
        raise InvalidModeSpec('a tensor has at most one evolution mode')

    series_axis = None
    if series_mode is not None:
        if series_mode not in names:
            raise UnknownMode(f'series mode {series_mode!r} is not declared')
        series_axis = names.index(series_mode)
        if modes[series_axis].kind != NON_TEMPORAL or not modes[series_axis].labels:
            raise InvalidModeSpec(f'series mode {series_mode!r} must be non-temporal with labels')

    for axis, mode in enumerate(modes):
        if mode.kind == NON_TEMPORAL and axis != series_axis and mode.cardinality != 1:
            raise InvalidModeSpec(f'non-temporal mode {mode.name!r} is not fed by the series ids')
        mode.check_calendar()

    clock = CalendarClock(year_start)
    series_index = {}
    if series_axis is not None:
        series_index = {label: i for i, label in enumerate(modes[series_axis].labels)}

    shape = tuple(m.cardinality for m in modes)
    values = np.full(shape, np.nan)
    occupied = np.zeros(shape, dtype=bool)
    dropped = 0
    first = last = None

    for ts, series_id, value in records:
        dt = ts if isinstance(ts, datetime.datetime) else parse_timestamp(str(ts))
        index = []
        for axis, mode in enumerate(modes):
            if axis == series_axis:
                try:
                    index.append(series_index[str(series_id)])
                except KeyError:
                    raise UnknownSeries(f'series {series_id!r} is not a level of mode {series_mode!r}') from None
            elif mode.kind == NON_TEMPORAL:
                index.append(0)
            else:
                level = clock.level(
                    dt, mode.frequency_unit, mode.period_unit,
                    step=mode.step, cardinality=mode.cardinality, origin=mode.origin,
                )
                if level is None:
                    break
                if not 0 <= level < mode.cardinality:
                    raise UnmappableTimestamp(
                        f'{dt.isoformat()} maps to level {level} of mode {mode.name!r}, '
                        f'outside [0, {mode.cardinality})'
                    )
                index.append(level)
        else:
            cell = tuple(index)
            if occupied[cell]:
                where = ', '.join(f'{m.name}={i}' for m, i in zip(modes, cell))
                raise DuplicateCell(f'two records map to the cell ({where}), the second at {dt.isoformat()}')
            occupied[cell] = True
            if value is not None and math.isfinite(value):
                values[cell] = float(value)
            first = dt if first is None or dt < first else first
            last = dt if last is None or dt > last else last
            continue

        # Feb 29
        dropped += 1

    mask = np.isnan(values)
    if dropped:
        log.info('Discarded %s falling on Feb 29.', format(plural(dropped), 'record'))
    if first is not None:
        log.info('Records cover %s.', describe_span(first, last))
    log.info('Built tensor of shape %s with %.2f%% missing cells.', list(shape), 100 * mask.mean() if mask.size else 0)
    return LabeledTensor(modes, values, mask, year_start)


def unfold(tensor: LabeledTensor, row_modes: Sequence[str], col_modes: Sequence[str]) -> DesignTable:
    """Matricizes ``tensor`` with ``row_modes`` as observations and ``col_modes`` as variables."""
    row_modes = list(row_modes)
    col_modes = list(col_modes)
    if not col_modes:
        raise EmptyColumnModes('at least one mode must be assigned to the columns')

    axes = [tensor.axis(name) for name in row_modes + col_modes]
    if len(set(axes)) != len(axes) or len(axes) != len(tensor.modes):
        raise UnknownMode(
            f'row and column modes must partition {human_join(list(tensor.mode_names), final="and")}'
        )

    evolution = tensor.evolution_mode
    if evolution is not None and evolution.name in col_modes:
        raise EvolutionModeInColumns(f'the evolution mode {evolution.name!r} must be placed in the rows')

    rows = tuple(tensor.modes[a] for a in axes[:len(row_modes)])
    cols = tuple(tensor.modes[a] for a in axes[len(row_modes):])
    n_rows = math.prod(m.cardinality for m in rows)
    n_cols = math.prod(m.cardinality for m in cols)

    matrix = np.transpose(tensor.values, axes).reshape(n_rows, n_cols)
    mask = np.transpose(tensor.missing_mask, axes).reshape(n_rows, n_cols)

    def labels(modes):
        return tuple(
            tuple(zip((m.name for m in modes), index))
            for index in itertools.product(*(range(m.cardinality) for m in modes))
        )

    log.debug('Unfolded %s into %d x %d.', list(tensor.shape), n_rows, n_cols)
    return DesignTable(matrix, labels(rows), labels(cols), mask, rows, cols, tensor.year_start)


def fold(table: DesignTable, mode_order: Optional[Sequence[str]] = None) -> LabeledTensor:
    """Inverse of :func:`unfold` for a table that still holds every row."""
    modes = table.row_modes + table.col_modes
    shape = tuple(m.cardinality for m in modes)
    if table.shape[0] != math.prod(m.cardinality for m in table.row_modes):
        raise ShapeMismatch('cannot fold a table with excluded rows')

    values = table.matrix.reshape(shape)
    mask = table.missing_mask.reshape(shape)
    names = [m.name for m in modes]
    order = list(mode_order) if mode_order is not None else names
    if sorted(order) != sorted(names):
        raise UnknownMode(f'fold order must list {human_join(names, final="and")}')

    axes = [names.index(name) for name in order]
    return LabeledTensor(
        tuple(modes[a] for a in axes),
        np.transpose(values, axes),
        np.transpose(mask, axes),
        table.year_start,
    )


def aggregate_mode(tensor: LabeledTensor, mode: str, block_size: int, absorb_remainder=False, *,
                   name: Optional[str] = None, frequency_unit: Optional[str] = None) -> LabeledTensor:
    """Averages consecutive levels of ``mode`` in blocks of ``block_size``.

    Missing entries are left out of each average; a block with nothing
    observed stays missing. With ``absorb_remainder`` the levels left over
    after the last whole block join that block (365 days in blocks of 14 give
    26 fortnights, the last one 15 days long).
    """
    axis = tensor.axis(mode)
    spec = tensor.modes[axis]
    if block_size < 1:
        raise InvalidModeSpec(f'block size must be at least 1, not {block_size}')
    if block_size > spec.cardinality:
        raise BlockTooLarge(f'block size {block_size} exceeds the {spec.cardinality} levels of {mode!r}')
    if block_size == 1:
        return tensor

    n_blocks, remainder = divmod(spec.cardinality, block_size)
    if remainder and not absorb_remainder:
        raise IndivisibleBlock(
            f'{block_size} does not divide the {spec.cardinality} levels of {mode!r}; enable absorb_remainder'
        )

    values = np.moveaxis(tensor.values, axis, 0)
    observed = ~np.moveaxis(tensor.missing_mask, axis, 0)
    out = np.full((n_blocks,) + values.shape[1:], np.nan)
    for block in range(n_blocks):
        start = block * block_size
        stop = spec.cardinality if block == n_blocks - 1 else start + block_size
        seen = observed[start:stop]
        count = seen.sum(axis=0)
        total = np.where(seen, values[start:stop], 0.0).sum(axis=0)
        with np.errstate(invalid='ignore', divide='ignore'):
            out[block] = np.where(count > 0, total / np.maximum(count, 1), np.nan)

    new_spec = dataclasses.replace(
        spec,
        name=name or spec.name,
        frequency_unit=frequency_unit or f'{block_size} {spec.frequency_unit}'.strip(),
        cardinality=n_blocks,
        step=spec.step * block_size,
        labels=(),
    )
    modes = tensor.modes[:axis] + (new_spec,) + tensor.modes[axis + 1:]
    out = np.moveaxis(out, 0, axis)
    mask = np.isnan(out)
    log.info('Aggregated %r into %s of %d levels%s.', mode, format(plural(n_blocks), 'block'), block_size,
             f' (last block {block_size + remainder})' if remainder else '')
    return LabeledTensor(modes, out, mask, tensor.year_start)
