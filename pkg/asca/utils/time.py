import datetime
from typing import Optional, Tuple

from dateutil import parser
from dateutil.relativedelta import relativedelta

from ..errors import InputFormatError, InvalidModeSpec
from .formats import human_join

# Exact number of frequency units per period unit.
RATIOS = {
    ('minute', 'hour'): 60,
    ('minute', 'day'): 1440,
    ('hour', 'day'): 24,
    ('hour', 'week'): 168,
    ('day', 'week'): 7,
    ('day', 'year'): 365,
}

# Units that do not tile the 365-day year; the last level absorbs the rest.
CAPPED = {
    ('week', 'year'): 7,
    ('fortnight', 'year'): 14,
}

EVOLUTION = ('year', 'span')

DAYS_PER_YEAR = 365

# Cumulative days before each month in a year without Feb 29.
_MONTH_OFFSETS = (0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334)


def supported_pairs():
    return sorted(RATIOS) + sorted(CAPPED) + [EVOLUTION]


def check_pair(frequency, period, *, step=1, cardinality=None, exact=False):
    """Checks that a frequency/period pair can be mapped from timestamps.

    With ``exact`` the cardinality must equal the ratio of the two units.
    """
    pair = (frequency, period)
    if pair not in RATIOS and pair not in CAPPED and pair != EVOLUTION:
        known = human_join([f'{f}/{p}' for f, p in supported_pairs()])
        raise InvalidModeSpec(f'unsupported calendar pair {frequency}/{period}, expected {known}')

    if step < 1:
        raise InvalidModeSpec(f'step must be at least 1, not {step}')

    if exact and cardinality is not None:
        if pair == EVOLUTION:
            raise InvalidModeSpec(f'{frequency}/{period} does not repeat and cannot be cyclostationary')
        if pair in CAPPED:
            expected = DAYS_PER_YEAR // CAPPED[pair]
            if step != 1 or cardinality != expected:
                raise InvalidModeSpec(f'a {frequency}/{period} mode has {expected} levels, not {cardinality}')
            return
        ratio = RATIOS[pair]
        if ratio % step != 0 or ratio // step != cardinality:
            raise InvalidModeSpec(
                f'a cyclostationary {frequency}/{period} mode with step {step} '
                f'has {ratio / step:g} levels, not {cardinality}'
            )


def parse_timestamp(text):
    """Parses an ISO-8601 timestamp as local wall-clock time."""
    try:
        dt = parser.isoparse(text.strip())
    except (ValueError, OverflowError) as e:
        raise InputFormatError(f'invalid timestamp {text!r}: {e}') from None
    return dt.replace(tzinfo=None)


def noleap_day(dt) -> Optional[int]:
    """1-based day of year on a 365-day calendar; ``None`` on Feb 29."""
    if dt.month == 2 and dt.day == 29:
        return None
    return _MONTH_OFFSETS[dt.month - 1] + dt.day


class CalendarClock:
    """Maps timestamps onto cycle positions.

    ``year_start`` is the no-leap day of year (1-based) on which the yearly
    cycle begins; 244 starts it on September 1st, as hydrological years do.
    """

    def __init__(self, year_start=1):
        if not 1 <= year_start <= DAYS_PER_YEAR:
            raise InvalidModeSpec(f'year_start must be within [1, {DAYS_PER_YEAR}], not {year_start}')
        self.year_start = year_start

    def cycle(self, dt) -> Optional[Tuple[int, int]]:
        """Returns ``(cycle_year, day0)`` with ``day0`` in ``[0, 365)``."""
        day = noleap_day(dt)
        if day is None:
            return None
        if day >= self.year_start:
            return dt.year, day - self.year_start
        return dt.year - 1, day - self.year_start + DAYS_PER_YEAR

    def level(self, dt, frequency, period, *, step=1, cardinality=None, origin=0) -> Optional[int]:
        """Level index of ``dt`` on a frequency/period mode.

        Returns ``None`` for Feb 29, which is dropped from every year. The
        caller checks the index against the mode cardinality.
        """
        pair = (frequency, period)
        if pair == ('minute', 'hour'):
            return dt.minute // step
        if pair == ('minute', 'day'):
            return (dt.hour * 60 + dt.minute) // step
        if pair == ('hour', 'day'):
            return dt.hour // step
        if pair == ('hour', 'week'):
            return (dt.weekday() * 24 + dt.hour) // step
        if pair == ('day', 'week'):
            return dt.weekday() // step

        cycle = self.cycle(dt)
        if cycle is None:
            return None
        year, day0 = cycle

        if pair == ('day', 'year'):
            return day0 // step
        if pair in CAPPED:
            index = day0 // (CAPPED[pair] * step)
            if cardinality is not None:
                index = min(index, cardinality - 1)
            return index
        if pair == EVOLUTION:
            return (year - origin) // step

        raise InvalidModeSpec(f'unsupported calendar pair {frequency}/{period}')

    def year_label(self, year):
        if self.year_start == 1:
            return str(year)
        return f'{year}/{year + 1}'


def human_span(first, last, *, accuracy=2):
    """Rough human readable length of a time span, e.g. ``'12 years, 3 months'``."""
    if last < first:
        first, last = last, first

    delta = relativedelta(last.replace(microsecond=0), first.replace(microsecond=0))
    attrs = ('years', 'months', 'days', 'hours', 'minutes')
    output = []
    for attr in attrs:
        elem = getattr(delta, attr)
        if elem:
            unit = attr if elem != 1 else attr[:-1]
            output.append(f'{elem} {unit}')

    if accuracy is not None:
        output = output[:accuracy]

    if not output:
        return 'an instant'
    return ', '.join(output)


def describe_span(first: datetime.datetime, last: datetime.datetime):
    return f'{first:%Y-%m-%d %H:%M} to {last:%Y-%m-%d %H:%M} ({human_span(first, last)})'
