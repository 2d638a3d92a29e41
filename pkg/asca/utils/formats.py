import math
import re


class plural:
    def __init__(self, value):
        self.value = value

    def __format__(self, format_spec):
        v = self.value
        singular, sep, plural = format_spec.partition('|')
        plural = plural or f'{singular}s'
        if abs(v) != 1:
            return f'{v} {plural}'
        return f'{v} {singular}'


def human_join(seq, delim=', ', final='or'):
    size = len(seq)
    if size == 0:
        return ''

    if size == 1:
        return seq[0]

    if size == 2:
        return f'{seq[0]} {final} {seq[1]}'

    return delim.join(seq[:-1]) + f' {final} {seq[-1]}'


def format_number(value, digits=4):
    """Compact text for table cells: ``'--'`` for missing, ``'inf'`` kept."""
    if value is None:
        return '--'
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f'{value:.{digits}g}'


def format_p(value, permutations):
    """p-values at the floor ``1/(K+1)`` print as ``<=floor``; the floor itself is attainable."""
    if value is None:
        return '--'
    floor = 1.0 / (permutations + 1)
    if value <= floor and permutations >= 99:
        return f'<={floor:.3g}'
    return f'{value:.3f}'


_SLUG = re.compile(r'[^0-9A-Za-z]+')


def slugify(name):
    """File-name friendly version of a term name, ``'year x sensor'`` -> ``'year_x_sensor'``."""
    return _SLUG.sub('_', name).strip('_') or 'term'


class TabularData:
    def __init__(self, *, align='^'):
        self._widths = []
        self._columns = []
        self._rows = []
        self._align = align
        self._separators = set()

    def set_columns(self, columns):
        self._columns = columns
        self._widths = [len(c) + 2 for c in columns]

    def add_row(self, row):
        rows = [str(r) for r in row]
        self._rows.append(rows)
        for index, element in enumerate(rows):
            width = len(element) + 2
            if width > self._widths[index]:
                self._widths[index] = width

    def add_rows(self, rows):
        for row in rows:
            self.add_row(row)

    def add_separator(self):
        """Draws a rule before the next row, as above a table's total line."""
        self._separators.add(len(self._rows))

    def render(self):
        """Renders a table in rST format.

        Example:

        +-----------+-------+-----+
        |           |  SS   | df  |
        +-----------+-------+-----+
        |   year    | 4.2   |  1  |
        | Residuals | 12.5  | 50  |
        +-----------+-------+-----+
        """

        sep = '+'.join('-' * w for w in self._widths)
        sep = f'+{sep}+'

        to_draw = [sep]

        def get_entry(d):
            elem = '|'.join(f'{e:{self._align}{self._widths[i]}}' for i, e in enumerate(d))
            return f'|{elem}|'

        to_draw.append(get_entry(self._columns))
        to_draw.append(sep)

        for index, row in enumerate(self._rows):
            if index in self._separators and index != 0:
                to_draw.append(sep)
            to_draw.append(get_entry(row))

        to_draw.append(sep)
        return '\n'.join(to_draw)
