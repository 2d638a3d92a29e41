import datetime
import json

import numpy as np
import pytest

from asca.design import NOMINAL, FactorSpec, assemble_design


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def crossed_levels(*cards, reps=1):
    """Level indices of a full factorial layout, first factor slowest, each cell ``reps`` times."""
    grids = np.meshgrid(*[np.arange(c) for c in cards], indexing='ij')
    return [np.repeat(g.ravel(), reps) for g in grids]


@pytest.fixture
def crossed():
    return crossed_levels


@pytest.fixture
def two_factor_design():
    def make(a=2, b=3, reps=2, *, interaction=True, kinds=(NOMINAL, NOMINAL), drop=()):
        la, lb = crossed_levels(a, b, reps=reps)
        keep = np.setdiff1d(np.arange(la.size), np.asarray(drop, dtype=int))
        factors = [FactorSpec('A', la[keep], a, kinds[0]), FactorSpec('B', lb[keep], b, kinds[1])]
        return assemble_design(factors, [('A', 'B')] if interaction else [])

    return make


@pytest.fixture
def one_way_design():
    def make(groups, reps):
        (levels,) = crossed_levels(groups, reps=reps)
        return assemble_design([FactorSpec('group', levels, groups)])

    return make


# Small station dataset: 3 years (evolution) x 3 sensors, one week per year
# sampled every 6 hours. Rows are year x sensor, columns day-of-week x hour-of-day.

WEEK_STARTS = (datetime.datetime(2020, 3, 2), datetime.datetime(2021, 3, 1), datetime.datetime(2022, 2, 28))
SENSORS = ('north', 'south', 'west')


def station_records(seed=7, skip=()):
    rng = np.random.default_rng(seed)
    offsets = {'north': 0.0, 'south': 1.5, 'west': -1.0}
    out = []
    for year, start in enumerate(WEEK_STARTS):
        for sensor in SENSORS:
            for day in range(7):
                for hour in range(0, 24, 6):
                    ts = start + datetime.timedelta(days=day, hours=hour)
                    value = 10 + 0.5 * year + offsets[sensor] + np.sin(hour / 24 * 2 * np.pi) + rng.normal(0, 0.3)
                    out.append((ts, sensor, float(value)))
    return [r for i, r in enumerate(out) if i not in set(skip)]


def write_csv(path, records):
    lines = ['timestamp,series,value']
    for ts, series, value in records:
        text = '' if value is None else f'{value:.6f}'
        lines.append(f'{ts.isoformat()},{series},{text}')
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def station_config(**overrides):
    config = {
        'input': 'records.csv',
        'seed': 11,
        'modes': [
            {'name': 'year', 'kind': 'evolution', 'frequency': 'year', 'period': 'span',
             'cardinality': 3, 'origin': 2020},
            {'name': 'sensor', 'kind': 'non_temporal', 'labels': list(SENSORS)},
            {'name': 'day', 'frequency': 'day', 'period': 'week'},
            {'name': 'hour', 'frequency': 'hour', 'period': 'day', 'step': 6},
        ],
        'series_mode': 'sensor',
        'unfold': {'rows': ['year', 'sensor'], 'columns': ['day', 'hour']},
        'factors': [{'mode': 'year', 'kind': 'ordinal'}, {'mode': 'sensor'}],
        'interactions': [['year', 'sensor']],
        'permutations': 99,
        'components': 2,
        'output': 'out',
        'acf_lags': 4,
    }
    config.update(overrides)
    return config


@pytest.fixture
def station(tmp_path):
    """Writes the station records and returns a function that writes a config and returns its path."""
    write_csv(tmp_path / 'records.csv', station_records())

    def make(name='config.json', **overrides):
        path = tmp_path / name
        path.write_text(json.dumps(station_config(**overrides), indent=2), encoding='utf-8')
        return path

    return make
