import json
import os

import pandas as pd
import pytest
from click.testing import CliRunner

import asca
from asca import errors
from asca.plots import iter_markers
from launcher import main
from pipeline import Pipeline, RunState

from conftest import station_records, write_csv


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(main, ['version'])
    assert result.exit_code == 0
    assert result.output.strip() == asca.__version__


def test_validate_accepts_the_station_config(runner, station):
    result = runner.invoke(main, ['validate', str(station())])
    assert result.exit_code == 0, result.output
    assert 'Config is valid.' in result.output


def test_validate_lists_every_violation(runner, station):
    path = station(seed='one', permutations=0, unfold={'rows': ['year', 'sensor', 'day', 'hour'], 'columns': []})
    result = runner.invoke(main, ['validate', str(path)])
    assert result.exit_code == 2
    for field in ('seed:', 'permutations:', 'unfold.columns:'):
        assert field in result.output


def test_missing_config_file(runner, tmp_path):
    result = runner.invoke(main, ['validate', str(tmp_path / 'absent.json')])
    assert result.exit_code == 2


def test_run_writes_every_artifact(runner, station, tmp_path):
    result = runner.invoke(main, ['run', str(station())])
    assert result.exit_code == 0, result.output

    out = tmp_path / 'out'
    for name in ('table.csv', 'table.txt', 'preprocessing.txt', 'variables.csv', 'mspc.csv', 'acf.csv',
                 'residuals.csv', 'config.json', 'manifest.txt'):
        assert (out / name).is_file(), name
    for slug in ('year', 'sensor', 'year_x_sensor'):
        assert (out / f'scores_{slug}.csv').is_file()
        assert (out / f'loadings_{slug}.csv').is_file()
        assert (out / 'plots' / f'biplot_{slug}.svg').is_file()
    assert not [p for p in os.listdir(tmp_path) if p.endswith('.staging')]

    table = pd.read_csv(out / 'table.csv', index_col='term')
    assert list(table.index) == ['year (ordinal)', 'sensor', 'year x sensor', 'Residuals', 'Total']
    assert table['df'].tolist() == [1, 2, 2, 3, 8]
    for term in ('year (ordinal)', 'sensor', 'year x sensor'):
        assert 1 / 100 <= table.loc[term, 'p'] <= 1

    lines = (out / 'manifest.txt').read_text().splitlines()
    manifest = dict((key.strip(), value.strip()) for key, value in (line.split(':', 1) for line in lines))
    assert manifest['seed'] == '11'
    assert manifest['rng'] == 'PCG64'
    assert manifest['permutations'] == '99'
    assert manifest['version'] == asca.__version__
    assert manifest['rows'] == '9'
    assert manifest['columns'] == '28'
    assert len(manifest['input_sha256']) == 64
    assert json.loads((out / 'config.json').read_text())['seed'] == 11


def test_strong_sensor_effect_is_detected(station, tmp_path):
    state = Pipeline.from_file(station()).run()
    assert state.anova.term('sensor').p == pytest.approx(1 / 100)
    assert state.anova.term('sensor').pct_ss > 50
    assert state.views['sensor'].n_components == 2
    assert set(state.boxes) == {'north', 'south', 'west'}


def test_biplot_groups_by_level(station, tmp_path):
    Pipeline.from_file(station()).run()
    svg = (tmp_path / 'out' / 'plots' / 'biplot_sensor.svg').read_text()
    assert len(list(iter_markers(svg, 'score'))) == 3
    assert len(list(iter_markers(svg, 'loading'))) == 28


def test_runs_are_reproducible_across_workers(station, tmp_path):
    Pipeline.from_file(station('a.json', output='serial', n_jobs=1, null_distribution=True)).run()
    Pipeline.from_file(station('b.json', output='threaded', n_jobs=2, chunk_size=10,
                               null_distribution=True)).run()
    for name in ('table.csv', 'null_sensor.csv', 'scores_sensor.csv', 'mspc.csv', 'plots/biplot_sensor.svg'):
        assert (tmp_path / 'serial' / name).read_bytes() == (tmp_path / 'threaded' / name).read_bytes(), name


def test_data_error_exits_1_and_leaves_no_output(runner, station, tmp_path):
    records = station_records()
    ts, _, value = records[0]
    write_csv(tmp_path / 'records.csv', records + [(ts, 'east', value)])
    result = runner.invoke(main, ['run', str(station())])
    assert result.exit_code == 1
    assert 'UnknownSeries' in result.output
    assert not (tmp_path / 'out').exists()
    assert not [p for p in os.listdir(tmp_path) if p.endswith('.staging')]


def test_failed_run_keeps_previous_output(station, tmp_path):
    Pipeline.from_file(station()).run()
    records = station_records()
    write_csv(tmp_path / 'records.csv', records + [records[5]])
    with pytest.raises(errors.DuplicateCell):
        Pipeline.from_file(station()).run()
    assert (tmp_path / 'out' / 'table.csv').is_file()


def test_invalid_config_run_exits_2(runner, station):
    result = runner.invoke(main, ['run', str(station(reference='day'))])
    assert result.exit_code == 2
    assert 'reference:' in result.output


def test_missing_cells_and_row_threshold(station, tmp_path):
    # Drops 5 of the 28 readings of the first sensor row and 1 of the second.
    skip = (0, 1, 2, 3, 4, 30)
    write_csv(tmp_path / 'records.csv', station_records(skip=skip))
    state = Pipeline.from_file(station(missing_threshold=2)).run()
    assert state.table.shape == (8, 28)
    assert state.report.imputed == 1
    assert [row.name for row in state.report.excluded] == ['2020 / north']
    assert 'excluded' in (tmp_path / 'out' / 'preprocessing.txt').read_text()


def test_univariate_table(station, tmp_path):
    Pipeline.from_file(station(univariate=True)).run()
    table = pd.read_csv(tmp_path / 'out' / 'table_univariate.csv', index_col='term')
    assert table['df'].tolist() == [1, 2, 2, 3, 8]


def test_run_state_starts_empty():
    state = RunState()
    assert state.tensor is None
    assert state.table is None
    assert state.views == {}


def test_nested_factor_runs_end_to_end(runner, station, tmp_path):
    path = station(factors=[{'mode': 'year', 'kind': 'ordinal'}, {'mode': 'sensor', 'nested_in': 'year'}],
                   interactions=[])
    assert Pipeline.from_file(path).validate() == []
    result = runner.invoke(main, ['run', str(path)])
    assert result.exit_code == 0, result.output

    table = pd.read_csv(tmp_path / 'out' / 'table.csv', index_col='term')
    assert list(table.index) == ['year (ordinal)', 'sensor', 'Residuals', 'Total']
    assert table['df'].tolist() == [1, 6, 1, 8]

    state = Pipeline.from_file(path).run()
    assert list(state.boxes)[:2] == ['2020 / north', '2020 / south']
    assert len(state.boxes) == 9


def test_output_holding_other_files_is_refused(runner, station, tmp_path):
    path = station(output='.')
    result = runner.invoke(main, ['run', str(path)])
    assert result.exit_code == 2
    assert 'output:' in result.output
    assert sorted(os.listdir(tmp_path)) == ['config.json', 'records.csv']
