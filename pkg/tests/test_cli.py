import os

import pytest

from period3 import cli
from period3.datasets import read_csv


def test_bifurcation_command(tmp_path):
    out = str(tmp_path)
    code = cli.main(['bifurcation', '--f=0.5', '--lambda=0.004', '--kappa=0.3', '-o', out])
    assert code == cli.EXIT_OK
    ds = read_csv(os.path.join(out, 'bifurcation.csv'))
    assert ds.column('kappa_B')[0] == pytest.approx(0.5153882, abs=1e-7)
    assert ds.provenance['command'] == 'bifurcation'
    assert len(read_csv(os.path.join(out, 'states.csv')).rows) == 7


def test_invalid_configuration(tmp_path):
    assert cli.main(['bifurcation', '--f=0.5', '--lambda=-1', '-o', str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(['bifurcation', '--f=0.5', '-o', str(tmp_path)]) == cli.EXIT_CONFIG
    config = tmp_path / 'run.cfg'
    config.write_text("f = 0.5\nomega = 1\n")
    assert cli.main(['bifurcation', '-c', str(config), '-o', str(tmp_path)]) == cli.EXIT_CONFIG


def test_numerical_failure(tmp_path):
    code = cli.main(['orbits', '--f=1.5', '--lambda=0.004', '--sign-delta=-1', '-o', str(tmp_path)])
    assert code == cli.EXIT_NUMERIC


def test_partial_sweep(tmp_path):
    code = cli.main(['sweep', 'simulate_slow_mode', '--f-grid=0.5,1', '--lambda=0.004', '--kappa=0.6',
                     '--n-traj=10', '-o', str(tmp_path)])
    assert code == cli.EXIT_PARTIAL
    assert os.path.exists(os.path.join(str(tmp_path), 'sweep_simulate_slow_mode.csv'))


def test_figure_command(tmp_path):
    assert cli.main(['figure', 'fig13', '-o', str(tmp_path)]) == cli.EXIT_OK
    assert len(read_csv(os.path.join(str(tmp_path), 'fig13.csv')).rows) == 100
    assert cli.main(['figure', 'fig99', '-o', str(tmp_path)]) == cli.EXIT_CONFIG


def test_unknown_sweep_operation(tmp_path):
    code = cli.main(['sweep', 'escape', '--f-grid=0.5,1', '--lambda=0.004', '-o', str(tmp_path)])
    assert code == cli.EXIT_CONFIG


def test_sweep_without_lambda(tmp_path):
    code = cli.main(['sweep', 'harmonic_distribution', '--f-grid=0.5,1', '-o', str(tmp_path)])
    assert code == cli.EXIT_CONFIG


def test_thread_count_must_be_an_integer(tmp_path, monkeypatch):
    monkeypatch.setenv('TRIPLING_THREADS', 'many')
    assert cli.main(['figure', 'fig13', '-o', str(tmp_path)]) == cli.EXIT_CONFIG
