import numpy as np
import pytest

from period3.config import RunConfig, parse_config
from period3.figures import FIGURE_DEFAULTS, FIGURES, run_figure
from tripling.errors import ConfigError


def test_every_figure_has_defaults():
    assert set(FIGURES) == set(FIGURE_DEFAULTS)


def test_unknown_figure():
    with pytest.raises(ConfigError):
        run_figure('fig2', RunConfig())


def test_bifurcation_curve_figure():
    ds, = run_figure('fig13', RunConfig())
    assert ds.rows.shape == (100, 2)
    kappa = 1.0 / ds.column('inv_kappa')
    np.testing.assert_allclose(ds.column('ftilde_sq_B'), 2.0 * (np.sqrt(1.0 + kappa ** 2) - 1.0) / kappa)
    assert ds.provenance['command'] == 'figure fig13'


def test_levels_without_drive():
    cfg = parse_config(flags={'f_grid': '0', 'lambda': '0.04', 'n_max': '30'})
    ds, = run_figure('fig1d', cfg)
    n = np.arange(31, dtype=float)
    diagonal = 0.04 * (-(n + 0.5) + 0.04 * n * (n + 1.0)) + (1.0 + 0.04 ** 2) / 4.0
    assert len(ds.rows)
    for f, sector, index, g in ds.rows:
        assert f == 0.0
        assert g < 0.3
        assert g == pytest.approx(np.sort(diagonal[int(sector)::3])[int(index)], abs=1e-12)


def test_separatrix_figure():
    branches, states = run_figure('fig11', RunConfig())
    assert len(states.rows) == 7
    assert set(branches.column('branch')) == set(range(6))


def test_fourier_figure():
    ds, = run_figure('fig12', RunConfig())
    assert len(ds.rows) == 50
    by_m = dict(zip(ds.column('m'), ds.column('abs_a_numeric')))
    for k in range(1, 11):
        assert by_m[-k] > by_m[k]
