import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from tripling import kinetics, orbits, spectrum
from tripling.errors import NumericalError, ParameterError
from tripling.model import ModelParams, fixed_points, well_geometry
from tripling.utils import delta_g, g_from_delta, linear_fit


def at_delta(m: ModelParams, dg: float) -> float:
    fp = fixed_points(m)
    return g_from_delta(dg, fp.g_min, fp.g_s)


'''
tail sums
'''


def test_polylog_tail_matches_direct_summation():
    k = np.arange(1, 200_001, dtype=float)
    direct = float(np.sum(k ** (-2.0 / 3.0) * np.exp(-0.01 * k)))
    assert kinetics.polylog_tail(2.0 / 3.0, 0.01, 1) == pytest.approx(direct, rel=1e-8)
    tail = float(np.sum(k[49:] ** (-4.0 / 3.0) * np.exp(-0.01 * k[49:])))
    assert kinetics.polylog_tail(4.0 / 3.0, 0.01, 50) == pytest.approx(tail, rel=1e-8)


def test_polylog_tail_small_eps_power_law():
    eps = np.logspace(-9, -7, 5)
    sums = [kinetics.polylog_tail(2.0 / 3.0, e, 1) for e in eps]
    slope, _, _ = linear_fit(np.log(eps), np.log(sums))
    assert slope == pytest.approx(-1.0 / 3.0, abs=0.03)
    assert sums[0] == pytest.approx(gamma_fn(1.0 / 3.0) * eps[0] ** (-1.0 / 3.0), rel=0.01)


def test_polylog_tail_edges():
    assert kinetics.polylog_tail(2.0 / 3.0, -1e-3, 1) == math.inf
    assert kinetics.polylog_tail(2.0 / 3.0, 0.0, 1) == math.inf
    # zeta(4/3)
    assert kinetics.polylog_tail(4.0 / 3.0, 0.0, 1) == pytest.approx(3.6009, rel=1e-4)


'''
rates
'''


@pytest.fixture(scope='module')
def rates_mid():
    return kinetics.LocalRates(ModelParams(f=0.5, lam=0.004, kappa=0.01, nbar=0.1), -0.1)


def test_rates_need_damping():
    with pytest.raises(ParameterError):
        kinetics.LocalRates(ModelParams(f=0.5, lam=0.004, kappa=0.0), -0.1)


def test_rates_are_linear_in_kappa(well_f05):
    row = kinetics.semiclassical_rates(well_f05, -0.1, [-3, -1, 1, 2])
    doubled = kinetics.semiclassical_rates(well_f05.replace(kappa=2.0 * well_f05.kappa), -0.1, [-3, -1, 1, 2])
    np.testing.assert_allclose(doubled.rates, 2.0 * row.rates, rtol=1e-12)


def test_downward_rates_dominate(rates_mid):
    row = rates_mid.row([-2, -1, 1, 2])
    assert row.rates[1] > row.rates[2]
    assert row.rates[0] > row.rates[3]


def test_rate_row_continues_with_the_asymptotic_form(rates_mid):
    k = rates_mid.m_switch + 5
    row = rates_mid.row([-k, k])
    assert np.all(row.rates > 0)
    assert row.rates[0] > row.rates[1]


def test_harmonic_rate_ratio(well_f05):
    geometry = well_geometry(well_f05)
    row = kinetics.semiclassical_rates(well_f05, at_delta(well_f05, 1e-4), [-1, 1])
    assert row.rates[0] / row.rates[1] == pytest.approx(1.0 / math.tanh(geometry.phi_star) ** 2, rel=0.02)


def test_semiclassical_rate_matrix(well_f05):
    levels = [at_delta(well_f05, d) for d in (0.3, 0.32, 0.34)]
    W = kinetics.semiclassical_rate_matrix(well_f05, levels)
    assert W.provenance == kinetics.Provenance.SEMICLASSICAL
    assert np.all(np.diag(W.W) == 0.0)
    assert W.W[1, 0] > W.W[0, 1]


def test_eikonal_root_nearest_neighbours():
    assert kinetics.eikonal_root([4.0], [1.0]) == pytest.approx(0.25, rel=1e-10)


def test_eikonal_root_without_solution():
    with pytest.raises(NumericalError):
        kinetics.eikonal_root([1.0], [0.0])


'''
stationary distributions
'''


def test_two_state_balance():
    sd = kinetics.stationary_solve(np.array([[0.0, 1.0], [3.0, 0.0]]))
    np.testing.assert_allclose(sd.rho, [0.75, 0.25])
    assert sd.residual < 1e-12


def test_stationary_solve_balances_random_rates():
    rng = np.random.default_rng(7)
    W = rng.uniform(0.1, 2.0, size=(6, 6))
    np.fill_diagonal(W, 0.0)
    sd = kinetics.stationary_solve(W)
    np.testing.assert_allclose(sd.rho @ W, sd.rho * W.sum(axis=1), rtol=1e-10)
    assert sd.rho.sum() == pytest.approx(1.0)


def test_stationary_solve_rejects_bad_matrices():
    with pytest.raises(NumericalError):
        kinetics.stationary_solve(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(ParameterError):
        kinetics.stationary_solve(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_flux_matrix_is_normalised_per_state():
    rng = np.random.default_rng(3)
    W = rng.uniform(0.1, 2.0, size=(5, 5))
    np.fill_diagonal(W, 0.0)
    flux = kinetics.flux_matrix(kinetics.stationary_solve(W).rho, W)
    np.testing.assert_allclose(flux.max(axis=0), 1.0)


def test_detailed_balance_of_a_chain():
    W = np.zeros((6, 6))
    for n in range(5):
        W[n, n + 1] = 0.3
        W[n + 1, n] = 1.0 + n
    report = kinetics.detailed_balance_residual(W)
    assert report.max_violation <= 1e-12


def test_detailed_balance_of_gradient_rates():
    energies = np.random.default_rng(0).normal(size=8)
    W = np.exp(-(energies[None, :] - energies[:, None]) / 2.0)
    np.fill_diagonal(W, 0.0)
    report = kinetics.detailed_balance_residual(W)
    assert report.tested == 56
    assert report.max_violation < 1e-12


def test_detailed_balance_violation_is_detected():
    W = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 5.0], [1.0, 1.0, 0.0]])
    assert kinetics.detailed_balance_residual(W).max_violation == pytest.approx(math.log(5.0))


def test_harmonic_distribution_without_squeezing():
    hd = kinetics.harmonic_distribution(ModelParams(f=1.0 / math.sqrt(2.0), lam=0.004, nbar=0.3))
    assert hd.n_eff == pytest.approx(0.3)


def test_harmonic_distribution_f05():
    hd = kinetics.harmonic_distribution(ModelParams(f=0.5, lam=0.004))
    assert hd.n_eff == pytest.approx(0.006333, rel=2e-3)
    assert hd.ratio == pytest.approx(5.068, abs=2e-3)
    rho = hd.rho(10)
    assert rho.sum() == pytest.approx(1.0)
    assert rho[1] / rho[0] == pytest.approx(math.exp(-hd.ratio))


def test_harmonic_distribution_degenerate():
    hd = kinetics.harmonic_distribution(ModelParams(f=1.0 / math.sqrt(2.0), lam=0.004, nbar=0.0))
    assert hd.degenerate
    np.testing.assert_array_equal(hd.rho(3), [1.0, 0.0, 0.0])


def test_effective_planck_number_diverges_at_weak_drive():
    fs = np.logspace(-4, -2, 5)
    n_eff = [kinetics.harmonic_distribution(ModelParams(f=f, lam=0.004)).n_eff for f in fs]
    slope, _, _ = linear_fit(np.log(fs), np.log(n_eff))
    assert slope == pytest.approx(-0.5, abs=0.05)


'''
eikonal
'''


@pytest.mark.parametrize('nbar', [0.0, 0.1])
def test_eikonal_bottom_matches_harmonic_ratio(nbar):
    m = ModelParams(f=0.5, lam=0.004, kappa=0.01, nbar=nbar)
    eik = kinetics.eikonal_solve(m, [at_delta(m, 1e-4)])
    assert eik.Rprime[0] * eik.omega[0] == pytest.approx(kinetics.harmonic_distribution(m).ratio, rel=0.02)
    assert eik.local[0]


def test_eikonal_does_not_depend_on_lambda(well_f05):
    m = well_f05.replace(nbar=1.0)
    grid = [at_delta(m, d) for d in (0.05, 0.1)]
    small = kinetics.eikonal_solve(m, grid)
    large = kinetics.eikonal_solve(m.replace(lam=0.04), grid)
    assert np.all(small.local)
    np.testing.assert_allclose(small.Rprime, large.Rprime, rtol=1e-8)


def test_eikonal_activation_accumulates(well_f05):
    m = well_f05.replace(nbar=1.0)
    grid = [at_delta(m, d) for d in (0.02, 0.05, 0.1)]
    eik = kinetics.eikonal_solve(m, grid, threads=2)
    assert np.all(eik.Rprime > 0)
    assert np.all(np.diff(eik.R) > 0)


def test_classical_limit_at_the_bottom():
    m = ModelParams(f=0.5, lam=0.004, kappa=0.01)
    assert kinetics.classical_limit(m, at_delta(m, 1e-4)) == pytest.approx(0.87690, rel=0.01)


def test_classical_limit_scales_with_temperature():
    m = ModelParams(f=0.5, lam=0.004, kappa=0.01)
    g = at_delta(m, 0.5)
    orbit = orbits.orbit_solve(m, g)
    assert kinetics.classical_limit(m.replace(nbar=2.0), g, orbit) == pytest.approx(
        kinetics.classical_limit(m, g, orbit) / 5.0, rel=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize('f', [0.1, 2.0])
def test_eikonal_approaches_classical_limit(f):
    m = ModelParams(f=f, lam=0.004, kappa=0.01, nbar=1.0)
    grid = [at_delta(m, d) for d in np.linspace(0.05, 0.8, 6)]
    eik = kinetics.eikonal_solve(m, grid)
    classical = [kinetics.classical_limit(m, g) for g in grid]
    np.testing.assert_allclose(eik.Rprime, classical, rtol=0.1)


def test_thermal_influx_diverges_at_the_locality_edge(rates_mid):
    m = rates_mid.m
    eps = np.logspace(-9, -7, 5)
    thermal = [kinetics.influx_tail(m, rates_mid.g, (rates_mid.decay - e) / rates_mid.omega, rates=rates_mid).thermal_term
               for e in eps]
    slope, _, _ = linear_fit(np.log(eps), np.log(thermal))
    assert slope == pytest.approx(-1.0 / 3.0, abs=0.03)


def test_vacuum_influx_stays_finite(rates_mid):
    m = rates_mid.m.replace(nbar=0.0)
    rates = kinetics.LocalRates(m, rates_mid.g, orbit=rates_mid.orbit, tau_inf=rates_mid.tau_inf)
    tail = kinetics.influx_tail(m, rates.g, (rates.decay - 1e-12) / rates.omega, rates=rates)
    assert not tail.divergent
    assert math.isfinite(tail.vacuum_term)
    assert tail.thermal_term == 0.0
    beyond = kinetics.influx_tail(m, rates.g, (rates.decay + 1e-3) / rates.omega, rates=rates)
    assert beyond.divergent


def test_no_nonlocality_at_weak_drive():
    report = kinetics.detect_nonlocality(ModelParams(f=0.1, lam=0.004, kappa=0.01))
    assert report.g_NL is None
    assert report.delta_g_NL is None


@pytest.mark.slow
def test_nonlocality_inside_the_window(well_f05):
    report = kinetics.detect_nonlocality(well_f05)
    fp = fixed_points(well_f05)
    assert fp.g_min < report.g_NL < fp.g_s
    assert 0.0 < report.delta_g_NL < 1.0


@pytest.mark.slow
def test_no_nonlocality_at_strong_drive():
    assert kinetics.detect_nonlocality(ModelParams(f=2.0, lam=0.004, kappa=0.01)).g_NL is None


def _margin_crossing_at(monkeypatch, m, delta_cross):
    fp = fixed_points(m)
    monkeypatch.setattr(kinetics, '_locality_margin',
                        lambda _m, g: delta_cross - delta_g(g, fp.g_min, fp.g_s))


@pytest.mark.parametrize('delta_cross', [0.5, 0.01, 0.0003])
def test_nonlocality_crossing_is_found(monkeypatch, well_f05, delta_cross):
    _margin_crossing_at(monkeypatch, well_f05, delta_cross)
    report = kinetics.detect_nonlocality(well_f05)
    assert report.delta_g_NL == pytest.approx(delta_cross, abs=1e-8)
    assert not report.below_floor


def test_nonlocality_below_the_first_grid_point(monkeypatch, well_f05):
    monkeypatch.setattr(kinetics, '_locality_margin', lambda _m, g: -1.0)
    report = kinetics.detect_nonlocality(well_f05)
    fp = fixed_points(well_f05)
    assert report.below_floor
    assert report.delta_g_NL == kinetics.NL_DELTA_FLOOR
    assert report.g_NL == pytest.approx(g_from_delta(kinetics.NL_DELTA_FLOOR, fp.g_min, fp.g_s))


'''
quantum rates
'''


def test_quantum_rates_at_zero_temperature(wannier_f1, well_f1):
    W = kinetics.quantum_rate_matrix(wannier_f1, well_f1)
    elements = np.abs(spectrum.lowering_elements(wannier_f1)) ** 2
    expected = 2.0 * well_f1.kappa * elements.T
    np.fill_diagonal(expected, 0.0)
    np.testing.assert_allclose(W.W, expected)
    assert W.provenance == kinetics.Provenance.QUANTUM


@pytest.mark.slow
def test_quantum_stationary_distribution(wannier_f05, well_f05):
    W = kinetics.quantum_rate_matrix(wannier_f05, well_f05)
    sd = kinetics.stationary_solve(W)
    assert sd.residual < 1e-10
    assert np.all(np.diff(sd.rho[:20]) < 0)
    assert kinetics.detailed_balance_residual(W).max_violation > 0.1


@pytest.mark.slow
def test_quantum_and_semiclassical_rates_agree(wannier_f05, well_f05):
    W = kinetics.quantum_rate_matrix(wannier_f05, well_f05).W
    n = 20
    row = kinetics.semiclassical_rates(well_f05, float(wannier_f05.g[n]), [-2, -1, 1, 2])
    for j, rate in zip(row.m, row.rates):
        assert W[n, n + j] == pytest.approx(rate, rel=0.1)


'''
activation
'''


@pytest.mark.slow
def test_activation_energy_grows_with_drive():
    values = [kinetics.activation_energy(ModelParams(f=f, lam=0.004, kappa=0.01, nbar=0.01), grid_points=20).R_A
              for f in (0.25, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.slow
def test_activation_energy_classical_limit():
    m = ModelParams(f=0.1, lam=0.004, kappa=0.01, nbar=1.0)
    act = kinetics.activation_energy(m, grid_points=20)
    assert act.R_A == pytest.approx(kinetics.classical_activation_energy(m, grid_points=20), rel=0.1)


@pytest.mark.slow
@pytest.mark.parametrize('f', [0.1, 2.0])
def test_optimal_path_condition(f):
    act = kinetics.activation_energy(ModelParams(f=f, lam=0.004, kappa=0.01, nbar=0.0), grid_points=20)
    assert act.condition_ok


'''
master equation
'''


def test_lindblad_relaxes_to_vacuum_without_drive():
    result = kinetics.lindblad_steady_state(ModelParams(f=0.0, lam=0.04, kappa=0.01), n_max_small=10)
    assert result.trace == pytest.approx(1.0, abs=1e-10)
    assert result.purity == pytest.approx(1.0, abs=1e-8)
    assert abs(result.rho[0, 0]) == pytest.approx(1.0, abs=1e-8)


def test_lindblad_size_guard():
    with pytest.raises(ParameterError):
        kinetics.lindblad_steady_state(ModelParams(f=0.0, lam=0.04, kappa=0.01), n_max_small=100)


def test_lindblad_trace_with_drive():
    result = kinetics.lindblad_steady_state(ModelParams(f=1.0, lam=0.04, kappa=0.01, nbar=0.1), n_max_small=20)
    assert result.trace == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(result.rho, result.rho.conj().T, atol=1e-12)
    assert 0.0 < result.purity <= 1.0 + 1e-10


@pytest.mark.slow
def test_lindblad_populations_follow_the_rate_equation(wannier_f1, well_f1):
    result = kinetics.lindblad_steady_state(well_f1, n_max_small=60, wannier=wannier_f1)
    sd = kinetics.stationary_solve(kinetics.quantum_rate_matrix(wannier_f1, well_f1))
    levels = min(5, wannier_f1.n_levels)
    np.testing.assert_allclose(result.populations[:levels] / result.populations[0],
                               sd.rho[:levels] / sd.rho[0], rtol=0.1)
