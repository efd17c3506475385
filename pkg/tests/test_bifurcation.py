import math

import numpy as np
import pytest

from tripling import bifurcation
from tripling.bifurcation import Basin, BifurcationData
from tripling.errors import ParameterError
from tripling.model import ModelParams


@pytest.fixture(scope='module')
def damped_f1():
    return ModelParams(f=1.0, lam=0.01, kappa=0.5)


@pytest.fixture(scope='module')
def slow_f05():
    return bifurcation.slow_mode_reduction(ModelParams(f=0.5, lam=0.004, kappa=0.5))


def toy_reduction() -> BifurcationData:
    return BifurcationData(kappa_B=1.0, f=0.5, x_B=0j, phi_B=0.0, a_B=-1.0, b_B=1.0, k_ad=0.0, r_B=1.0)


def test_stationary_radii():
    r_plus, r_minus = bifurcation.stationary_radii(1.0, 0.5)
    assert r_plus == pytest.approx(1.58114, abs=1e-5)
    assert r_minus == pytest.approx(0.70711, abs=1e-5)
    assert bifurcation.stationary_radii(1.0, 1.2) is None
    assert bifurcation.stationary_radii(1.0, 0.1, sign_delta=-1) is None


def test_fixed_points_of_the_damped_flow(damped_f1):
    states = bifurcation.classical_fixed_points(damped_f1)
    assert states.period_three
    assert all(s.stable for s in states.stable)
    assert all(s.saddle for s in states.saddles)
    for s in states.stable + states.saddles:
        assert bifurcation.drift_qp(s.Q, s.P, damped_f1, 0.5) == pytest.approx((0.0, 0.0), abs=1e-10)
    assert [abs(s.x) for s in states.stable] == pytest.approx([states.r_plus] * 3)


def test_origin_eigenvalues(damped_f1):
    origin = bifurcation.classical_fixed_points(damped_f1).origin
    assert sorted(origin.eigenvalues, key=lambda e: e.imag) == pytest.approx([-0.5 - 1j, -0.5 + 1j])
    assert origin.stable


def test_beyond_the_bifurcation(damped_f1):
    states = bifurcation.classical_fixed_points(damped_f1, kappa=1.2)
    assert not states.period_three
    assert states.stable == ()
    with pytest.raises(ParameterError):
        bifurcation.classical_fixed_points(damped_f1, kappa=-0.1)


def test_bifurcation_point():
    bp = bifurcation.bifurcation_point(ModelParams(f=0.5, lam=0.004))
    assert bp.kappa_B == pytest.approx(0.5153882, abs=1e-7)
    assert bp.f_B == pytest.approx(0.5)
    assert bp.r_B == pytest.approx(math.sqrt(1.125))
    assert bp.ftilde_sq == pytest.approx(0.25 / 0.5153882, rel=1e-6)


def test_bifurcation_for_negative_detuning():
    assert bifurcation.f_bifurcation(0.0, sign_delta=-1) == pytest.approx(2.0)
    assert math.isnan(bifurcation.kappa_bifurcation(1.5, sign_delta=-1))
    kappa_B = bifurcation.kappa_bifurcation(2.5, sign_delta=-1)
    assert bifurcation.f_bifurcation(kappa_B, sign_delta=-1) == pytest.approx(2.5)


def test_bifurcation_curve():
    kappas = np.linspace(0.05, 5.0, 100)
    inv_kappa, ftilde_sq = bifurcation.bifurcation_curve(kappas)
    np.testing.assert_allclose(inv_kappa, 1.0 / kappas)
    for kappa, value in zip(kappas[::20], ftilde_sq[::20]):
        assert value == pytest.approx(bifurcation.f_bifurcation(kappa) ** 2 / kappa)


def test_kappa_offset_from_field():
    m = ModelParams(f=0.5, lam=0.004, kappa=0.5)
    f_B = bifurcation.f_bifurcation(0.5)
    for f in (f_B - 1e-4, f_B + 1e-4):
        exact = 0.5 - bifurcation.kappa_bifurcation(f)
        assert bifurcation.kappa_offset_from_field(m, f) == pytest.approx(exact, rel=1e-2)
    assert bifurcation.kappa_offset_from_field(m, f_B - 1e-4) > 0


def test_slow_mode_reduction(slow_f05):
    assert slow_f05.kappa_B == pytest.approx(0.5153882, abs=1e-7)
    assert slow_f05.k_ad == pytest.approx(-2.42536, abs=1e-5)
    assert slow_f05.b_B > 0
    assert slow_f05.a_B * slow_f05.b_B < 0
    assert abs(slow_f05.x_B) == pytest.approx(slow_f05.r_B)


@pytest.mark.parametrize('f', [0.25, 0.5, 1.0, 2.0])
def test_slow_mode_sign_convention(f):
    bd = bifurcation.slow_mode_reduction(ModelParams(f=f, lam=0.004))
    assert bd.a_B * bd.b_B < 0


def test_slow_mode_needs_a_bifurcation():
    with pytest.raises(ParameterError):
        bifurcation.slow_mode_reduction(ModelParams(f=1.5, lam=0.004, sign_delta=-1))


def test_slow_mode_fixed_points(slow_f05):
    kappa = 0.95 * slow_f05.kappa_B
    c = slow_f05.b_B * (kappa - slow_f05.kappa_B)
    for z in (slow_f05.stable_z(kappa), slow_f05.saddle_z(kappa)):
        assert slow_f05.a_B * z * z - c == pytest.approx(0.0, abs=1e-14)
    # stable where the drift decreases
    assert 2.0 * slow_f05.a_B * slow_f05.stable_z(kappa) < 0
    with pytest.raises(ParameterError):
        slow_f05.z_st(1.1 * slow_f05.kappa_B)


def test_noiseless_trajectory_stays_at_a_stable_state(damped_f1):
    state = bifurcation.classical_fixed_points(damped_f1).stable[0]
    traj = bifurcation.simulate_2d(damped_f1, 0.5, seed=0, tau_max=10.0, dt=0.01, q0=state.Q, p0=state.P,
                                   record_every=100, noise=False)
    assert traj.Q[-1, 0] == pytest.approx(state.Q, abs=1e-9)
    assert traj.P[-1, 0] == pytest.approx(state.P, abs=1e-9)


def test_simulate_2d_is_seeded(damped_f1):
    first = bifurcation.simulate_2d(damped_f1, 0.5, seed=4, tau_max=1.0, dt=0.01, q0=0.0, p0=0.0, n_traj=5)
    second = bifurcation.simulate_2d(damped_f1, 0.5, seed=4, tau_max=1.0, dt=0.01, q0=0.0, p0=0.0, n_traj=5)
    np.testing.assert_array_equal(first.Q, second.Q)
    assert first.Q.shape == (101, 5)


def test_step_size_guard(damped_f1):
    with pytest.raises(ParameterError):
        bifurcation.simulate_2d(damped_f1, 2.0, seed=0, tau_max=1.0, dt=0.01, q0=0.0, p0=0.0)


def test_basins(damped_f1):
    states = bifurcation.classical_fixed_points(damped_f1)
    q = [s.Q for s in states.stable] + [0.0]
    p = [s.P for s in states.stable] + [0.0]
    labels = bifurcation.basin_of(damped_f1, 0.5, q, p, states)
    np.testing.assert_array_equal(labels, [0, 1, 2, Basin.ORIGIN])


def test_separatrices(damped_f1):
    branches = bifurcation.separatrices(damped_f1, 0.5, n_points=200)
    assert len(branches) == 6
    assert all(b.shape[0] == 2 for b in branches)
    assert bifurcation.separatrices(damped_f1, 1.2) == []


def test_kramers_exponent(slow_f05):
    m = ModelParams(f=0.5, lam=0.004, kappa=0.5)
    assert bifurcation.kramers_exponent(slow_f05, m, slow_f05.kappa_B) == 0.0
    kappa = 0.9 * slow_f05.kappa_B
    cold = bifurcation.kramers_exponent(slow_f05, m, kappa)
    assert cold < 0
    assert bifurcation.kramers_exponent(slow_f05, m.replace(nbar=1.0), kappa) == pytest.approx(cold / 3.0)
    closer = bifurcation.kramers_exponent(slow_f05, m, 0.95 * slow_f05.kappa_B)
    assert closer / cold == pytest.approx(0.5 ** 1.5)


def test_kramers_barrier_ratio(slow_f05):
    m = ModelParams(f=0.5, lam=0.004, kappa=0.5)
    comparison = bifurcation.kramers_barrier_ratio(slow_f05, m, 0.9 * slow_f05.kappa_B)
    assert comparison.barrier_over_noise > 0
    assert math.isfinite(comparison.ratio)


def test_slow_mode_window():
    bd = toy_reduction()
    m = ModelParams(f=0.5, lam=0.004, kappa=0.9)
    with pytest.raises(ParameterError):
        bifurcation.simulate_slow_mode(bd, m, 1.0, seed=0, n_traj=10)
    with pytest.raises(ParameterError):
        bifurcation.simulate_slow_mode(bd, m, 0.7, seed=0, n_traj=10)


def test_mfpt_quadrature_arguments():
    with pytest.raises(ParameterError):
        bifurcation.mfpt_quadrature(1.0, 1.0, -0.1, 0.02)
    with pytest.raises(ParameterError):
        bifurcation.mfpt_quadrature(-1.0, 1.0, 0.1, 0.02)


def test_mfpt_grows_with_the_barrier():
    near = bifurcation.mfpt_quadrature(-1.0, 1.0, -0.05, 0.02)
    far = bifurcation.mfpt_quadrature(-1.0, 1.0, -0.1, 0.02)
    assert far > near > 0


def test_slow_mode_simulation_is_seeded():
    bd = toy_reduction()
    m = ModelParams(f=0.5, lam=0.004, kappa=0.9)
    runs = [bifurcation.simulate_slow_mode(bd, m, 0.85, seed=11, n_traj=50, noise_intensity=0.5, threads=t)
            for t in (1, 2)]
    assert runs[0].mfpt == runs[1].mfpt
    assert runs[0].complete


@pytest.mark.slow
def test_slow_mode_mfpt_matches_quadrature():
    bd = toy_reduction()
    m = ModelParams(f=0.5, lam=0.004, kappa=0.9)
    stats = bifurcation.simulate_slow_mode(bd, m, 0.9, seed=1, n_traj=2000, dt=0.01, noise_intensity=0.02)
    exact = bifurcation.mfpt_quadrature(-1.0, 1.0, -0.1, 0.02)
    assert exact == pytest.approx(674.0, rel=0.05)
    assert stats.complete
    assert stats.mfpt == pytest.approx(exact, rel=0.1)


def test_escape_time_scaling():
    delta_kappas = -np.linspace(0.05, 0.15, 7)
    mfpts = [bifurcation.mfpt_quadrature(-1.0, 1.0, dk, 2e-3) for dk in delta_kappas]
    scaling = bifurcation.fit_escape_scaling(delta_kappas, mfpts)
    assert scaling.power == pytest.approx(1.5, abs=0.1)
    assert scaling.slope > 0
    assert scaling.r2 > 0.99


def test_kramers_exponent_value():
    m = ModelParams(f=0.5, lam=0.01, kappa=0.9)
    assert bifurcation.kramers_exponent(toy_reduction(), m, 0.9) == pytest.approx(-2.1082, abs=1e-4)


def test_mfpt_does_not_depend_on_the_boundary():
    near = bifurcation.mfpt_quadrature(-1.0, 1.0, -0.1, 0.02)
    far = bifurcation.mfpt_quadrature(-1.0, 1.0, -0.1, 0.02, boundary_factor=6.0)
    assert far == pytest.approx(near, rel=0.01)


def test_escape_ensemble_needs_period_three_states(damped_f1):
    with pytest.raises(ParameterError):
        bifurcation.escape_ensemble_2d(damped_f1, 1.2, seed=0, n_traj=5, tau_max=1.0)


@pytest.mark.slow
def test_escape_ensemble_with_strong_noise():
    m = ModelParams(f=1.0, lam=1.0, kappa=0.5)
    stats = bifurcation.escape_ensemble_2d(m, 0.5, seed=2, n_traj=10, tau_max=100.0)
    assert stats.escaped > 0
    assert stats.mfpt > 0
    assert stats.params['dt'] == bifurcation.max_step(0.5)
