"""
Classical dissipative dynamics in the rotating frame.

dQ/dtau = dg/dP - kappa Q + xi_Q, dP/dtau = -dg/dQ - kappa P + xi_P with
<xi_Q xi_Q> = <xi_P xi_P> = lambda kappa (2 nbar + 1) delta(tau - tau').
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid
from scipy.optimize import curve_fit

from tripling.errors import NumericalError, ParameterError
from tripling.model import ModelParams, PhasePoint, g_hessian, vector_field_qp
from tripling.utils import TWO_PI_OVER_3, linear_fit

logger = logging.getLogger(__name__)

NORMAL_FORM_WINDOW = 0.2
BOUNDARY_FACTOR = 3.0
BASIN_TIME = 50.0
BASIN_STEP = 0.02
CHUNK = 1000
MAX_DT = 0.01


class Basin:
    ORIGIN = 3


@dataclass(frozen=True)
class StationaryState:
    x: complex
    eigenvalues: Tuple[complex, complex]

    @property
    def Q(self) -> float:
        return self.x.real

    @property
    def P(self) -> float:
        return self.x.imag

    @property
    def stable(self) -> bool:
        return all(e.real < 0 for e in self.eigenvalues)

    @property
    def saddle(self) -> bool:
        re = sorted(e.real for e in self.eigenvalues)
        return abs(self.eigenvalues[0].imag) < 1e-12 and re[0] < 0 < re[1]


@dataclass(frozen=True)
class StationaryStateSet:
    origin: StationaryState
    stable: Tuple[StationaryState, ...]
    saddles: Tuple[StationaryState, ...]
    kappa: float
    f: float
    sign_delta: int
    r_plus: float = math.nan
    r_minus: float = math.nan

    @property
    def period_three(self) -> bool:
        return len(self.stable) == 3


@dataclass(frozen=True)
class BifurcationPoint:
    kappa_B: float
    f_B: float
    r_B: float
    ftilde_sq: float


@dataclass(frozen=True)
class BifurcationData:
    """
    Normal form dz/dtau = a_B z^2 - b_B (kappa - kappa_B) + xi_z of the slow variable
    z = dQ cos phi_B + dP sin phi_B near x_B.
    """
    kappa_B: float
    f: float
    x_B: complex
    phi_B: float
    a_B: float
    b_B: float
    k_ad: float
    r_B: float
    sign_delta: int = 1

    def z_st(self, kappa: float) -> float:
        ratio = self.b_B * (kappa - self.kappa_B) / self.a_B
        if ratio < 0:
            raise ParameterError(f"no metastable state at kappa={kappa} >= kappa_B={self.kappa_B}")
        return math.sqrt(ratio)

    def stable_z(self, kappa: float) -> float:
        return -self.z_st(kappa) * math.copysign(1.0, self.a_B)

    def saddle_z(self, kappa: float) -> float:
        return self.z_st(kappa) * math.copysign(1.0, self.a_B)


@dataclass(frozen=True)
class Trajectory:
    tau: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    seed: int


@dataclass(frozen=True)
class EscapeStatistics:
    n_traj: int
    mfpt: float
    stderr: float
    seed: int
    escaped: int
    kappa: float
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.escaped == self.n_traj


@dataclass(frozen=True)
class EscapeScaling:
    power: float
    power_err: float
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class KramersComparison:
    exponent: float
    barrier_over_noise: float
    ratio: float


'''
STATIONARY STATES
'''


def stationary_radii(f: float, kappa: float, sign_delta: int = 1) -> Optional[Tuple[float, float]]:
    """
    :return: (r_plus, r_minus), or None when there are no period-three states
    """
    inner = f * f * sign_delta + f ** 4 / 4.0 - kappa * kappa
    if f <= 0 or inner < 0:
        return None
    centre = sign_delta + f * f / 2.0
    root = math.sqrt(inner)
    if centre - root <= 0:
        return None
    return math.sqrt(centre + root), math.sqrt(centre - root)


def _triangle(f: float, r: float, kappa: float, sign_delta: int) -> Tuple[complex, ...]:
    """States of radius r whose phases satisfy exp(3i phi) = f r / (r^2 - sign_delta - i kappa)."""
    phi = np.angle(f * r / (r * r - sign_delta - 1j * kappa)) / 3.0
    return tuple(r * np.exp(1j * (phi + TWO_PI_OVER_3 * j)) for j in range(3))


def jacobian(x: complex, m: ModelParams, kappa: float) -> np.ndarray:
    """Linearisation of the noiseless flow at x."""
    g_qq, g_pp, g_qp = g_hessian(PhasePoint(x.real, x.imag), m)
    return np.array([[g_qp - kappa, g_pp],
                     [-g_qq, -g_qp - kappa]])


def _state(x: complex, m: ModelParams, kappa: float) -> StationaryState:
    eig = np.linalg.eigvals(jacobian(complex(x), m, kappa))
    return StationaryState(x=complex(x), eigenvalues=(complex(eig[0]), complex(eig[1])))


def classical_fixed_points(m: ModelParams, kappa: Optional[float] = None) -> StationaryStateSet:
    """
    Zero-amplitude state plus, below the bifurcation, three stable period-three states
    of radius r_plus and three saddles of radius r_minus.
    """
    kappa = m.kappa if kappa is None else kappa
    if kappa < 0:
        raise ParameterError(f"kappa must be >= 0, got {kappa}")
    origin = _state(0j, m, kappa)
    radii = stationary_radii(m.f, kappa, m.sign_delta)
    if radii is None:
        logger.info(f"kappa={kappa} beyond the bifurcation for f={m.f}: only the zero-amplitude state")
        return StationaryStateSet(origin=origin, stable=(), saddles=(), kappa=kappa, f=m.f, sign_delta=m.sign_delta)
    r_plus, r_minus = radii
    stable = tuple(_state(x, m, kappa) for x in _triangle(m.f, r_plus, kappa, m.sign_delta))
    saddles = tuple(_state(x, m, kappa) for x in _triangle(m.f, r_minus, kappa, m.sign_delta))
    return StationaryStateSet(origin=origin, stable=stable, saddles=saddles, kappa=kappa, f=m.f,
                              sign_delta=m.sign_delta, r_plus=r_plus, r_minus=r_minus)


'''
BIFURCATION
'''


def kappa_bifurcation(f: float, sign_delta: int = 1) -> float:
    value = f * f * sign_delta + f ** 4 / 4.0
    return math.sqrt(value) if value > 0 else math.nan


def f_bifurcation(kappa: float, sign_delta: int = 1) -> float:
    return math.sqrt(2.0 * (math.sqrt(1.0 + kappa * kappa) - sign_delta))


def bifurcation_point(m: ModelParams) -> BifurcationPoint:
    kappa_B = kappa_bifurcation(m.f, m.sign_delta)
    f_B = f_bifurcation(kappa_B, m.sign_delta) if math.isfinite(kappa_B) else math.nan
    r_B = math.sqrt(m.sign_delta + m.f ** 2 / 2.0) if m.sign_delta + m.f ** 2 / 2.0 > 0 else math.nan
    ftilde_sq = m.f ** 2 / kappa_B if kappa_B > 0 else math.nan
    return BifurcationPoint(kappa_B=kappa_B, f_B=f_B, r_B=r_B, ftilde_sq=ftilde_sq)


def bifurcation_curve(kappas: Sequence[float], sign_delta: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    :return: 1/kappa and the scaled threshold ftilde_B^2 = f_B^2/kappa
    """
    kappas = np.asarray(kappas, dtype=float)
    f_sq = 2.0 * (np.sqrt(1.0 + kappas ** 2) - sign_delta)
    return 1.0 / kappas, f_sq / kappas


def kappa_offset_from_field(m: ModelParams, f: float) -> float:
    """
    kappa - kappa_B at fixed kappa = m.kappa for a drive f close to f_B(kappa), to first
    order; positive below the threshold.
    """
    f_B = f_bifurcation(m.kappa, m.sign_delta)
    slope = m.kappa / (math.sqrt(1.0 + m.kappa ** 2) * f_B)
    return -(f - f_B) / slope


def slow_mode_reduction(m: ModelParams) -> BifurcationData:
    """
    Normal-form coefficients at the saddle-node bifurcation. The sign of the slow variable
    is fixed by b_B = Re X_B > 0; the coefficients are checked to agree for the three states.
    """
    s = m.sign_delta
    f = m.f
    kappa_B = kappa_bifurcation(f, s)
    if not math.isfinite(kappa_B) or kappa_B <= 0:
        raise ParameterError(f"no bifurcation point for f={f}, sign_delta={s}")
    r_B = math.sqrt(s + f * f / 2.0)
    k_ad = -(s + f * f) / kappa_B
    reductions = []
    for x_B in _triangle(f, r_B, kappa_B, s):
        rot = (x_B * x_B - 2.0 * f * x_B.conjugate()) / (2.0 * r_B * r_B - s + 1j * kappa_B)
        phi = float(np.angle(rot)) / 2.0
        X = x_B * np.exp(-1j * phi)
        if X.real < 0:
            phi += math.pi
            X = -X
        e3 = np.exp(3j * phi)
        a = ((1.0 + 1j * k_ad) ** 2 * (X.conjugate() + f * e3)).imag + 2.0 * (1.0 + k_ad ** 2) * X.imag
        reductions.append((complex(x_B), phi, float(a), float(X.real)))
    a_values = [r[2] for r in reductions]
    b_values = [r[3] for r in reductions]
    if max(a_values) - min(a_values) > 1e-8 or max(b_values) - min(b_values) > 1e-8:
        raise NumericalError(f"normal form differs between the three states: a={a_values}, b={b_values}")
    x_B, phi_B, a_B, b_B = reductions[0]
    logger.debug(f"slow mode at kappa_B={kappa_B}: a_B={a_B}, b_B={b_B}, k_ad={k_ad}")
    return BifurcationData(kappa_B=kappa_B, f=f, x_B=x_B, phi_B=phi_B, a_B=a_B, b_B=b_B, k_ad=k_ad,
                           r_B=r_B, sign_delta=s)


'''
2D DYNAMICS
'''


def drift_qp(q, p, m: ModelParams, kappa: float):
    dq, dp = vector_field_qp(q, p, m)
    return dq - kappa * q, dp - kappa * p


def _rk4(q, p, m: ModelParams, kappa: float, h: float, steps: int):
    for _ in range(steps):
        k1 = drift_qp(q, p, m, kappa)
        k2 = drift_qp(q + 0.5 * h * k1[0], p + 0.5 * h * k1[1], m, kappa)
        k3 = drift_qp(q + 0.5 * h * k2[0], p + 0.5 * h * k2[1], m, kappa)
        k4 = drift_qp(q + h * k3[0], p + h * k3[1], m, kappa)
        q = q + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        p = p + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return q, p


def max_step(kappa: float) -> float:
    return MAX_DT / max(1.0, kappa)


def simulate_2d(m: ModelParams, kappa: float, seed: int, tau_max: float, dt: float,
                q0, p0, n_traj: int = 1, record_every: int = 1, noise: bool = True) -> Trajectory:
    """
    Euler-Maruyama integration of the Langevin equations for an ensemble started at (q0, p0).

    :param record_every: keep every record_every-th step
    :return: Q and P of shape (n_records, n_traj)
    """
    if dt > max_step(kappa) * (1.0 + 1e-12):
        raise ParameterError(f"dt={dt} exceeds {max_step(kappa)} for kappa={kappa}")
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(m.lam * kappa * (2.0 * m.nbar + 1.0) * dt) if noise else 0.0
    q = np.full(n_traj, 0.0) + q0
    p = np.full(n_traj, 0.0) + p0
    steps = int(round(tau_max / dt))
    qs, ps, taus = [q.copy()], [p.copy()], [0.0]
    for i in range(1, steps + 1):
        dq, dp = drift_qp(q, p, m, kappa)
        q = q + dq * dt
        p = p + dp * dt
        if sigma:
            q = q + sigma * rng.standard_normal(n_traj)
            p = p + sigma * rng.standard_normal(n_traj)
        if i % record_every == 0:
            qs.append(q.copy())
            ps.append(p.copy())
            taus.append(i * dt)
    return Trajectory(tau=np.array(taus), Q=np.array(qs), P=np.array(ps), seed=seed)


def basin_of(m: ModelParams, kappa: float, q, p, states: Optional[StationaryStateSet] = None,
             tau: Optional[float] = None) -> np.ndarray:
    """
    Attractor reached by the noiseless flow: the index 0..2 of a period-three state or
    Basin.ORIGIN.
    """
    states = states if states is not None else classical_fixed_points(m, kappa)
    tau = tau if tau is not None else BASIN_TIME / max(kappa, 1e-3)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    steps = int(math.ceil(tau / BASIN_STEP))
    qf, pf = _rk4(q, p, m, kappa, tau / steps, steps)
    attractors = [s.x for s in states.stable] + [states.origin.x]
    labels = list(range(len(states.stable))) + [Basin.ORIGIN]
    distance = np.array([np.abs(qf + 1j * pf - x) for x in attractors])
    return np.array(labels)[np.argmin(distance, axis=0)]


def separatrices(m: ModelParams, kappa: float, tau_max: Optional[float] = None,
                 n_points: int = 2000) -> List[np.ndarray]:
    """
    Stable manifolds of the three saddles, traced in reverse time from both sides of
    each saddle. Each branch is an array of shape (2, n) of (Q, P).
    """
    states = classical_fixed_points(m, kappa)
    if not states.period_three:
        return []
    tau_max = tau_max if tau_max is not None else 20.0 / max(kappa, 1e-2)
    r_stop = 3.0 * states.r_plus

    def backward(_, y):
        dq, dp = drift_qp(y[0], y[1], m, kappa)
        return [-dq, -dp]

    def escaped(_, y):
        return y[0] ** 2 + y[1] ** 2 - r_stop ** 2
    escaped.terminal = True

    branches = []
    for saddle in states.saddles:
        values, vectors = np.linalg.eig(jacobian(saddle.x, m, kappa))
        direction = np.real(vectors[:, int(np.argmin(values.real))])
        for sign in (1.0, -1.0):
            start = [saddle.Q + sign * 1e-6 * direction[0], saddle.P + sign * 1e-6 * direction[1]]
            sol = solve_ivp(backward, (0.0, tau_max), start, method='DOP853', rtol=1e-9, atol=1e-12,
                            events=escaped, t_eval=np.linspace(0.0, tau_max, n_points))
            branches.append(sol.y)
    return branches


def escape_ensemble_2d(m: ModelParams, kappa: float, seed: int, n_traj: int, tau_max: float,
                       dt: Optional[float] = None, check_interval: float = 1.0) -> EscapeStatistics:
    """
    First exit of the noisy 2D dynamics from the basin of the period-three state 0.
    """
    states = classical_fixed_points(m, kappa)
    if not states.period_three:
        raise ParameterError(f"no period-three states at kappa={kappa}, f={m.f}")
    dt = dt if dt is not None else max_step(kappa)
    if dt > max_step(kappa) * (1.0 + 1e-12):
        raise ParameterError(f"dt={dt} exceeds {max_step(kappa)} for kappa={kappa}")
    home = states.stable[0].x
    safe = 0.5 * min(abs(home - s.x) for s in states.saddles)
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(m.lam * kappa * (2.0 * m.nbar + 1.0) * dt)
    q = np.full(n_traj, home.real)
    p = np.full(n_traj, home.imag)
    exit_time = np.full(n_traj, np.nan)
    active = np.ones(n_traj, dtype=bool)
    per_check = max(1, int(round(check_interval / dt)))
    steps = int(round(tau_max / dt))
    for i in range(1, steps + 1):
        idx = np.nonzero(active)[0]
        if not len(idx):
            break
        dq, dp = drift_qp(q[idx], p[idx], m, kappa)
        q[idx] += dq * dt + sigma * rng.standard_normal(len(idx))
        p[idx] += dp * dt + sigma * rng.standard_normal(len(idx))
        if i % per_check:
            continue
        far = idx[np.abs(q[idx] + 1j * p[idx] - home) > safe]
        if len(far):
            left = far[basin_of(m, kappa, q[far], p[far], states) != 0]
            exit_time[left] = i * dt
            active[left] = False
    return _statistics(exit_time, seed, kappa, dict(f=m.f, lam=m.lam, nbar=m.nbar, dt=dt))


def _statistics(exit_time: np.ndarray, seed: int, kappa: float, params: Dict[str, float]) -> EscapeStatistics:
    done = exit_time[np.isfinite(exit_time)]
    n = len(exit_time)
    if len(done) < n:
        logger.warning(f"{n - len(done)} of {n} trajectories did not escape; the mean is biased low")
    mfpt = float(done.mean()) if len(done) else math.nan
    stderr = float(done.std(ddof=1) / math.sqrt(len(done))) if len(done) > 1 else math.nan
    return EscapeStatistics(n_traj=n, mfpt=mfpt, stderr=stderr, seed=seed, escaped=len(done), kappa=kappa,
                            params=params)


'''
SLOW MODE
'''


def _check_window(bd: BifurcationData, kappa: float):
    if kappa >= bd.kappa_B:
        raise ParameterError(f"kappa={kappa} >= kappa_B={bd.kappa_B}: no metastable state")
    if abs(kappa - bd.kappa_B) > NORMAL_FORM_WINDOW * bd.kappa_B:
        raise ParameterError(f"|kappa - kappa_B| exceeds {NORMAL_FORM_WINDOW} kappa_B")


def _slow_chunk(a: float, c: float, z0: float, z_exit: float, sigma: float, dt: float,
                steps: int, n: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    z = np.full(n, z0)
    exit_time = np.full(n, np.nan)
    active = np.arange(n)
    side = math.copysign(1.0, z_exit)
    for i in range(1, steps + 1):
        z[active] += (a * z[active] ** 2 - c) * dt + sigma * rng.standard_normal(len(active))
        out = side * z[active] >= abs(z_exit)
        if np.any(out):
            exit_time[active[out]] = i * dt
            active = active[~out]
            if not len(active):
                break
    return exit_time


def simulate_slow_mode(bd: BifurcationData, m: ModelParams, kappa: float, seed: int, n_traj: int = 1000,
                       dt: float = MAX_DT, tau_max: float = 1e6, noise_intensity: Optional[float] = None,
                       boundary_factor: float = BOUNDARY_FACTOR, threads: int = 1) -> EscapeStatistics:
    """
    First passage of dz = (a_B z^2 - b_B (kappa - kappa_B)) dtau + xi_z from the stable point
    -z_st sgn a_B to boundary_factor * z_st sgn a_B, past the saddle.

    Trajectories run in chunks with independent child seeds of seed, so the result does not
    depend on threads.

    :param noise_intensity: correlator of xi_z, lambda kappa (2 nbar + 1) by default
    """
    _check_window(bd, kappa)
    if dt > max_step(kappa) * (1.0 + 1e-12):
        raise ParameterError(f"dt={dt} exceeds {max_step(kappa)} for kappa={kappa}")
    intensity = noise_intensity if noise_intensity is not None else m.lam * kappa * (2.0 * m.nbar + 1.0)
    sigma = math.sqrt(intensity * dt)
    c = bd.b_B * (kappa - bd.kappa_B)
    z0 = bd.stable_z(kappa)
    z_exit = boundary_factor * bd.saddle_z(kappa)
    steps = int(round(tau_max / dt))
    sizes = [min(CHUNK, n_traj - start) for start in range(0, n_traj, CHUNK)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job):
        size, child = job
        return _slow_chunk(bd.a_B, c, z0, z_exit, sigma, dt, steps, size, child)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, zip(sizes, children)))
    else:
        parts = [run(job) for job in zip(sizes, children)]
    return _statistics(np.concatenate(parts), seed, kappa,
                       dict(a_B=bd.a_B, b_B=bd.b_B, kappa_B=bd.kappa_B, noise=intensity, dt=dt))


def mfpt_quadrature(a: float, b: float, delta_kappa: float, noise_intensity: float,
                    boundary_factor: float = BOUNDARY_FACTOR, n_grid: int = 20001) -> float:
    """
    Mean first-passage time of the slow mode from its stable point to the absorbing boundary
    past the saddle, from the double-integral solution of the backward equation with
    diffusion coefficient noise_intensity/2.
    """
    c = abs(b * delta_kappa)
    if a * b >= 0 or delta_kappa >= 0:
        raise ParameterError("needs a*b < 0 and kappa < kappa_B")
    # in u = -sgn(a) z the drift is c - |a| u^2: stable at +u_st, saddle at -u_st
    a_abs = abs(a)
    u_st = math.sqrt(c / a_abs)
    diffusion = noise_intensity / 2.0

    def potential(u):
        return a_abs * u ** 3 / 3.0 - c * u

    u_min = potential(u_st)
    u_top = u_st
    while potential(u_top) - u_min < 40.0 * diffusion:
        u_top += u_st
    u = np.linspace(-boundary_factor * u_st, u_top, n_grid)
    inner = np.exp(-(potential(u) - u_min) / diffusion)
    tail = trapezoid(inner, u) - np.concatenate(([0.0], cumulative_trapezoid(inner, u)))
    outer = np.exp((potential(u) - u_min) / diffusion) * tail
    start = int(np.searchsorted(u, u_st))
    return float(trapezoid(outer[:start + 1], u[:start + 1]) / diffusion)


def kramers_exponent(bd: BifurcationData, m: ModelParams, kappa: float) -> float:
    """ln W_esc = -(2/3)|b_B (kappa - kappa_B)|^3/2 / [|a_B|^1/2 kappa_B lambda (2 nbar + 1)]"""
    return -(2.0 / 3.0) * abs(bd.b_B * (kappa - bd.kappa_B)) ** 1.5 \
        / (math.sqrt(abs(bd.a_B)) * bd.kappa_B * m.lam * (2.0 * m.nbar + 1.0))


def kramers_barrier_ratio(bd: BifurcationData, m: ModelParams, kappa: float) -> KramersComparison:
    """
    Barrier over diffusion of the cubic slow-mode potential with the noise of the
    Langevin equations, against kramers_exponent().
    """
    diffusion = m.lam * kappa * (2.0 * m.nbar + 1.0) / 2.0
    barrier = (4.0 / 3.0) * abs(bd.b_B * (kappa - bd.kappa_B)) ** 1.5 / math.sqrt(abs(bd.a_B))
    exponent = kramers_exponent(bd, m, kappa)
    ratio = (barrier / diffusion) / abs(exponent) if exponent else math.nan
    return KramersComparison(exponent=exponent, barrier_over_noise=barrier / diffusion, ratio=ratio)


def fit_escape_scaling(delta_kappas: Sequence[float], mfpts: Sequence[float]) -> EscapeScaling:
    """
    Fit ln(MFPT) = c0 + c1 |kappa - kappa_B|^p for p, and the straight line in |kappa - kappa_B|^3/2.
    """
    x = np.abs(np.asarray(delta_kappas, dtype=float))
    y = np.log(np.asarray(mfpts, dtype=float))

    def model(xx, c0, c1, power):
        return c0 + c1 * xx ** power

    slope, intercept, r2 = linear_fit(x ** 1.5, y)
    popt, pcov = curve_fit(model, x, y, p0=(intercept, slope, 1.5), maxfev=20000)
    power_err = float(np.sqrt(pcov[2, 2])) if np.isfinite(pcov[2, 2]) else math.nan
    return EscapeScaling(power=float(popt[2]), power_err=power_err, slope=slope, intercept=intercept, r2=r2)
