"""
Classical intrawell orbits of g and the quantities derived from them: frequency,
Fourier components of a = (Q + iP)/sqrt(2 lambda), the imaginary time tau_inf to the
nearest singularity, the imaginary tunnelling time and the tunnelling action.

All orbit work assumes the ν=0 well at (Q0, 0). The complex-time formulas below are
written for positive detuning.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from tripling.errors import NumericalError, ParameterError
from tripling.model import ModelParams, g_qp, require_wells, vector_field_qp, well_geometry
from tripling.utils import g_from_delta

logger = logging.getLogger(__name__)

ORBIT_TOL = 1e-12
N_SAMPLES = 4096
QUAD_TOL = 1e-9
ASYMPTOTIC_MIN_EXPONENT = 3.0

PREFACTOR_DOWN = (1.5 ** (1.0 / 6.0)) * gamma_fn(1.0 / 3.0) / (2.0 * math.pi)
PREFACTOR_UP = ((2.0 / 3.0) ** (1.0 / 6.0)) * gamma_fn(2.0 / 3.0) / (2.0 * math.pi)


class OrbitClass:
    ELLIPTIC = 'elliptic'
    HORSESHOE = 'horseshoe'


@dataclass(frozen=True)
class TurningPoints:
    Q_min: float
    Q_max: float
    B_roots: Tuple[float, float, float]
    orbit_class: str

    @property
    def Q_fin(self) -> float:
        return self.B_roots[1]

    @property
    def Q_B(self) -> float:
        return self.B_roots[2]


@dataclass(frozen=True)
class ClassicalOrbit:
    """
    One period of the orbit, sampled on a uniform time grid (endpoint excluded).
    """
    g: float
    omega: float
    tau: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    turning: TurningPoints
    closure: float = 0.0
    energy_drift: float = 0.0

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class FourierTable:
    g: float
    lam: float
    m_range: np.ndarray
    a_m: np.ndarray
    coefficients: np.ndarray
    mean_r2: float

    def coefficient(self, mm: int) -> complex:
        n = len(self.coefficients)
        if 2 * abs(mm) + 1 > n:
            raise ParameterError(f"|m|={abs(mm)} aliases with {n} samples")
        return complex(self.coefficients[mm % n])

    def parseval_residual(self) -> float:
        total = 2.0 * self.lam * float(np.sum(np.abs(self.coefficients) ** 2))
        return abs(total - self.mean_r2) / self.mean_r2


@dataclass(frozen=True)
class TunnelingData:
    g: float
    tau_inf: float
    tau_tun: float
    S_tun: float
    closest_singularity_ok: bool
    quadrature_ok: bool = True


@dataclass(frozen=True)
class OrbitMoments:
    """Area enclosed by the orbit and the integral of Q^2 + P^2 over it."""
    area: float
    r2_integral: float


'''
POLYNOMIALS
'''


def _axis_quartic(m: ModelParams, g: float) -> np.ndarray:
    """Coefficients of g(Q, 0) - g."""
    return np.array([0.25, -m.f / 3.0, -0.5 * m.sign_delta, 0.0, 0.25 - g])


def _b_cubic(m: ModelParams, g: float) -> np.ndarray:
    f = m.f
    return np.array([16.0 * f / 3.0, 4.0 * f * f, -4.0 * f * m.sign_delta, 4.0 * g])


def _a_poly(m: ModelParams, q):
    return m.sign_delta - q * q - 2.0 * m.f * q


def _deflate(coeffs: np.ndarray, root: float) -> np.ndarray:
    quotient, _ = np.polydiv(coeffs, np.array([1.0, -root]))
    return quotient


def _check_intrawell(m: ModelParams, g: float, allow_saddle: bool = False):
    fp = require_wells(m)
    upper_ok = g <= fp.g_s if allow_saddle else g < fp.g_s
    if not (fp.g_min < g and upper_ok):
        raise ParameterError(f"g={g} outside the well ({fp.g_min}, {fp.g_s}) for f={m.f}")
    return fp


def _positive_detuning(m: ModelParams):
    if m.sign_delta != 1:
        raise ParameterError("complex-time orbit quantities are implemented for positive detuning only")


'''
TURNING POINTS
'''


def _b_roots(m: ModelParams, g: float) -> Tuple[float, float, float]:
    roots = np.roots(_b_cubic(m, g))
    scale = max(1.0, float(np.max(np.abs(roots))))
    if np.any(np.abs(roots.imag) > 1e-6 * scale):
        raise NumericalError(f"B(Q, g={g}) does not have three real roots: {roots}")
    return tuple(sorted(float(r) for r in roots.real))


def turning_points(m: ModelParams, g: float) -> TurningPoints:
    """
    Roots of g(Q, 0) = g on either side of Q0, the three roots of B(Q, g) and the orbit shape.
    """
    fp = _check_intrawell(m, g)
    quartic = _axis_quartic(m, g)

    def h(q):
        return np.polyval(quartic, q)

    lower = max(0.0, fp.Qs)
    upper = fp.Q0 + 1.0
    while h(upper) <= 0:
        upper = 2.0 * upper
    try:
        q_min = brentq(h, lower, fp.Q0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        q_max = brentq(h, fp.Q0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except ValueError as e:
        raise NumericalError(f"turning points of g={g} not bracketed: {e}") from e
    b_roots = _b_roots(m, g)
    geometry = well_geometry(m)
    orbit_class = OrbitClass.HORSESHOE if g > geometry.g_cr else OrbitClass.ELLIPTIC
    return TurningPoints(Q_min=q_min, Q_max=q_max, B_roots=b_roots, orbit_class=orbit_class)


'''
ORBITS
'''


def orbit_solve(m: ModelParams, g: float, tol: float = ORBIT_TOL, n_samples: int = N_SAMPLES) -> ClassicalOrbit:
    """
    Integrate one period clockwise from (Q_max, 0).

    The orbit is symmetric under P -> -P with time reversal, so the period is twice the
    time to the first upward crossing of P = 0 (at Q_min). The full period is then
    integrated again on the uniform sampling grid.
    """
    tp = turning_points(m, g)

    def rhs(_, y):
        dq, dp = vector_field_qp(y[0], y[1], m)
        return [dq, dp]

    def section(_, y):
        return y[1]

    section.terminal = True
    section.direction = 1.0

    y0 = [tp.Q_max, 0.0]
    half = solve_ivp(rhs, (0.0, 1e4), y0, method='DOP853', rtol=tol, atol=tol, events=section)
    if half.status != 1 or not len(half.t_events[0]):
        raise NumericalError(f"no return to P=0 for g={g} (f={m.f}): {half.message}")
    t_half = float(half.t_events[0][0])
    q_cross = float(half.y_events[0][0][0])
    if abs(q_cross - tp.Q_min) > 1e-6 * max(1.0, abs(tp.Q_min)):
        raise NumericalError(f"half-period crossing at Q={q_cross} misses Q_min={tp.Q_min} for g={g}")
    period = 2.0 * t_half

    tau = np.arange(n_samples) * period / n_samples
    full = solve_ivp(rhs, (0.0, period), y0, method='DOP853', rtol=tol, atol=tol,
                     t_eval=np.append(tau, period))
    if full.status != 0:
        raise NumericalError(f"orbit integration failed for g={g}: {full.message}")
    q, p = full.y[0], full.y[1]
    closure = float(math.hypot(q[-1] - q[0], p[-1] - p[0]))
    drift = float(np.max(np.abs(g_qp(q, p, m) - g)))
    if closure > 1e-8 or drift > 1e-9:
        logger.warning(f"orbit g={g}: closure {closure:.2e}, energy drift {drift:.2e}")
    return ClassicalOrbit(g=g, omega=2.0 * math.pi / period, tau=tau, Q=q[:-1], P=p[:-1], turning=tp,
                          closure=closure, energy_drift=drift)


def orbit_moments(orbit: ClassicalOrbit, m: ModelParams) -> OrbitMoments:
    """
    Green's theorem on the periodic samples (spectrally accurate trapezoid rule).
    The orbit runs clockwise.
    """
    q, p = orbit.Q, orbit.P
    dq, dp = vector_field_qp(q, p, m)
    period = orbit.period
    area = 0.5 * period * float(np.mean(p * dq - q * dp))
    r2_integral = -period * float(np.mean((q ** 3 / 3.0 + q * p * p) * dp))
    return OrbitMoments(area=area, r2_integral=r2_integral)


def action(m: ModelParams, g: float, tol: float = ORBIT_TOL) -> float:
    """I(g) = (1/2 pi) * enclosed area."""
    orbit = orbit_solve(m, g, tol=tol)
    return orbit_moments(orbit, m).area / (2.0 * math.pi)


def bohr_sommerfeld(m: ModelParams, lam: Optional[float] = None, top: float = 0.995,
                    table_points: int = 60) -> np.ndarray:
    """
    Levels g_n solving I(g_n) = lambda (n + 1/2) up to Δg = top.

    An interpolated table of I(g) gives the starting values; each level is then refined by
    Newton steps using dI/dg = 1/omega(g).
    """
    fp = require_wells(m)
    lam = m.lam if lam is None else lam
    dgs = 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, table_points + 2)[1:-1])) * top
    gs = np.array([g_from_delta(d, fp.g_min, fp.g_s) for d in dgs])
    actions = np.array([action(m, g, tol=1e-10) for g in gs])
    gs = np.concatenate(([fp.g_min], gs))
    actions = np.concatenate(([0.0], actions))
    inverse = PchipInterpolator(actions, gs)
    count = int(math.floor(actions[-1] / lam - 0.5)) + 1
    levels = []
    for n in range(max(count, 0)):
        target = lam * (n + 0.5)
        g = float(inverse(target))
        for _ in range(3):
            orbit = orbit_solve(m, g, tol=1e-10)
            residual = orbit_moments(orbit, m).area / (2.0 * math.pi) - target
            g_next = g - residual * orbit.omega
            if not fp.g_min < g_next < fp.g_s:
                break
            converged = abs(g_next - g) < 1e-12
            g = g_next
            if converged:
                break
        levels.append(g)
    logger.debug(f"{len(levels)} Bohr-Sommerfeld levels for f={m.f}, lambda={lam}")
    return np.array(levels)


'''
FOURIER COMPONENTS
'''


def fourier_coefficients(orbit: ClassicalOrbit, lam: float, m_range: Optional[Sequence[int]] = None) -> FourierTable:
    """
    a_m(g) = (omega/2 pi) * integral over a period of exp(-i m omega tau) a(tau).
    """
    n = len(orbit.tau)
    if m_range is None:
        m_range = np.arange(-(n // 2) + 1, n // 2)
    m_range = np.asarray(m_range, dtype=int)
    if len(m_range) and 2 * int(np.max(np.abs(m_range))) + 1 > n:
        raise ParameterError(f"m up to {int(np.max(np.abs(m_range)))} needs more than {n} samples")
    a = (orbit.Q + 1j * orbit.P) / math.sqrt(2.0 * lam)
    coefficients = np.fft.fft(a) / n
    mean_r2 = float(np.mean(orbit.Q ** 2 + orbit.P ** 2))
    return FourierTable(g=orbit.g, lam=lam, m_range=m_range, a_m=coefficients[np.mod(m_range, n)],
                        coefficients=coefficients, mean_r2=mean_r2)


'''
COMPLEX TIME
'''


def tau_infinity(m: ModelParams, g: float, turning: Optional[TurningPoints] = None) -> float:
    """
    Imaginary time for Q to run from Q_max to infinity along the real axis, where P is
    imaginary: integral of dQ / |P sqrt(B)|.

    With Q = Q_max + u^2 near the turning point and Q = Q_big / t^2 in the tail, both
    integrands are bounded.
    """
    _positive_detuning(m)
    tp = turning if turning is not None else turning_points(m, g)
    quartic = _axis_quartic(m, g)
    q3 = _deflate(quartic, tp.Q_max)
    b = _b_cubic(m, g)
    q_big = tp.Q_max + 1.0

    def near(u):
        q = tp.Q_max + u * u
        sqrt_b = math.sqrt(np.polyval(b, q))
        return math.sqrt((sqrt_b - _a_poly(m, q)) / np.polyval(q3, q)) / sqrt_b

    def tail(t):
        if t < 1e-8:
            return 0.0
        q = q_big / (t * t)
        sqrt_b = math.sqrt(np.polyval(b, q))
        q_dot = 2.0 * math.sqrt((q - tp.Q_max) * np.polyval(q3, q) / (sqrt_b - _a_poly(m, q))) * sqrt_b
        return 2.0 * q_big / (t ** 3 * q_dot)

    first, _ = quad(near, 0.0, 1.0, epsabs=0.0, epsrel=QUAD_TOL, limit=200)
    second, _ = quad(tail, 0.0, 1.0, epsabs=0.0, epsrel=QUAD_TOL, limit=200)
    value = first + second
    if not (math.isfinite(value) and value > 0):
        raise NumericalError(f"tau_inf quadrature failed for g={g}: {value}")
    return value


def asymptotic_elements(m: ModelParams, g: float, lam: float, mm: int,
                        omega: Optional[float] = None, tau_inf: Optional[float] = None) -> Tuple[float, bool]:
    """
    Large-|m| form of |a_m(g)|.

    :return: the value and whether |m| omega tau_inf is large enough for it to be trusted
    """
    if mm == 0:
        raise ParameterError("no asymptotic form for m = 0")
    if omega is None:
        omega = orbit_solve(m, g).omega
    if tau_inf is None:
        tau_inf = tau_infinity(m, g)
    k = abs(mm)
    decay = math.exp(-k * omega * tau_inf)
    if mm < 0:
        value = PREFACTOR_DOWN / math.sqrt(lam) * (omega ** 2 / (k * m.f)) ** (1.0 / 3.0) * decay
    else:
        value = PREFACTOR_UP / math.sqrt(lam) * (m.f * omega / k ** 2) ** (1.0 / 3.0) * decay
    return value, k * omega * tau_inf >= ASYMPTOTIC_MIN_EXPONENT


def _quad_flagged(func, a, b, **kwargs) -> Tuple[float, bool]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', IntegrationWarning)
        value, _ = quad(func, a, b, epsabs=1e-11, epsrel=QUAD_TOL, limit=200, **kwargs)
    ok = not any(issubclass(w.category, IntegrationWarning) for w in caught)
    return value, ok


def _tau_tunnel(m: ModelParams, g: float) -> Tuple[float, bool]:
    _positive_detuning(m)
    _check_intrawell(m, g, allow_saddle=True)
    roots = np.roots(_b_cubic(m, g))
    r1, r2, r3 = sorted(roots.real)
    c = 16.0 * m.f / 3.0

    def forbidden(q):
        a = _a_poly(m, q)
        b_abs = abs(np.polyval(_b_cubic(m, g), q))
        modulus = math.sqrt(a * a + b_abs)
        re_p = -math.sqrt(max(0.5 * (modulus + a), 0.0))
        return re_p / (modulus * math.sqrt(c * (q - r1)))

    ok = True
    if r3 - r2 < 1e-9 or np.any(np.abs(roots.imag) > 0):
        value = math.pi * forbidden(0.5 * (r2 + r3))
    else:
        value, ok = _quad_flagged(forbidden, r2, r3, weight='alg', wvar=(-0.5, -0.5))

    geometry = well_geometry(m)
    if g < geometry.g_cr:
        q_min = turning_points(m, g).Q_min
        tail = _deflate(_axis_quartic(m, g), q_min)

        def classically_inaccessible(q):
            sqrt_b = math.sqrt(max(np.polyval(_b_cubic(m, g), q), 0.0))
            return -math.sqrt((sqrt_b - _a_poly(m, q)) / (-4.0 * np.polyval(tail, q))) / math.sqrt(c * (q - r1) * (q - r2))

        if q_min - r3 > 1e-12:
            extra, ok2 = _quad_flagged(classically_inaccessible, r3, q_min, weight='alg', wvar=(-0.5, -0.5))
            value += extra
            ok = ok and ok2
    if not math.isfinite(value):
        raise NumericalError(f"tau_tun quadrature failed for g={g} (f={m.f})")
    if not ok:
        logger.warning(f"tau_tun quadrature at g={g} (f={m.f}) reported accuracy warnings")
    return value, ok


def tau_tunnel(m: ModelParams, g: float) -> float:
    """
    Imaginary part of the time to tunnel from the ν=0 orbit to the ν=1,2 orbits of the
    same g; negative by the branch choice Im P < 0.
    """
    return _tau_tunnel(m, g)[0]


def tunneling_action(m: ModelParams, g: float) -> float:
    """S_tun(g) = integral of tau_tun from g_s to g; zero at the saddle, positive below."""
    fp = _check_intrawell(m, g, allow_saddle=True)
    if g >= fp.g_s:
        return 0.0
    value, _ = quad(lambda x: tau_tunnel(m, x), g, fp.g_s, epsabs=1e-12, epsrel=1e-8, limit=100)
    return -value


def tunneling_data(m: ModelParams, g: float) -> TunnelingData:
    tau_inf = tau_infinity(m, g)
    tau_tun, ok = _tau_tunnel(m, g)
    return TunnelingData(g=g, tau_inf=tau_inf, tau_tun=tau_tun, S_tun=tunneling_action(m, g),
                         closest_singularity_ok=tau_inf < abs(tau_tun) - tau_inf, quadrature_ok=ok)


def tau_tunnel_at_saddle(m: ModelParams) -> float:
    """Closed-form limit of tau_tun as g approaches g_s."""
    fp = require_wells(m)
    f = m.f
    return -math.pi / math.sqrt(3.0 * f * math.sqrt(f * f + 4.0) * fp.Qs ** 2)
