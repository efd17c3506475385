"""
Dissipative kinetics between intrawell states.

Rates come either from the Wannier states (quantum) or from the Fourier components of
the classical orbits (semiclassical). The stationary distribution is obtained from the
balance equation, or in eikonal form rho_n = exp(-R(g_n)/lambda) from the local slope
R'(g), which stops being determined by nearby states once R' reaches 2 tau_inf.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import brentq
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.special import exp1, gammaincc
from scipy.special import gamma as gamma_fn

from tripling.errors import NumericalError, ParameterError
from tripling.model import ModelParams, require_wells, well_geometry
from tripling.orbits import (ClassicalOrbit, PREFACTOR_DOWN, PREFACTOR_UP, fourier_coefficients,
                             orbit_moments, orbit_solve, tau_infinity, tau_tunnel)
from tripling.spectrum import WannierBasis, build_wannier, classify_triplets, diagonalize, g_matrix, lowering_elements
from tripling.utils import delta_g, g_from_delta

logger = logging.getLogger(__name__)

M_SWITCH_MAX = 1000
# Fourier components below this fraction of |a_0| are replaced by their asymptotic form
FOURIER_NOISE = 1e-10
XI_MIN = 1e-8
XI_MAX = 1.0 - 1e-6
DIRECT_TERMS = 2000
LINDBLAD_MAX_N = 80
CYCLE_SAMPLES = 10_000
NL_DELTA_START = 0.02
NL_DELTA_FLOOR = 1e-4


class Provenance:
    QUANTUM = 'quantum'
    SEMICLASSICAL = 'semiclassical'


@dataclass(frozen=True)
class RateMatrix:
    """
    W[n, n'] is the rate of the transition n -> n'; the diagonal is zero.
    """
    W: np.ndarray
    provenance: str
    kappa: float
    nbar: float
    g: Optional[np.ndarray] = None
    lam: Optional[float] = None

    @property
    def size(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class RateRow:
    g: float
    omega: float
    tau_inf: float
    m: np.ndarray
    rates: np.ndarray
    m_switch: int


@dataclass(frozen=True)
class StationaryDistribution:
    rho: np.ndarray
    g: Optional[np.ndarray]
    R: np.ndarray
    Rprime: np.ndarray
    residual: float


@dataclass(frozen=True)
class HarmonicDistribution:
    n_eff: float
    ratio: float
    degenerate: bool = False

    def rho(self, n_levels: int) -> np.ndarray:
        if self.degenerate:
            out = np.zeros(n_levels)
            out[0] = 1.0
            return out
        weights = np.exp(-self.ratio * np.arange(n_levels))
        return weights / weights.sum()


@dataclass(frozen=True)
class TailSum:
    """
    Contribution of the distant states below, summed over |m| > start - 1:
    vacuum_term ~ (nbar + 1), thermal_term ~ nbar.
    """
    vacuum_term: float
    thermal_term: float
    epsilon: float
    C1: float
    C2: float
    divergent: bool

    @property
    def total(self) -> float:
        return self.vacuum_term + self.thermal_term


@dataclass(frozen=True)
class EikonalSolution:
    g: np.ndarray
    Rprime: np.ndarray
    xi: np.ndarray
    R: np.ndarray
    local: np.ndarray
    omega: np.ndarray
    tau_inf: np.ndarray


@dataclass(frozen=True)
class NonlocalityReport:
    g_NL: Optional[float]
    delta_g_NL: Optional[float]
    nbar: float
    f: float
    below_floor: bool = False


@dataclass(frozen=True)
class CycleReport:
    max_violation: float
    tested: int
    skipped: int


@dataclass(frozen=True)
class ActivationEnergy:
    R_A: float
    condition_ok: bool
    g: np.ndarray
    Rprime: np.ndarray
    tau_tun: np.ndarray
    splice_g: Optional[float] = None
    R_A_shifted: Tuple[float, ...] = ()


@dataclass(frozen=True)
class LindbladResult:
    rho: np.ndarray
    trace: float
    purity: float
    populations: Optional[np.ndarray] = None


'''
TAIL SUMS
'''


def _upper_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma function for a in (-1, 1)."""
    if a > 0:
        return float(gamma_fn(a) * gammaincc(a, x))
    if a == 0:
        return float(exp1(x))
    return (_upper_gamma(a + 1.0, x) - x ** a * math.exp(-x)) / a


def polylog_tail(s: float, eps: float, start: int, n_direct: int = DIRECT_TERMS) -> float:
    """
    Sum of k^-s exp(-eps k) for k >= start.

    The first n_direct terms are summed directly, the rest by Euler-Maclaurin with the
    integral written as an incomplete gamma function.
    """
    if eps < 0 or (eps == 0 and s <= 1):
        return math.inf
    k = np.arange(start, start + n_direct, dtype=float)
    direct = float(np.sum(k ** -s * np.exp(-eps * k)))
    kk = float(start + n_direct)
    f_k = kk ** -s * math.exp(-eps * kk)
    df_k = -(s / kk + eps) * f_k
    if eps == 0:
        integral = kk ** (1.0 - s) / (s - 1.0)
    else:
        integral = eps ** (s - 1.0) * _upper_gamma(1.0 - s, eps * kk)
    return direct + integral + 0.5 * f_k - df_k / 12.0


'''
LOCAL RATES
'''


class LocalRates:
    """
    Semiclassical rates into and out of a state with energy g.

    from_above[j-1] is the rate from the state j levels above (W_{n+j,n}) and from_below[j-1]
    the rate from the state j levels below (W_{n-j,n}), for j = 1..m_switch. Beyond m_switch
    the asymptotic forms of the Fourier components are used.
    """

    def __init__(self, m: ModelParams, g: float, orbit: Optional[ClassicalOrbit] = None,
                 tau_inf: Optional[float] = None):
        if m.kappa <= 0:
            raise ParameterError(f"rates need kappa > 0, got {m.kappa}")
        self.m = m
        self.g = g
        self.orbit = orbit if orbit is not None else orbit_solve(m, g)
        self.omega = self.orbit.omega
        self.tau_inf = tau_inf if tau_inf is not None else tau_infinity(m, g, self.orbit.turning)
        table = fourier_coefficients(self.orbit, m.lam)
        a0 = abs(table.coefficient(0))
        k_max = min(M_SWITCH_MAX, len(table.coefficients) // 2 - 1)
        j = np.arange(1, k_max + 1)
        up = np.abs(table.coefficients[j])
        down = np.abs(table.coefficients[-j])
        noisy = np.nonzero((up < FOURIER_NOISE * a0) | (down < FOURIER_NOISE * a0))[0]
        self.m_switch = int(noisy[0]) if len(noisy) else k_max
        self.m_switch = max(self.m_switch, 1)
        self.a_up = up[:self.m_switch]
        self.a_down = down[:self.m_switch]
        f = m.f
        # |a_k|^2 ~ tail_up k^-4/3 e^-2k w tau, |a_-k|^2 ~ tail_down k^-2/3 e^-2k w tau
        self.tail_up = PREFACTOR_UP ** 2 * (f * self.omega) ** (2.0 / 3.0) / m.lam
        self.tail_down = PREFACTOR_DOWN ** 2 * (self.omega ** 2 / f) ** (2.0 / 3.0) / m.lam
        two_kappa = 2.0 * m.kappa
        self.from_above = two_kappa * ((m.nbar + 1.0) * self.a_down ** 2 + m.nbar * self.a_up ** 2)
        self.from_below = two_kappa * ((m.nbar + 1.0) * self.a_up ** 2 + m.nbar * self.a_down ** 2)

    @property
    def decay(self) -> float:
        """2 omega tau_inf, the exponent of |a_m|^2 per unit |m|."""
        return 2.0 * self.omega * self.tau_inf

    def _above_sum(self, eps: float) -> float:
        two_kappa = 2.0 * self.m.kappa
        start = self.m_switch + 1
        return two_kappa * ((self.m.nbar + 1.0) * self.tail_down * polylog_tail(2.0 / 3.0, eps, start)
                            + self.m.nbar * self.tail_up * polylog_tail(4.0 / 3.0, eps, start))

    def _below_parts(self, eps: float) -> Tuple[float, float]:
        two_kappa = 2.0 * self.m.kappa
        start = self.m_switch + 1
        vacuum = two_kappa * (self.m.nbar + 1.0) * self.tail_up * polylog_tail(4.0 / 3.0, eps, start)
        thermal = two_kappa * self.m.nbar * self.tail_down * polylog_tail(2.0 / 3.0, eps, start) \
            if self.m.nbar > 0 else 0.0
        return vacuum, thermal

    def influx_tail(self, xi: float) -> TailSum:
        eps = self.decay + math.log(xi)
        vacuum, thermal = self._below_parts(eps)
        two_kappa = 2.0 * self.m.kappa
        return TailSum(vacuum_term=vacuum, thermal_term=thermal, epsilon=eps,
                       C1=two_kappa * self.tail_up, C2=two_kappa * self.tail_down,
                       divergent=not math.isfinite(vacuum + thermal))

    def balance(self, xi: float) -> float:
        """
        F(xi)/(xi - 1) with F(xi) = sum_m W_{n+m,n}(xi^m - 1); positive at xi -> 1.
        """
        ln_xi = math.log(xi)
        j = np.arange(1, self.m_switch + 1)
        with np.errstate(divide='ignore', over='ignore'):
            above = float(np.sum(self.from_above * -np.expm1(j * ln_xi)))
            below_weights = np.exp(np.log(self.from_below) - j * ln_xi)
        below = float(np.sum(below_weights - self.from_below))
        above += self._above_sum(self.decay) - self._above_sum(self.decay - ln_xi)
        vacuum, thermal = self._below_parts(self.decay + ln_xi)
        vacuum0, thermal0 = self._below_parts(self.decay)
        below += (vacuum + thermal) - (vacuum0 + thermal0)
        return (above - below) / (1.0 - xi)

    def xi_floor(self) -> float:
        return max(XI_MIN, math.exp(-self.decay) * (1.0 + 1e-9))

    def solve(self) -> Tuple[Optional[float], float]:
        """
        :return: the nontrivial root xi (None if there is none) and the balance at the lower end
        """
        lo = self.xi_floor()
        h_lo = self.balance(lo)
        if h_lo > 0:
            return None, h_lo
        h_hi = self.balance(XI_MAX)
        if h_hi <= 0:
            raise NumericalError(f"balance function not positive near xi=1 at g={self.g}: {h_hi}")
        xi = brentq(self.balance, lo, XI_MAX, xtol=1e-12, rtol=1e-12)
        return xi, h_lo

    def row(self, m_range: Optional[Sequence[int]] = None) -> RateRow:
        """Rates W_{n,n+m} out of the state."""
        if m_range is None:
            m_range = [j for j in range(-self.m_switch, self.m_switch + 1) if j != 0]
        m_range = np.asarray(m_range, dtype=int)
        rates = np.zeros(len(m_range))
        for i, j in enumerate(m_range):
            k = abs(int(j))
            if k == 0:
                continue
            if k <= self.m_switch:
                rates[i] = self.from_below[k - 1] if j > 0 else self.from_above[k - 1]
                continue
            decay = math.exp(-k * self.decay)
            up = self.tail_up * k ** (-4.0 / 3.0) * decay
            down = self.tail_down * k ** (-2.0 / 3.0) * decay
            if j > 0:
                rates[i] = 2.0 * self.m.kappa * ((self.m.nbar + 1.0) * up + self.m.nbar * down)
            else:
                rates[i] = 2.0 * self.m.kappa * ((self.m.nbar + 1.0) * down + self.m.nbar * up)
        return RateRow(g=self.g, omega=self.omega, tau_inf=self.tau_inf, m=m_range, rates=rates,
                       m_switch=self.m_switch)


def eikonal_root(from_above: np.ndarray, from_below: np.ndarray) -> float:
    """
    Nontrivial root in (0, 1) of sum_j c_j (xi^j - 1) + sum_k c_-k (xi^-k - 1) for finite
    sets of rates, with c_j = from_above[j-1] and c_-k = from_below[k-1].
    """
    from_above = np.asarray(from_above, dtype=float)
    from_below = np.asarray(from_below, dtype=float)
    ja = np.arange(1, len(from_above) + 1)
    jb = np.arange(1, len(from_below) + 1)

    def balance(xi):
        above = np.sum(from_above * -np.expm1(ja * math.log(xi)))
        below = np.sum(from_below * np.expm1(-jb * math.log(xi)))
        return (above - below) / (1.0 - xi)

    if balance(XI_MIN) > 0:
        raise NumericalError("no root of the eikonal equation in (0, 1)")
    return brentq(balance, XI_MIN, XI_MAX, xtol=1e-14, rtol=1e-14)


def semiclassical_rates(m: ModelParams, g: float, m_range: Optional[Sequence[int]] = None) -> RateRow:
    """
    W_{n,n+m} = 2 kappa [(nbar + 1)|a_m(g)|^2 + nbar |a_-m(g)|^2].
    """
    return LocalRates(m, g).row(m_range)


def semiclassical_rate_matrix(m: ModelParams, levels: Sequence[float]) -> RateMatrix:
    levels = np.asarray(levels, dtype=float)
    n = len(levels)
    W = np.zeros((n, n))
    for i, g in enumerate(levels):
        offsets = [j - i for j in range(n) if j != i]
        row = semiclassical_rates(m, float(g), offsets)
        for j, rate in zip(row.m, row.rates):
            W[i, i + j] = rate
    return RateMatrix(W=W, provenance=Provenance.SEMICLASSICAL, kappa=m.kappa, nbar=m.nbar, g=levels, lam=m.lam)


def influx_tail(m: ModelParams, g: float, Rprime: float, rates: Optional[LocalRates] = None) -> TailSum:
    """
    Distant-state part of the influx from below for the eikonal slope Rprime.
    """
    rates = rates if rates is not None else LocalRates(m, g)
    return rates.influx_tail(math.exp(-Rprime * rates.omega))


'''
QUANTUM RATES AND STATIONARY STATES
'''


def quantum_rate_matrix(wb: WannierBasis, m: ModelParams) -> RateMatrix:
    """
    W[n, n'] = 2 kappa [(nbar + 1)|<n'|a|n>|^2 + nbar |<n|a|n'>|^2] between well-0 states.
    """
    weights = np.abs(lowering_elements(wb)) ** 2
    W = 2.0 * m.kappa * ((m.nbar + 1.0) * weights.T + m.nbar * weights)
    np.fill_diagonal(W, 0.0)
    return RateMatrix(W=W, provenance=Provenance.QUANTUM, kappa=m.kappa, nbar=m.nbar, g=wb.g.copy(), lam=m.lam)


def _rates_of(W: Union[RateMatrix, np.ndarray]) -> np.ndarray:
    return W.W if isinstance(W, RateMatrix) else np.asarray(W, dtype=float)


def stationary_solve(W: Union[RateMatrix, np.ndarray]) -> StationaryDistribution:
    """
    Null vector of the balance equation by state reduction (Grassmann-Taksar-Heyman), which
    involves no subtractions and keeps exponentially small populations accurate.
    """
    rates = _rates_of(W).copy()
    n = rates.shape[0]
    np.fill_diagonal(rates, 0.0)
    if np.any(rates < 0):
        raise ParameterError("negative transition rate")
    n_comp, _ = connected_components(sp.csr_matrix(rates > 0), directed=True, connection='strong')
    if n_comp != 1:
        raise NumericalError(f"rate matrix is reducible ({n_comp} strongly connected parts): multiple null vectors")
    q = rates
    for k in range(n - 1, 0, -1):
        total = q[k, :k].sum()
        q[:k, k] /= total
        q[:k, :k] += np.outer(q[:k, k], q[k, :k])
    rho = np.zeros(n)
    rho[0] = 1.0
    for j in range(1, n):
        rho[j] = rho[:j] @ q[:j, j]
    rho /= rho.sum()

    original = _rates_of(W).copy()
    np.fill_diagonal(original, 0.0)
    influx = rho @ original
    outflux = rho * original.sum(axis=1)
    residual = float(np.max(np.abs(influx - outflux) / outflux))

    g = W.g if isinstance(W, RateMatrix) else None
    lam = W.lam if isinstance(W, RateMatrix) else None
    R = np.full(n, np.nan)
    Rprime = np.full(n, np.nan)
    if g is not None and lam is not None:
        with np.errstate(divide='ignore'):
            R = -lam * np.log(rho)
        Rprime[1:-1] = -lam * np.log(rho[2:] / rho[:-2]) / (g[2:] - g[:-2])
    return StationaryDistribution(rho=rho, g=g, R=R, Rprime=Rprime, residual=residual)


def flux_matrix(rho: np.ndarray, W: Union[RateMatrix, np.ndarray]) -> np.ndarray:
    """
    F[n', n] = rho_n' W[n', n], normalised to the largest incoming flux of each state n.
    """
    flux = np.asarray(rho)[:, None] * _rates_of(W)
    np.fill_diagonal(flux, 0.0)
    peak = flux.max(axis=0)
    return np.divide(flux, peak, out=np.zeros_like(flux), where=peak > 0)


def detailed_balance_residual(W: Union[RateMatrix, np.ndarray], seed: int = 0,
                              n_samples: int = CYCLE_SAMPLES) -> CycleReport:
    """
    Largest |ln(W_ab W_bc W_ca / W_ac W_cb W_ba)| over triples of states.
    All triples are tested for up to 30 states, otherwise n_samples random ones.
    """
    rates = _rates_of(W)
    n = rates.shape[0]
    if n <= 30:
        triples = np.array(list(itertools.combinations(range(n), 3)), dtype=int).reshape(-1, 3)
    else:
        rng = np.random.default_rng(seed)
        triples = np.array([rng.choice(n, size=3, replace=False) for _ in range(n_samples)])
    a, b, c = triples[:, 0], triples[:, 1], triples[:, 2]
    forward = np.stack([rates[a, b], rates[b, c], rates[c, a]])
    backward = np.stack([rates[a, c], rates[c, b], rates[b, a]])
    usable = np.all(forward > 0, axis=0) & np.all(backward > 0, axis=0)
    skipped = int(np.sum(~usable))
    if skipped:
        logger.debug(f"{skipped} triples with a vanishing rate skipped")
    if not np.any(usable):
        return CycleReport(max_violation=0.0, tested=0, skipped=skipped)
    violation = np.abs(np.sum(np.log(forward[:, usable]), axis=0) - np.sum(np.log(backward[:, usable]), axis=0))
    return CycleReport(max_violation=float(violation.max()), tested=int(np.sum(usable)), skipped=skipped)


def harmonic_distribution(m: ModelParams) -> HarmonicDistribution:
    """
    Boltzmann-like distribution near the bottom of the well with the effective Planck number
    n_eff = nbar + (2 nbar + 1) sinh^2 phi*.
    """
    geometry = well_geometry(m)
    n_eff = m.nbar + (2.0 * m.nbar + 1.0) * math.sinh(geometry.phi_star) ** 2
    if n_eff <= 1e-15:
        logger.info(f"n_eff vanishes at f={m.f}, nbar={m.nbar}")
        return HarmonicDistribution(n_eff=n_eff, ratio=math.inf, degenerate=True)
    return HarmonicDistribution(n_eff=n_eff, ratio=math.log((n_eff + 1.0) / n_eff))


'''
EIKONAL
'''


def _map(func, items, threads: int):
    if threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _eikonal_point(m: ModelParams, g: float):
    rates = LocalRates(m, g)
    xi, _ = rates.solve()
    if xi is None:
        return rates, np.nan, np.nan, False
    rprime = -math.log(xi) / rates.omega
    return rates, xi, rprime, 2.0 * rates.tau_inf - rprime > 0


def eikonal_solve(m: ModelParams, g_grid: Sequence[float], threads: int = 1) -> EikonalSolution:
    """
    Local slope R'(g) = -ln(xi)/omega(g) from the root xi of the eikonal balance at every
    grid energy. R(g) is accumulated from g_min up to the first nonlocal point, with R'
    continued as a constant below the first grid point.
    """
    fp = require_wells(m)
    g_grid = np.asarray(g_grid, dtype=float)
    points = _map(lambda g: _eikonal_point(m, float(g)), g_grid, threads)
    xi = np.array([p[1] for p in points])
    rprime = np.array([p[2] for p in points])
    local = np.array([p[3] for p in points], dtype=bool)
    omega = np.array([p[0].omega for p in points])
    tau_inf = np.array([p[0].tau_inf for p in points])

    R = np.full(len(g_grid), np.nan)
    stop = int(np.argmin(local)) if not np.all(local) else len(g_grid)
    if stop > 0:
        gs = np.concatenate(([fp.g_min], g_grid[:stop]))
        rs = np.concatenate(([rprime[0]], rprime[:stop]))
        R[:stop] = cumulative_trapezoid(rs, gs)
    if stop < len(g_grid):
        logger.info(f"eikonal locality lost at g={g_grid[stop]:.6f} (f={m.f}, nbar={m.nbar})")
    return EikonalSolution(g=g_grid, Rprime=rprime, xi=xi, R=R, local=local, omega=omega, tau_inf=tau_inf)


def _locality_margin(m: ModelParams, g: float) -> float:
    """omega (2 tau_inf - R') where the eikonal root exists, minus the scaled balance otherwise."""
    rates = LocalRates(m, g)
    xi, h_lo = rates.solve()
    if xi is not None:
        return rates.decay + math.log(xi)
    return -h_lo / abs(rates.balance(XI_MAX))


def detect_nonlocality(m: ModelParams, grid_points: int = 25, threads: int = 1) -> NonlocalityReport:
    """
    Lowest g where the eikonal slope reaches 2 tau_inf: bracketed on a grid of Δg, then
    refined by root finding on the locality margin. If locality is already lost at the
    first grid point, Δg is reduced by factors of 4 down to NL_DELTA_FLOOR; when it is lost
    even there, g_NL is reported at the floor with below_floor set.
    """
    fp = require_wells(m)
    dgs = np.linspace(NL_DELTA_START, 0.98, grid_points)
    gs = [g_from_delta(d, fp.g_min, fp.g_s) for d in dgs]
    margins = _map(lambda g: _locality_margin(m, g), gs, threads)
    if margins[0] <= 0:
        d = NL_DELTA_START
        while d > NL_DELTA_FLOOR:
            d = max(d / 4.0, NL_DELTA_FLOOR)
            g = g_from_delta(d, fp.g_min, fp.g_s)
            gs.insert(0, g)
            margins.insert(0, _locality_margin(m, g))
            if margins[0] > 0:
                break
        else:
            logger.warning(f"locality lost down to delta_g={NL_DELTA_FLOOR:g} for f={m.f}, nbar={m.nbar}")
            return NonlocalityReport(g_NL=gs[0], delta_g_NL=NL_DELTA_FLOOR, nbar=m.nbar, f=m.f, below_floor=True)
    for i in range(1, len(gs)):
        if margins[i - 1] > 0 >= margins[i]:
            g_nl = brentq(lambda g: _locality_margin(m, g), gs[i - 1], gs[i], xtol=1e-10 * (fp.g_s - fp.g_min))
            logger.info(f"locality breaks down at g_NL={g_nl:.6f} for f={m.f}, nbar={m.nbar}")
            return NonlocalityReport(g_NL=g_nl, delta_g_NL=delta_g(g_nl, fp.g_min, fp.g_s), nbar=m.nbar, f=m.f)
    return NonlocalityReport(g_NL=None, delta_g_NL=None, nbar=m.nbar, f=m.f)


def classical_limit(m: ModelParams, g: float, orbit: Optional[ClassicalOrbit] = None) -> float:
    """
    R' = 2 M / [(2 nbar + 1) N] with M the enclosed area and N half the integral of the
    Laplacian of g over it.
    """
    orbit = orbit if orbit is not None else orbit_solve(m, g)
    moments = orbit_moments(orbit, m)
    laplacian_half = 2.0 * moments.r2_integral - m.sign_delta * moments.area
    return 2.0 * moments.area / ((2.0 * m.nbar + 1.0) * laplacian_half)


'''
ACTIVATION
'''


def _well_integral(g_min: float, g_s: float, g: np.ndarray, rprime: np.ndarray) -> float:
    gs = np.concatenate(([g_min], g, [g_s]))
    rs = np.concatenate(([rprime[0]], rprime, [rprime[-1]]))
    return float(trapezoid(rs, gs))


def _wannier_rprime(m: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    spectrum = diagonalize(m)
    wb = build_wannier(spectrum, classify_triplets(spectrum))
    sd = stationary_solve(quantum_rate_matrix(wb, m))
    ok = np.isfinite(sd.Rprime)
    return wb.g[ok], sd.Rprime[ok]


def activation_energy(m: ModelParams, grid_points: int = 40, threads: int = 1,
                      max_gap: float = 0.1) -> ActivationEnergy:
    """
    R_A = integral of R'(g) over the well. The eikonal slope is used where it is local;
    beyond the first nonlocal grid point R' is taken from the stationary solution of the
    quantum balance equation.

    :param max_gap: largest uncovered fraction of the well depth tolerated below g_s
    """
    fp = require_wells(m)
    dgs = np.linspace(0.01, 0.99, grid_points)
    g = np.array([g_from_delta(d, fp.g_min, fp.g_s) for d in dgs])
    eik = eikonal_solve(m, g, threads=threads)
    rprime = eik.Rprime
    splice_g = None
    shifted = ()
    if not np.all(eik.local):
        stop = int(np.argmin(eik.local))
        splice_g = float(g[stop])
        wg, wr = _wannier_rprime(m)
        if not len(wg) or delta_g(wg[-1], fp.g_min, fp.g_s) < 1.0 - max_gap:
            top = wg[-1] if len(wg) else splice_g
            raise NumericalError(f"no R' available between g={top:.6f} and g_s={fp.g_s:.6f} (f={m.f})")
        g, rprime = _splice(eik, wg, wr, splice_g)
        # splice moved two Wannier levels down and up
        index = int(np.searchsorted(wg, splice_g))
        moved = [wg[min(max(index + shift, 0), len(wg) - 1)] for shift in (-2, 2)]
        shifted = tuple(_well_integral(fp.g_min, fp.g_s, *_splice(eik, wg, wr, at)) for at in moved)
        logger.info(f"R' spliced from the Wannier solution at g={splice_g:.6f} (f={m.f}, nbar={m.nbar})")
    R_A = _well_integral(fp.g_min, fp.g_s, g, rprime)
    tau_tun = np.array([tau_tunnel(m, float(x)) for x in g])
    condition_ok = bool(np.all(rprime < 2.0 * np.abs(tau_tun)))
    return ActivationEnergy(R_A=R_A, condition_ok=condition_ok, g=g, Rprime=rprime, tau_tun=tau_tun,
                            splice_g=splice_g, R_A_shifted=shifted)


def _splice(eik: EikonalSolution, wg: np.ndarray, wr: np.ndarray, at: float) -> Tuple[np.ndarray, np.ndarray]:
    """Eikonal R' below the energy at, Wannier R' from there up."""
    below = (eik.g < at) & eik.local
    above = wg >= at
    return np.concatenate((eik.g[below], wg[above])), np.concatenate((eik.Rprime[below], wr[above]))


def classical_activation_energy(m: ModelParams, grid_points: int = 40) -> float:
    """Integral over the well of the large-nbar slope of classical_limit()."""
    fp = require_wells(m)
    dgs = np.linspace(0.01, 0.99, grid_points)
    g = np.array([g_from_delta(d, fp.g_min, fp.g_s) for d in dgs])
    rprime = np.array([classical_limit(m, float(x)) for x in g])
    return _well_integral(fp.g_min, fp.g_s, g, rprime)


'''
LINDBLAD
'''


def lindblad_steady_state(m: ModelParams, n_max_small: int = 60,
                          wannier: Optional[WannierBasis] = None) -> LindbladResult:
    """
    Stationary density matrix of d rho/d tau = (i/lambda)[rho, g] - kappa D[a] rho in a small
    Fock truncation, from the vectorised generator with one equation replaced by the trace
    condition.
    """
    if n_max_small > LINDBLAD_MAX_N:
        raise ParameterError(f"n_max_small={n_max_small} exceeds {LINDBLAD_MAX_N}")
    n = n_max_small + 1
    a = sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format='csr')
    ad = a.T.tocsr()
    num = (ad @ a).tocsr()
    anti = (a @ ad).tocsr()
    eye = sp.identity(n, format='csr')
    g = g_matrix(m, n_max_small)

    # vec(A rho B) = (B^T kron A) vec(rho), column stacking
    hamiltonian = (1j / m.lam) * (sp.kron(g.T, eye) - sp.kron(eye, g))
    emission = sp.kron(eye, num) - 2.0 * sp.kron(a, a) + sp.kron(num.T, eye)
    absorption = sp.kron(eye, anti) - 2.0 * sp.kron(a.T, ad) + sp.kron(anti.T, eye)
    generator = (hamiltonian - m.kappa * ((m.nbar + 1.0) * emission + m.nbar * absorption)).tolil()

    trace_index = np.arange(n) * (n + 1)
    generator[0, :] = 0.0
    generator[0, trace_index] = 1.0
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    solution = spsolve(generator.tocsc(), rhs)
    if not np.all(np.isfinite(solution)):
        raise NumericalError(f"singular Lindblad generator at n_max_small={n_max_small}")
    rho = solution.reshape((n, n), order='F')
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    purity = float(np.real(np.trace(rho @ rho)))

    populations = None
    if wannier is not None:
        states = wannier.vectors[:, :, :n]
        populations = np.real(np.einsum('vli,ij,vlj->l', states.conj(), rho, states))
    return LindbladResult(rho=rho, trace=float(np.real(np.trace(rho))), purity=purity, populations=populations)
