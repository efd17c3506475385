"""
Scaled rotating-frame Hamiltonian of an oscillator driven near three times its
eigenfrequency.

Everything downstream works in scaled units (f, lambda, kappa, nbar, sign of the
detuning). PhysicalParams only exists to be converted by scale_physical().
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from tripling.errors import ParameterError
from tripling.utils import TWO_PI_OVER_3, rotate

logger = logging.getLogger(__name__)


class OriginKind:
    LOCAL_MAX = 'local_max'
    LOCAL_MIN = 'local_min'


@dataclass(frozen=True)
class PhysicalParams:
    """
    Laboratory-frame parameters of the driven oscillator.

    :param omega0: eigenfrequency
    :param omegaF: drive frequency, close to 3*omega0
    :param gamma: quartic nonlinearity, > 0
    :param F0: drive amplitude, >= 0
    :param Gamma: amplitude decay rate, >= 0
    :param nbar: Planck number of the bath
    :param hbar: action scale
    """
    omega0: float
    omegaF: float
    gamma: float
    F0: float
    Gamma: float = 0.0
    nbar: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.F0 < 0:
            raise ParameterError(f"F0 must be >= 0, got {self.F0}")
        if self.Gamma < 0:
            raise ParameterError(f"Gamma must be >= 0, got {self.Gamma}")
        if self.nbar < 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar}")

    @property
    def detuning(self) -> float:
        return self.omegaF / 3.0 - self.omega0


@dataclass(frozen=True)
class ModelParams:
    """
    Scaled parameters: drive f, Planck constant lam, decay kappa, Planck number nbar
    and sign_delta = sgn(omegaF/3 - omega0).
    """
    f: float
    lam: float
    kappa: float = 0.0
    nbar: float = 0.0
    sign_delta: int = 1

    def __post_init__(self):
        if not self.f >= 0:
            raise ParameterError(f"f must be >= 0, got {self.f}")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be > 0, got {self.lam}")
        if not self.kappa >= 0:
            raise ParameterError(f"kappa must be >= 0, got {self.kappa}")
        if not self.nbar >= 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar}")
        if self.sign_delta not in (1, -1):
            raise ParameterError(f"sign_delta must be +1 or -1, got {self.sign_delta}")

    def replace(self, **changes) -> 'ModelParams':
        fields = dict(f=self.f, lam=self.lam, kappa=self.kappa, nbar=self.nbar, sign_delta=self.sign_delta)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class AlternativeScaling:
    lambda_prime: float
    zeta_prime: float

    @property
    def tristable(self) -> bool:
        return self.zeta_prime > -0.25


class PhasePoint(NamedTuple):
    Q: float
    P: float


@dataclass(frozen=True)
class FixedPointSet:
    minima: Tuple[PhasePoint, ...]
    saddles: Tuple[PhasePoint, ...]
    origin_kind: str
    g_min: float
    g_s: float
    Q0: float
    Qs: float

    @property
    def wells_exist(self) -> bool:
        return len(self.minima) == 3


@dataclass(frozen=True)
class WellGeometry:
    gPP: float
    gQQ: float
    omega_min: float
    phi_star: float
    Q_cr: float
    g_cr: float


'''
SCALING
'''


def scale_physical(p: PhysicalParams) -> Tuple[ModelParams, Optional[AlternativeScaling]]:
    """
    Convert laboratory parameters to the scaled ones.

    :param p:PhysicalParams laboratory parameters with nonzero detuning
    :return: scaled ModelParams and, when F0 > 0, the alternative scaling
    """
    d = p.detuning
    if d == 0:
        raise ParameterError("zero detuning: the primary scaling is undefined, use alternative_scaling()")
    lam = 27.0 * p.gamma * p.hbar / (8.0 * p.omegaF ** 2 * abs(d))
    f = p.F0 / math.sqrt(8.0 * p.omegaF * p.gamma * abs(d))
    kappa = p.Gamma / abs(d)
    sign_delta = 1 if d > 0 else -1
    alt = alternative_scaling(p) if p.F0 > 0 else None
    logger.debug(f"scaled parameters f={f}, lambda={lam}, kappa={kappa}, sign={sign_delta}")
    return ModelParams(f=f, lam=lam, kappa=kappa, nbar=p.nbar, sign_delta=sign_delta), alt


def alternative_scaling(p: PhysicalParams) -> AlternativeScaling:
    """
    Scaling that stays finite on exact resonance; lambda' does not depend on the detuning.
    """
    if p.F0 <= 0:
        raise ParameterError("alternative scaling needs F0 > 0")
    lambda_prime = 9.0 * p.hbar * p.gamma ** 2 / (4.0 * p.omega0 * p.F0 ** 2)
    zeta_prime = 24.0 * p.omega0 * p.gamma * p.detuning / p.F0 ** 2
    return AlternativeScaling(lambda_prime=lambda_prime, zeta_prime=zeta_prime)


def lab_quasienergy(g, k: int, p: PhysicalParams, lam: float):
    """
    Quasienergy in the laboratory frame of a scaled level g in symmetry sector k.
    """
    return p.hbar * abs(p.detuning) / lam * np.asarray(g) + TWO_PI_OVER_3 * k * p.hbar * p.omegaF


'''
HAMILTONIAN
'''


def g_qp(q, p, m: ModelParams):
    """Vectorised g(Q, P)."""
    r2 = q * q + p * p
    return 0.25 * (r2 - m.sign_delta) ** 2 - m.f / 3.0 * (q ** 3 - 3.0 * q * p * p)


def g_value(pt: PhasePoint, m: ModelParams) -> float:
    return float(g_qp(pt[0], pt[1], m))


def gradient_qp(q, p, m: ModelParams):
    """
    :return: (dg/dQ, dg/dP)
    """
    r2s = q * q + p * p - m.sign_delta
    return r2s * q - m.f * (q * q - p * p), r2s * p + 2.0 * m.f * q * p


def vector_field_qp(q, p, m: ModelParams):
    dq, dp = gradient_qp(q, p, m)
    return dp, -dq


def hamiltonian_vector_field(pt: PhasePoint, m: ModelParams) -> Tuple[float, float]:
    """
    Hamilton equations in slow time: (dQ/dtau, dP/dtau) = (dg/dP, -dg/dQ)
    """
    dq, dp = vector_field_qp(pt[0], pt[1], m)
    return float(dq), float(dp)


def g_hessian(pt: PhasePoint, m: ModelParams) -> Tuple[float, float, float]:
    """
    :return: (g_QQ, g_PP, g_QP)
    """
    q, p = pt
    s = m.sign_delta
    g_qq = 3.0 * q * q + p * p - s - 2.0 * m.f * q
    g_pp = q * q + 3.0 * p * p - s + 2.0 * m.f * q
    g_qp_ = 2.0 * q * p + 2.0 * m.f * p
    return g_qq, g_pp, g_qp_


'''
FIXED POINTS
'''


def _triangle(radius_q: float) -> Tuple[PhasePoint, ...]:
    return tuple(PhasePoint(*rotate(radius_q, 0.0, TWO_PI_OVER_3 * j)) for j in range(3))


def _extremum_value(f: float, q: float, s: int) -> float:
    return -f * q * (q * q + 3.0 * s) / 12.0


def fixed_points(m: ModelParams) -> FixedPointSet:
    """
    Minima and saddles of g. For negative detuning and f <= 2 there are no off-origin
    wells: the returned set then only describes the origin.
    """
    s = m.sign_delta
    f = m.f
    origin_kind = OriginKind.LOCAL_MAX if s > 0 else OriginKind.LOCAL_MIN
    disc = f * f + 4.0 * s
    if f <= 0 or disc <= 0 or (s < 0 and f <= 2.0):
        logger.debug(f"no off-origin wells for f={f}, sign_delta={s}")
        return FixedPointSet(minima=(), saddles=(), origin_kind=origin_kind,
                             g_min=math.nan, g_s=math.nan, Q0=math.nan, Qs=math.nan)
    root = math.sqrt(disc)
    q0 = (f + root) / 2.0
    qs = (f - root) / 2.0
    return FixedPointSet(minima=_triangle(q0), saddles=_triangle(qs), origin_kind=origin_kind,
                         g_min=_extremum_value(f, q0, s), g_s=_extremum_value(f, qs, s), Q0=q0, Qs=qs)


def require_wells(m: ModelParams) -> FixedPointSet:
    fp = fixed_points(m)
    if not fp.wells_exist:
        raise ParameterError(f"no off-origin wells for f={m.f}, sign_delta={m.sign_delta}")
    return fp


def well_geometry(m: ModelParams) -> WellGeometry:
    """
    Curvatures, bottom-of-well frequency and squeezing of the well at (Q0, 0), plus the
    energy at which intrawell orbits turn horseshoe-shaped.
    """
    fp = require_wells(m)
    s = m.sign_delta
    f = m.f
    g_pp = 3.0 * f * fp.Q0
    g_qq = f * fp.Q0 + 2.0 * s
    if g_pp * g_qq <= 0:
        raise ParameterError(f"degenerate well: gPP*gQQ = {g_pp * g_qq} for f={f}")
    a = math.sqrt(abs(g_qq))
    b = math.sqrt(abs(g_pp))
    phi_star = math.atanh((a - b) / (a + b))
    cr_disc = f * f + s
    q_cr = -f + math.sqrt(cr_disc) if cr_disc >= 0 else math.nan
    g_cr = g_value(PhasePoint(q_cr, 0.0), m) if cr_disc >= 0 else math.nan
    return WellGeometry(gPP=g_pp, gQQ=g_qq, omega_min=math.sqrt(g_pp * g_qq), phi_star=phi_star,
                        Q_cr=q_cr, g_cr=g_cr)


def washout_parameter(m: ModelParams) -> float:
    """
    f^2 lambda (2 nbar + 1) / (1 + kappa^2); values of order one or larger mean
    fluctuations smear out the period-three states.
    """
    return m.f ** 2 * m.lam * (2.0 * m.nbar + 1.0) / (1.0 + m.kappa ** 2)
