"""
Quasienergy spectrum of the scaled Hamiltonian in the Fock basis.

g only couples Fock states whose indices differ by a multiple of three, so the
matrix splits into three sectors (residue n mod 3), each tridiagonal in its own
compressed index. Each sector is diagonalised independently; the sectors are then
grouped into tunnel-split triplets and recombined into states localised in one well.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.special import gammaln

from tripling.errors import NumericalError, ParameterError
from tripling.model import ModelParams, PhysicalParams, fixed_points, lab_quasienergy
from tripling.orbits import tunneling_action
from tripling.utils import TWO_PI_OVER_3

logger = logging.getLogger(__name__)

MIN_N_MAX = 30
# margin above the reference energy used to place the truncation ring
TRUNCATION_MARGIN = 1.0
EXTRA_STATES = 30
GUARD_SPACINGS = 3
SECTORS = (0, 1, 2)


@dataclass(frozen=True)
class SectorMatrix:
    residue: int
    n_max: int
    fock: np.ndarray
    diag: np.ndarray
    offdiag3: np.ndarray
    truncation_ok: bool = True


@dataclass(frozen=True)
class QuasienergySpectrum:
    """
    Eigenpairs per sector k. values[k] is ascending; vectors[k][:, i] holds the
    coefficients of level i on the Fock states fock[k].
    """
    m: ModelParams
    n_max: int
    values: Tuple[np.ndarray, ...]
    vectors: Tuple[np.ndarray, ...]
    fock: Tuple[np.ndarray, ...]
    truncation_ok: bool = True
    convergence_delta: Optional[float] = None

    @property
    def n_fock(self) -> int:
        return self.n_max + 1

    def full_vector(self, k: int, i: int) -> np.ndarray:
        v = np.zeros(self.n_fock)
        v[self.fock[k]] = self.vectors[k][:, i]
        return v


@dataclass(frozen=True)
class TripletTable:
    g_s: float
    means: np.ndarray
    deviations: np.ndarray
    splittings: np.ndarray
    indices: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=int))
    excluded: Tuple[float, ...] = ()
    count_below_saddle: int = 0

    def __len__(self):
        return len(self.means)


@dataclass(frozen=True)
class WannierBasis:
    """
    vectors[nu, n] are the Fock coefficients of the state of level n localised in well nu.
    """
    g: np.ndarray
    vectors: np.ndarray
    n_max: int
    table: Optional[TripletTable] = field(default=None, compare=False)

    @property
    def n_levels(self) -> int:
        return self.vectors.shape[1]


'''
MATRICES
'''


def _diagonal(m: ModelParams, n: np.ndarray) -> np.ndarray:
    lam = m.lam
    return lam * (-m.sign_delta * (n + 0.5) + lam * n * (n + 1.0)) + (1.0 + lam * lam) / 4.0


def _coupling(m: ModelParams, n: np.ndarray) -> np.ndarray:
    lam = m.lam
    return -lam * (m.f / 3.0) * math.sqrt(2.0 * lam) * np.sqrt((n + 1.0) * (n + 2.0) * (n + 3.0))


def recommended_n_max(m: ModelParams) -> int:
    """
    Truncation containing every state below the saddle with a wide margin: the ring where
    the smallest value of g on the circle of radius r exceeds the saddle energy (the top of
    the origin hill when there are no wells) by TRUNCATION_MARGIN.
    """
    fp = fixed_points(m)
    g_ref = fp.g_s if fp.wells_exist else 0.25
    g_ref = max(g_ref, 0.25)
    r = np.linspace(0.0, 20.0, 20001)
    lower = 0.25 * (r * r - m.sign_delta) ** 2 - m.f / 3.0 * r ** 3
    below = np.nonzero(lower < g_ref + TRUNCATION_MARGIN)[0]
    r_max = r[min(below[-1] + 1, len(r) - 1)]
    n_max = max(MIN_N_MAX, int(math.ceil(r_max * r_max / (2.0 * m.lam))) + EXTRA_STATES)
    logger.debug(f"truncation n_max={n_max} for f={m.f}, lambda={m.lam} (ring radius {r_max:.3f})")
    return n_max


def build_sector_matrix(m: ModelParams, r: int, n_max: int) -> SectorMatrix:
    """
    Sector r of g: Fock states r, r+3, ... up to n_max.

    :param r:int residue 0, 1 or 2
    :param n_max:int largest Fock index kept
    """
    if r not in SECTORS:
        raise ParameterError(f"residue must be 0, 1 or 2, got {r}")
    if n_max < r + 3:
        raise ParameterError(f"n_max={n_max} too small for sector {r}")
    fock = np.arange(r, n_max + 1, 3)
    diag = _diagonal(m, fock.astype(float))
    offdiag = _coupling(m, fock[:-1].astype(float))
    ok = n_max >= recommended_n_max(m)
    if not ok:
        logger.warning(f"n_max={n_max} may not contain every state below the saddle")
    return SectorMatrix(residue=r, n_max=n_max, fock=fock, diag=diag, offdiag3=offdiag, truncation_ok=ok)



def g_matrix(m: ModelParams, n_max: int) -> sp.csr_matrix:
    """Sparse matrix of g on the Fock states 0..n_max, all sectors together."""
    n = np.arange(n_max + 1, dtype=float)
    coupling = _coupling(m, n[:-3]) if n_max >= 3 else np.zeros(0)
    return sp.diags([coupling, _diagonal(m, n), coupling], [-3, 0, 3], shape=(n_max + 1, n_max + 1), format='csr')


'''
SPECTRUM
'''


def _solve_sector(sm: SectorMatrix) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return eigh_tridiagonal(sm.diag, sm.offdiag3)
    except LinAlgError as e:
        raise NumericalError(f"eigensolver failed for sector {sm.residue} at n_max={sm.n_max} "
                             f"(diag range [{sm.diag.min()}, {sm.diag.max()}]): {e}") from e


def _sector_spectra(m: ModelParams, n_max: int, threads: int):
    matrices = [build_sector_matrix(m, r, n_max) for r in SECTORS]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        solved = list(pool.map(_solve_sector, matrices))
    return matrices, solved


def diagonalize(m: ModelParams, n_max: Optional[int] = None, check_convergence: bool = False,
                threads: int = 1) -> QuasienergySpectrum:
    """
    Eigenvalues and eigenvectors of g in the three symmetry sectors. The sector label k
    equals the Fock residue, since exp(-2 pi i a^+a / 3)|n> = exp(-2 pi i n / 3)|n>.

    :param n_max: Fock truncation, recommended_n_max() when omitted
    :param check_convergence: repeat with 2*n_max and record the largest shift of the
        levels below the saddle
    """
    if n_max is None:
        n_max = recommended_n_max(m)
    matrices, solved = _sector_spectra(m, n_max, threads)
    delta = None
    if check_convergence:
        _, doubled = _sector_spectra(m, 2 * n_max, threads)
        fp = fixed_points(m)
        cut = fp.g_s if fp.wells_exist else 0.25
        delta = 0.0
        for (w, _), (w2, _) in zip(solved, doubled):
            below = w[w < cut]
            if len(below):
                delta = max(delta, float(np.max(np.abs(below - w2[:len(below)]))))
        if delta > 1e-10:
            logger.warning(f"levels below the saddle moved by {delta:.3g} when doubling n_max={n_max}")
        else:
            logger.debug(f"truncation n_max={n_max} converged, max shift {delta:.3g}")
    return QuasienergySpectrum(m=m, n_max=n_max,
                               values=tuple(w for w, _ in solved),
                               vectors=tuple(v for _, v in solved),
                               fock=tuple(sm.fock for sm in matrices),
                               truncation_ok=all(sm.truncation_ok for sm in matrices),
                               convergence_delta=delta)


def lab_levels(spec: QuasienergySpectrum, p: PhysicalParams) -> Tuple[np.ndarray, ...]:
    return tuple(lab_quasienergy(spec.values[k], k, p, spec.m.lam) for k in SECTORS)


def group_by_proximity(levels: List[np.ndarray]) -> Tuple[np.ndarray, List[float]]:
    """
    Walk the pooled ascending levels of the three sectors and take every run of three
    consecutive levels, one from each sector and spread less than the gap to the next
    level, as a triplet.

    :return: per-sector eigenvalue indices of shape (n_triplets, 3) and the levels that
             fit in no triplet
    """
    pool = sorted((float(v), k, i) for k in SECTORS for i, v in enumerate(levels[k]))
    triplets = []
    unpaired = []
    p = 0
    while p < len(pool):
        window = pool[p:p + 3]
        gap = pool[p + 3][0] - window[-1][0] if p + 3 < len(pool) else math.inf
        complete = len(window) == 3 and {k for _, k, _ in window} == set(SECTORS)
        if complete and window[-1][0] - window[0][0] < gap:
            index = [0, 0, 0]
            for _, k, i in window:
                index[k] = i
            triplets.append(index)
            p += 3
        else:
            unpaired.append(pool[p][0])
            p += 1
    return np.array(triplets, dtype=int).reshape(-1, 3), unpaired


def classify_triplets(spec: QuasienergySpectrum, g_s: Optional[float] = None) -> TripletTable:
    """
    Group the below-saddle levels of the three sectors into triplets by sorted proximity.

    Triplets whose mean lies within GUARD_SPACINGS local spacings of g_s, or whose internal
    spread is not small against the neighbouring gaps, are excluded together with every
    triplet above them.
    """
    if g_s is None:
        fp = fixed_points(spec.m)
        if not fp.wells_exist:
            raise ParameterError(f"no wells to classify for f={spec.m.f}")
        g_s = fp.g_s
    levels = [vals[vals < g_s] for vals in spec.values]
    indices, unpaired = group_by_proximity(levels)
    n = len(indices)
    if n == 0:
        return TripletTable(g_s=g_s, means=np.empty(0), deviations=np.empty((0, 3)),
                            splittings=np.empty(0), indices=indices, excluded=tuple(unpaired))
    trios = np.array([[levels[k][row[k]] for k in SECTORS] for row in indices])
    means = trios.mean(axis=1)
    deviations = trios - means[:, None]
    splittings = np.ptp(trios, axis=1)

    keep = n
    for i in range(n):
        gap_below = means[i] - means[i - 1] if i > 0 else np.inf
        gap_above = means[i + 1] - means[i] if i + 1 < n else g_s - means[i]
        spacing = gap_below if i > 0 else gap_above
        if means[i] > g_s - GUARD_SPACINGS * spacing or splittings[i] >= 0.5 * min(gap_below, gap_above):
            keep = i
            break
    if keep and unpaired and min(unpaired) < means[keep - 1]:
        logger.warning(f"levels {[round(v, 6) for v in unpaired if v < means[keep - 1]]} "
                       f"below g_s={g_s:.6f} belong to no triplet")
    excluded = tuple(float(v) for v in means[keep:]) + tuple(unpaired)
    if excluded:
        logger.info(f"{len(excluded)} levels near g_s={g_s:.6f} left out of the triplet table")
    return TripletTable(g_s=g_s, means=means[:keep], deviations=deviations[:keep],
                        splittings=splittings[:keep], indices=indices[:keep], excluded=excluded,
                        count_below_saddle=n)


'''
WANNIER STATES
'''


def sector_weight_operator(n_fock: int, half_angle: float = math.pi / 3.0) -> np.ndarray:
    """
    Coherent-state projector onto the phase-plane sector |arg alpha| < half_angle:
    (1/pi) times the integral of |alpha><alpha| over the sector, in the Fock basis.
    """
    n = np.arange(n_fock, dtype=float)
    mm, nn = np.meshgrid(n, n, indexing='ij')
    d = mm - nn
    with np.errstate(divide='ignore', invalid='ignore'):
        angular = np.where(d == 0, 2.0 * half_angle, 2.0 * np.sin(d * half_angle) / np.where(d == 0, 1.0, d))
    radial = np.exp(gammaln((mm + nn) / 2.0 + 1.0) - 0.5 * gammaln(mm + 1.0) - 0.5 * gammaln(nn + 1.0))
    return radial * angular / (2.0 * math.pi)


def well_weight(vector: np.ndarray, weight_op: np.ndarray) -> float:
    """Husimi weight of a state inside the sector of weight_op."""
    return float(np.real(np.conj(vector) @ weight_op @ vector))


def build_wannier(spec: QuasienergySpectrum, table: Optional[TripletTable] = None) -> WannierBasis:
    """
    Localised states psi_nu = 3^-1/2 sum_k phi_k exp(2 pi i nu k / 3) for every retained
    triplet. The signs of the real sector states phi_k are fixed so that their overlaps
    inside the well-0 sector are positive.
    """
    if table is None:
        table = classify_triplets(spec)
    n_levels = len(table)
    weight_op = sector_weight_operator(spec.n_fock)
    phases = np.exp(1j * TWO_PI_OVER_3 * np.outer(SECTORS, SECTORS))
    vectors = np.zeros((3, n_levels, spec.n_fock), dtype=complex)
    for i in range(n_levels):
        phis = [spec.full_vector(k, int(table.indices[i, k])) for k in SECTORS]
        for k in (1, 2):
            overlap = phis[0] @ weight_op @ phis[k]
            if abs(overlap) < 1e-3:
                raise NumericalError(f"sign of sector {k} ambiguous for level {i} "
                                     f"(g={table.means[i]:.6f}, well-0 overlap {overlap:.3g})")
            if overlap < 0:
                phis[k] = -phis[k]
        stacked = np.array(phis)
        psi0 = stacked.sum(axis=0)
        if psi0[np.argmax(np.abs(psi0))] < 0:
            stacked = -stacked
        vectors[:, i, :] = phases @ stacked / math.sqrt(3.0)
    logger.debug(f"built {n_levels} Wannier triplets at n_max={spec.n_max}")
    return WannierBasis(g=table.means.copy(), vectors=vectors, n_max=spec.n_max, table=table)


def rotation_operator(n_fock: int) -> np.ndarray:
    """Diagonal of exp(-2 pi i a^+a / 3)."""
    return np.exp(-1j * TWO_PI_OVER_3 * np.arange(n_fock))


def lowering_elements(wb: WannierBasis) -> np.ndarray:
    """
    Matrix L[n', n] = <n'|a|n> between the well-0 states.
    """
    psi = wb.vectors[0]
    lowered = np.zeros_like(psi)
    lowered[:, :-1] = psi[:, 1:] * np.sqrt(np.arange(1, psi.shape[1]))
    elements = np.conj(psi) @ lowered.T
    if np.max(np.abs(elements.imag)) < 1e-12 * max(1.0, np.max(np.abs(elements.real))):
        return elements.real
    return elements


def splitting_exponent(m: ModelParams, g: float) -> float:
    """
    S_tun(g)/lambda: the tunnel splitting of a level at g falls off as exp(-S_tun/lambda).
    """
    return tunneling_action(m, g) / m.lam
