"""
Cartesian parameter sweeps calling one named operation per point.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Sequence, Tuple

from period3.config import DEFAULT_KAPPA, RunConfig
from period3.datasets import Dataset, provenance
from tripling import bifurcation, kinetics, orbits
from tripling.errors import ConfigError, TriplingError
from tripling.model import ModelParams, require_wells
from tripling.utils import g_from_delta, grid_points

logger = logging.getLogger(__name__)

THREADS_ENV = 'TRIPLING_THREADS'
GRID_KEYS = ('f', 'nbar', 'kappa')
MID_WELL = 0.5


def sweep_threads() -> int:
    value = os.environ.get(THREADS_ENV, '1')
    try:
        threads = int(value)
    except ValueError as e:
        raise ConfigError(ConfigError.PARSE, f"{THREADS_ENV}={value} is not an integer") from e
    return max(1, threads)


def _activation_energy(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    act = kinetics.activation_energy(m, grid_points=cfg.g_points or 40)
    return act.R_A, float(act.condition_ok)


def _detect_nonlocality(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    report = kinetics.detect_nonlocality(m)
    if report.g_NL is None:
        return math.nan, math.nan
    return report.g_NL, report.delta_g_NL


def _harmonic_distribution(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    hd = kinetics.harmonic_distribution(m)
    return hd.n_eff, hd.ratio


def _bifurcation_point(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    bp = bifurcation.bifurcation_point(m)
    return bp.kappa_B, bp.f_B, bp.r_B, bp.ftilde_sq


def _kramers_exponent(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    bd = bifurcation.slow_mode_reduction(m)
    comparison = bifurcation.kramers_barrier_ratio(bd, m, m.kappa)
    return comparison.exponent, comparison.barrier_over_noise, comparison.ratio


def _simulate_slow_mode(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    bd = bifurcation.slow_mode_reduction(m)
    stats = bifurcation.simulate_slow_mode(bd, m, m.kappa, seed=cfg.seed, n_traj=cfg.n_traj,
                                           dt=min(cfg.dt, bifurcation.max_step(m.kappa)))
    return stats.mfpt, stats.stderr, float(stats.escaped)


def _tau_tunnel(m: ModelParams, cfg: RunConfig) -> Tuple[float, ...]:
    """Values at the middle of the well depth."""
    fp = require_wells(m)
    data = orbits.tunneling_data(m, g_from_delta(MID_WELL, fp.g_min, fp.g_s))
    return data.tau_inf, data.tau_tun, data.S_tun


# name -> (result columns, operation)
OPERATIONS: Dict[str, Tuple[Sequence[str], Callable[[ModelParams, RunConfig], Tuple[float, ...]]]] = {
    'activation_energy': (('R_A', 'condition_ok'), _activation_energy),
    'detect_nonlocality': (('g_NL', 'delta_g_NL'), _detect_nonlocality),
    'harmonic_distribution': (('n_eff', 'ratio'), _harmonic_distribution),
    'bifurcation_point': (('kappa_B', 'f_B', 'r_B', 'ftilde_sq'), _bifurcation_point),
    'kramers_exponent': (('exponent', 'barrier_over_noise', 'ratio'), _kramers_exponent),
    'simulate_slow_mode': (('mfpt', 'stderr', 'escaped'), _simulate_slow_mode),
    'tau_tunnel': (('tau_inf', 'tau_tun', 'S_tun'), _tau_tunnel),
}


def _axis(cfg: RunConfig, key: str, default: float) -> List[float]:
    grid = getattr(cfg, f"{key}_grid")
    if grid is not None:
        return list(grid)
    single = getattr(cfg, key)
    return [single if single is not None else default]


def sweep_points(cfg: RunConfig) -> List[Dict[str, float]]:
    if cfg.f_grid is None and cfg.f is None:
        raise ConfigError(ConfigError.MISSING, "sweep needs f or f_grid")
    axes = {'f': _axis(cfg, 'f', math.nan), 'nbar': _axis(cfg, 'nbar', 0.0),
            'kappa': _axis(cfg, 'kappa', DEFAULT_KAPPA)}
    return list(grid_points(axes))


def run_sweep(operation: str, cfg: RunConfig, threads: int = 1) -> Tuple[Dataset, int]:
    """
    Evaluate an operation of OPERATIONS at every (f, nbar, kappa) point. A point that
    raises gets ok = 0 and NaN results; the other points are unaffected.

    :return: the dataset and the number of failed points
    """
    if operation not in OPERATIONS:
        raise ConfigError(ConfigError.RANGE,
                          f"unknown operation '{operation}', expected one of {', '.join(OPERATIONS)}")
    if cfg.lam is None:
        raise ConfigError(ConfigError.MISSING, "sweep needs lambda")
    columns, func = OPERATIONS[operation]
    points = sweep_points(cfg)
    logger.info(f"sweep of {operation} over {len(points)} points with {threads} thread(s)")

    def evaluate(point: Dict[str, float]) -> Tuple[float, ...]:
        try:
            m = ModelParams(lam=cfg.lam, sign_delta=cfg.sign_delta, **point)
            values = tuple(float(v) for v in func(m, cfg))
            return (1.0,) + values
        except TriplingError as e:
            logger.info(f"{operation} failed at {point}: {e}")
            return (0.0,) + (math.nan,) * len(columns)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, points))
    else:
        results = [evaluate(p) for p in points]

    rows = [tuple(p[k] for k in GRID_KEYS) + r for p, r in zip(points, results)]
    failed = sum(1 for r in results if r[0] == 0.0)
    if failed:
        logger.warning(f"{failed} of {len(points)} sweep points failed")
    header = provenance(f"sweep {operation}", {**cfg.as_dict(), 'operation': operation})
    return Dataset(f"sweep_{operation}", GRID_KEYS + ('ok',) + tuple(columns), rows, provenance=header), failed
