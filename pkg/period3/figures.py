"""
Datasets behind each figure, one CSV per curve family.

Parameters a figure needs come from the RunConfig when set there and from
FIGURE_DEFAULTS otherwise.
"""
import logging
import math
from typing import Callable, Dict, List

import numpy as np

from period3.config import DEFAULT_KAPPA, RunConfig
from period3.datasets import Dataset, provenance
from tripling import bifurcation, kinetics, orbits, spectrum
from tripling.errors import ConfigError, NumericalError, ParameterError
from tripling.model import ModelParams, fixed_points, require_wells
from tripling.utils import delta_g, g_from_delta

logger = logging.getLogger(__name__)

FIGURE_DEFAULTS = {
    'fig1d': dict(f_grid=[round(0.05 * i, 2) for i in range(41)], lam=0.04, window=0.3),
    'fig3': dict(f_grid=[0.1, 0.5, 2.0], g_points=25),
    'fig4': dict(f_grid=list(np.linspace(0.05, 2.0, 40)), nbar_grid=[0.0, 0.01, 0.1, 1.0],
                 dots_every=4, dots_delta_g=1e-4),
    'fig5': dict(f_grid=[0.1, 0.5, 2.0], nbar_grid=[0.0], g_points=25),
    'fig6': dict(f_grid=list(np.linspace(0.1, 2.0, 20)), nbar_grid=[0.0]),
    'fig7': dict(f_grid=[0.5], lam=0.004, nbar_grid=[0.0, 0.1], g_points=30),
    'fig8': dict(f_grid=[0.1, 0.5, 2.0], g_points=20),
    'fig9': dict(f_grid=[0.25, 0.5, 1.0, 2.0], lam=0.004, nbar_grid=[0.01, 0.1, 1.0], g_points=30),
    'fig10': dict(f_grid=[0.5], lam=0.004, nbar_grid=[0.0, 0.05]),
    'fig11': dict(f_grid=[1.0], kappa=0.5),
    'fig12': dict(f_grid=[0.5], g=-0.1, lam=0.004, m_max=25),
    'fig13': dict(kappa_grid=list(np.linspace(0.05, 5.0, 100))),
    'fig14': dict(f_grid=[0.1, 2.0], nbar_grid=[1.0], g_points=25),
}

DEFAULT_LAMBDA = 0.004


def _param(cfg: RunConfig, figure_id: str, name: str):
    value = getattr(cfg, name, None)
    return value if value is not None else FIGURE_DEFAULTS[figure_id].get(name)


def _grid(cfg: RunConfig, figure_id: str, name: str) -> List[float]:
    """Grid from <name>_grid, a single <name> value, or the figure default."""
    grid = getattr(cfg, f"{name}_grid")
    if grid is not None:
        return list(grid)
    single = getattr(cfg, name)
    if single is not None:
        return [single]
    return list(FIGURE_DEFAULTS[figure_id].get(f"{name}_grid", []))


def _model(cfg: RunConfig, figure_id: str, f: float, nbar: float = 0.0) -> ModelParams:
    lam = _param(cfg, figure_id, 'lam') or DEFAULT_LAMBDA
    kappa = _param(cfg, figure_id, 'kappa') or DEFAULT_KAPPA
    return ModelParams(f=f, lam=lam, kappa=kappa, nbar=nbar, sign_delta=cfg.sign_delta)


def _well_grid(m: ModelParams, points: int, lo: float = 0.02, hi: float = 0.98):
    fp = require_wells(m)
    dgs = np.linspace(lo, hi, points)
    return dgs, np.array([g_from_delta(d, fp.g_min, fp.g_s) for d in dgs])


def fig1d(cfg: RunConfig, threads: int) -> List[Dataset]:
    window = FIGURE_DEFAULTS['fig1d']['window']
    rows = []
    for f in _grid(cfg, 'fig1d', 'f'):
        m = _model(cfg, 'fig1d', f)
        spec = spectrum.diagonalize(m, n_max=cfg.n_max, threads=threads)
        for k in spectrum.SECTORS:
            for i, g in enumerate(spec.values[k]):
                if g < window:
                    rows.append((f, k, i, g))
    return [Dataset('fig1d', ('f', 'sector', 'index', 'g'), rows)]


def fig3(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    points = _param(cfg, 'fig3', 'g_points')
    for f in _grid(cfg, 'fig3', 'f'):
        m = _model(cfg, 'fig3', f)
        for d, g in zip(*_well_grid(m, points)):
            orbit = orbits.orbit_solve(m, g)
            tau_inf = orbits.tau_infinity(m, g, orbit.turning)
            rows.append((f, d, g, orbit.omega, tau_inf, orbit.omega * tau_inf))
    return [Dataset('fig3', ('f', 'delta_g', 'g', 'omega', 'tau_inf', 'omega_tau_inf'), rows)]


def fig4(cfg: RunConfig, threads: int) -> List[Dataset]:
    defaults = FIGURE_DEFAULTS['fig4']
    f_grid = _grid(cfg, 'fig4', 'f')
    rows, dots = [], []
    for nbar in _grid(cfg, 'fig4', 'nbar'):
        for f in f_grid:
            m = _model(cfg, 'fig4', f, nbar)
            if not fixed_points(m).wells_exist:
                continue
            hd = kinetics.harmonic_distribution(m)
            rows.append((nbar, f, hd.n_eff, hd.ratio))
        for f in f_grid[::defaults['dots_every']]:
            m = _model(cfg, 'fig4', f, nbar)
            if not fixed_points(m).wells_exist:
                continue
            fp = require_wells(m)
            eik = kinetics.eikonal_solve(m, [g_from_delta(defaults['dots_delta_g'], fp.g_min, fp.g_s)])
            dots.append((nbar, f, eik.Rprime[0] * eik.omega[0]))
    return [Dataset('fig4', ('nbar', 'f', 'n_eff', 'inverse_temperature'), rows),
            Dataset('fig4_eikonal', ('nbar', 'f', 'inverse_temperature'), dots)]


def fig5(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    points = _param(cfg, 'fig5', 'g_points')
    for nbar in _grid(cfg, 'fig5', 'nbar'):
        for f in _grid(cfg, 'fig5', 'f'):
            m = _model(cfg, 'fig5', f, nbar)
            dgs, gs = _well_grid(m, points)
            eik = kinetics.eikonal_solve(m, gs, threads=threads)
            margin = 2.0 * eik.omega * eik.tau_inf + np.log(eik.xi)
            rows += [(nbar, f, d, g, mm) for d, g, mm in zip(dgs, gs, margin)]
    return [Dataset('fig5', ('nbar', 'f', 'delta_g', 'g', 'locality_margin'), rows)]


def fig6(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    for nbar in _grid(cfg, 'fig6', 'nbar'):
        for f in _grid(cfg, 'fig6', 'f'):
            report = kinetics.detect_nonlocality(_model(cfg, 'fig6', f, nbar), threads=threads)
            rows.append((nbar, f, report.delta_g_NL if report.delta_g_NL is not None else math.nan))
    return [Dataset('fig6', ('nbar', 'f', 'delta_g_NL'), rows)]


def fig7(cfg: RunConfig, threads: int) -> List[Dataset]:
    eikonal_rows, wannier_rows = [], []
    points = _param(cfg, 'fig7', 'g_points')
    for nbar in _grid(cfg, 'fig7', 'nbar'):
        for f in _grid(cfg, 'fig7', 'f'):
            m = _model(cfg, 'fig7', f, nbar)
            fp = require_wells(m)
            dgs, gs = _well_grid(m, points)
            eik = kinetics.eikonal_solve(m, gs, threads=threads)
            # the eikonal curve ends at the first nonlocal point
            stop = int(np.argmin(eik.local)) if not np.all(eik.local) else len(gs)
            eikonal_rows += [(nbar, f, dgs[i], eik.Rprime[i], 2.0 * eik.tau_inf[i]) for i in range(stop)]
            spec = spectrum.diagonalize(m, n_max=cfg.n_max, threads=threads)
            wb = spectrum.build_wannier(spec, spectrum.classify_triplets(spec))
            sd = kinetics.stationary_solve(kinetics.quantum_rate_matrix(wb, m))
            for g, rp in zip(wb.g, sd.Rprime):
                if np.isfinite(rp):
                    wannier_rows.append((nbar, f, delta_g(g, fp.g_min, fp.g_s), rp,
                                         2.0 * orbits.tau_infinity(m, float(g))))
    columns = ('nbar', 'f', 'delta_g', 'Rprime', 'two_tau_inf')
    return [Dataset('fig7_eikonal', columns, eikonal_rows), Dataset('fig7_wannier', columns, wannier_rows)]


def fig8(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    points = _param(cfg, 'fig8', 'g_points')
    for f in _grid(cfg, 'fig8', 'f'):
        m = _model(cfg, 'fig8', f)
        for d, g in zip(*_well_grid(m, points)):
            data = orbits.tunneling_data(m, g)
            rows.append((f, d, data.tau_inf, abs(data.tau_tun)))
    return [Dataset('fig8', ('f', 'delta_g', 'tau_inf', 'abs_tau_tun'), rows)]


def fig9(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    points = _param(cfg, 'fig9', 'g_points')
    for nbar in _grid(cfg, 'fig9', 'nbar'):
        for f in _grid(cfg, 'fig9', 'f'):
            m = _model(cfg, 'fig9', f, nbar)
            act = kinetics.activation_energy(m, grid_points=points, threads=threads)
            classical = kinetics.classical_activation_energy(m, grid_points=points)
            rows.append((nbar, f, act.R_A, float(act.condition_ok), classical))
    return [Dataset('fig9', ('nbar', 'f', 'R_A', 'condition_ok', 'R_A_classical'), rows)]


def fig10(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    for nbar in _grid(cfg, 'fig10', 'nbar'):
        for f in _grid(cfg, 'fig10', 'f'):
            m = _model(cfg, 'fig10', f, nbar)
            spec = spectrum.diagonalize(m, n_max=cfg.n_max, threads=threads)
            wb = spectrum.build_wannier(spec, spectrum.classify_triplets(spec))
            W = kinetics.quantum_rate_matrix(wb, m)
            flux = kinetics.flux_matrix(kinetics.stationary_solve(W).rho, W)
            for n_from in range(W.size):
                for n_to in range(W.size):
                    if n_from != n_to:
                        rows.append((nbar, f, n_from, n_to, wb.g[n_from], wb.g[n_to], flux[n_from, n_to]))
    return [Dataset('fig10', ('nbar', 'f', 'n_from', 'n_to', 'g_from', 'g_to', 'flux'), rows)]


def fig11(cfg: RunConfig, threads: int) -> List[Dataset]:
    f = _grid(cfg, 'fig11', 'f')[0]
    kappa = _param(cfg, 'fig11', 'kappa')
    m = _model(cfg, 'fig11', f)
    states = bifurcation.classical_fixed_points(m, kappa)
    rows = []
    for i, branch in enumerate(bifurcation.separatrices(m, kappa)):
        rows += [(i, q, p) for q, p in zip(branch[0], branch[1])]
    points = [(0, states.origin.Q, states.origin.P)]
    points += [(1, s.Q, s.P) for s in states.stable] + [(2, s.Q, s.P) for s in states.saddles]
    return [Dataset('fig11', ('branch', 'Q', 'P'), rows),
            Dataset('fig11_states', ('kind', 'Q', 'P'), points, units='kind: 0 origin, 1 stable, 2 saddle')]


def fig12(cfg: RunConfig, threads: int) -> List[Dataset]:
    defaults = FIGURE_DEFAULTS['fig12']
    f = _grid(cfg, 'fig12', 'f')[0]
    m = _model(cfg, 'fig12', f)
    g = defaults['g']
    orbit = orbits.orbit_solve(m, g)
    tau_inf = orbits.tau_infinity(m, g, orbit.turning)
    table = orbits.fourier_coefficients(orbit, m.lam)
    rows = []
    for mm in range(-defaults['m_max'], defaults['m_max'] + 1):
        if mm == 0:
            continue
        value, _ = orbits.asymptotic_elements(m, g, m.lam, mm, omega=orbit.omega, tau_inf=tau_inf)
        rows.append((mm, abs(table.coefficient(mm)), value))
    return [Dataset('fig12', ('m', 'abs_a_numeric', 'abs_a_asymptotic'), rows)]


def fig13(cfg: RunConfig, threads: int) -> List[Dataset]:
    inv_kappa, ftilde = bifurcation.bifurcation_curve(_grid(cfg, 'fig13', 'kappa'), cfg.sign_delta)
    return [Dataset('fig13', ('inv_kappa', 'ftilde_sq_B'), np.column_stack((inv_kappa, ftilde)))]


def fig14(cfg: RunConfig, threads: int) -> List[Dataset]:
    rows = []
    points = _param(cfg, 'fig14', 'g_points')
    for nbar in _grid(cfg, 'fig14', 'nbar'):
        for f in _grid(cfg, 'fig14', 'f'):
            m = _model(cfg, 'fig14', f, nbar)
            fp = require_wells(m)
            dgs, gs = _well_grid(m, points)
            eik = kinetics.eikonal_solve(m, gs, threads=threads)
            classical = np.array([kinetics.classical_limit(m, float(g)) for g in gs])
            r_classical = np.concatenate(([0.0], np.cumsum(0.5 * (classical[1:] + classical[:-1]) * np.diff(gs))))
            r_classical += classical[0] * (gs[0] - fp.g_min)
            rows += [(nbar, f, d, a, b, c, e) for d, a, b, c, e in
                     zip(dgs, eik.Rprime, classical, eik.R, r_classical)]
    return [Dataset('fig14', ('nbar', 'f', 'delta_g', 'Rprime_eikonal', 'Rprime_classical', 'R_eikonal',
                              'R_classical'), rows)]


FIGURES: Dict[str, Callable[[RunConfig, int], List[Dataset]]] = {
    'fig1d': fig1d, 'fig3': fig3, 'fig4': fig4, 'fig5': fig5, 'fig6': fig6, 'fig7': fig7, 'fig8': fig8,
    'fig9': fig9, 'fig10': fig10, 'fig11': fig11, 'fig12': fig12, 'fig13': fig13, 'fig14': fig14,
}


def figure_by_id(figure_id: str) -> Callable[[RunConfig, int], List[Dataset]]:
    if figure_id not in FIGURES:
        raise ConfigError(ConfigError.RANGE,
                          f"unknown figure '{figure_id}', expected one of {', '.join(FIGURES)}")
    return FIGURES[figure_id]


def run_figure(figure_id: str, cfg: RunConfig, threads: int = 1) -> List[Dataset]:
    build = figure_by_id(figure_id)
    logger.info(f"building {figure_id}")
    try:
        datasets = build(cfg, threads)
    except (ParameterError, NumericalError) as e:
        raise type(e)(f"{figure_id}: {e}") from e
    header = provenance(f"figure {figure_id}", cfg.as_dict())
    return [Dataset(ds.name, ds.columns, ds.rows, ds.units, header) for ds in datasets]
