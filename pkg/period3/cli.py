"""
Dissipative kinetics of a period-tripling driven oscillator

Usage:
floquet-tripling (spectrum|orbits|kinetics|escape|bifurcation) [options]
floquet-tripling figure <id> [options]
floquet-tripling sweep <operation> [options]

Options:
-h --help                                  Show this screen.
-c PATH --config=PATH                      key = value configuration file
-o DIR --out=DIR                           Output directory for CSV files
-s SEED --seed=SEED                        Seed of the random number generator
--f=F                                      Scaled drive amplitude
--lambda=LAMBDA                            Scaled Planck constant
--kappa=KAPPA                              Scaled decay rate
--nbar=NBAR                                Thermal Planck number
--sign-delta=SIGN                          Sign of the detuning, 1 or -1
--n-max=N                                  Fock truncation
--g-points=N                               Number of quasienergies in a well grid
--f-grid=GRID                              Grid of f, "a,b,c" or "start:stop:num"
--nbar-grid=GRID                           Grid of nbar
--kappa-grid=GRID                          Grid of kappa
--n-traj=N                                 Number of escape trajectories
--dt=DT                                    Integration step of the Langevin equations
-d --debug                                 Debug logging

Environment:
TRIPLING_<KEY> sets any configuration key, TRIPLING_THREADS the sweep thread count.
"""
import logging
import math
import sys
from typing import Dict, List, Optional

import numpy as np
from docopt import docopt

from period3.config import RunConfig, parse_config
from period3.datasets import Dataset, provenance, write_csv
from period3.figures import run_figure
from period3.sweep import run_sweep, sweep_threads
from tripling import bifurcation, kinetics, orbits, spectrum
from tripling.errors import ConfigError, NumericalError, ParameterError
from tripling.model import require_wells
from tripling.utils import g_from_delta

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

DEFAULT_G_POINTS = 40

# docopt option -> configuration key
FLAGS = {
    '--out': 'out', '--seed': 'seed', '--f': 'f', '--lambda': 'lambda', '--kappa': 'kappa', '--nbar': 'nbar',
    '--sign-delta': 'sign_delta', '--n-max': 'n_max', '--g-points': 'g_points', '--f-grid': 'f_grid',
    '--nbar-grid': 'nbar_grid', '--kappa-grid': 'kappa_grid', '--n-traj': 'n_traj', '--dt': 'dt',
}


def _g_points(cfg: RunConfig) -> int:
    return cfg.g_points or DEFAULT_G_POINTS


def _well_grid(cfg: RunConfig, m) -> np.ndarray:
    fp = require_wells(m)
    return np.array([g_from_delta(d, fp.g_min, fp.g_s) for d in np.linspace(0.02, 0.98, _g_points(cfg))])


def run_spectrum(cfg: RunConfig, threads: int) -> List[Dataset]:
    m = cfg.model()
    spec = spectrum.diagonalize(m, n_max=cfg.n_max, check_convergence=True, threads=threads)
    levels = [(k, i, g) for k in spectrum.SECTORS for i, g in enumerate(spec.values[k])]
    table = spectrum.classify_triplets(spec)
    triplets = [(i, mean, split, spectrum.splitting_exponent(m, float(mean)))
                for i, (mean, split) in enumerate(zip(table.means, table.splittings))]
    print(f"n_max={spec.n_max} truncation_ok={spec.truncation_ok} shift on doubling={spec.convergence_delta:.3g}")
    print(f"{table.count_below_saddle} triplets below g_s={table.g_s:.6f}, {len(table)} triplets kept")
    return [Dataset('spectrum', ('sector', 'index', 'g'), levels),
            Dataset('triplets', ('index', 'g_mean', 'splitting', 'splitting_exponent'), triplets)]


def run_orbits(cfg: RunConfig, threads: int) -> List[Dataset]:
    m = cfg.model()
    rows = []
    for g in _well_grid(cfg, m):
        orbit = orbits.orbit_solve(m, float(g))
        data = orbits.tunneling_data(m, float(g))
        moments = orbits.orbit_moments(orbit, m)
        rows.append((g, orbit.omega, data.tau_inf, data.tau_tun, data.S_tun, moments.area / (2.0 * math.pi),
                     float(data.closest_singularity_ok)))
    ds = Dataset('orbits', ('g', 'omega', 'tau_inf', 'tau_tun', 'S_tun', 'action', 'closest_singularity_ok'), rows)
    print(f"{len(rows)} orbits, omega in [{ds.column('omega').min():.6f}, {ds.column('omega').max():.6f}]")
    return [ds]


def run_kinetics(cfg: RunConfig, threads: int) -> List[Dataset]:
    m = cfg.model()
    eik = kinetics.eikonal_solve(m, _well_grid(cfg, m), threads=threads)
    eikonal = Dataset('eikonal', ('g', 'Rprime', 'xi', 'R', 'local', 'omega', 'tau_inf'),
                      np.column_stack((eik.g, eik.Rprime, eik.xi, eik.R, eik.local, eik.omega, eik.tau_inf)))
    spec = spectrum.diagonalize(m, n_max=cfg.n_max, threads=threads)
    wb = spectrum.build_wannier(spec, spectrum.classify_triplets(spec))
    rates = kinetics.quantum_rate_matrix(wb, m)
    sd = kinetics.stationary_solve(rates)
    cycles = kinetics.detailed_balance_residual(rates, seed=cfg.seed)
    wannier = Dataset('wannier', ('g', 'rho', 'R', 'Rprime'), np.column_stack((sd.g, sd.rho, sd.R, sd.Rprime)))
    act = kinetics.activation_energy(m, grid_points=_g_points(cfg), threads=threads)
    report = kinetics.detect_nonlocality(m, threads=threads)
    print(f"R_A={act.R_A:.6g} (R' < 2|tau_tun|: {act.condition_ok}), splice at g={act.splice_g}")
    print(f"locality lost at delta_g={report.delta_g_NL}; detailed balance violation {cycles.max_violation:.3g}")
    return [eikonal, wannier]


def run_escape(cfg: RunConfig, threads: int) -> List[Dataset]:
    m = cfg.model()
    bd = bifurcation.slow_mode_reduction(m)
    kappa = m.kappa
    dt = min(cfg.dt, bifurcation.max_step(kappa))
    stats = bifurcation.simulate_slow_mode(bd, m, kappa, seed=cfg.seed, n_traj=cfg.n_traj, dt=dt, threads=threads)
    noise = m.lam * kappa * (2.0 * m.nbar + 1.0)
    exact = bifurcation.mfpt_quadrature(bd.a_B, bd.b_B, kappa - bd.kappa_B, noise)
    comparison = bifurcation.kramers_barrier_ratio(bd, m, kappa)
    print(f"MFPT {stats.mfpt:.6g} +- {stats.stderr:.2g} ({stats.escaped}/{stats.n_traj} escaped), "
          f"quadrature {exact:.6g}, ln W={comparison.exponent:.6g}")
    return [Dataset('escape', ('kappa', 'kappa_B', 'mfpt', 'stderr', 'escaped', 'mfpt_quadrature', 'exponent',
                               'barrier_over_noise'),
                    [(kappa, bd.kappa_B, stats.mfpt, stats.stderr, stats.escaped, exact, comparison.exponent,
                      comparison.barrier_over_noise)])]


def run_bifurcation(cfg: RunConfig, threads: int) -> List[Dataset]:
    m = cfg.model()
    bp = bifurcation.bifurcation_point(m)
    bd = bifurcation.slow_mode_reduction(m)
    states = bifurcation.classical_fixed_points(m)
    rows = [(0, s.Q, s.P, float(s.stable)) for s in (states.origin,)]
    rows += [(1, s.Q, s.P, float(s.stable)) for s in states.stable]
    rows += [(2, s.Q, s.P, float(s.stable)) for s in states.saddles]
    print(f"kappa_B={bp.kappa_B:.6g} f_B={bp.f_B:.6g} r_B={bp.r_B:.6g}; a_B={bd.a_B:.6g} b_B={bd.b_B:.6g}")
    print(f"{len(states.stable)} period-three states at kappa={m.kappa}")
    return [Dataset('bifurcation', ('kappa_B', 'f_B', 'r_B', 'ftilde_sq', 'a_B', 'b_B', 'k_ad', 'phi_B'),
                    [(bp.kappa_B, bp.f_B, bp.r_B, bp.ftilde_sq, bd.a_B, bd.b_B, bd.k_ad, bd.phi_B)]),
            Dataset('states', ('kind', 'Q', 'P', 'stable'), rows, units='kind: 0 origin, 1 stable, 2 saddle')]


COMMANDS = {
    'spectrum': run_spectrum,
    'orbits': run_orbits,
    'kinetics': run_kinetics,
    'escape': run_escape,
    'bifurcation': run_bifurcation,
}


def _flags(args: Dict) -> Dict[str, object]:
    return {key: args[option] for option, key in FLAGS.items() if args.get(option) is not None}


def _write(datasets: List[Dataset], cfg: RunConfig, command: str):
    for ds in datasets:
        if not ds.provenance:
            ds = Dataset(ds.name, ds.columns, ds.rows, ds.units, provenance(command, cfg.as_dict()))
        write_csv(ds, cfg.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = docopt(__doc__, argv=argv)
    logging.basicConfig(level=logging.INFO)
    if args['--debug']:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        flags = _flags(args)
        if args['figure']:
            flags['figure'] = args['<id>']
        if args['sweep']:
            flags['operation'] = args['<operation>']
        cfg = parse_config(args['--config'], flags)
    except ConfigError:
        logger.exception("invalid configuration")
        return EXIT_CONFIG

    try:
        threads = sweep_threads()
        if args['figure']:
            _write(run_figure(cfg.figure, cfg, threads=threads), cfg, f"figure {cfg.figure}")
            return EXIT_OK
        if args['sweep']:
            ds, failed = run_sweep(cfg.operation, cfg, threads=threads)
            _write([ds], cfg, f"sweep {cfg.operation}")
            print(f"{len(ds.rows) - failed} of {len(ds.rows)} points done")
            return EXIT_PARTIAL if failed else EXIT_OK
        command = next(name for name in COMMANDS if args[name])
        _write(COMMANDS[command](cfg, threads), cfg, command)
        return EXIT_OK
    except ConfigError:
        logger.exception("invalid configuration")
        return EXIT_CONFIG
    except (ParameterError, NumericalError):
        logger.exception("computation failed")
        return EXIT_NUMERIC


def execute_from_command_line():
    sys.exit(main())


if __name__ == '__main__':
    execute_from_command_line()
