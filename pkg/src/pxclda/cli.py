"""Command-line entry point: ``pxclda {scf,oracle,calibrate,compare,deltarho}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

from . import BACKEND, __version__
from .cavity import collective_coupling, dress
from .compare import (CalibrationError, DensityPair, FlatScanError, MetricUndefinedError,
                      calibrate_eta, delta_rho, i_metric)
from .config import ConfigError, RunConfig, load_config
from .eigensolvers import EigensolverError
from .fields import (GridFileError, GridMismatchError, ScalarField, line_cut, read_grid_file,
                     restrict, write_grid_file)
from .kohn_sham import KSRunner, SCFConvergenceError, lowest_eigenpairs, external_potential
from .oracle import PFConfig, fock_convergence, pf_ground_state
from .poisson import PoissonBoundaryError, PoissonBoundaryWarning
from .runs import KSCalibrationRunner, oracle_reference

log = logging.getLogger("pxclda")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _setup_logging(out_dir: Path, verbose: bool = False) -> logging.Handler:
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("pxclda")
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.addHandler(handler)
    return handler


def _log_header(cfg: RunConfig | None, command: str):
    log.info("pxclda %s (%s kernels) command=%s", __version__, BACKEND, command)
    if cfg is not None:
        log.info("config source: %s", cfg.source)
        for line in cfg.echo():
            log.info("config: %s", line)


def _log_grid(label, grid):
    log.info("%s grid: %s extents=%s points=%d", label, grid.describe(), grid.extents, grid.size)


def _log_mode(mode, n_e):
    d = dress(mode, n_e)
    log.info("mode: omega=%s Ha lambda=%s eps=%s -> omega_tilde=%s Ha lambda_tilde=%s "
             "collective coupling=%s (N_e=%d)", _fmt(mode.omega), _fmt(mode.lam),
             mode.epsilon.components, _fmt(d.omega_tilde), _fmt(d.lambda_tilde),
             _fmt(collective_coupling(d, n_e)), n_e)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def write_cuts(out_dir: Path, axes, fields: dict[str, ScalarField], prefix: str = "cut"):
    """One CSV per axis with the line through the origin for every named field."""
    for axis in axes:
        cuts = {name: line_cut(f, axis, (0.0, 0.0)) for name, f in fields.items()}
        coords = [c for c, _ in next(iter(cuts.values()))]
        rows = [[c] + [cuts[name][i][1] for name in fields] for i, c in enumerate(coords)]
        write_csv(out_dir / f"{prefix}_{axis}.csv", [axis] + list(fields), rows)


# ---- commands ---------------------------------------------------------------

def cmd_scf(cfg: RunConfig, out_dir: Path, force: bool = False) -> int:
    spec = cfg.system()
    _log_grid("KS", spec.grid)
    mode = cfg.mode()
    _log_mode(mode, spec.n_electrons)
    pxc = cfg.pxc()
    runner = KSRunner(spec, cfg.xc(), cfg.scf_options(force))
    history_path = out_dir / "scf_history.csv"
    try:
        state = runner.run([mode], pxc)
    except SCFConvergenceError as exc:
        write_csv(history_path, ["iter", "density_change", "eig_drift"],
                  [[r.iteration, r.density_change, r.eig_drift] for r in exc.history])
        raise
    write_csv(history_path, ["iter", "density_change", "eig_drift"],
              [[r.iteration, r.density_change, r.eig_drift] for r in state.scf_history])
    write_grid_file(out_dir / "density.grid", state.density, "pxclda KS density")
    write_cuts(out_dir, cfg["output.cuts"], {"density": state.density})
    log.info("SCF converged in %d cycles; eigenvalues (Ha): %s", len(state.scf_history),
             " ".join(_fmt(e) for e in state.eigenvalues))
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, out_dir: Path, seed: int | None = None) -> int:
    grid = cfg.oracle_grid()
    spec = cfg.system(grid)
    _log_grid("oracle", grid)
    mode = cfg.mode()
    _log_mode(mode, 1)
    seed = cfg["seed"] if seed is None else seed
    pf = PFConfig(spec, dress(mode, 1), cfg["oracle.n_max"], cfg["oracle.eig_tol"], seed,
                  cfg["oracle.krylov_dim"])
    gs = pf_ground_state(pf)
    eps, _ = lowest_eigenpairs(external_potential(spec), 1, tol=cfg["oracle.eig_tol"])
    log.info("E0_ha=%s photon_number=%s residual=%.3e", _fmt(gs.energy), _fmt(gs.photon_number), gs.residual)
    log.info("decoupled reference eps0 + omega_tilde/2 = %s Ha", _fmt(eps[0] + pf.mode.omega_tilde / 2))
    write_grid_file(out_dir / "oracle_density.grid", gs.electron_density, "pxclda Pauli-Fierz electron density")
    fock_list = cfg["oracle.fock_list"]
    if fock_list:
        rows = [[r.n_max, r.energy, r.i_vs_prev] for r in fock_convergence(pf, fock_list)]
    else:
        rows = [[pf.n_max, gs.energy, float("nan")]]
    write_csv(out_dir / "fock_convergence.csv", ["n_max", "E0_ha", "I_vs_prev"], rows)
    write_cuts(out_dir, cfg["output.cuts"], {"density": gs.electron_density})
    print(f"E0_ha={_fmt(gs.energy)}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, out_dir: Path, force: bool = False, seed: int | None = None) -> int:
    source = cfg["calibrate.reference"]
    mode = cfg.mode()
    seed = cfg["seed"] if seed is None else seed
    opts = cfg.scf_options(force)
    if source == "oracle":
        spec = cfg.system(cfg.oracle_grid())
    else:
        spec = cfg.system()
    _log_grid("KS", spec.grid)
    _log_mode(mode, spec.n_electrons)
    target = None
    if source == "files":
        ref_in = read_grid_file(cfg.resolve_path("calibrate.reference_in"), "density")
        ref_out = read_grid_file(cfg.resolve_path("calibrate.reference_out"), "density")
        if not ref_in.grid.same_as(ref_out.grid):
            raise UsageError(f"reference grids differ: {ref_in.grid.describe()} vs {ref_out.grid.describe()}")
        target = ref_in.grid
        try:
            restrict(ScalarField.zeros(spec.grid), target)
        except GridMismatchError:
            raise UsageError(
                f"reference grid {target.describe()} is not commensurate with KS grid {spec.grid.describe()}"
            ) from None
    runner = KSCalibrationRunner(spec, [mode], cfg.xc(), opts, cfg["pxc.density_floor"], target)
    if source == "oracle":
        log.info("reference: Pauli-Fierz oracle, n_max=%d", cfg["oracle.n_max"])
        reference = oracle_reference(spec, mode, runner.cavity_free, cfg["oracle.n_max"],
                                     cfg["oracle.eig_tol"], seed, cfg["oracle.krylov_dim"])
    elif source == "self":
        eta_ref = cfg["calibrate.self_eta"]
        log.info("reference: this solver at eta_c=%s", _fmt(eta_ref))
        reference = DensityPair(runner.density(eta_ref), runner.cavity_free)
    else:
        reference = DensityPair(ref_in, ref_out)
    result = calibrate_eta(reference, runner, cfg.scan_options())

    rows = [[st.stage, e, v] for st in result.refinement_trace for e, v in zip(st.etas, st.values)]
    write_csv(out_dir / "calibration.csv", ["stage", "eta_c", "I"], rows)
    best = runner.results[result.eta_star]
    write_grid_file(out_dir / "delta_rho.grid", best.delta, f"pxcLDA delta rho at eta_c={result.eta_star!r}")
    write_grid_file(out_dir / "reference_delta_rho.grid", reference.delta, "reference delta rho")
    write_cuts(out_dir, cfg["output.cuts"], {"reference": reference.delta, "pxclda": best.delta})
    i_one = dict(result.scan).get(1.0)
    summary = f"eta_star={_fmt(result.eta_star)} I_star={_fmt(result.i_star)}"
    log.info("%s final_step=%s I(eta=1)=%s", summary, _fmt(result.final_step),
             "n/a" if i_one is None else _fmt(i_one))
    (out_dir / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def _read_pair(path_in, path_out):
    a_in = read_grid_file(path_in, "density")
    a_out = read_grid_file(path_out, "density")
    if not a_in.grid.same_as(a_out.grid):
        raise UsageError(f"grid mismatch: {path_in}: {a_in.grid.describe()} vs {path_out}: {a_out.grid.describe()}")
    return a_in, a_out


def cmd_compare(a_in, a_out, b_in, b_out, out_dir: Path, cuts=("z",)) -> int:
    da = delta_rho(*_read_pair(a_in, a_out))
    db = delta_rho(*_read_pair(b_in, b_out))
    if not da.grid.same_as(db.grid):
        raise UsageError(f"grid mismatch between pairs: {da.grid.describe()} vs {db.grid.describe()}")
    value = i_metric(da, db)
    write_grid_file(out_dir / "delta_rho_a.grid", da, "delta rho, pair a")
    write_grid_file(out_dir / "delta_rho_b.grid", db, "delta rho, pair b")
    write_cuts(out_dir, cuts, {"a": da, "b": db})
    print(f"I={_fmt(value)}")
    print(f"max_abs_delta_a={_fmt(da.max_abs())}")
    print(f"max_abs_delta_b={_fmt(db.max_abs())}")
    log.info("I=%s max|drho_a|=%s max|drho_b|=%s", _fmt(value), _fmt(da.max_abs()), _fmt(db.max_abs()))
    return EXIT_OK


def cmd_deltarho(rho_in, rho_out, out_dir: Path, cuts=("z",)) -> int:
    d = delta_rho(*_read_pair(rho_in, rho_out))
    write_grid_file(out_dir / "delta_rho.grid", d, "delta rho")
    write_cuts(out_dir, cuts, {"delta_rho": d})
    print(f"max_abs_delta={_fmt(d.max_abs())}")
    return EXIT_OK


# ---- argument handling ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pxclda", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pxclda {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="flat key = value run configuration")
            sp.add_argument("--force", action="store_true", help="override the Poisson boundary check")
            sp.add_argument("--seed", type=int, default=None, help="Lanczos start-vector seed")
            sp.add_argument("--dry-run", action="store_true", help="parse and log the configuration, then stop")
        sp.add_argument("--out-dir", default=".", help="directory for outputs and run.log")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("scf", help="self-consistent KS ground state with pxcLDA"))
    common(sub.add_parser("oracle", help="exact one-electron Pauli-Fierz ground state"))
    common(sub.add_parser("calibrate", help="scan eta_c to minimize I against a reference"))
    cp = sub.add_parser("compare", help="I metric between two density-difference pairs")
    cp.add_argument("a_in")
    cp.add_argument("a_out")
    cp.add_argument("b_in")
    cp.add_argument("b_out")
    cp.add_argument("--cuts", default="z", help="comma-separated line-cut axes")
    common(cp, config=False)
    dp = sub.add_parser("deltarho", help="density difference of two grid files")
    dp.add_argument("rho_in")
    dp.add_argument("rho_out")
    dp.add_argument("--cuts", default="z")
    common(dp, config=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out_dir = Path(args.out_dir)
    handler = None
    try:
        handler = _setup_logging(out_dir, args.verbose)
        warnings.simplefilter("once", PoissonBoundaryWarning)
        if args.command in ("compare", "deltarho"):
            _log_header(None, args.command)
            cuts = [c.strip() for c in args.cuts.split(",") if c.strip()]
            if args.command == "compare":
                return cmd_compare(args.a_in, args.a_out, args.b_in, args.b_out, out_dir, cuts)
            return cmd_deltarho(args.rho_in, args.rho_out, out_dir, cuts)
        cfg = load_config(args.config, args.command)
        _log_header(cfg, args.command)
        if args.dry_run:
            return EXIT_OK
        if args.command == "scf":
            return cmd_scf(cfg, out_dir, args.force)
        if args.command == "oracle":
            return cmd_oracle(cfg, out_dir, args.seed)
        return cmd_calibrate(cfg, out_dir, args.force, args.seed)
    except (ConfigError, UsageError, GridMismatchError, GridFileError, FileNotFoundError) as exc:
        log.error("%s", exc)
        print(f"pxclda: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SCFConvergenceError, EigensolverError, FlatScanError, CalibrationError,
            PoissonBoundaryError, MetricUndefinedError) as exc:
        log.error("%s", exc)
        print(f"pxclda: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        if handler is not None:
            logging.getLogger("pxclda").removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
