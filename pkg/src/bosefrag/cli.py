"""``bosefrag`` command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 tolerance
not met.  On failure a JSON error record is printed to stderr and written to
``<out>/error.json`` when an output directory is known.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .bogoliubov import BogoliubovError
from .boson_algebra import BosonPolynomial, VibrationalHamiltonian, build_hamiltonian
from .fock_sim import (AU_TIME_FS, CutoffError, FockBasis, SpectrumError, heff_eigenvalues,
                       lowest_eigenpairs, prepare_displaced_vacuum, simulate_trajectory,
                       to_matrix, trotter_sweep, tunneling_period, loglog_slope)
from .fragmentation import FragmentSet, OptimizerOptions, gfro_decompose
from .gate_compiler import CompileError, compile_fragment_set
from .models import TropoloneModel, build_tropolone
from .qubit_compare import compare

log = logging.getLogger("bosefrag")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 2, 3, 4
DEFAULT_TOL = 0.1
TROPOLONE_TOL = 1e-2
REFERENCE_SEED = 0
TROPOLONE_NMAX = (30, 12)
# the double well needs strong squeezing and large shifts; the default box is too tight
TROPOLONE_BOUNDS = (4.0, 3000.0)
TROPOLONE_DT = 1e-3
DEFAULT_NMAX = 8
FLOAT_FMT = "{:.12g}"


class CliError(Exception):
    def __init__(self, code: int, stage: str, message: str):
        super().__init__(message)
        self.code = code
        self.stage = stage


@dataclass
class RunConfig:
    tol: float = DEFAULT_TOL
    n_max: Optional[Sequence[int]] = None
    dt: Optional[float] = None
    dts: Optional[List[float]] = None
    t_total: Optional[float] = None
    optimizer: str = "bfgs"
    seed: int = REFERENCE_SEED
    out: Path = Path("bosefrag_out")
    levels: int = 4
    t_eigen: float = 1.0
    analytic_gradient: bool = False
    generator_bound: Optional[float] = 2.0
    displacement_bound: Optional[float] = 5.0
    extra: dict = field(default_factory=dict)

    def validate(self):
        if not self.tol > 0:
            raise CliError(EXIT_CONFIG, "config", "--tol must be positive")
        if self.dt is not None and not self.dt > 0:
            raise CliError(EXIT_CONFIG, "config", "--dt must be positive")
        if self.t_total is not None and not self.t_total > 0:
            raise CliError(EXIT_CONFIG, "config", "--t-total must be positive")
        if self.dt is not None and self.t_total is not None and self.dt > self.t_total:
            raise CliError(EXIT_CONFIG, "config", "--dt exceeds --t-total")
        if self.n_max is not None and any(n < 1 for n in self.n_max):
            raise CliError(EXIT_CONFIG, "config", "--nmax entries must be >= 1")
        if self.levels < 1:
            raise CliError(EXIT_CONFIG, "config", "--levels must be >= 1")


# -- io helpers -----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT.format(float(v))


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_json(path: Path, data) -> Path:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _describe_version() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+g{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def load_hamiltonian(path) -> BosonPolynomial:
    """Read a force-field JSON, a polynomial JSON or a fragments JSON."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_CONFIG, "input", f"cannot read {path}: {exc}") from exc
    try:
        if "fragments" in data:
            return BosonPolynomial.from_json(data["hamiltonian"])
        if "omega" in data:
            return build_hamiltonian(VibrationalHamiltonian.from_json(data))
        if "terms" in data:
            return BosonPolynomial.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "input", f"invalid Hamiltonian file {path}: {exc}") from exc
    raise CliError(EXIT_CONFIG, "input", f"{path}: unrecognized JSON layout")


def load_fragments(path) -> FragmentSet:
    try:
        data = json.loads(Path(path).read_text())
        return FragmentSet.from_json(data)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "input", f"cannot read fragments from {path}: {exc}") from exc


def _is_fragment_file(path) -> bool:
    try:
        return "fragments" in json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return False


# -- stages ---------------------------------------------------------------


def stage_fragment(H: BosonPolynomial, cfg: RunConfig) -> FragmentSet:
    opts = OptimizerOptions(method=cfg.optimizer, analytic_gradient=cfg.analytic_gradient,
                            generator_bound=cfg.generator_bound,
                            displacement_bound=cfg.displacement_bound)
    fs = gfro_decompose(H, cfg.tol, opts, seed=cfg.seed)
    write_json(cfg.out / "fragments.json", fs.to_json())
    log.info("%d fragments, residual %.3e cm-1", fs.n_fragments, fs.residual_norm)
    return fs


def _basis(cfg: RunConfig, n_modes: int, default) -> FockBasis:
    nm = cfg.n_max if cfg.n_max is not None else default
    nm = tuple(nm) if len(nm) == n_modes else tuple(nm[:1]) * n_modes
    return FockBasis(nm)


def stage_simulate(fs: FragmentSet, cfg: RunConfig, basis: FockBasis, displacement,
                   sweep: bool) -> dict:
    H = fs.hamiltonian
    psi0 = prepare_displaced_vacuum(basis, displacement)
    tau = tunneling_period(to_matrix(H, basis))
    t_total = cfg.t_total if cfg.t_total is not None else tau
    dt = cfg.dt if cfg.dt is not None else t_total / 1000
    traj = simulate_trajectory(H, fs.polynomials(), basis, psi0, t_total, dt,
                               n_samples=cfg.extra.get("samples", 200))
    header = ["t_au", "t_fs"]
    header += [f"x{p}_exact" for p in range(basis.n_modes)]
    header += [f"x{p}_trotter" for p in range(basis.n_modes)]
    header += ["left_exact", "right_exact", "left_trotter", "right_trotter", "overlap_error"]
    rows = []
    for k, t in enumerate(traj.times):
        rows.append([t, t * AU_TIME_FS, *traj.x_exact[k], *traj.x_trotter[k],
                     traj.left_exact[k], 1 - traj.left_exact[k],
                     traj.left_trotter[k], 1 - traj.left_trotter[k], traj.overlap_error[k]])
    write_csv(cfg.out / "trajectory.csv", header, rows)
    info = {"tunneling_period_au": tau, "t_total_au": t_total, "dt_au": dt,
            "final_overlap_error": float(traj.overlap_error[-1])}
    if sweep:
        dts = cfg.dts if cfg.dts else list(np.geomspace(dt * 3, dt * 0.03, 5))
        pts = trotter_sweep(H, fs.polynomials(), basis, psi0, t_total, dts)
        write_csv(cfg.out / "trotter_sweep.csv",
                  ["dt_au", "n_steps", "partial_step_au", "overlap_error", "trotter_error"],
                  [[p.dt, p.n_steps, p.partial_step, p.overlap_error, p.trotter_error]
                   for p in pts])
        # convergence is judged against the fragment sum; the exact-H error plateaus at the
        # fragmentation residual
        errs = [p.trotter_error for p in pts]
        info["sweep_monotone"] = bool(all(a > b for a, b in zip(errs, errs[1:])))
        info["sweep_slope"] = loglog_slope([p.dt for p in pts], errs) if min(errs) > 0 else math.nan
    return info


def stage_eigen(fs: FragmentSet, cfg: RunConfig, basis: FockBasis) -> dict:
    spectrum = heff_eigenvalues(fs, basis, t=cfg.t_eigen, n_levels=cfg.levels)
    write_csv(cfg.out / "spectrum.csv", ["level", "exact_cm", "heff_cm", "difference_cm"],
              [[k, e, h, h - e] for k, (e, h) in enumerate(zip(spectrum.exact, spectrum.heff))])
    return {"max_abs_difference_cm": float(np.abs(spectrum.difference).max()), "t_au": cfg.t_eigen}


def stage_compile(fs: FragmentSet, cfg: RunConfig) -> dict:
    dt = cfg.dt if cfg.dt is not None else 1.0
    try:
        circuits = compile_fragment_set(fs, dt)
    except CompileError as exc:
        raise CliError(EXIT_NUMERIC, "compile", str(exc)) from exc
    write_json(cfg.out / "circuits.json",
               {"dt_au": dt, "circuits": [c.to_json() for c in circuits]})
    return {"n_circuits": len(circuits), "n_gates": sum(len(c) for c in circuits)}


def stage_compare(fs: FragmentSet, cfg: RunConfig) -> dict:
    n_max = cfg.n_max[0] if cfg.n_max else 6
    report = compare(fs.hamiltonian, fs.n_fragments, n_max)
    write_json(cfg.out / "compare.json", report)
    return report


def write_manifest(cfg: RunConfig, command: str, summary: dict, basis: Optional[FockBasis] = None):
    files = sorted(p.name for p in cfg.out.iterdir() if p.name not in ("manifest.json", "error.json"))
    data = {
        "command": command,
        "version": _describe_version(),
        "numpy": np.__version__,
        "scipy": __import__("scipy").__version__,
        "seed": cfg.seed,
        "tol_cm": cfg.tol,
        "optimizer": cfg.optimizer,
        "analytic_gradient": cfg.analytic_gradient,
        "generator_bound": cfg.generator_bound,
        "displacement_bound": cfg.displacement_bound,
        "n_max": list(basis.cutoffs) if basis is not None else cfg.n_max,
        "files": files,
        "summary": summary,
    }
    write_json(cfg.out / "manifest.json", data)


def _check_tolerance(fs: FragmentSet):
    if not fs.converged or fs.residual_norm >= fs.tol:
        raise CliError(EXIT_TOLERANCE, "fragment",
                       f"residual {fs.residual_norm:.4g} not below tol {fs.tol:g}: {fs.diagnostic}")


# -- commands -------------------------------------------------------------


def _fragments_from_input(args, cfg) -> FragmentSet:
    if args.input is None:
        raise CliError(EXIT_CONFIG, "input", "-i/--input is required")
    if _is_fragment_file(args.input):
        return load_fragments(args.input)
    fs = stage_fragment(load_hamiltonian(args.input), cfg)
    _check_tolerance(fs)
    return fs


def cmd_tropolone(args, cfg: RunConfig) -> dict:
    model = TropoloneModel()
    H = build_tropolone(model)
    summary = {"barrier_cm": model.barrier_height()}
    fs = stage_fragment(H, cfg)
    summary["n_fragments"] = fs.n_fragments
    summary["residual_cm"] = fs.residual_norm
    _check_tolerance(fs)
    basis = _basis(cfg, 2, TROPOLONE_NMAX)
    psi0 = prepare_displaced_vacuum(basis, model.initial_displacement)
    summary["mean_energy_cm"] = float(np.real(np.vdot(psi0, to_matrix(H, basis) @ psi0)))
    summary.update(stage_simulate(fs, cfg, basis, model.initial_displacement, args.sweep_dt))
    write_manifest(cfg, "tropolone", summary, basis)
    return summary


def cmd_fragment(args, cfg: RunConfig) -> dict:
    if args.input is None:
        raise CliError(EXIT_CONFIG, "input", "-i/--input is required")
    fs = stage_fragment(load_hamiltonian(args.input), cfg)
    summary = {"n_fragments": fs.n_fragments, "residual_cm": fs.residual_norm,
               "quadratic_stable": bool(fs.quadratic.stable)}
    write_manifest(cfg, "fragment", summary)
    _check_tolerance(fs)
    return summary


def cmd_simulate(args, cfg: RunConfig) -> dict:
    fs = _fragments_from_input(args, cfg)
    basis = _basis(cfg, fs.n_modes, (DEFAULT_NMAX,))
    disp = args.displacement if args.displacement else [0.0] * fs.n_modes
    if len(disp) != fs.n_modes:
        raise CliError(EXIT_CONFIG, "config", "--displacement needs one value per mode")
    summary = stage_simulate(fs, cfg, basis, disp, args.sweep_dt)
    write_manifest(cfg, "simulate", summary, basis)
    return summary


def cmd_eigen(args, cfg: RunConfig) -> dict:
    fs = _fragments_from_input(args, cfg)
    basis = _basis(cfg, fs.n_modes, (DEFAULT_NMAX,))
    summary = stage_eigen(fs, cfg, basis)
    write_manifest(cfg, "eigen", summary, basis)
    return summary


def cmd_compile(args, cfg: RunConfig) -> dict:
    fs = _fragments_from_input(args, cfg)
    summary = stage_compile(fs, cfg)
    write_manifest(cfg, "compile", summary)
    return summary


def cmd_compare(args, cfg: RunConfig) -> dict:
    fs = _fragments_from_input(args, cfg)
    summary = stage_compare(fs, cfg)
    write_manifest(cfg, "compare", summary)
    return summary


def cmd_pipeline(args, cfg: RunConfig) -> dict:
    if args.input is None:
        model = TropoloneModel()
        H, disp, default_nmax = build_tropolone(model), model.initial_displacement, TROPOLONE_NMAX
    else:
        H = load_hamiltonian(args.input)
        disp, default_nmax = [0.0] * H.n_modes, (DEFAULT_NMAX,)
    fs = stage_fragment(H, cfg)
    _check_tolerance(fs)
    basis = _basis(cfg, H.n_modes, default_nmax)
    summary = {"n_fragments": fs.n_fragments, "residual_cm": fs.residual_norm}
    summary["simulate"] = stage_simulate(fs, cfg, basis, disp, args.sweep_dt)
    summary["eigen"] = stage_eigen(fs, cfg, basis)
    if fs.quadratic.stable:
        summary["compile"] = stage_compile(fs, cfg)
    else:
        summary["compile"] = {"skipped": fs.quadratic.reason}
    summary["compare"] = stage_compare(fs, cfg)
    write_manifest(cfg, "pipeline", summary, basis)
    return summary


def cmd_report(args, cfg: RunConfig) -> dict:
    from .plotting import render_report

    target = Path(args.input) if args.input else cfg.out
    if not target.is_dir():
        raise CliError(EXIT_CONFIG, "input", f"{target} is not a directory")
    written = render_report(target)
    if not written:
        raise CliError(EXIT_CONFIG, "report", f"no CSV outputs found in {target}")
    return {"figures": [str(p) for p in written]}


COMMANDS = {
    "tropolone": cmd_tropolone,
    "fragment": cmd_fragment,
    "simulate": cmd_simulate,
    "eigen": cmd_eigen,
    "compile": cmd_compile,
    "compare": cmd_compare,
    "pipeline": cmd_pipeline,
    "report": cmd_report,
}


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bosefrag", description="Fragment vibrational Hamiltonians and simulate them by Trotterization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-i", "--input", help="Hamiltonian, fragments JSON, or run directory (report)")
    common.add_argument("--tol", type=float, help="fragmentation tolerance in cm^-1")
    common.add_argument("--nmax", type=_int_list, help="occupation cutoff, one value or one per mode")
    common.add_argument("--dt", type=float, help="Trotter step in a.u.")
    common.add_argument("--t-total", type=float, help="total propagation time in a.u.")
    common.add_argument("--t-fs", type=float, help="total propagation time in fs")
    common.add_argument("--sweep-dt", action="store_true", help="write trotter_sweep.csv")
    common.add_argument("--dts", type=_float_list, help="explicit dt grid for the sweep (a.u.)")
    common.add_argument("--displacement", type=_float_list, help="initial coherent displacements")
    common.add_argument("--optimizer", choices=["bfgs", "powell"], default="bfgs")
    common.add_argument("--analytic-gradient", action="store_true",
                        help="use the analytic cost gradient instead of finite differences")
    common.add_argument("--seed", type=int, default=REFERENCE_SEED)
    common.add_argument("--generator-bound", type=float,
                        help="trust box on squeeze/rotation generator entries")
    common.add_argument("--displacement-bound", type=float,
                        help="trust box on displacement entries")
    common.add_argument("--levels", type=int, default=4)
    common.add_argument("--t", dest="t_eigen", type=float, default=1.0,
                        help="evolution time (a.u.) for effective-Hamiltonian eigenvalues")
    common.add_argument("--out", type=Path, default=Path("bosefrag_out"))
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _config(args) -> RunConfig:
    tol = args.tol
    if tol is None:
        tol = TROPOLONE_TOL if args.command == "tropolone" or (
            args.command == "pipeline" and args.input is None) else DEFAULT_TOL
    t_total = args.t_total
    if args.t_fs is not None:
        if t_total is not None:
            raise CliError(EXIT_CONFIG, "config", "give --t-total or --t-fs, not both")
        t_total = args.t_fs / AU_TIME_FS
    cfg = RunConfig(tol=tol, n_max=args.nmax, dt=args.dt, dts=args.dts, t_total=t_total,
                    optimizer=args.optimizer, seed=args.seed, out=args.out, levels=args.levels,
                    t_eigen=args.t_eigen, analytic_gradient=args.analytic_gradient)
    preset = args.command == "tropolone" or (args.command == "pipeline" and args.input is None)
    if preset:
        if args.tol is None:
            cfg.analytic_gradient = True
        if args.dt is None:
            cfg.dt = TROPOLONE_DT
        cfg.generator_bound, cfg.displacement_bound = TROPOLONE_BOUNDS
    if args.generator_bound is not None:
        cfg.generator_bound = args.generator_bound
    if args.displacement_bound is not None:
        cfg.displacement_bound = args.displacement_bound
    cfg.validate()
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = None
    try:
        cfg = _config(args)
        out = cfg.out
        if args.command != "report":
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").unlink(missing_ok=True)
        summary = COMMANDS[args.command](args, cfg)
    except CliError as exc:
        return _fail(exc.code, exc.stage, str(exc), out)
    except (CutoffError, BogoliubovError, SpectrumError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, args.command, f"{type(exc).__name__}: {exc}", out)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, args.command, f"{type(exc).__name__}: {exc}", out)
    print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    return EXIT_OK


def _fail(code: int, stage: str, message: str, out: Optional[Path]) -> int:
    record = {"error": message, "stage": stage, "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    if out is not None and out.is_dir():
        write_json(out / "error.json", record)
    return code


if __name__ == "__main__":
    sys.exit(main())
