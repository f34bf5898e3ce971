"""Command-line entry point: ``fracpp <subcommand> ...``.

Exit codes: 0 success, 2 configuration/parameter error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, FracppError
from .experiments import (
    BENCH_MU, BENCH_RHO, BENCH_T, benchmark_grading, convergence_study, reproduce_paper,
)
from .fd import error_report, march
from .inverse import Observation, make_functional, recover
from .reporting import OutputError, read_csv, write_csv, write_field_csv, write_json
from .specfun import mittag_leffler
from .spectral import assemble, solve_spectral

log = logging.getLogger("fracpp")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output path")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized utilities such as observation noise")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="fracpp",
        description="Forward and inverse solvers for the time-fractional "
                    "pseudo-parabolic equation on (0, 1).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ml", parents=[common], help="evaluate E_{rho,beta}(z)")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--z", type=float, required=True)

    p = sub.add_parser("forward", parents=[common], help="solve the forward problem")
    p.add_argument("--method", choices=("fd", "spectral"), default="fd")
    p.add_argument("--exact", action="store_true",
                   help="write <out>.errors.csv against problem.exact")

    p = sub.add_parser("inverse", parents=[common], help="recover r(t) from an observation")
    p.add_argument("--functional", choices=("point", "flux", "mean"))
    p.add_argument("--x0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--obs", default="manufactured",
                   help="CSV with columns t,phi on the solver mesh, or 'manufactured'")
    p.add_argument("--noise", type=float, default=0.0,
                   help="relative uniform noise amplitude applied to the observation")

    sub.add_parser("convergence", parents=[common], help="refinement study on a manufactured problem")
    sub.add_parser("reproduce-paper", parents=[common],
                   help="benchmark run with both forward solvers; --out is a directory")
    return parser


def _need(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required for this subcommand")
    return value


def _load(args) -> RunConfig:
    path = _need(args.config, "--config")
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc


def _sibling(path: str, suffix: str) -> str:
    return path + suffix


def cmd_ml(args) -> int:
    val = mittag_leffler(args.z, args.rho, args.beta)
    print(f"{val:.15g}")
    if args.out:
        write_json(args.out, {"rho": args.rho, "beta": args.beta, "z": args.z, "value": val})
    return 0


def cmd_forward(args) -> int:
    cfg = _load(args)
    out = _need(args.out or cfg.output.out, "--out")
    spec = cfg.build_spec()
    mesh, grid = cfg.mesh(), cfg.grid()
    tol = cfg.tolerances
    report = {"method": args.method, "config_sha256": cfg.sha256(), "config": cfg.to_dict()}
    if args.method == "fd":
        field = march(spec, grid, mesh)
        report["min_dominance_margin"] = field.diagnostics["min_dominance_margin"]
    else:
        modes = solve_spectral(spec, mesh, cfg.discretization.K, tol.picard_tol,
                               tol.picard_max_sweeps, args.threads, tol.quadrature_tol)
        field = assemble(modes, grid)
        report.update(modes.diagnostics)
    write_field_csv(out, field)
    if args.exact:
        exact = cfg.function("exact")
        if exact is None:
            raise ConfigError("--exact needs problem.exact in the config")
        err = error_report(field, exact)
        write_csv(_sibling(out, ".errors.csv"), ("t", "max_err", "l2_err"),
                  (err.table[:, 0], err.table[:, 1], err.table[:, 2]))
        report.update(max_err=err.max_err, l2_err=err.l2_err)
    write_json(_sibling(out, ".report.json"), report)
    return 0


def _observation(args, cfg: RunConfig, mesh) -> Optional[Observation]:
    if args.obs != "manufactured":
        cols = read_csv(args.obs)
        if "t" not in cols or "phi" not in cols:
            raise ConfigError(f"{args.obs}: observation CSV needs columns t and phi")
        if cols["t"].shape != mesh.nodes.shape or not np.allclose(
                cols["t"], mesh.nodes, rtol=0, atol=1e-12 * mesh.T):
            raise ConfigError(f"{args.obs}: t column must match the configured time mesh")
        return Observation(mesh, cols["phi"])
    p = cfg.problem
    if p.observation is not None:
        dphi = cfg.function("observation_caputo")
        return Observation.from_function(mesh, cfg.function("observation"), dphi)
    if p.r is None:
        raise ConfigError("manufactured observation needs problem.observation or problem.r")
    # synthesize Phi with the spectral forward solver (inverse crime, flagged in the report)
    return None


def cmd_inverse(args) -> int:
    cfg = _load(args)
    out = _need(args.out or cfg.output.out, "--out")
    inv = cfg.inverse
    kind = args.functional or inv.functional
    x0 = args.x0 if args.x0 is not None else inv.x0
    gamma = args.gamma if args.gamma is not None else inv.gamma
    if kind == "point" and x0 is None:
        raise ConfigError("point functional needs --x0")
    tol = cfg.tolerances
    K = cfg.discretization.K
    mesh = cfg.mesh()
    spec = cfg.build_spec(with_source=False)
    functional = make_functional(kind, spec, K, x0=x0, gamma=gamma, quad_tol=tol.quadrature_tol)

    obs = _observation(args, cfg, mesh)
    synthesized = obs is None
    if synthesized:
        modes = solve_spectral(cfg.build_spec(), mesh, K, tol.picard_tol, tol.picard_max_sweeps,
                               args.threads, tol.quadrature_tol)
        obs = Observation(mesh, functional.fv @ modes.mode_solutions)
    if args.noise:
        rng = np.random.default_rng(args.seed)
        noisy = obs.phi_samples * (1 + args.noise * rng.uniform(-1, 1, obs.phi_samples.shape))
        noisy[0] = obs.phi_samples[0]
        obs = Observation(mesh, noisy)

    result = recover(spec, functional, obs, mesh, tol=tol.inverse_tol, max_iter=tol.max_iter,
                     picard_tol=tol.picard_tol, max_sweeps=tol.picard_max_sweeps,
                     threads=args.threads, quad_tol=tol.quadrature_tol)
    r_true_fn = cfg.function("r")
    header, cols = ["t", "r_recovered"], [mesh.nodes, result.r_samples]
    report = {
        "config_sha256": cfg.sha256(),
        "config": cfg.to_dict(),
        "functional": kind, "x0": x0, "gamma": functional.gamma,
        "iterations": result.iterations,
        "residual_history": result.residual_history,
        "relaxation": result.relaxation,
        "dphi_mode": result.dphi_mode,
        "observation": "synthesized-spectral" if synthesized else args.obs,
        "noise": args.noise, "seed": args.seed,
        "c1_bound": result.c1.value, "c1_log10": result.c1.log10,
        "bound_violated": result.bound_violated,
        "f_g": functional.f_g, "f_resolvent_g": functional.f_resolvent_g,
        "c_f": functional.c_f, "c_f_tail": functional.c_f_tail,
        "phi_decay_exponent": result.diagnostics["phi_decay"],
        "g_decay_exponent": result.diagnostics["g_decay"],
    }
    if r_true_fn is not None:
        r_true = r_true_fn(mesh.nodes)
        err = np.abs(result.r_samples - r_true)
        header += ["r_true", "abs_err"]
        cols += [r_true, err]
        report["max_abs_err"] = float(err.max())
        report["max_rel_err"] = float(err.max() / max(np.abs(r_true).max(), 1e-300))
    write_csv(out, header, cols)
    write_json(_sibling(out, ".report.json"), report)
    return 0


def cmd_convergence(args) -> int:
    cfg = _load(args)
    out = _need(args.out or cfg.output.out, "--out")
    exact = cfg.function("exact")
    conv = cfg.convergence
    table = convergence_study(cfg.build_spec(), exact, conv.refinements,
                              N=cfg.discretization.N, M=cfg.discretization.M,
                              base_M=conv.base_M, base_N=conv.base_N,
                              grading=cfg.grading, threads=args.threads)
    t, s = table["temporal"], table["spatial"]
    write_csv(out, ("M", "max_err"), (t["M"], t["max_err"]))
    write_csv(_sibling(out, ".spatial.csv"), ("N", "max_err"), (s["N"], s["max_err"]))
    write_json(_sibling(out, ".report.json"),
               {"config_sha256": cfg.sha256(), "config": cfg.to_dict(), **table})
    def fmt(values):
        return "[" + ", ".join("n/a" if v is None else f"{v:.3f}" for v in values or []) + "]"

    for name, part in (("temporal", t), ("spatial", s)):
        errs = "[" + ", ".join(f"{e:.3e}" for e in part["max_err"] or []) + "]"
        print(f"{name}: max errors {errs} orders {fmt(part['orders'])} "
              f"richardson orders {fmt(part['richardson_orders'])}")
    return 0


def cmd_reproduce(args) -> int:
    out = _need(args.out, "--out")
    baked = {"rho": BENCH_RHO, "mu": BENCH_MU, "T": BENCH_T, "N": 1000, "M": 100,
             "K": 64, "grading": benchmark_grading()}
    report = reproduce_paper(out, N=1000, M=100, K=64, threads=args.threads)
    report.pop("fields")
    report["config_sha256"] = hashlib.sha256(
        json.dumps(baked, sort_keys=True).encode()).hexdigest()
    write_json(os.path.join(out, "report.json"), report)
    print(f"fd max error {report['fd_max_err']:.6e}, "
          f"spectral max error {report['spectral_max_err']:.6e}")
    return 0


COMMANDS = {
    "ml": cmd_ml,
    "forward": cmd_forward,
    "inverse": cmd_inverse,
    "convergence": cmd_convergence,
    "reproduce-paper": cmd_reproduce,
}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except FracppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
