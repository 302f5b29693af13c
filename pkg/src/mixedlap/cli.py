"""Command-line entry point.

Exit codes: 0 success, 1 failed verification, 2 configuration or I/O error,
3 solver error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import AssembledSystem, assemble
from .bifurcation import continue_branch, invert_branch
from .checks import (
    neumann_reconstruction_check,
    picone_check,
    poincare_constant,
    single_node_load_check,
    weak_max_principle_check,
)
from .config import RunConfig, parse_config, parse_entries
from .dissipation import ScheduleMode, run_schedule
from .domain import NodeRole, build_mesh
from .errors import AssemblyError, ConfigError, IoError, QuadratureError, SolverError, ZeroNorm
from .frackernel import FracKernel, compute_normalization_constant
from .io import RunManifest, write_csv, write_table
from .reference import normalization_constant_gamma
from .spectral import check_orthogonality, check_principal, check_simplicity, solve_smallest

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixedlap", description="Mixed local-nonlocal eigenvalue experiments in 1D.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="flat key = value configuration file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--h", type=float, help="override mesh.h")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--s", type=float, help="override the fractional order")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    c = sub.add_parser("constants", help="print the normalization constant C_{1,s}")
    c.add_argument("--s", type=float, action="append", help="fractional order (repeatable)")
    c.add_argument("-v", "--verbose", action="store_true")
    common(sub.add_parser("eig", help="smallest eigenpairs"))
    common(sub.add_parser("sweep-neumann", help="dissipating Neumann schedule"))
    common(sub.add_parser("sweep-dirichlet", help="dissipating Dirichlet schedule"))
    b = common(sub.add_parser("bifurcate", help="trace the branch bifurcating from zero"))
    b.add_argument("--inverted", action="store_true", help="also write the inverted branch")
    common(sub.add_parser("verify", help="run the check battery"))
    r = sub.add_parser("rerun", help="repeat a run recorded in a manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out", help="output directory (default: the recorded one)")
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve(args) -> tuple[RunConfig, list[tuple[str, str]]]:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    entries = {k: v for k, (v, _) in parse_entries(text).items()}
    for flag, key in (("h", "mesh.h"), ("seed", "seed"), ("s", "s")):
        value = getattr(args, flag, None)
        if value is not None:
            entries[key] = repr(value)
    resolved = "".join(f"{k} = {v}\n" for k, v in entries.items())
    return parse_config(resolved, args.config), list(entries.items())


def _system(cfg: RunConfig) -> AssembledSystem:
    kernel = FracKernel.for_order(cfg.domain.fractional_order, cfg.nonlocal_weight)
    return assemble(build_mesh(cfg.domain, cfg.h), kernel)


def cmd_constants(args) -> int:
    orders = args.s or [0.25, 0.5, 0.75]
    print("s,integral_form,gamma_form,rel_diff")
    for s in orders:
        c = compute_normalization_constant(s)
        g = normalization_constant_gamma(s)
        print(f"{s:g},{c:.12g},{g:.12g},{abs(c - g) / g:.3g}")
    return EXIT_OK


def cmd_eig(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    system = _system(cfg)
    sp = solve_smallest(system, cfg.eig_count)
    for i, pair in enumerate(sp, start=1):
        print(f"lambda[{i}] = {pair.lam:.12g}  residual = {pair.residual:.3g}")
    mesh = system.mesh
    header = ["node_x", "role"] + [f"value_{i}" for i in range(1, len(sp) + 1)]
    cols = [mesh.expand(p.vector) for p in sp]
    rows = [
        (float(x), NodeRole(r).name.lower(), *(float(c[n]) for c in cols))
        for n, (x, r) in enumerate(zip(mesh.nodes, mesh.node_role))
    ]
    write_csv(header, rows, out / "eigenvectors.csv")
    manifest.extra.update({f"lambda_{i}": p.lam for i, p in enumerate(sp, start=1)})
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, manifest: RunManifest, dirichlet: bool) -> int:
    sched = cfg.schedule
    if sched is None:
        raise ConfigError("configuration has no schedule.mode")
    if dirichlet == (sched.mode == ScheduleMode.NEUMANN_SHRINK):
        want = "a Dirichlet" if dirichlet else "the neumann_shrink"
        raise ConfigError(f"this subcommand needs {want} schedule, got {sched.mode.value}")
    table = run_schedule(sched, cfg.h, nonlocal_weight=cfg.nonlocal_weight)
    print(",".join(table.HEADER))
    for rec in table.records():
        print(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in rec))
    write_table(table, out / "convergence.csv")
    return EXIT_OK


def cmd_bifurcate(cfg: RunConfig, out: Path, manifest: RunManifest, inverted: bool) -> int:
    if cfg.nonlinearity is None:
        raise ConfigError("configuration has no nonlinearity.kind")
    system = _system(cfg)
    branch = continue_branch(system, cfg.nonlinearity, params=cfg.continuation)
    print(f"lambda1 = {branch.lambda1:.12g}  lambda0 = {branch.lambda0:.12g}")
    if branch.lambda_inf is not None:
        print(f"lambda_inf = {branch.lambda_inf:.12g}")
    last = branch.points[-1]
    print(f"points = {len(branch)}  termination = {branch.termination.value}")
    print(f"last: lambda = {last.lam:.12g}  linf_norm = {last.linf_norm:.6g}")
    write_table(branch, out / "branch.csv")
    if inverted:
        try:
            write_table(invert_branch(branch), out / "branch_inverted.csv")
        except ZeroNorm as exc:
            raise SolverError(str(exc)) from exc
    manifest.extra.update({"lambda1": branch.lambda1, "points": len(branch), "termination": branch.termination.value})
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, manifest: RunManifest) -> int:
    system = _system(cfg)
    sp = solve_smallest(system, max(2, cfg.eig_count))
    reports = [
        check_principal(sp),
        check_simplicity(sp),
        check_orthogonality(sp, system),
        picone_check(system, sp, 100, cfg.seed),
    ]
    if system.has_dirichlet:
        reports.append(weak_max_principle_check(system, 20, cfg.seed))
        reports.append(single_node_load_check(system))
        manifest.extra["poincare_constant"] = poincare_constant(system)
    if np.any(system.mesh.free_roles() == NodeRole.NEUMANN_SET):
        reports.append(neumann_reconstruction_check(system, sp))
    for rep in reports:
        print(rep.line())
    rows = [(r.name, r.passed, float(r.margin), str(r.witness).replace("\n", " ")) for r in reports]
    write_csv(("check", "passed", "margin", "witness"), rows, out / "verify.csv")
    failed = [r.name for r in reports if not r.passed]
    manifest.extra["failed"] = ",".join(failed) or "none"
    return EXIT_FAILED if failed else EXIT_OK


_COMMANDS = {
    "eig": lambda cfg, out, m, args: cmd_eig(cfg, out, m),
    "sweep-neumann": lambda cfg, out, m, args: cmd_sweep(cfg, out, m, False),
    "sweep-dirichlet": lambda cfg, out, m, args: cmd_sweep(cfg, out, m, True),
    "bifurcate": lambda cfg, out, m, args: cmd_bifurcate(cfg, out, m, getattr(args, "inverted", False)),
    "verify": lambda cfg, out, m, args: cmd_verify(cfg, out, m),
}


def _execute(command: str, cfg: RunConfig, entries, out: Path, config_path, args) -> int:
    manifest = RunManifest(command, config_path, entries, str(out), cfg.seed, __version__)
    if command == "bifurcate" and getattr(args, "inverted", False):
        manifest.extra["inverted"] = True
    start = time.perf_counter()
    code = _COMMANDS[command](cfg, out, manifest, args)
    manifest.timings["total_seconds"] = time.perf_counter() - start
    manifest.write(out / "manifest.txt")
    return code


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "constants":
            return cmd_constants(args)
        if args.command == "rerun":
            manifest = RunManifest.read(args.manifest)
            cfg = parse_config(manifest.config_text(), manifest.config_path)
            out = Path(args.out or manifest.output_dir)
            args.inverted = manifest.extra.get("inverted") == "true"
            return _execute(manifest.subcommand, cfg, manifest.config_entries, out, manifest.config_path, args)
        cfg, entries = _resolve(args)
        return _execute(args.command, cfg, entries, Path(args.out), args.config, args)
    except (ConfigError, IoError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, QuadratureError, AssemblyError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
