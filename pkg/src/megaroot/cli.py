"""Command line interface: ``megaroot solve | sweep | verify-oracle``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from megaroot.engine import RunConfig, newton_step
from megaroot.harness import (
    FAMILIES,
    ConfigError,
    ExperimentConfig,
    FamilySpec,
    emit_report,
    preimage_oracle,
    random_disk_points,
    run_experiment,
    write_outputs,
)
from megaroot.poly import ChebyshevPoly, IteratedQuadratic, KnownRootsPoly

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_IO = 4

log = logging.getLogger("megaroot")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    fam = p.add_argument_group("family")
    fam.add_argument("--family", choices=FAMILIES, required=True)
    fam.add_argument("--degree", type=int)
    fam.add_argument("--level", type=int, help="nesting level n of the iterated quadratic (degree 2**n)")
    fam.add_argument("--c-re", type=float, default=0.0)
    fam.add_argument("--c-im", type=float, default=0.0)
    fam.add_argument("--seed", type=int, default=0)
    fam.add_argument("--coeff-file", help="coefficient file for --family dense-file ('re im' per line, a_0 first)")

    grid = p.add_argument_group("grid")
    grid.add_argument("--grid-mode", choices=("circle", "universal"), default="circle")
    grid.add_argument("--grid-points", type=int, help="points per circle (circle mode default: d)")
    grid.add_argument("--radius-factor", type=float, default=2.0, help="launch radius as a multiple of the root bound")
    grid.add_argument("--grid-offset", type=float, help="angle of slot 0 in radians (default pi/(2N))")
    grid.add_argument("--hss-a", type=float, default=0.26, help="universal grid: circles = ceil(A ln d)")
    grid.add_argument("--hss-b", type=float, default=8.32, help="universal grid: points per circle = ceil(B d ln d)")

    run = p.add_argument_group("iteration")
    run.add_argument("--eps", type=float, default=1e-13)
    run.add_argument("--max-iter", type=int)
    run.add_argument("--absorb-factor", type=float, default=1.0)
    run.add_argument("--dedup-scale", type=float, default=1.0)
    run.add_argument("--threads", type=int)
    run.add_argument("--deterministic", action="store_true")

    out = p.add_argument_group("output")
    out.add_argument("--verify", action="store_true")
    out.add_argument("--out", help="report path")
    out.add_argument("--format", choices=("json", "csv"), default="json")
    out.add_argument("-q", "--quiet", action="store_true")


def _config(args: argparse.Namespace) -> ExperimentConfig:
    try:
        run = RunConfig(
            eps_stop=args.eps,
            max_iter=args.max_iter,
            absorb_factor=args.absorb_factor,
            dedup_scale=args.dedup_scale,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    family = FamilySpec(
        family=args.family,
        degree=args.degree,
        level=args.level,
        c=complex(args.c_re, args.c_im),
        seed=args.seed,
        path=args.coeff_file,
    )
    return ExperimentConfig(
        family=family,
        grid_mode=args.grid_mode,
        grid_points=args.grid_points,
        radius_factor=args.radius_factor,
        grid_offset=args.grid_offset,
        hss_a=args.hss_a,
        hss_b=args.hss_b,
        run=run,
        threads=args.threads,
        deterministic=args.deterministic,
        verify=args.verify,
    )


def _summary(report) -> str:
    s = report.status_counts
    line = (
        f"{report.family}: d={report.d} orbits={report.orbits_run} roots={report.distinct_roots} "
        f"conv={s['converged']} abs={s['absorbed']} maxit={s['max_iter_exceeded']} esc={s['escaped']} "
        f"iters={report.iterations_total} ({report.wall_time:.2f}s)"
    )
    if report.match is not None:
        m = report.match
        line += f" matched={m['matched']} unmatched={len(m['unmatched'])} max_err={m['max_error']:.3g}"
    return line


def _verify_failed(report) -> bool:
    return report.match is not None and len(report.match["unmatched"]) > 0


def cmd_solve(args: argparse.Namespace) -> int:
    result = run_experiment(_config(args))
    write_outputs(result, args.out, args.roots_out, args.format)
    if not args.quiet:
        print(_summary(result.report))
    return EXIT_VERIFY if _verify_failed(result.report) else EXIT_OK


def _parse_values(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma separated list of integers, got {text!r}") from None
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def cmd_sweep(args: argparse.Namespace) -> int:
    if not args.out:
        raise ConfigError("sweep needs --out for its CSV")
    base = _config(args)
    failed = False
    for v in _parse_values(args.values):
        if args.vary == "points":
            cfg = replace(base, grid_points=v)
        else:
            fam = replace(base.family, level=v) if args.vary == "level" else replace(base.family, degree=v)
            cfg = replace(base, family=fam)
            if args.points_per_degree:
                d = 1 << v if args.vary == "level" else v
                cfg = replace(cfg, grid_points=args.points_per_degree * d)
        result = run_experiment(cfg)
        emit_report(result.report, args.out, "csv")
        failed |= _verify_failed(result.report)
        if not args.quiet:
            print(_summary(result.report))
    return EXIT_VERIFY if failed else EXIT_OK


def oracle_checks() -> list[tuple[str, bool, str]]:
    """Self-consistency of the verification oracles against the evaluators."""
    checks = []

    q = IteratedQuadratic(1j, 10)
    pts = preimage_oracle(1j, 10)
    worst = max(abs(q.evaluate(z)[0].to_native()) for z in pts)
    distinct = np.unique(np.round(pts, 12)).size
    checks.append(("preimage oracle c=i n=10", worst <= 1e-10 and distinct == 1024, f"max|p|={worst:.3g} distinct={distinct}"))

    pts = preimage_oracle(-1, 1)
    ok = sorted(pts.real.tolist()) == [-1.0, 1.0]
    checks.append(("preimage oracle c=-1 n=1", ok, f"{pts.tolist()}"))

    t = ChebyshevPoly(256)
    worst = max(abs(newton_step(t, z)[1]) for z in t.roots())
    checks.append(("chebyshev closed-form roots d=256", worst <= 1e-13, f"max|T/T'|={worst:.3g}"))

    theta = np.linspace(0.1, 3.0, 50)
    t = ChebyshevPoly(64)
    worst = max(abs(t.evaluate(math.cos(th))[0].to_native() - math.cos(64 * th)) for th in theta)
    checks.append(("chebyshev cosine identity d=64", worst <= 1e-12, f"max err={worst:.3g}"))

    r = random_disk_points(100, 7)
    k = KnownRootsPoly(r)
    worst = max(abs(k.evaluate(z)[0].to_native()) for z in r)
    checks.append(("known roots d=100 seed=7", worst == 0.0 and np.all(np.abs(r) <= 1), f"max|p|={worst:.3g}"))
    return checks


def cmd_verify_oracle(args: argparse.Namespace) -> int:
    failed = False
    for name, ok, detail in oracle_checks():
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="megaroot", description="All roots of large-degree polynomials by Newton's method.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one experiment")
    _add_experiment_args(p)
    p.add_argument("--roots-out", help="roots file path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run one experiment per value, appending rows to a CSV")
    _add_experiment_args(p)
    p.add_argument("--vary", choices=("points", "degree", "level"), required=True)
    p.add_argument("--values", required=True, help="comma separated list, e.g. 256,1024,4096")
    p.add_argument("--points-per-degree", type=int, help="when varying degree or level, use N = k * d")
    p.set_defaults(func=cmd_sweep, roots_out=None)

    p = sub.add_parser("verify-oracle", help="self-check the verification oracles")
    p.set_defaults(func=cmd_verify_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which is also our invalid-config code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"megaroot: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"megaroot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
