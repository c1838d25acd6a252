"""Experiment orchestration: build a family, launch every grid point, collect roots, report."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from megaroot import _kernels as K
from megaroot.engine import RunConfig, Status, certificate_radius, rootset_for, run_orbits
from megaroot.grid import GridSpec, grid_size, launch_points
from megaroot.poly import (
    ChebyshevPoly,
    DensePoly,
    IteratedQuadratic,
    KnownRootsPoly,
    LegendrePoly,
    PolynomialModel,
    read_coefficients,
)
from megaroot.roots import MatchReport, RootSet, match_known, write_roots

log = logging.getLogger(__name__)

FAMILIES = ("iterquad", "chebyshev", "legendre", "known-roots", "dense-random", "dense-file")
PREIMAGE_MAX_LEVEL = 22


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FamilySpec:
    family: str
    degree: int | None = None
    level: int | None = None
    c: complex = 0j
    seed: int = 0
    path: str | None = None

    def describe(self) -> str:
        f = self.family
        if f == "iterquad":
            return f"iterquad(c={self.c.real:g}{self.c.imag:+g}i,n={self.level})"
        if f in ("chebyshev", "legendre"):
            return f"{f}(d={self.degree})"
        if f in ("known-roots", "dense-random"):
            return f"{f}(d={self.degree},seed={self.seed})"
        return f"dense-file({self.path})"


def random_disk_points(d: int, seed: int) -> np.ndarray:
    """d points uniform by area in the unit disk.

    ``rng = numpy.random.default_rng(seed)``; ``u = rng.random((2, d))``;
    radius ``sqrt(u[0])``, angle ``2*pi*u[1]``.
    """
    rng = np.random.default_rng(seed)
    u = rng.random((2, d))
    return np.sqrt(u[0]) * np.exp(2j * np.pi * u[1])


def random_dense_coefficients(d: int, seed: int) -> np.ndarray:
    """d+1 standard complex Gaussian coefficients from ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2, d + 1))
    return (g[0] + 1j * g[1]) / math.sqrt(2.0)


def preimage_oracle(c: complex, n: int) -> np.ndarray:
    """All 2**n roots of the n-fold iterate of ``w -> w**2 + c``, with multiplicity.

    The roots are the n-fold backward images of 0: start from ``{0}`` and
    replace each point w by both square roots of ``w - c``, n times.
    """
    if n < 0:
        raise ValueError("level must be >= 0")
    if n > PREIMAGE_MAX_LEVEL:
        raise ValueError(f"level {n} exceeds the oracle limit {PREIMAGE_MAX_LEVEL}")
    w = np.zeros(1, dtype=np.complex128)
    for _ in range(n):
        s = np.sqrt(w - complex(c))
        w = np.concatenate((s, -s))
    return w


def build_family(spec: FamilySpec, with_roots: bool = True) -> tuple[PolynomialModel, np.ndarray | None]:
    """Model for the family description plus its exact roots, when known."""
    f = spec.family
    if f not in FAMILIES:
        raise ConfigError(f"unknown family {f!r}")
    try:
        if f == "iterquad":
            if spec.level is None or spec.level < 1:
                raise ConfigError("iterquad needs --level >= 1")
            model = IteratedQuadratic(spec.c, spec.level)
            truth = preimage_oracle(spec.c, spec.level) if with_roots and spec.level <= PREIMAGE_MAX_LEVEL else None
            return model, truth
        if f == "dense-file":
            if not spec.path:
                raise ConfigError("dense-file needs a coefficient file")
            return DensePoly(read_coefficients(spec.path)), None
        d = spec.degree
        if d is None or d < 1:
            raise ConfigError(f"{f} needs --degree >= 1")
        if f == "chebyshev":
            model = ChebyshevPoly(d)
            return model, model.roots()
        if f == "legendre":
            model = LegendrePoly(d)
            truth = None
            if with_roots and d <= 1000:
                truth = np.polynomial.legendre.leggauss(d)[0].astype(np.complex128)
            return model, truth
        if f == "known-roots":
            r = random_disk_points(d, spec.seed)
            return KnownRootsPoly(r), r
        return DensePoly(random_dense_coefficients(d, spec.seed)), None
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentConfig:
    family: FamilySpec
    grid_mode: str = "circle"
    grid_points: int | None = None
    radius_factor: float = 2.0
    grid_offset: float | None = None
    hss_a: float = 0.26
    hss_b: float = 8.32
    run: RunConfig = field(default_factory=RunConfig)
    threads: int | None = None
    deterministic: bool = False
    verify: bool = False
    chunk: int | None = None
    progress_every: float = 2.0

    def grid_for(self, model: PolynomialModel) -> GridSpec:
        return GridSpec(
            d=model.degree,
            R=model.root_bound,
            mode=self.grid_mode,
            points=self.grid_points,
            rho=self.radius_factor,
            offset=self.grid_offset,
            hss_a=self.hss_a,
            hss_b=self.hss_b,
        )


STATUS_KEYS = {
    Status.CONVERGED: "converged",
    Status.ABSORBED: "absorbed",
    Status.MAX_ITER: "max_iter_exceeded",
    Status.ESCAPED: "escaped",
}


@dataclass
class ExperimentReport:
    family: str
    d: int
    grid_size: int
    orbits_run: int
    status_counts: dict
    distinct_roots: int
    iterations_total: int
    iterations_mean: float
    iterations_max: int
    iteration_histogram: list
    wall_time: float
    iterations_per_d_ln_d: float | None
    endgame_violations: int = 0
    match: dict | None = None

    def to_dict(self, timing: bool = True) -> dict:
        out = asdict(self)
        if not timing:
            del out["wall_time"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentReport:
        data = dict(data)
        data.setdefault("wall_time", 0.0)
        data["iteration_histogram"] = [tuple(b) for b in data["iteration_histogram"]]
        return cls(**data)


def log_histogram(iterations: np.ndarray) -> list[tuple[int, int, int]]:
    """Counts in bins [0, 1), [1, 2), [2, 4), [4, 8), ...; empty trailing bins dropped."""
    it = np.asarray(iterations, dtype=np.int64)
    if it.size == 0:
        return []
    bins = [(0, 1)]
    lo = 1
    top = int(it.max())
    while lo <= top:
        bins.append((lo, 2 * lo))
        lo *= 2
    out = [(lo, hi, int(np.count_nonzero((it >= lo) & (it < hi)))) for lo, hi in bins]
    if out[0][2] == 0:
        out = out[1:]
    return out


@dataclass
class ExperimentResult:
    report: ExperimentReport
    roots: RootSet
    model: PolynomialModel
    true_roots: np.ndarray | None = None
    match: MatchReport | None = None


def _chunk_size(total: int, cfg: ExperimentConfig) -> int:
    if cfg.chunk:
        return cfg.chunk
    return max(64, math.ceil(total / 256))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Launch a Newton orbit from every grid point and collect the distinct roots."""
    t0 = time.perf_counter()
    model, truth = build_family(cfg.family, with_roots=cfg.verify)
    try:
        grid = cfg.grid_for(model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    run = cfg.run.resolved(model.degree, grid.max_radius)
    total = grid_size(grid)
    rootset = rootset_for(model, run)
    threads = 1 if cfg.deterministic else (cfg.threads or os.cpu_count() or 1)
    size = _chunk_size(total, cfg)
    starts = list(range(0, total, size))

    status = np.empty(total, np.int64)
    iters = np.empty(total, np.int64)
    monotone = np.ones(total, np.bool_)

    def work(start: int):
        stop = min(start + size, total)
        z0 = launch_points(grid, start, stop)
        ids = np.arange(start, stop, dtype=np.int64)
        return start, stop, run_orbits(model, z0, ids, run, rootset.snapshot())

    def collect(start: int, stop: int, out: dict) -> None:
        status[start:stop] = out["status"]
        iters[start:stop] = out["iterations"]
        monotone[start:stop] = out["monotone"]
        for j in range(stop - start):
            s = out["status"][j]
            if s == K.CONVERGED:
                corr = float(out["correction"][j])
                rootset.insert(complex(out["z"][j]), certificate_radius(model.degree, corr), orbit=start + j)
            elif s == K.ABSORBED:
                rootset.record_hit(int(out["root"][j]))

    last = time.monotonic()
    done = 0

    def progress(force: bool = False) -> None:
        nonlocal last
        now = time.monotonic()
        if force or now - last >= cfg.progress_every:
            last = now
            log.info("%d/%d orbits, %d distinct roots", done, total, len(rootset))

    if threads == 1:
        for start in starts:
            s, e, out = work(start)
            collect(s, e, out)
            done = e
            progress()
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # bounded window keeps snapshots reasonably fresh for absorption
            pending = []
            it = iter(starts)
            for start in it:
                pending.append(pool.submit(work, start))
                if len(pending) >= 2 * threads:
                    s, e, out = pending.pop(0).result()
                    collect(s, e, out)
                    done += e - s
                    progress()
            for fut in pending:
                s, e, out = fut.result()
                collect(s, e, out)
                done += e - s
                progress()

    counts = {key: int(np.count_nonzero(status == int(st))) for st, key in STATUS_KEYS.items()}
    conv = status == K.CONVERGED
    violations = int(np.count_nonzero(conv & ~monotone))
    if violations:
        log.warning("%d converged orbits had a non-monotone endgame", violations)

    match = None
    if cfg.verify and truth is not None:
        match = match_known(rootset, truth)
    elif cfg.verify:
        log.warning("family %s has no exact roots to verify against", cfg.family.family)

    d = model.degree
    dlnd = d * math.log(d)
    it_total = int(iters.sum()) if total else 0
    report = ExperimentReport(
        family=cfg.family.describe(),
        d=d,
        grid_size=total,
        orbits_run=total,
        status_counts=counts,
        distinct_roots=len(rootset),
        iterations_total=it_total,
        iterations_mean=float(it_total / total) if total else 0.0,
        iterations_max=int(iters.max()) if total else 0,
        iteration_histogram=log_histogram(iters),
        wall_time=time.perf_counter() - t0,
        iterations_per_d_ln_d=it_total / dlnd if dlnd > 0 else None,
        endgame_violations=violations,
        match=match.to_dict() if match is not None else None,
    )
    return ExperimentResult(report, rootset, model, truth, match)


CSV_COLUMNS = (
    "family",
    "d",
    "grid_size",
    "orbits_run",
    "converged",
    "absorbed",
    "max_iter_exceeded",
    "escaped",
    "distinct_roots",
    "iterations_total",
    "iterations_mean",
    "iterations_max",
    "iterations_per_d_ln_d",
    "wall_time",
    "endgame_violations",
    "matched",
    "unmatched",
    "spurious",
    "max_error",
    "mean_error",
    "iteration_histogram",
)


def csv_row(report: ExperimentReport, timing: bool = True) -> dict:
    row = {
        "family": report.family,
        "d": report.d,
        "grid_size": report.grid_size,
        "orbits_run": report.orbits_run,
        **report.status_counts,
        "distinct_roots": report.distinct_roots,
        "iterations_total": report.iterations_total,
        "iterations_mean": repr(report.iterations_mean),
        "iterations_max": report.iterations_max,
        "iterations_per_d_ln_d": "" if report.iterations_per_d_ln_d is None else repr(report.iterations_per_d_ln_d),
        "wall_time": repr(report.wall_time) if timing else "",
        "endgame_violations": report.endgame_violations,
        "matched": "",
        "unmatched": "",
        "spurious": "",
        "max_error": "",
        "mean_error": "",
        "iteration_histogram": ";".join(f"{lo}:{hi}:{n}" for lo, hi, n in report.iteration_histogram),
    }
    m = report.match
    if m is not None:
        row.update(
            matched=m["matched"],
            unmatched=len(m["unmatched"]),
            spurious=len(m["spurious"]),
            max_error=repr(m["max_error"]),
            mean_error=repr(m["mean_error"]),
        )
    return row


def emit_report(report: ExperimentReport, path: str | Path, fmt: str = "json", timing: bool = True) -> None:
    """Write a report. JSON overwrites; CSV appends a row, writing the header for a new file."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(timing=timing), indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            if new:
                writer.writeheader()
            writer.writerow(csv_row(report, timing=timing))
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def write_outputs(result: ExperimentResult, out: str | None, roots_out: str | None, fmt: str) -> None:
    if out:
        emit_report(result.report, out, fmt)
    if roots_out:
        write_roots(roots_out, result.roots, result.model.degree)
