"""Newton orbits: stepping, stopping rules, critical-point jitter and absorption."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from megaroot import _kernels as K
from megaroot.poly import CriticalPointError, PolynomialModel
from megaroot.roots import RootSet, Snapshot, dedup_radius

ABSORB_SLOWNESS = 1e3
UNIT_ROUNDOFF = 2.0**-53


class Status(enum.IntEnum):
    CONVERGED = K.CONVERGED
    ABSORBED = K.ABSORBED
    MAX_ITER = K.MAX_ITER
    ESCAPED = K.ESCAPED


def default_max_iter(d: int, launch_radius: float = 2.0) -> int:
    """Iteration cap for degree d.

    Far from the roots one Newton step shrinks ``|z|`` by roughly a factor
    ``1 - 1/d``, so the approach from the launch circle alone takes on the order
    of ``d * ln(2 * launch_radius)`` steps before the quadratic endgame.
    """
    lr = max(1.0, launch_radius)
    return math.ceil(2 * d * math.log(2 * lr)) + math.ceil(50 * math.log(max(d, 1))) + 500


def certificate_radius(d: int, correction: float) -> float:
    """Radius of a disk around the current point that contains a root.

    In exact arithmetic ``d * |p/p'|`` suffices. The factor ``1 + (2d + 8) u``
    rounds outward by the error of summing d terms of ``p'/p``, so the disk
    still contains a root when ``|p/p'|`` comes from floating point.
    """
    return d * correction * (1.0 + (2 * d + 8) * UNIT_ROUNDOFF)


@dataclass(frozen=True)
class RunConfig:
    eps_stop: float = 1e-13
    max_iter: int | None = None
    absorb_factor: float = 1.0
    perturb_scale: float = 1e-9
    escape_cap: float | None = None
    dedup_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.eps_stop > 0:
            raise ValueError("eps_stop must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.absorb_factor < 0:
            raise ValueError("absorb_factor must be >= 0")
        if self.escape_cap is not None and not self.escape_cap > 0:
            raise ValueError("escape_cap must be positive")
        if not self.dedup_scale > 0:
            raise ValueError("dedup_scale must be positive")

    def resolved(self, d: int, launch_radius: float) -> RunConfig:
        """Fill in the degree- and grid-dependent defaults."""
        return replace(
            self,
            max_iter=self.max_iter if self.max_iter is not None else default_max_iter(d, launch_radius),
            escape_cap=self.escape_cap if self.escape_cap is not None else 4.0 * launch_radius,
        )


@dataclass(frozen=True)
class OrbitResult:
    status: Status
    z: complex
    iterations: int
    correction: float
    cert: float
    root_id: int | None = None
    monotone_endgame: bool = True


def newton_step(poly: PolynomialModel, z: complex) -> tuple[complex, complex]:
    """One Newton step; raises CriticalPointError where p'(z) = 0."""
    z = complex(z)
    corr, flag = K.correction(poly.kind, poly.coef, poly.n, z)
    if flag == K.FLAG_CRITICAL:
        raise CriticalPointError(z)
    corr = complex(corr)
    return z - corr, corr


def rootset_for(poly: PolynomialModel, cfg: RunConfig) -> RootSet:
    scale = max(1.0, poly.root_bound)
    delta = dedup_radius(poly.degree, cfg.eps_stop, scale) * cfg.dedup_scale
    return RootSet(delta, degree=poly.degree, scale=scale)


_NO_SNAPSHOT = Snapshot(
    np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.complex128), np.zeros(0, np.int64), 1.0
)


def run_orbits(
    poly: PolynomialModel,
    z0: np.ndarray,
    orbit_ids: np.ndarray,
    cfg: RunConfig,
    snapshot: Snapshot | None = None,
) -> dict[str, np.ndarray]:
    """Run a batch of orbits through the compiled loop.

    ``cfg`` must already be resolved. Returns the raw per-orbit arrays; the
    snapshot is the (possibly stale) view of known roots used for absorption.
    """
    z0 = np.ascontiguousarray(z0, dtype=np.complex128)
    ids = np.ascontiguousarray(orbit_ids, dtype=np.int64)
    m = z0.size
    snap = snapshot if snapshot is not None else _NO_SNAPSHOT
    absorb = cfg.absorb_factor * snap.cell if snapshot is not None and len(snap.ids) else 0.0
    out = {
        "status": np.empty(m, np.int64),
        "z": np.empty(m, np.complex128),
        "iterations": np.empty(m, np.int64),
        "correction": np.empty(m, np.float64),
        "root": np.empty(m, np.int64),
        "monotone": np.empty(m, np.bool_),
    }
    K.run_orbits(
        poly.kind, poly.coef, poly.n, poly.degree, z0, ids, np.uint64(cfg.seed % (1 << 64)),
        cfg.eps_stop, cfg.max_iter, absorb, snap.cell, cfg.escape_cap, cfg.perturb_scale,
        snap.kx, snap.ky, snap.pos, snap.ids,
        out["status"], out["z"], out["iterations"], out["correction"], out["root"], out["monotone"],
    )
    return out


def run_orbit(
    poly: PolynomialModel,
    z0: complex,
    cfg: RunConfig | None = None,
    known: RootSet | None = None,
    orbit_id: int = 0,
) -> OrbitResult:
    cfg = cfg or RunConfig()
    if cfg.max_iter is None or cfg.escape_cap is None:
        cfg = cfg.resolved(poly.degree, 2.0 * poly.root_bound)
    z0 = complex(z0)
    if not abs(z0) <= cfg.escape_cap:
        raise ValueError(f"start point {z0} lies beyond the escape cap {cfg.escape_cap}")
    snap = known.snapshot() if known is not None else None
    out = run_orbits(poly, np.array([z0]), np.array([orbit_id]), cfg, snap)
    status = Status(int(out["status"][0]))
    corr = float(out["correction"][0])
    root = int(out["root"][0])
    return OrbitResult(
        status=status,
        z=complex(out["z"][0]),
        iterations=int(out["iterations"][0]),
        correction=corr,
        cert=certificate_radius(poly.degree, corr),
        root_id=root if status is Status.ABSORBED else None,
        monotone_endgame=bool(out["monotone"][0]),
    )
