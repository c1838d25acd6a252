"""Distinct-root bookkeeping.

A :class:`RootSet` keeps one record per root found, with the inclusion radius
``d * |p/p'|`` measured at the recorded point. Two points closer than the dedup
radius are treated as the same root. Records live in a uniform spatial hash
whose cell side equals the dedup radius; every record is registered in each
cell its dedup disk touches, so a query of radius at most delta only has to
look at one cell.
"""

from __future__ import annotations

import math
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

ULP = 2.0**-52


def dedup_radius(d: int, eps_stop: float, scale: float) -> float:
    """Resolution ``d * eps_stop * scale``, floored at 4 ulp of ``scale``."""
    if d <= 0 or eps_stop <= 0 or scale <= 0:
        raise ValueError("dedup radius needs positive arguments")
    return max(d * eps_stop * scale, 4.0 * ULP * scale)


@dataclass
class RootRecord:
    position: complex
    cert: float
    hits: int = 1
    first_orbit: int = -1


class Added(NamedTuple):
    id: int


class Merged(NamedTuple):
    id: int


class Snapshot(NamedTuple):
    """Immutable array view of a RootSet, sorted by center cell, for compiled lookups."""

    kx: np.ndarray
    ky: np.ndarray
    pos: np.ndarray
    ids: np.ndarray
    cell: float


@dataclass
class MatchReport:
    matched: int
    max_error: float
    mean_error: float
    unmatched: list = field(default_factory=list)
    spurious: list = field(default_factory=list)

    @property
    def unmatched_count(self) -> int:
        return len(self.unmatched)

    @property
    def spurious_count(self) -> int:
        return len(self.spurious)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["unmatched"] = [[z.real, z.imag] for z in self.unmatched]
        out["spurious"] = [[z.real, z.imag] for z in self.spurious]
        return out


def _cell_of(x: float, cell: float) -> int:
    return math.floor(x / cell)


def _ball_cells(z: complex, r: float, cell: float) -> list[tuple[int, int]]:
    """Cells whose closed square intersects the closed disk of radius r at z."""
    # a few ulp of slack so cell-boundary rounding never drops a cell
    r = r + 4.0 * ULP * (abs(z.real) + abs(z.imag) + cell)
    x0, x1 = _cell_of(z.real - r, cell), _cell_of(z.real + r, cell)
    y0, y1 = _cell_of(z.imag - r, cell), _cell_of(z.imag + r, cell)
    out = []
    for ix in range(x0, x1 + 1):
        lo, hi = ix * cell, (ix + 1) * cell
        dx = lo - z.real if z.real < lo else (z.real - hi if z.real > hi else 0.0)
        for iy in range(y0, y1 + 1):
            lo, hi = iy * cell, (iy + 1) * cell
            dy = lo - z.imag if z.imag < lo else (z.imag - hi if z.imag > hi else 0.0)
            if dx * dx + dy * dy <= r * r:
                out.append((ix, iy))
    # the center's own cell always counts, even if rounding above said otherwise
    home = (_cell_of(z.real, cell), _cell_of(z.imag, cell))
    if home not in out:
        out.append(home)
    return out


class RootSet:
    """Deduplicated roots with a uniform-grid spatial index.

    Inserts are serialized by a lock. Lookups take no lock and may miss a
    record inserted concurrently.
    """

    def __init__(self, delta: float, degree: int = 0, scale: float = 1.0):
        if not delta > 0:
            raise ValueError("dedup radius must be positive")
        self.delta = float(delta)
        self.degree = degree
        self.scale = float(scale)
        self.records: list[RootRecord] = []
        self._cells: dict[tuple[int, int], list[int]] = {}
        self._registered: list[list[tuple[int, int]]] = []
        self._lock = threading.Lock()
        self._snapshot: Snapshot | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.records], dtype=np.complex128)

    def cells_of(self, rid: int) -> list[tuple[int, int]]:
        return list(self._registered[rid])

    def _register(self, rid: int) -> None:
        cells = _ball_cells(self.records[rid].position, self.delta, self.delta)
        for c in cells:
            self._cells.setdefault(c, []).append(rid)
        self._registered[rid] = cells

    def _unregister(self, rid: int) -> None:
        for c in self._registered[rid]:
            bucket = self._cells[c]
            bucket.remove(rid)
            if not bucket:
                del self._cells[c]

    def _scan_cells(self, z: complex, radius: float, exclude: int = -1):
        best, bestd = None, math.inf
        if radius <= self.delta:
            candidates = self._cells.get((_cell_of(z.real, self.delta), _cell_of(z.imag, self.delta)), ())
        else:
            span = (2 * radius / self.delta + 2) ** 2
            if span > len(self.records):
                candidates = range(len(self.records))
            else:
                seen = set()
                for c in _ball_cells(z, radius, self.delta):
                    seen.update(self._cells.get(c, ()))
                candidates = seen
        for rid in candidates:
            if rid == exclude:
                continue
            dist = abs(self.records[rid].position - z)
            if dist <= radius and (dist < bestd or (dist == bestd and rid < best)):
                best, bestd = rid, dist
        return best, bestd

    def nearest(self, z: complex, radius: float) -> tuple[int, float] | None:
        """Closest record within ``radius`` of z, as ``(id, distance)``."""
        if not radius > 0:
            raise ValueError("query radius must be positive")
        rid, dist = self._scan_cells(complex(z), float(radius))
        return None if rid is None else (rid, dist)

    def insert(self, candidate: complex, cert: float, orbit: int = -1) -> Added | Merged:
        candidate = complex(candidate)
        with self._lock:
            rid, _ = self._scan_cells(candidate, self.delta)
            if rid is None:
                rid = len(self.records)
                self.records.append(RootRecord(candidate, float(cert), 1, orbit))
                self._registered.append([])
                self._register(rid)
                self._snapshot = None
                return Added(rid)
            rec = self.records[rid]
            rec.hits += 1
            if cert < rec.cert:
                # moving the record must not bring it within delta of a neighbour
                other, _ = self._scan_cells(candidate, self.delta, exclude=rid)
                if other is None:
                    self._unregister(rid)
                    rec.position = candidate
                    rec.cert = float(cert)
                    self._register(rid)
                    self._snapshot = None
            return Merged(rid)

    def record_hit(self, rid: int) -> None:
        with self._lock:
            self.records[rid].hits += 1

    def snapshot(self) -> Snapshot:
        snap = self._snapshot
        if snap is not None:
            return snap
        with self._lock:
            m = len(self.records)
            pos = self.positions() if m else np.zeros(0, dtype=np.complex128)
            kx = np.floor(pos.real / self.delta).astype(np.int64)
            ky = np.floor(pos.imag / self.delta).astype(np.int64)
            order = np.lexsort((ky, kx))
            snap = Snapshot(kx[order], ky[order], pos[order], order.astype(np.int64), self.delta)
            self._snapshot = snap
        return snap


def nearest_brute(points: Iterable[complex], z: complex, radius: float) -> tuple[int, float] | None:
    best, bestd = None, math.inf
    for i, p in enumerate(points):
        dist = abs(p - z)
        if dist <= radius and dist < bestd:
            best, bestd = i, dist
    return None if best is None else (best, bestd)


def match_known(rootset: RootSet, true_roots) -> MatchReport:
    """Pair found roots with true roots, closest pairs first.

    A pair qualifies when its distance is at most ``max(10 delta, 1e-8 scale)``;
    each record and each true root is used at most once.
    """
    truth = np.asarray(list(true_roots), dtype=np.complex128)
    found = rootset.positions()
    tol = max(10.0 * rootset.delta, 1e-8 * rootset.scale)
    index: dict[tuple[int, int], list[int]] = {}
    for t, z in enumerate(truth):
        index.setdefault((_cell_of(z.real, tol), _cell_of(z.imag, tol)), []).append(t)
    pairs = []
    for rid, z in enumerate(found):
        cx, cy = _cell_of(z.real, tol), _cell_of(z.imag, tol)
        for ix in (cx - 1, cx, cx + 1):
            for iy in (cy - 1, cy, cy + 1):
                for t in index.get((ix, iy), ()):
                    dist = abs(z - truth[t])
                    if dist <= tol:
                        pairs.append((dist, rid, t))
    pairs.sort()
    used_r, used_t = set(), set()
    errors = []
    for dist, rid, t in pairs:
        if rid in used_r or t in used_t:
            continue
        used_r.add(rid)
        used_t.add(t)
        errors.append(float(dist))
    return MatchReport(
        matched=len(errors),
        max_error=max(errors) if errors else 0.0,
        mean_error=float(np.mean(errors)) if errors else 0.0,
        unmatched=[complex(truth[t]) for t in range(truth.size) if t not in used_t],
        spurious=[complex(found[r]) for r in range(found.size) if r not in used_r],
    )


ROOTS_HEADER = "# megaroot-roots v1 d={d}"


def write_roots(path: str | Path, rootset: RootSet, degree: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ROOTS_HEADER.format(d=degree) + "\n")
        for rec in rootset.records:
            z = rec.position
            fh.write(f"{z.real:.17g} {z.imag:.17g} {rec.cert:.17g} {rec.hits}\n")


def read_roots(path: str | Path) -> tuple[int, list[RootRecord]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        prefix = "# megaroot-roots v1 d="
        if not header.startswith(prefix):
            raise ValueError(f"{path}: not a megaroot roots file")
        degree = int(header[len(prefix):])
        records = []
        for line in fh:
            if not line.strip():
                continue
            re_, im_, cert, hits = line.split()
            records.append(RootRecord(complex(float(re_), float(im_)), float(cert), int(hits)))
    return degree, records
