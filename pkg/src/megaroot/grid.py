"""Newton launch points on circles outside the root disk.

Two layouts are supported. ``circle`` puts N equidistributed points on one
circle of radius ``rho * R``. ``universal`` stacks ``s`` circles of
``N`` points each, with ``s`` and ``N`` growing like ``ln d`` and ``d ln d``;
this is the layout that comes with a guarantee of finding every root, at a
much higher point count.

Points are computed on demand from their index, so a grid of millions of
points costs nothing to hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np

SILVER = 1.0 + math.sqrt(2.0)


@dataclass(frozen=True)
class GridSpec:
    d: int
    R: float
    mode: Literal["circle", "universal"] = "circle"
    points: int | None = None
    rho: float = 2.0
    offset: float | None = None
    hss_a: float = 0.26
    hss_b: float = 8.32

    def __post_init__(self):
        if self.mode not in ("circle", "universal"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.d < 1:
            raise ValueError("degree must be >= 1")
        if not self.R > 0:
            raise ValueError("root bound must be positive")
        if not self.rho > 1:
            raise ValueError("radius factor must exceed 1")
        if self.points is not None and self.points < 0:
            raise ValueError("point count must be nonnegative")
        if self.mode == "universal" and not (self.hss_a > 0 and self.hss_b > 0):
            raise ValueError("universal grid constants must be positive")

    @property
    def circles(self) -> int:
        if self.mode == "circle":
            return 1
        return max(1, math.ceil(self.hss_a * math.log(self.d)))

    @property
    def per_circle(self) -> int:
        """Number of points on each circle."""
        if self.mode == "circle":
            return self.d if self.points is None else self.points
        if self.points is not None:
            return self.points
        return max(1, math.ceil(self.hss_b * self.d * math.log(self.d)))

    @property
    def phase(self) -> float:
        """Angular offset of slot 0; defaults to half a slot off the real axis."""
        if self.offset is not None:
            return self.offset
        n = self.per_circle
        return math.pi / (2 * n) if n > 0 else 0.0

    @property
    def launch_radius(self) -> float:
        return self.rho * self.R

    def radius(self, v: int) -> float:
        """Radius of circle v: geometric steps from rho*R to (1 + sqrt 2)*R."""
        s = self.circles
        if s == 1:
            return self.rho * self.R
        return self.rho * self.R * (SILVER / self.rho) ** (v / (s - 1))

    @property
    def max_radius(self) -> float:
        return max(self.radius(0), self.radius(self.circles - 1))


@dataclass(frozen=True)
class LaunchPoint:
    position: complex
    circle: int
    slot: int


def grid_size(spec: GridSpec) -> int:
    return spec.circles * spec.per_circle


_TWO_PI = Fraction(2.0 * math.pi)
_PI = Fraction(math.pi)


def _angle(spec: GridSpec, v: int, j: int) -> float:
    """Angle of slot j on circle v, correctly rounded from the exact rational sum."""
    n = spec.per_circle
    t = Fraction(spec.phase) + _TWO_PI * j / n
    if spec.mode == "universal":
        t += _PI * v / (spec.circles * n)
    return float(t)


def launch_point(spec: GridSpec, k: int) -> LaunchPoint:
    size = grid_size(spec)
    if not 0 <= k < size:
        raise IndexError(f"launch index {k} outside grid of {size} points")
    n = spec.per_circle
    v, j = divmod(k, n)
    r = spec.radius(v)
    t = _angle(spec, v, j)
    return LaunchPoint(complex(r * math.cos(t), r * math.sin(t)), v, j)


def launch_points(spec: GridSpec, start: int, stop: int) -> np.ndarray:
    """Positions of points ``start .. stop-1`` as a complex array.

    Bit-identical to calling :func:`launch_point` on each index.
    """
    size = grid_size(spec)
    if not 0 <= start <= stop <= size:
        raise IndexError(f"launch range [{start}, {stop}) outside grid of {size} points")
    return np.array([launch_point(spec, k).position for k in range(start, stop)], dtype=np.complex128)
