"""Polynomial families with fused value/derivative evaluation.

Each model is immutable and knows its degree and a radius enclosing all of its
roots. Evaluation returns ``(p(z), p'(z))`` as :class:`ScaledComplex` so that
callers never see overflow, whatever the degree.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from megaroot import _kernels as K
from megaroot.numerics import ScaledComplex, normalize

log = logging.getLogger(__name__)


class CriticalPointError(ArithmeticError):
    """p'(z) vanishes, so the Newton step is undefined."""

    def __init__(self, z: complex):
        self.z = z
        super().__init__(f"p'(z) = 0 at z = {z!r}")


class PolynomialModel:
    """Common surface of all families.

    Subclasses fill in ``kind``, ``coef`` and ``n``, which are exactly the
    arguments the compiled kernels take.
    """

    kind: int
    coef: np.ndarray
    n: int

    @property
    def degree(self) -> int:
        raise NotImplementedError

    @property
    def root_bound(self) -> float:
        raise NotImplementedError

    def evaluate(self, z: complex) -> tuple[ScaledComplex, ScaledComplex]:
        pm, pe, dm, de, _ = K.evaluate(self.kind, self.coef, self.n, complex(z))
        return (
            normalize(ScaledComplex(complex(pm), int(pe))),
            normalize(ScaledComplex(complex(dm), int(de))),
        )

    def describe(self) -> dict:
        raise NotImplementedError


_EMPTY = np.zeros(1, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class DensePoly(PolynomialModel):
    """Coefficient form, ascending order: ``a[0] + a[1] z + ... + a[d] z**d``."""

    coefficients: np.ndarray
    kind = K.DENSE

    def __post_init__(self):
        a = np.ascontiguousarray(self.coefficients, dtype=np.complex128)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("dense polynomial needs at least two coefficients")
        if a[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @property
    def coef(self) -> np.ndarray:
        return self.coefficients

    @property
    def n(self) -> int:
        return self.degree

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @property
    def root_bound(self) -> float:
        return cauchy_bound(self.coefficients)

    def describe(self) -> dict:
        return {"family": "dense", "degree": self.degree}


@dataclass(frozen=True, eq=False)
class IteratedQuadratic(PolynomialModel):
    """``p_n = q∘...∘q`` (n times) with ``q(w) = w**2 + c``; degree ``2**n``."""

    c: complex
    level: int
    kind = K.ITERQUAD

    def __post_init__(self):
        if int(self.level) < 1:
            raise ValueError("level must be >= 1")
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "_coef", np.array([self.c], dtype=np.complex128))

    @property
    def coef(self) -> np.ndarray:
        return self._coef

    @property
    def n(self) -> int:
        return self.level

    @property
    def degree(self) -> int:
        return 1 << self.level

    @property
    def root_bound(self) -> float:
        return max(2.0, abs(self.c))

    def describe(self) -> dict:
        return {"family": "iterquad", "c_re": self.c.real, "c_im": self.c.imag, "level": self.level}


@dataclass(frozen=True, eq=False)
class ChebyshevPoly(PolynomialModel):
    """Chebyshev polynomial of the first kind, T_d."""

    d: int
    kind = K.CHEBYSHEV
    coef = _EMPTY

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("degree must be >= 1")
        object.__setattr__(self, "d", int(self.d))

    @property
    def n(self) -> int:
        return self.d

    @property
    def degree(self) -> int:
        return self.d

    @property
    def root_bound(self) -> float:
        return 1.0

    def roots(self) -> np.ndarray:
        k = np.arange(1, self.d + 1)
        return np.cos((2 * k - 1) * np.pi / (2 * self.d)).astype(np.complex128)

    def describe(self) -> dict:
        return {"family": "chebyshev", "degree": self.d}


@dataclass(frozen=True, eq=False)
class LegendrePoly(PolynomialModel):
    """Legendre polynomial P_d."""

    d: int
    kind = K.LEGENDRE
    coef = _EMPTY

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("degree must be >= 1")
        object.__setattr__(self, "d", int(self.d))

    @property
    def n(self) -> int:
        return self.d

    @property
    def degree(self) -> int:
        return self.d

    @property
    def root_bound(self) -> float:
        return 1.0

    def describe(self) -> dict:
        return {"family": "legendre", "degree": self.d}


@dataclass(frozen=True, eq=False)
class KnownRootsPoly(PolynomialModel):
    """Monic polynomial built as the product of ``(z - r)`` over the given roots.

    Repeated roots are allowed. ``multiplicity_profile`` maps a multiplicity
    to the number of distinct roots that carry it, e.g. ``{1: 8, 2: 1}``.
    """

    roots: np.ndarray
    multiplicity_profile: dict = field(init=False)
    kind = K.KNOWN_ROOTS

    def __post_init__(self):
        r = np.ascontiguousarray(self.roots, dtype=np.complex128)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("need at least one root")
        if not np.all(np.isfinite(r)):
            raise ValueError("roots must be finite")
        r.setflags(write=False)
        object.__setattr__(self, "roots", r)
        counts = Counter(Counter(complex(x) for x in r).values())
        object.__setattr__(self, "multiplicity_profile", dict(sorted(counts.items())))
        if self.has_repeated_roots:
            log.warning("repeated roots present, multiplicity profile %s", self.multiplicity_profile)

    @property
    def has_repeated_roots(self) -> bool:
        return any(m > 1 for m in self.multiplicity_profile)

    @property
    def coef(self) -> np.ndarray:
        return self.roots

    @property
    def n(self) -> int:
        return self.degree

    @property
    def degree(self) -> int:
        return self.roots.size

    @property
    def root_bound(self) -> float:
        r = float(np.max(np.abs(self.roots)))
        # all roots at the origin: any positive radius works
        return r if r > 0 else 1.0

    def describe(self) -> dict:
        return {"family": "known-roots", "degree": self.degree}


def _wrap(out) -> tuple[ScaledComplex, ScaledComplex]:
    pm, pe, dm, de, _ = out
    return (
        normalize(ScaledComplex(complex(pm), int(pe))),
        normalize(ScaledComplex(complex(dm), int(de))),
    )


def eval_dense(poly: DensePoly, z: complex) -> tuple[ScaledComplex, ScaledComplex]:
    return _wrap(K.eval_dense(poly.coefficients, complex(z)))


def eval_iterated_quadratic(poly: IteratedQuadratic, z: complex) -> tuple[ScaledComplex, ScaledComplex]:
    return _wrap(K.eval_iterquad(poly.c, poly.level, complex(z)))


def eval_chebyshev(poly: ChebyshevPoly, z: complex) -> tuple[ScaledComplex, ScaledComplex]:
    return _wrap(K.eval_chebyshev(poly.d, complex(z)))


def eval_legendre(poly: LegendrePoly, z: complex) -> tuple[ScaledComplex, ScaledComplex]:
    return _wrap(K.eval_legendre(poly.d, complex(z)))


def evaluation_steps(poly: PolynomialModel, z: complex) -> int:
    """Number of recurrence steps one joint evaluation performs at z."""
    return int(K.evaluate(poly.kind, poly.coef, poly.n, complex(z))[4])


def newton_correction_known_roots(poly: KnownRootsPoly, z: complex) -> complex:
    """``p(z)/p'(z)`` through the logarithmic derivative ``sum 1/(z - r)``.

    Returns 0 when z is one of the stored roots.
    """
    z = complex(z)
    corr, flag = K.known_roots_correction(poly.roots, z)
    if flag == K.FLAG_CRITICAL:
        raise CriticalPointError(z)
    return complex(corr)


def root_bound(poly: PolynomialModel) -> float:
    return poly.root_bound


def read_coefficients(path: str | Path) -> np.ndarray:
    """Read ``re im`` pairs, one coefficient per line, constant term first."""
    coefs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 're im', got {text!r}")
            try:
                coefs.append(complex(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return np.array(coefs, dtype=np.complex128)


def write_coefficients(path: str | Path, coefficients) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in np.asarray(coefficients, dtype=np.complex128):
            fh.write(f"{a.real:.17g} {a.imag:.17g}\n")


def expand_iterated_quadratic(c: complex, level: int) -> np.ndarray:
    """Ascending coefficients of p_level, by repeated squaring. Small levels only."""
    p = np.array([0, 1], dtype=np.complex128)
    for _ in range(level):
        p = np.convolve(p, p)
        p[0] += c
    return p


def expand_chebyshev(d: int) -> np.ndarray:
    return np.polynomial.chebyshev.cheb2poly([0] * d + [1]).astype(np.complex128)


def cauchy_bound(coefficients) -> float:
    a = np.asarray(coefficients, dtype=np.complex128)
    return 1.0 + float(np.max(np.abs(a[:-1] / a[-1])))


__all__ = [
    "CriticalPointError",
    "PolynomialModel",
    "DensePoly",
    "IteratedQuadratic",
    "ChebyshevPoly",
    "LegendrePoly",
    "KnownRootsPoly",
    "eval_dense",
    "eval_iterated_quadratic",
    "eval_chebyshev",
    "eval_legendre",
    "evaluation_steps",
    "newton_correction_known_roots",
    "root_bound",
    "read_coefficients",
    "write_coefficients",
    "expand_iterated_quadratic",
    "expand_chebyshev",
    "cauchy_bound",
]
