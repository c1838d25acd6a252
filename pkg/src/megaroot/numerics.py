"""Scaled complex arithmetic: a complex mantissa paired with a binary exponent.

Values of degree-2**20 polynomials routinely exceed the double range (|z|**(2**20)
for |z| = 10 has about 3.5 million binary digits in its exponent), so every
polynomial evaluator hands its results back as :class:`ScaledComplex`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MANTISSA_BITS = 53
# Smallest positive normal double.
_TINY = 2.2250738585072014e-308


class ScaledRangeError(ArithmeticError):
    """Result does not fit a native complex number.

    ``sign`` is +1 on overflow and -1 on underflow.
    """

    def __init__(self, sign: int, exponent: int):
        self.sign = sign
        self.exponent = exponent
        kind = "overflow" if sign > 0 else "underflow"
        super().__init__(f"native {kind}: binary exponent {exponent}")


def _scale(m: complex, k: int) -> complex:
    return complex(math.ldexp(m.real, k), math.ldexp(m.imag, k))


@dataclass(frozen=True, slots=True)
class ScaledComplex:
    """The value ``mantissa * 2**exponent``.

    Normalized instances have ``0.5 <= |mantissa| < 2`` (in practice ``[1, 2)``)
    or are the canonical zero ``(0, 0)``.
    """

    mantissa: complex
    exponent: int = 0

    @classmethod
    def from_native(cls, x: complex) -> ScaledComplex:
        x = complex(x)
        if not (math.isfinite(x.real) and math.isfinite(x.imag)):
            raise ValueError(f"cannot scale non-finite value {x!r}")
        return normalize(cls(x, 0))

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def abs_log2(self) -> float:
        """log2 of the magnitude; ``-inf`` for zero."""
        if self.mantissa == 0:
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exponent

    def to_native(self) -> complex:
        return ratio(self, ONE)

    def __mul__(self, other: ScaledComplex) -> ScaledComplex:
        return mul(self, other)

    def __add__(self, other: ScaledComplex) -> ScaledComplex:
        return add(self, other)

    def __truediv__(self, other: ScaledComplex) -> complex:
        return ratio(self, other)


def normalize(x: ScaledComplex) -> ScaledComplex:
    m = complex(x.mantissa)
    if m == 0:
        return ScaledComplex(0j, 0)
    mag = abs(m)
    if math.isinf(mag):
        # both parts finite but the hypot overflows
        m = _scale(m, -2)
        return normalize(ScaledComplex(m, int(x.exponent) + 2))
    k = math.frexp(mag)[1] - 1
    return ScaledComplex(_scale(m, -k), int(x.exponent) + k)


def mul(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.mantissa == 0 or b.mantissa == 0:
        return ScaledComplex(0j, 0)
    return normalize(ScaledComplex(a.mantissa * b.mantissa, a.exponent + b.exponent))


def add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    if a.mantissa == 0:
        return normalize(b)
    if b.mantissa == 0:
        return normalize(a)
    if a.exponent < b.exponent:
        a, b = b, a
    gap = a.exponent - b.exponent
    if gap > MANTISSA_BITS + 1:
        return normalize(a)
    return normalize(ScaledComplex(a.mantissa + _scale(b.mantissa, -gap), a.exponent))


def ratio(a: ScaledComplex, b: ScaledComplex) -> complex:
    """``a / b`` as a native complex number.

    Raises ZeroDivisionError for ``b == 0`` and :class:`ScaledRangeError` when
    the quotient leaves the normal double range.
    """
    if b.mantissa == 0:
        raise ZeroDivisionError("ScaledComplex division by zero")
    if a.mantissa == 0:
        return 0j
    q = a.mantissa / b.mantissa
    e = a.exponent - b.exponent
    # |q| is within [1/4, 4] for normalized inputs; test the exponent first so
    # huge exponents never reach ldexp
    if e > 1100:
        raise ScaledRangeError(+1, e)
    if e < -1100:
        raise ScaledRangeError(-1, e)
    try:
        out = _scale(q, e)
    except OverflowError:
        raise ScaledRangeError(+1, e) from None
    mag = abs(out)
    if math.isinf(mag) or math.isinf(out.real) or math.isinf(out.imag):
        raise ScaledRangeError(+1, e)
    if mag < _TINY:
        raise ScaledRangeError(-1, e)
    return out


ONE = ScaledComplex(1 + 0j, 0)
ZERO = ScaledComplex(0j, 0)
