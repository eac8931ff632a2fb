"""Modified Bessel functions by exact series, and the Laurent-pair algebra.

Every Hankel entry used by the gap-probability determinants is a derivative
of either ``I1(s)/s`` (odd parity) or ``I0(s) + I1(s)`` (even parity).  Both
bases, and all their derivatives, have the form ``p(s) I0(s) + q(s) I1(s)``
with ``p``, ``q`` Laurent polynomials with rational coefficients.  The
derivative of such a pair is again such a pair, because ``I0' = I1`` and
``I1' = I0 - I1/s``.  Coefficients are kept as exact ``Fraction`` objects.

The global factor pi carried by both integral representations is dropped here
and in the normalisation constants alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import mpmath as mp

__all__ = [
    "PrecisionRequest",
    "PrecisionError",
    "LaurentPair",
    "as_fraction",
    "bessel_I",
    "bessel_J",
    "laurent_base",
    "laurent_derive",
    "laurent_eval",
]

MAX_SERIES_TERMS = 20000
GUARD_BITS = 8


class PrecisionError(ArithmeticError):
    """Raised when a requested accuracy cannot be reached.

    ``candidates`` holds the last values that failed to agree, if any.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


@dataclass(frozen=True)
class PrecisionRequest:
    """Working precision (bits) and target relative tolerance."""

    bits: int = 256
    tol: float = 1e-40

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 53:
            raise ValueError(f"precision must be an integer >= 53 bits, got {self.bits!r}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ValueError(f"tolerance must be positive and finite, got {self.tol!r}")

    @property
    def effective_bits(self) -> int:
        """Bits needed so that rounding alone stays below ``tol``."""
        return max(int(self.bits), math.ceil(-math.log2(self.tol)) + GUARD_BITS)


DEFAULT_PRECISION = PrecisionRequest()


def as_fraction(s) -> Fraction:
    """Exact rational value of a binary floating point (or rational) number."""
    if isinstance(s, Fraction):
        return s
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, mp.mpf):
        if not mp.isfinite(s):
            raise ValueError(f"non-finite argument {s!r}")
        # man_exp drops the sign; the raw tuple keeps it
        sign, man, exp, _ = s._mpf_
        man = -int(man) if sign else int(man)
        return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)
    x = float(s)
    if not math.isfinite(x):
        raise ValueError(f"non-finite argument {s!r}")
    return Fraction(x)


def _to_mpf(x: Fraction) -> mp.mpf:
    # single rounding at the current working precision
    return mp.mpf(x.numerator) / x.denominator


def _truncation_index(kind: str, order: int, x: float, bits: int) -> int:
    """Number of series terms after which the tail is below ``2**-bits`` of the sum.

    Estimated in floating point from log-magnitudes; the exact sum is checked
    again by the caller.
    """
    if x == 0:
        return 0
    log_half = math.log(x / 2)
    peak = -math.inf
    k = 0
    while True:
        lt = (2 * k + order) * log_half - math.lgamma(k + 1) - math.lgamma(k + order + 1)
        peak = max(peak, lt)
        ratio_small = (x / 2) ** 2 <= 0.5 * (k + 1) * (k + 1 + order)
        # the largest term bounds the sum from below for I; for J the exact check decides
        if ratio_small and lt <= peak - (bits + 2) * math.log(2):
            return k
        k += 1
        if k > MAX_SERIES_TERMS:
            raise PrecisionError(f"{kind}_{order}({x:g}) needs more than {MAX_SERIES_TERMS} terms")


def _horner(kind: str, order: int, x: Fraction, K: int) -> tuple[int, int]:
    """Exact ``sum_{k<=K} sign^k (x/2)^(2k+order) / (k! (k+order)!)`` as (num, den)."""
    a, b = x.numerator, x.denominator
    A, B = a * a, 4 * b * b
    sign = -1 if kind == "J" else 1
    num, den = 1, 1
    for k in range(K, 0, -1):
        step = k * (k + order) * B
        num, den = den * step + sign * A * num, den * step
    # multiply by (x/2)^order / order!
    num *= a**order
    den *= (2 * b) ** order * math.factorial(order)
    return num, den


@lru_cache(maxsize=4096)
def _bessel_series(kind: str, order: int, x: Fraction, bits: int) -> tuple[int, int]:
    """Truncated power series of I_order (kind 'I') or J_order (kind 'J') at x >= 0.

    Terms are summed exactly and returned as an integer pair ``(num, den)``.
    Summation stops once the terms decrease by at least a factor of two and
    the first omitted term is below ``2**-bits`` of the sum, which bounds the
    discarded tail by the same amount.
    """
    if x == 0:
        return (1, 1) if order == 0 else (0, 1)
    K = _truncation_index(kind, order, float(x), bits)
    while True:
        num, den = _horner(kind, order, x, K)
        # first omitted term, exactly
        half = x / 2
        nxt = half ** (2 * K + 2 + order) / (math.factorial(K + 1) * math.factorial(K + 1 + order))
        if num != 0 and nxt * den * 2**bits <= abs(num):
            return num, den
        if K > MAX_SERIES_TERMS:
            raise PrecisionError(f"{kind}_{order}({float(x):g}) did not converge within {MAX_SERIES_TERMS} terms")
        K = 2 * K + 1


def _ratio_to_mpf(pair) -> mp.mpf:
    num, den = pair
    return mp.mpf(num) / den


def bessel_I(order: int, s, prec: PrecisionRequest = DEFAULT_PRECISION) -> mp.mpf:
    """Modified Bessel function ``I_0`` or ``I_1`` at real ``s``.

    The series is summed in exact rational arithmetic and rounded once to
    ``prec.effective_bits``.  Negative arguments use ``I0(-s) = I0(s)`` and
    ``I1(-s) = -I1(s)``.
    """
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order!r}")
    x = as_fraction(s)
    bits = prec.effective_bits
    value = _bessel_series("I", order, abs(x), bits + GUARD_BITS)
    with mp.workprec(bits):
        out = _ratio_to_mpf(value)
        return -out if x < 0 and order == 1 else out


def bessel_J(order: int, s, prec: PrecisionRequest = DEFAULT_PRECISION) -> mp.mpf:
    """Bessel function ``J_order`` for integer ``order >= 0`` and ``s >= 0``."""
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order!r}")
    x = as_fraction(s)
    if x < 0:
        raise ValueError("bessel_J is only defined here for s >= 0")
    bits = prec.effective_bits
    value = _bessel_series("J", int(order), x, bits + GUARD_BITS)
    with mp.workprec(bits):
        return _ratio_to_mpf(value)


def _canonical(coeffs: Mapping[int, Fraction]) -> tuple[tuple[int, Fraction], ...]:
    return tuple(sorted((int(e), Fraction(c)) for e, c in coeffs.items() if c != 0))


@dataclass(frozen=True)
class LaurentPair:
    """``p(s) I0(s) + q(s) I1(s)`` with Laurent polynomials ``p`` and ``q``.

    ``p`` and ``q`` are stored as sorted ``(exponent, coefficient)`` tuples with
    zero coefficients removed, so equality is structural.
    """

    p: tuple[tuple[int, Fraction], ...] = field(default=())
    q: tuple[tuple[int, Fraction], ...] = field(default=())

    @classmethod
    def from_dicts(cls, p: Mapping[int, object] = None, q: Mapping[int, object] = None) -> "LaurentPair":
        p = {e: Fraction(c) for e, c in (p or {}).items()}
        q = {e: Fraction(c) for e, c in (q or {}).items()}
        return cls(_canonical(p), _canonical(q))

    @property
    def p_dict(self) -> dict[int, Fraction]:
        return dict(self.p)

    @property
    def q_dict(self) -> dict[int, Fraction]:
        return dict(self.q)

    @property
    def has_pole(self) -> bool:
        return any(e < 0 for e, _ in self.p + self.q)

    def coefficients_at(self, s: Fraction) -> tuple[Fraction, Fraction]:
        """Exact values ``(p(s), q(s))``."""
        if s == 0 and self.has_pole:
            raise ZeroDivisionError("Laurent pair has a pole at s = 0")
        return _poly_at(self.p, s), _poly_at(self.q, s)


def _poly_at(terms, s: Fraction) -> Fraction:
    return sum((c * s**e for e, c in terms), Fraction(0))


def _formal_derivative(terms) -> dict[int, Fraction]:
    return {e - 1: c * e for e, c in terms if e != 0}


def _add(*polys: Mapping[int, Fraction]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for poly in polys:
        for e, c in poly.items():
            out[e] = out.get(e, Fraction(0)) + c
    return out


def laurent_base(parity: str) -> LaurentPair:
    """Base entry: ``I1(s)/s`` for odd parity, ``I0(s) + I1(s)`` for even."""
    if parity == "odd":
        return LaurentPair.from_dicts({}, {-1: 1})
    if parity == "even":
        return LaurentPair.from_dicts({0: 1}, {0: 1})
    raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")


def laurent_derive(h: LaurentPair) -> LaurentPair:
    """Exact derivative: ``(p, q) -> (p' + q, p + q' - q/s)``."""
    p, q = h.p_dict, h.q_dict
    q_over_s = {e - 1: -c for e, c in q.items()}
    new_p = _add(_formal_derivative(h.p), q)
    new_q = _add(p, _formal_derivative(h.q), q_over_s)
    return LaurentPair(_canonical(new_p), _canonical(new_q))


def _eval_with(h: LaurentPair, s: Fraction, i0: mp.mpf, i1: mp.mpf) -> mp.mpf:
    """Evaluate at the current mpmath precision given precomputed Bessel values."""
    p, q = h.coefficients_at(s)
    return _to_mpf(p) * i0 + _to_mpf(q) * i1


def laurent_eval(h: LaurentPair, s, prec: PrecisionRequest = DEFAULT_PRECISION) -> mp.mpf:
    """``p(s) I0(s) + q(s) I1(s)`` at ``prec``.

    The polynomial parts are evaluated exactly and rounded once.  Cancellation
    between the two products is not compensated here; callers that need a
    certified result escalate the precision.
    """
    x = as_fraction(s)
    bits = prec.effective_bits
    with mp.workprec(bits):
        i0 = bessel_I(0, x, prec)
        i1 = bessel_I(1, x, prec)
        return +_eval_with(h, x, i0, i1)
