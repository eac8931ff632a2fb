"""Hankel matrices of derivative entries and their determinants.

The matrix is ``M[j, k] = h_{j+k}(s)`` where ``h_n`` is the n-th derivative of
the parity's base function.  Entries grow like ``e^|s|`` while the determinant
is exponentially smaller, so every quantity here is computed at two working
precisions (doubling each time) until the two results agree.  For
``|s| < 1`` the entries come from the exact moment series instead, since the
Bessel form cancels badly near the origin.

A second, independent evaluator integrates ``lambda^n w(lambda) e^{s lambda}``
by Gauss-Jacobi quadrature; the two must coincide because differentiating in
``s`` brings down a factor of ``lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import roots_jacobi

from .special import (
    DEFAULT_PRECISION,
    LaurentPair,
    PrecisionError,
    PrecisionRequest,
    _bessel_series,
    _eval_with,
    _ratio_to_mpf,
    _to_mpf,
    as_fraction,
    laurent_base,
    laurent_derive,
    GUARD_BITS,
)

__all__ = [
    "HankelProblem",
    "DetResult",
    "HankelJet",
    "MAX_BITS",
    "entry_table",
    "exact_moments",
    "entry_values",
    "det_adaptive",
    "logdet_derivative",
    "logdet_jet",
    "logdet_third_richardson",
    "quadrature_entries",
    "moments_quadrature",
    "start_bits",
]

MAX_BITS = 1 << 15

# Gauss-Jacobi exponents in the convention (1 - x)**alpha * (1 + x)**beta
JACOBI_EXPONENTS = {"odd": (0.5, 0.5), "even": (-0.5, 0.5)}


def _check_parity(parity):
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")


@dataclass(frozen=True)
class HankelProblem:
    """Everything needed to build the ``m x m`` Hankel matrix at ``s``."""

    parity: str
    m: int
    s: object
    prec: PrecisionRequest = DEFAULT_PRECISION

    def __post_init__(self):
        _check_parity(self.parity)
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"matrix dimension must be a non-negative integer, got {self.m!r}")
        as_fraction(self.s)  # rejects non-finite


@dataclass(frozen=True)
class DetResult:
    value: mp.mpf
    achieved_precision: int
    estimated_relative_error: float


@dataclass(frozen=True)
class HankelJet:
    """Determinant and the first few derivatives of its logarithm in ``s``."""

    det: mp.mpf
    logdet_derivatives: tuple
    achieved_precision: int
    estimated_relative_error: float


@lru_cache(maxsize=None)
def _entries(parity: str, max_order: int) -> tuple[LaurentPair, ...]:
    h = laurent_base(parity)
    out = [h]
    for _ in range(max_order):
        h = laurent_derive(h)
        out.append(h)
    return tuple(out)


def entry_table(parity: str, max_order: int) -> list[LaurentPair]:
    """``[h_0, ..., h_max_order]`` with ``h_n`` the n-th derivative of the base."""
    _check_parity(parity)
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    return list(_entries(parity, int(max_order)))


@lru_cache(maxsize=None)
def exact_moments(parity: str, count: int) -> tuple[Fraction, ...]:
    """Entries at ``s = 0``: ``h_n(0)`` for ``n < count``, exactly.

    These are the pi-free moments of the weight.  They are read off the Taylor
    series of the base function, ``h_n(0) = n! * [s^n] base(s)``.
    """
    _check_parity(parity)
    # Taylor coefficients of I0 and I1
    def i0(n):
        return Fraction(1, 4**(n // 2) * math.factorial(n // 2) ** 2) if n % 2 == 0 else Fraction(0)

    def i1(n):
        if n % 2 == 0:
            return Fraction(0)
        k = (n - 1) // 2
        return Fraction(1, 2 ** (2 * k + 1) * math.factorial(k) * math.factorial(k + 1))

    out = []
    for n in range(count):
        coeff = i1(n + 1) if parity == "odd" else i0(n) + i1(n)
        out.append(coeff * math.factorial(n))
    return tuple(out)


# below this |s| the Laurent form loses about n*log2(1/|s|) bits to cancellation
# in h_n; the moment series has no cancellation there
TAYLOR_RADIUS = Fraction(1)


def _taylor_entries(parity: str, x: Fraction, max_order: int) -> list:
    """``h_n(x) = sum_k mu_{n+k} x^k / k!`` at the current precision.

    All moments satisfy ``|mu_j| <= mu_0`` (the weight lives on [-1, 1]), so the
    tail after ``K`` terms is at most ``3 mu_0 |x|^K / K!`` for ``|x| < 1``.
    The sum of absolute terms exceeds the result by at most ``e^{2|x|}``, so a
    few guard bits cover the rounding.
    """
    bits = mp.mp.prec
    ax = float(abs(x))
    K = 1
    # smallest |h_n| is at least mu_{2k}-sized times |x| (odd parity, odd n)
    target = (bits + 2 * GUARD_BITS) * math.log(2) - math.log(ax)
    while K * math.log(1 / ax) + math.lgamma(K + 1) < target + max_order * math.log(2):
        K += 1
    mu = exact_moments(parity, max_order + K + 1)
    with mp.workprec(bits + 2 * GUARD_BITS):
        xm = _to_mpf(x)
        weights = [mp.mpf(1)]
        for k in range(1, K + 1):
            weights.append(weights[-1] * xm / k)
        mum = [_to_mpf(v) for v in mu]
        out = [mp.fsum(mum[n + k] * weights[k] for k in range(K + 1)) for n in range(max_order + 1)]
    return [+v for v in out]


def entry_values(parity: str, s, max_order: int) -> list:
    """``h_0(s) .. h_max_order(s)`` at the current mpmath working precision."""
    x = as_fraction(s)
    if x == 0:
        return [_to_mpf(mu) for mu in exact_moments(parity, max_order + 1)]
    if abs(x) < TAYLOR_RADIUS:
        return _taylor_entries(parity, x, max_order)
    return _laurent_entries(parity, x, max_order)


def _laurent_entries(parity: str, x: Fraction, max_order: int) -> list:
    bits = mp.mp.prec + GUARD_BITS
    i0 = _ratio_to_mpf(_bessel_series("I", 0, abs(x), bits))
    i1 = _ratio_to_mpf(_bessel_series("I", 1, abs(x), bits))
    if x < 0:
        i1 = -i1
    return [_eval_with(h, x, i0, i1) for h in _entries(parity, max_order)]


def _hankel(values, m: int, shift: int = 0) -> mp.matrix:
    M = mp.matrix(m, m)
    for j in range(m):
        for k in range(m):
            M[j, k] = values[j + k + shift]
    return M


def start_bits(problem: HankelProblem) -> int:
    """Initial working precision: absorbs the ``e^{2 m |s|}`` dynamic range."""
    s = abs(float(as_fraction(problem.s)))
    heuristic = 53 + math.ceil(4 * problem.m * s * math.log2(math.e))
    return max(problem.prec.effective_bits, heuristic)


def _stabilize(compute, problem: HankelProblem, scales):
    """Run ``compute`` at doubling precision until two successive runs agree.

    ``scales`` maps each output component to the floor of its comparison
    scale: 0 for pure relative agreement, 1 for mixed absolute/relative.
    Returns ``(values, bits, estimated_error)``.
    """
    tol = problem.prec.tol
    bits = start_bits(problem)
    with mp.workprec(bits):
        prev = compute()
    history = [prev]
    while True:
        bits *= 2
        if bits > MAX_BITS:
            raise PrecisionError(
                f"no stabilisation below {MAX_BITS} bits for {problem}", candidates=history[-2:]
            )
        with mp.workprec(bits):
            cur = compute()
        err = 0.0
        for a, b, floor in zip(prev, cur, scales):
            scale = max(abs(b), floor)
            if scale == 0:
                continue
            err = max(err, float(abs(a - b) / scale))
        if err <= tol:
            return cur, bits, err
        history.append(cur)
        prev = cur


def det_adaptive(problem: HankelProblem) -> DetResult:
    """Hankel determinant under the adaptive-precision contract.

    The matrix is a Gram matrix of a positive weight, so a non-positive
    stabilised determinant signals a bug and raises.
    """
    if problem.m == 0:
        return DetResult(mp.mpf(1), problem.prec.effective_bits, 0.0)

    def compute():
        values = entry_values(problem.parity, problem.s, 2 * (problem.m - 1))
        return (mp.det(_hankel(values, problem.m)),)

    (det,), bits, err = _stabilize(compute, problem, (0,))
    if det <= 0:
        raise ArithmeticError(f"non-positive Hankel determinant {det} for {problem}")
    return DetResult(det, bits, err)


def _jacobi_traces(M, Mp, Mpp, Mppp, order):
    X = mp.inverse(M)
    A1 = X * Mp
    d1 = sum(A1[i, i] for i in range(M.rows))
    out = [d1]
    if order >= 2:
        A2 = X * Mpp
        A1sq = A1 * A1
        tr = lambda A: sum(A[i, i] for i in range(M.rows))  # noqa: E731
        out.append(tr(A2) - tr(A1sq))
        if order >= 3:
            A3 = X * Mppp
            out.append(tr(A3) - 3 * tr(A1 * A2) + 2 * tr(A1sq * A1))
    return out


def logdet_jet(problem: HankelProblem, order: int = 1) -> HankelJet:
    """Determinant and ``d^k/ds^k log det`` for ``k = 1..order`` (order <= 3).

    Uses the Jacobi formula with the shifted Hankel matrices
    ``M^(k)[j, l] = h_{j+l+k}``:

        (log det)'   = tr(A1)
        (log det)''  = tr(A2) - tr(A1^2)
        (log det)''' = tr(A3) - 3 tr(A1 A2) + 2 tr(A1^3)

    with ``Ak = M^{-1} M^(k)``.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be in 0..3, got {order!r}")
    m = problem.m
    if m == 0:
        return HankelJet(mp.mpf(1), tuple(mp.mpf(0) for _ in range(order)), problem.prec.effective_bits, 0.0)

    def compute():
        values = entry_values(problem.parity, problem.s, 2 * (m - 1) + order)
        M = _hankel(values, m)
        det = mp.det(M)
        if order == 0:
            return (det,)
        shifted = [_hankel(values, m, k) if k <= order else None for k in (1, 2, 3)]
        return (det, *_jacobi_traces(M, *shifted, order))

    values, bits, err = _stabilize(compute, problem, (0,) + (1,) * order)
    if values[0] <= 0:
        raise ArithmeticError(f"non-positive Hankel determinant {values[0]} for {problem}")
    return HankelJet(values[0], tuple(values[1:]), bits, err)


def logdet_derivative(problem: HankelProblem, order: int) -> mp.mpf:
    """``d^order/ds^order log det M(s)`` for order in {1, 2, 3}."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order!r}")
    return logdet_jet(problem, order).logdet_derivatives[order - 1]


def logdet_third_richardson(problem: HankelProblem, step: float = 1e-3) -> mp.mpf:
    """Third log-det derivative from Richardson-extrapolated central differences
    of the second derivative.  Redundant path used to check the Jacobi formula."""
    bits = start_bits(problem)

    def d2(x):
        return logdet_derivative(HankelProblem(problem.parity, problem.m, x, problem.prec), 2)

    with mp.workprec(bits):
        s = _to_mpf(as_fraction(problem.s))
        h = mp.mpf(step)
        coarse = (d2(s + h) - d2(s - h)) / (2 * h)
        fine = (d2(s + h / 2) - d2(s - h / 2)) / h
        return (4 * fine - coarse) / 3


def quadrature_entries(parity: str, s: float, count: int, rtol: float = 1e-12) -> np.ndarray:
    """``h_n(s)`` for ``n < count`` by Gauss-Jacobi quadrature (pi-free).

    The node count doubles from 32 until two successive rules agree to ``rtol``
    (relative to the largest absolute integrand contribution of each moment).
    """
    _check_parity(parity)
    alpha, beta = JACOBI_EXPONENTS[parity]
    s = float(s)
    # even weight is (1 + x) / sqrt(1 - x^2) = (1 - x)^(-1/2) (1 + x)^(1/2)
    powers = np.arange(count)[:, None]
    prev = None
    n = 32
    while n <= 1024:
        x, w = roots_jacobi(n, alpha, beta)
        integrand = x[None, :] ** powers * (w * np.exp(s * x))[None, :]
        cur = integrand.sum(axis=1) / math.pi
        scale = np.abs(integrand).sum(axis=1) / math.pi
        if prev is not None and np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        prev = cur
        n *= 2
    raise PrecisionError(f"Gauss-Jacobi quadrature did not converge for {parity}, s={s}")


def moments_quadrature(problem: HankelProblem) -> np.ndarray:
    """The Hankel matrix ``G[j, k] = h_{j+k}(s)`` from quadrature alone."""
    m = problem.m
    if m == 0:
        return np.zeros((0, 0))
    values = quadrature_entries(problem.parity, float(as_fraction(problem.s)), 2 * m - 1)
    j = np.arange(m)
    return values[j[:, None] + j[None, :]]
