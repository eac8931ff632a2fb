"""Hard-edge gap probabilities, smallest-eigenvalue densities and ``F(s)``.

Two variables are in play.  The Wishart variable ``x`` is the scaled
smallest eigenvalue, ``x = 4 N lambda_min``; ``Q(x)`` is the probability that
no scaled eigenvalue lies in ``[0, x]``.  The Dirac variable ``s = sqrt(x)``
makes the formulas simpler, and the "script" gap probability is
``Qs(s) = Q(s**2)``.

Real matrices (beta = 1), with ``nu`` the column-row difference:

* nu = 2m + 1:  ``Qs(s) = exp(-s^2/8) det[h_{j+k}(s)] / C_m``, base ``I1(s)/s``
* nu = 2m:      ``Qs(s) = exp(-s^2/8 - s/2) det[h_{j+k}(s)] / C_m``,
  base ``I0(s) + I1(s)``

where ``C_m`` is the same determinant at ``s = 0``, so ``Qs(0) = 1``.

Quaternion matrices (beta = 4) with ``nu = m``:

    Qs4_m(u) = G(u) * (Qs1_{2m}(2u) + Qs1_{2m}(-2u)) / 2

The evaluation at ``-2u`` is the same analytic expression continued to a
negative argument; it is not a probability.  ``G`` depends on how the Gaussian
prefactor is composed: ``"tau_sum"`` (the default) uses ``G = 1``, which makes
each half a solution of the sigma-form equation and matches finite-N sampling
at the ``4N`` scaling; ``"literal"`` keeps an additional ``exp(-u^2/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.interpolate import PchipInterpolator

from .hankel import HankelProblem, exact_moments, logdet_jet, start_bits
from .special import DEFAULT_PRECISION, PrecisionRequest, _to_mpf, as_fraction

__all__ = [
    "COMPOSITIONS",
    "DEFAULT_COMPOSITION",
    "S_MAX",
    "GapQuery",
    "NormConstant",
    "QJet",
    "norm_constant",
    "parity_and_size",
    "scriptq1_jet",
    "scriptq4_jet",
    "tau_jets",
    "eval_scriptQ1",
    "eval_Q1",
    "eval_scriptQ4",
    "eval_Q4",
    "eval_Q",
    "eval_P",
    "eval_scriptP",
    "eval_F",
    "gap_curve",
    "QUANTITIES",
    "evaluate_quantity",
]

COMPOSITIONS = ("tau_sum", "literal")
DEFAULT_COMPOSITION = "tau_sum"
# Dirac-variable domain cap; Q is below 1e-40 well before this for the ranges used here.
S_MAX = 40.0


@dataclass(frozen=True)
class GapQuery:
    beta: int
    nu: int
    s: float
    convention: str = "plain"  # "plain" for Q(x), "script" for Qs(s) = Q(s**2)

    def __post_init__(self):
        if self.beta not in (1, 4):
            raise ValueError(f"beta must be 1 or 4, got {self.beta!r}")
        if int(self.nu) != self.nu or self.nu < 0:
            raise ValueError(f"nu must be a non-negative integer, got {self.nu!r}")
        if not self.s >= 0:
            raise ValueError(f"s must be >= 0, got {self.s!r}")
        if self.convention not in ("plain", "script"):
            raise ValueError(f"unknown convention {self.convention!r}")


@dataclass(frozen=True)
class NormConstant:
    parity: str
    m: int
    value: Fraction


@dataclass(frozen=True)
class QJet:
    """Value of a gap probability and its log-derivatives in the Dirac variable."""

    value: mp.mpf
    log_derivatives: tuple
    bits: int


def parity_and_size(nu: int) -> tuple[str, int]:
    """``('odd', (nu-1)/2)`` or ``('even', nu/2)``."""
    if int(nu) != nu or nu < 0:
        raise ValueError(f"nu must be a non-negative integer, got {nu!r}")
    nu = int(nu)
    return ("odd", (nu - 1) // 2) if nu % 2 else ("even", nu // 2)


def _exact_det(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by exact Gaussian elimination."""
    a = [row[:] for row in rows]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return det


@lru_cache(maxsize=None)
def norm_constant(parity: str, m: int) -> NormConstant:
    """``C_m``: the pi-free Hankel determinant at ``s = 0``, exactly."""
    if m < 0:
        raise ValueError("m must be >= 0")
    mu = exact_moments(parity, max(2 * m - 1, 0))
    rows = [[mu[j + k] for k in range(m)] for j in range(m)]
    return NormConstant(parity, m, _exact_det(rows))


def _prefactor_log_derivatives(parity: str, s, order: int) -> list:
    """Derivatives of ``-s^2/8`` (odd) or ``-s^2/8 - s/2`` (even)."""
    d = [-s / 4, mp.mpf(-1) / 4, mp.mpf(0)]
    if parity == "even":
        d[0] -= mp.mpf(1) / 2
    return d[:order]


def scriptq1_jet(nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION, order: int = 1) -> QJet:
    """``Qs1_nu`` and ``d^k/ds^k log Qs1_nu`` for ``k <= order`` at signed ``s``."""
    parity, m = parity_and_size(nu)
    problem = HankelProblem(parity, m, s, prec)
    jet = logdet_jet(problem, order)
    c = norm_constant(parity, m).value
    with mp.workprec(max(jet.achieved_precision, start_bits(problem))):
        x = _to_mpf(as_fraction(s))
        log_pre = -x * x / 8 - (x / 2 if parity == "even" else 0)
        value = mp.exp(log_pre) * jet.det / _to_mpf(c)
        pre = _prefactor_log_derivatives(parity, x, order)
        logs = tuple(a + b for a, b in zip(pre, jet.logdet_derivatives))
    return QJet(value, logs, jet.achieved_precision)


def _check_composition(composition):
    if composition not in COMPOSITIONS:
        raise ValueError(f"composition must be one of {COMPOSITIONS}, got {composition!r}")


def _gauss_log_derivatives(s, composition, order):
    # extra factor exp(-s^2/8) in the tau variable s = 2u for the literal reading
    if composition == "literal":
        return [-s / 4, mp.mpf(-1) / 4, mp.mpf(0)][:order], -s * s / 8
    return [mp.mpf(0)] * order, mp.mpf(0)


def tau_jets(m: int, s, prec: PrecisionRequest = DEFAULT_PRECISION, order: int = 1,
             composition: str = DEFAULT_COMPOSITION) -> dict:
    """The two halves of the quaternion combination, in the variable ``s = 2u``.

    ``tau-(s)`` is built from ``Qs1_{2m}(s)`` and ``tau+(s)`` from
    ``Qs1_{2m}(-s)``; the quaternion gap probability is their mean.  Returned
    as ``{"+": QJet, "-": QJet}`` with log-derivatives in ``s``.
    """
    _check_composition(composition)
    out = {}
    for sign, label in ((1, "-"), (-1, "+")):
        inner = scriptq1_jet(2 * m, -s if sign < 0 else s, prec, order)
        with mp.workprec(inner.bits):
            x = _to_mpf(as_fraction(s))
            g_logs, g_log = _gauss_log_derivatives(x, composition, order)
            logs = tuple(
                (sign**k) * d + g for k, (d, g) in enumerate(zip(inner.log_derivatives, g_logs), start=1)
            )
            out[label] = QJet(inner.value * mp.exp(g_log), logs, inner.bits)
    return out


def scriptq4_jet(m: int, u, prec: PrecisionRequest = DEFAULT_PRECISION,
                 composition: str = DEFAULT_COMPOSITION) -> QJet:
    """``Qs4_m(u)`` and its first log-derivative in ``u``."""
    x = as_fraction(u)
    taus = tau_jets(m, 2 * x, prec, 1, composition)
    bits = max(t.bits for t in taus.values())
    with mp.workprec(bits):
        plus, minus = taus["+"], taus["-"]
        value = (plus.value + minus.value) / 2
        # d/du = 2 d/ds
        deriv = plus.value * plus.log_derivatives[0] + minus.value * minus.log_derivatives[0]
        return QJet(value, (deriv / value,), bits)


def _check_script_arg(s):
    if not 0 <= s <= S_MAX:
        raise ValueError(f"argument must lie in [0, {S_MAX}] (Dirac variable), got {s!r}")


def eval_scriptQ1(nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION) -> float:
    """Real-matrix gap probability in the Dirac variable, ``Qs1_nu(s)``."""
    _check_script_arg(s)
    return float(scriptq1_jet(nu, s, prec, 0).value)


def _sqrt_exact(x, prec):
    x = as_fraction(x)
    if x < 0:
        raise ValueError(f"argument must be >= 0, got {float(x)}")
    with mp.workprec(prec.effective_bits + 64):
        return mp.sqrt(_to_mpf(x))


def eval_Q1(nu: int, x, prec: PrecisionRequest = DEFAULT_PRECISION) -> float:
    """Real-matrix gap probability ``Q1_nu(x) = Qs1_nu(sqrt(x))``."""
    s = _sqrt_exact(x, prec)
    _check_script_arg(s)
    return float(scriptq1_jet(nu, s, prec, 0).value)


def eval_scriptQ4(m: int, u, prec: PrecisionRequest = DEFAULT_PRECISION,
                  composition: str = DEFAULT_COMPOSITION) -> float:
    """Quaternion gap probability in the Dirac variable, ``Qs4_m(u)``."""
    _check_script_arg(u)
    return float(scriptq4_jet(m, u, prec, composition).value)


def eval_Q4(m: int, x, prec: PrecisionRequest = DEFAULT_PRECISION,
            composition: str = DEFAULT_COMPOSITION) -> float:
    """Quaternion gap probability ``Q4_m(x) = Qs4_m(sqrt(x))``."""
    u = _sqrt_exact(x, prec)
    _check_script_arg(u)
    return float(scriptq4_jet(m, u, prec, composition).value)


def eval_Q(beta: int, nu: int, x, prec: PrecisionRequest = DEFAULT_PRECISION,
           composition: str = DEFAULT_COMPOSITION, script: bool = False) -> float:
    """Dispatch on ``beta``; ``script=True`` takes ``x`` as the Dirac variable."""
    if beta == 1:
        return eval_scriptQ1(nu, x, prec) if script else eval_Q1(nu, x, prec)
    if beta == 4:
        return (eval_scriptQ4(nu, x, prec, composition) if script
                else eval_Q4(nu, x, prec, composition))
    raise ValueError(f"beta must be 1 or 4, got {beta!r}")


def _script_jet(beta, nu, s, prec, composition):
    if beta == 1:
        return scriptq1_jet(nu, s, prec, 1)
    if beta == 4:
        return scriptq4_jet(nu, s, prec, composition)
    raise ValueError(f"beta must be 1 or 4, got {beta!r}")


def eval_scriptP(beta: int, nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION,
                 composition: str = DEFAULT_COMPOSITION) -> float:
    """Density of the scaled smallest singular value, ``-d Qs/ds``."""
    _check_script_arg(s)
    jet = _script_jet(beta, nu, s, prec, composition)
    with mp.workprec(jet.bits):
        return float(-jet.value * jet.log_derivatives[0])


def eval_P(beta: int, nu: int, x, prec: PrecisionRequest = DEFAULT_PRECISION,
           composition: str = DEFAULT_COMPOSITION) -> float:
    """Smallest-eigenvalue density ``P(x) = -dQ/dx`` in the Wishart variable.

    With ``s = sqrt(x)``, ``P(x) = -Qs'(s) / (2 s)``.  For beta = 4 the
    argument is the quaternion Wishart variable ``x = u**2``.
    """
    if not as_fraction(x) > 0:
        raise ValueError("P is evaluated for x > 0 only")
    s = _sqrt_exact(x, prec)
    _check_script_arg(s)
    jet = _script_jet(beta, nu, s, prec, composition)
    with mp.workprec(jet.bits):
        return float(-jet.value * jet.log_derivatives[0] / (2 * s))


def eval_F(beta: int, nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION,
           composition: str = DEFAULT_COMPOSITION) -> float:
    """``F(s) = s d/ds log Qs(s)`` in the Dirac variable.

    The value is scale invariant, so for beta = 4 it is the same whether
    written in ``u`` or in ``s = 2u``.
    """
    jet = _script_jet(beta, nu, s, prec, composition)
    with mp.workprec(jet.bits):
        return float(_to_mpf(as_fraction(s)) * jet.log_derivatives[0])


def gap_curve(beta: int, nu: int, prec: PrecisionRequest = PrecisionRequest(bits=128, tol=1e-20),
              composition: str = DEFAULT_COMPOSITION, s_max: float = S_MAX, points: int = 801):
    """Vectorised ``Q(x)`` for Monte Carlo comparisons.

    ``Qs`` is tabulated on a uniform grid in the Dirac variable and
    interpolated monotonically; the returned callable takes Wishart-variable
    arrays and returns 0 beyond ``s_max**2``.  With the default 801 points
    the absolute error is a few times 1e-6, well below sampling noise.
    """
    grid = np.linspace(0.0, s_max, points)
    table = np.array([eval_Q(beta, nu, float(s), prec, composition, script=True) for s in grid])
    # underflowed tail values make PCHIP divide by zero slopes; the result is still 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        interp = PchipInterpolator(grid, table, extrapolate=False)

    def Q(x):
        s = np.sqrt(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = interp(np.minimum(s, s_max))
        return np.where(s > s_max, 0.0, out)

    return Q


QUANTITIES = ("Q", "P", "F")


def evaluate_quantity(beta: int, nu: int, x, quantity: str, dirac: bool = False,
                      prec: PrecisionRequest = DEFAULT_PRECISION,
                      composition: str = DEFAULT_COMPOSITION) -> tuple[float, int]:
    """One of ``Q``, ``P``, ``F`` at a grid point, with the precision reached.

    ``x`` is the Wishart variable unless ``dirac`` is set, in which case it is
    the Dirac variable and ``Q``, ``P`` become ``Qs`` and ``-Qs'``.  ``F`` is
    always ``s d/ds log Qs`` at ``s = x`` (dirac) or ``s = sqrt(x)``.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}, got {quantity!r}")
    if beta not in (1, 4):
        raise ValueError(f"beta must be 1 or 4, got {beta!r}")
    _check_composition(composition)
    if dirac:
        if as_fraction(x) < 0:
            raise ValueError(f"argument must be >= 0, got {float(x)}")
        s = x
    else:
        if quantity == "P" and not as_fraction(x) > 0:
            raise ValueError("P is evaluated for x > 0 only")
        s = _sqrt_exact(x, prec)
    _check_script_arg(s)
    if quantity == "Q" and beta == 1:
        jet = scriptq1_jet(nu, s, prec, 0)
        return float(jet.value), jet.bits
    jet = _script_jet(beta, nu, s, prec, composition)
    with mp.workprec(jet.bits):
        sv = _to_mpf(as_fraction(s))
        if quantity == "Q":
            out = jet.value
        elif quantity == "F":
            out = sv * jet.log_derivatives[0]
        else:
            out = -jet.value * jet.log_derivatives[0]
            if not dirac:
                out /= 2 * sv
        return float(out), jet.bits
