"""Residual checks for the integrable structure of the gap probabilities.

* Toda lattice in the index: ``4 (log Qs_nu)'' = Qs_{nu-2} Qs_{nu+2} / Qs_nu^2 - 1``.
* sigma-form of Painleve V for ``sigma = F + s^2/4 - (nu-1) s/2 + nu (nu-1)/4``
  with ``F = s (log Qs)'``.  How the equation's independent variable relates to
  ``s`` is not pinned down by its printed form, so a small set of readings is
  enumerated and the one that annihilates known non-trivial solutions is
  selected by ``calibrate_convention``.
* Small-``s`` behaviour of ``F`` (and, for quaternions, of the antisymmetric
  part of the two tau-function halves).
* Agreement of the derivative-recurrence entries with quadrature.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np

from .gap import DEFAULT_COMPOSITION, parity_and_size, scriptq1_jet, tau_jets
from .hankel import HankelProblem, entry_values, logdet_jet, logdet_third_richardson, quadrature_entries
from .special import DEFAULT_PRECISION, PrecisionRequest, _to_mpf, as_fraction, bessel_J

__all__ = [
    "Convention",
    "CONVENTIONS",
    "CalibrationError",
    "PainleveParams",
    "ResidualReport",
    "boundary_report",
    "calibrate_convention",
    "crosscheck_entries",
    "painleve_residual",
    "sigma_derivatives",
    "sigma_from_F",
    "sigma_second_derivative_paths",
    "toda_residual",
    "toda_report",
    "painleve_report",
]

TODA_TOL = 1e-8
PAINLEVE_TOL = 1e-6
CROSSCHECK_TOL = 1e-10


class CalibrationError(RuntimeError):
    """No reading, or more than one, passes; ``table`` holds max residuals."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class Convention:
    """One reading of the equation's variable ``t`` relative to ``s``.

    ``t = scale * s``.  With ``derivative == "t"`` primes are ``d/dt`` and the
    equation is written entirely in ``t``.  With ``derivative == "s"`` primes
    are ``d/ds`` and the printed mixture is kept: ``(t sigma'')^2`` in the first
    term and ``s sigma'`` in the second.
    """

    name: str
    scale: Fraction
    derivative: str


CONVENTIONS = (
    Convention("half_s", Fraction(1, 2), "s"),
    Convention("half_t", Fraction(1, 2), "t"),
    Convention("identity", Fraction(1), "s"),
    Convention("double_s", Fraction(2), "s"),
    Convention("double_t", Fraction(2), "t"),
)
CONVENTIONS_BY_NAME = {c.name: c for c in CONVENTIONS}


@dataclass(frozen=True)
class PainleveParams:
    """Coefficients of the sigma-form; ``nu_effective`` is nu (beta=1) or 2 nu (beta=4)."""

    mu: Fraction
    mu0: Fraction
    mu1: Fraction
    mu2: Fraction
    mu3: Fraction
    nu_effective: int
    convention: Convention | None = None

    @classmethod
    def for_ensemble(cls, beta: int, nu: int, convention: Convention | None = None) -> "PainleveParams":
        if beta not in (1, 4):
            raise ValueError(f"beta must be 1 or 4, got {beta!r}")
        n = nu if beta == 1 else 2 * nu
        return cls(
            mu=Fraction(n - 1),
            mu0=Fraction(0),
            mu1=Fraction(n, 2),
            mu2=Fraction(n - 1, 2),
            mu3=Fraction(-1, 2),
            nu_effective=n,
            convention=convention,
        )


@dataclass
class ResidualReport:
    label: str
    grid: list
    residuals: list
    tolerance: float
    metadata: dict = field(default_factory=dict)
    # "max": every residual within tolerance; "limit": the last grid point within
    # tolerance and |residual| non-increasing along the grid
    criterion: str = "max"

    @property
    def max_residual(self) -> float:
        finite = [abs(r) for r in self.residuals]
        return max(finite) if finite else 0.0

    @property
    def passed(self) -> bool:
        if not all(math.isfinite(r) for r in self.residuals):
            return False
        if self.criterion == "limit":
            dev = [abs(r) for r in self.residuals]
            monotone = all(b <= a for a, b in zip(dev, dev[1:]))
            return bool(dev) and dev[-1] <= self.tolerance and monotone
        return self.max_residual <= self.tolerance

    def to_dict(self) -> dict:
        out = asdict(self)
        out["max_residual"] = self.max_residual
        out["passed"] = self.passed
        return out


def _mpf(x):
    return _to_mpf(as_fraction(x))


def toda_residual(nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION) -> float:
    """``4 (log Qs_nu)'' - (Qs_{nu-2} Qs_{nu+2} / Qs_nu^2 - 1)`` at ``s > 0``."""
    if nu < 2:
        raise ValueError("the Toda identity needs nu >= 2")
    if not s > 0:
        raise ValueError("s must be > 0")
    centre = scriptq1_jet(nu, s, prec, 2)
    below = scriptq1_jet(nu - 2, s, prec, 0)
    above = scriptq1_jet(nu + 2, s, prec, 0)
    bits = max(centre.bits, below.bits, above.bits)
    with mp.workprec(bits):
        lhs = 4 * centre.log_derivatives[1]
        rhs = below.value * above.value / centre.value**2 - 1
        return float(lhs - rhs)


def toda_report(nus, grid, prec: PrecisionRequest = DEFAULT_PRECISION, tol: float = TODA_TOL) -> ResidualReport:
    points, residuals = [], []
    for nu in nus:
        for s in grid:
            points.append({"nu": int(nu), "s": float(s)})
            residuals.append(toda_residual(nu, s, prec))
    return ResidualReport("toda", points, residuals, tol)


def sigma_from_F(nu_effective, s, F):
    """Undo the polynomial shift: ``sigma = F + s^2/4 - (nu-1) s/2 + nu (nu-1)/4``."""
    n = nu_effective
    if isinstance(s, (int, Fraction)) and isinstance(F, (int, Fraction)):
        s, F = Fraction(s), Fraction(F)
        return F + s * s / 4 - Fraction(n - 1, 2) * s + Fraction(n * (n - 1), 4)
    s, F = _mpf(s) if not isinstance(s, mp.mpf) else s, F if isinstance(F, mp.mpf) else _mpf(F)
    return F + s * s / 4 - mp.mpf(n - 1) / 2 * s + mp.mpf(n * (n - 1)) / 4


def sigma_derivatives(nu_effective: int, s: mp.mpf, log_derivatives) -> tuple:
    """``(sigma, sigma', sigma'')`` in ``s`` from ``(log tau)', '', '''``."""
    L1, L2, L3 = log_derivatives
    F = s * L1
    Fp = L1 + s * L2
    Fpp = 2 * L2 + s * L3
    n = nu_effective
    sigma = sigma_from_F(n, s, F)
    return sigma, Fp + s / 2 - mp.mpf(n - 1) / 2, Fpp + mp.mpf(1) / 2


def _residual(sigma, d1, d2, s, params: PainleveParams, conv: Convention):
    k = _mpf(conv.scale)
    t = k * s
    if conv.derivative == "t":
        d1, d2, middle = d1 / k, d2 / k**2, t
    else:
        middle = s
    mu = _mpf(params.mu)
    product = mp.mpf(1)
    for c in (params.mu0, params.mu1, params.mu2, params.mu3):
        product *= _mpf(c) + d1
    return (t * d2) ** 2 - (sigma - middle * d1 + 2 * d1**2 + mu * d1) ** 2 + 4 * product


def _tau_log_derivatives(beta, nu, s, prec, branch, composition):
    if beta == 1:
        jet = scriptq1_jet(nu, s, prec, 3)
        return jet.log_derivatives, jet.bits
    jets = tau_jets(nu, s, prec, 3, composition)
    return jets[branch].log_derivatives, jets[branch].bits


def painleve_residual(beta: int, nu: int, s, convention: Convention | str,
                      prec: PrecisionRequest = DEFAULT_PRECISION, branch: str | None = None,
                      composition: str = DEFAULT_COMPOSITION) -> float:
    """Left side of the sigma-form equation under ``convention``.

    For beta = 1 the tau-function is ``Qs1_nu`` itself.  For beta = 4 the two
    halves ``tau+`` and ``tau-`` of the quaternion combination are checked with
    doubled ``nu``; ``branch`` selects one, or ``None`` returns the one of
    larger magnitude.
    """
    if isinstance(convention, str):
        convention = CONVENTIONS_BY_NAME[convention]
    if not s > 0:
        raise ValueError("s must be > 0")
    params = PainleveParams.for_ensemble(beta, nu, convention)
    branches = [None] if beta == 1 else ([branch] if branch else ["+", "-"])
    worst = 0.0
    for b in branches:
        logs, bits = _tau_log_derivatives(beta, nu, s, prec, b, composition)
        with mp.workprec(bits):
            x = _mpf(s)
            sigma, d1, d2 = sigma_derivatives(params.nu_effective, x, logs)
            r = float(_residual(sigma, d1, d2, x, params, convention))
        if abs(r) >= abs(worst):
            worst = r
    return worst


def _max_residual_table(cases, s_grid, prec, composition):
    table = {}
    for conv in CONVENTIONS:
        worst = 0.0
        for beta, nu in cases:
            for s in s_grid:
                worst = max(worst, abs(painleve_residual(beta, nu, s, conv, prec, composition=composition)))
        table[conv.name] = worst
    return table


def calibrate_convention(nu_list, s_grid, prec: PrecisionRequest = DEFAULT_PRECISION,
                         quaternion_m=(), tol: float = PAINLEVE_TOL,
                         composition: str = DEFAULT_COMPOSITION) -> Convention:
    """Select the unique reading whose residual stays below ``tol`` everywhere.

    ``nu_list`` are beta = 1 indices; ``quaternion_m`` optionally adds beta = 4
    cases.  Indices 0 and 1 have ``sigma == 0`` and cannot discriminate.
    """
    cases = [(1, nu) for nu in nu_list] + [(4, m) for m in quaternion_m]
    informative = [(b, n) for b, n in cases if (n >= 2 if b == 1 else n >= 1)]
    if not informative:
        raise CalibrationError(
            "degenerate calibration: sigma vanishes identically for every requested index", {}
        )
    table = _max_residual_table(informative, s_grid, prec, composition)
    passing = [name for name, r in table.items() if r < tol]
    if len(passing) != 1:
        raise CalibrationError(
            f"{len(passing)} conventions pass (need exactly one): {passing}", table
        )
    return CONVENTIONS_BY_NAME[passing[0]]


def painleve_report(beta: int, nus, s_grid, convention: Convention, prec: PrecisionRequest = DEFAULT_PRECISION,
                    tol: float = PAINLEVE_TOL, composition: str = DEFAULT_COMPOSITION) -> ResidualReport:
    points, residuals = [], []
    for nu in nus:
        for s in s_grid:
            points.append({"beta": beta, "nu": int(nu), "s": float(s)})
            residuals.append(painleve_residual(beta, nu, s, convention, prec, composition=composition))
    return ResidualReport(f"painleve_beta{beta}", points, residuals, tol,
                          {"convention": convention.name, "composition": composition})


def sigma_second_derivative_paths(nu: int, s, prec: PrecisionRequest = DEFAULT_PRECISION,
                                  step: float = 1e-3) -> tuple[float, float]:
    """``sigma''`` (beta = 1) via the third-order Jacobi formula and via
    Richardson differences of the second-order one."""
    parity, m = parity_and_size(nu)
    problem = HankelProblem(parity, m, s, prec)
    jet = logdet_jet(problem, 3)
    with mp.workprec(jet.achieved_precision):
        x = _mpf(s)
        d2, d3 = jet.logdet_derivatives[1], jet.logdet_derivatives[2]
        # prefactor contributes -1/4 to L2 and nothing to L3
        L2 = d2 - mp.mpf(1) / 4
        jacobi = 2 * L2 + x * d3 + mp.mpf(1) / 2
        d3_fd = logdet_third_richardson(problem, step) if m else mp.mpf(0)
        richardson = 2 * L2 + x * d3_fd + mp.mpf(1) / 2
        return float(jacobi), float(richardson)


def _boundary_measure(beta, nu, s, prec, composition):
    if beta == 1:
        jet = scriptq1_jet(nu, s, prec, 1)
        with mp.workprec(jet.bits):
            x = _mpf(s)
            F = x * jet.log_derivatives[0]
            leading = -((x / 2) ** (nu + 1)) / mp.factorial(nu)
            return float(F / leading), float(F), float(F / _bessel_j_boundary(nu, s, prec))
    jets = tau_jets(nu, s, prec, 1, composition)
    bits = max(j.bits for j in jets.values())
    with mp.workprec(bits):
        x = _mpf(s)
        f_plus = x * jets["+"].log_derivatives[0]
        f_minus = x * jets["-"].log_derivatives[0]
        antisym = (f_plus - f_minus) / 2
        leading = (x / 2) ** (2 * nu + 1) / mp.factorial(2 * nu)
        return float(antisym / leading), float(antisym), None


def _bessel_j_boundary(nu, s, prec):
    """``-(s/2) J_nu - (s^2/4)(J_nu^2 - J_{nu-1} J_{nu+1})``, the full small-s form."""
    with mp.workprec(prec.effective_bits):
        j = lambda k: bessel_J(abs(k), s, prec) * (-1 if k < 0 and k % 2 else 1)  # noqa: E731
        x = _mpf(s)
        return -x / 2 * j(nu) - x * x / 4 * (j(nu) ** 2 - j(nu - 1) * j(nu + 1))


def boundary_report(beta: int, nu: int, s_grid_small=(0.1, 0.05, 0.02, 0.01),
                    prec: PrecisionRequest = DEFAULT_PRECISION, tol: float | None = None,
                    composition: str = DEFAULT_COMPOSITION) -> ResidualReport:
    """Ratio of ``F`` to its leading small-``s`` term on a grid in ``(0, 0.1]``.

    For beta = 1 the leading term is ``-(s/2)^(nu+1) / nu!``.  For beta = 4 the
    antisymmetric part ``(F+ - F-)/2`` of the two tau halves is compared with
    ``(s/2)^(2 nu + 1) / (2 nu)!``.  Residuals are ``ratio - 1``; the report
    passes when the smallest grid point is within ``tol`` and the distance to
    1 shrinks monotonically as ``s`` decreases.  For beta = 1 the metadata
    also holds ``bessel_j_ratios``, the ratio to the fuller Bessel-J form of
    the boundary term, which agrees to higher order in ``s``.
    """
    grid = sorted((float(s) for s in s_grid_small), reverse=True)
    if not grid or grid[0] > 0.1 or grid[-1] <= 0:
        raise ValueError("boundary grid must lie in (0, 0.1]")
    if tol is None:
        tol = 0.01 if beta == 1 else 0.05
    ratios, values, full = [], [], []
    for s in grid:
        ratio, value, ratio_full = _boundary_measure(beta, nu, s, prec, composition)
        ratios.append(ratio)
        values.append(value)
        full.append(ratio_full)
    return ResidualReport(
        f"boundary_beta{beta}",
        [{"beta": beta, "nu": nu, "s": s} for s in grid],
        [r - 1 for r in ratios],
        tol,
        {"ratios": ratios, "measured": values, **({"bessel_j_ratios": full} if beta == 1 else {})},
        criterion="limit",
    )


def crosscheck_entries(parity: str, m: int, s_grid, bits: int = 256) -> ResidualReport:
    """Max relative gap between recurrence entries and quadrature entries."""
    residuals, points = [], []
    count = max(2 * m - 1, 0)
    for s in s_grid:
        worst = 0.0
        if count:
            quad = quadrature_entries(parity, float(s), count)
            with mp.workprec(bits):
                exact = [float(v) for v in entry_values(parity, s, count - 1)]
            worst = float(np.max(np.abs(np.array(exact) - quad) / np.abs(quad)))
        points.append({"parity": parity, "m": m, "s": float(s)})
        residuals.append(worst)
    return ResidualReport(f"crosscheck_{parity}", points, residuals, CROSSCHECK_TOL)
