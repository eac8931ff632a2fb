"""Finite-N sampling of real and quaternion Wishart matrices.

``W`` is ``N x (N + nu)`` with Gaussian entries, and the eigenvalue density of
``W W^dagger`` is proportional to

    |Delta(w)|^beta  prod_j  w_j^(beta (nu+1)/2 - 1)  exp(-beta w_j / 2).

For beta = 1 the entries are standard normal.  For beta = 4 each quaternion
entry has four real components of variance 1/4, embedded as the 2x2 complex
block ``[[a, b], [-conj(b), conj(a)]]``.  The hard-edge limit is
``Q(x) = lim P(N c lambda_min > x)`` with ``c = 4`` for beta = 1.

Two samplers produce the same distribution of ``lambda_min``:

* ``"dense"`` draws ``W`` and takes its smallest singular value;
* ``"bidiagonal"`` draws the bidiagonal matrix that Householder reduction of
  ``W`` produces (independent chi variables on two diagonals) and takes its
  smallest singular value by bisection on the Golub-Kahan tridiagonal form.
  This costs O(N) per sample instead of O(N^3).

Samples are generated in fixed-size blocks.  Each block has its own
counter-based stream (Philox keyed by ``(master_seed, block index)``), so the
output does not depend on how many worker processes are used.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import minimize_scalar

__all__ = [
    "McRun",
    "EmpiricalCdf",
    "ScalingFit",
    "block_rng",
    "sample_smallest",
    "empirical_gap",
    "ks_distance",
    "calibrate_scaling",
    "calibrate_scaling_beta4",
    "arbitrate_composition",
    "dense_spectrum",
    "quaternion_embedding",
    "marchenko_pastur_chi2",
    "bulk_chi2",
    "kramers_paired",
    "dump_samples",
    "load_samples",
]

SAMPLERS = ("dense", "bidiagonal")
MEMORY_BUDGET = 4_000_000  # matrix entries per dense draw
DEFAULT_C_GRID = tuple(np.arange(1.0, 8.0 + 1e-9, 0.25))


@dataclass(frozen=True)
class McRun:
    beta: int
    N: int
    nu: int
    samples: int
    master_seed: int
    scaling_constant: float = 4.0
    sampler: str = "bidiagonal"
    block_size: int = 1024

    def __post_init__(self):
        if self.beta not in (1, 4):
            raise ValueError(f"beta must be 1 or 4, got {self.beta!r}")
        if self.N < 1 or self.nu < 0 or self.samples < 1 or self.block_size < 1:
            raise ValueError(f"invalid run parameters: {self}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        width = 2 if self.beta == 4 else 1
        if self.sampler == "dense" and (width * self.N) * (width * (self.N + self.nu)) > MEMORY_BUDGET:
            raise ValueError("dense matrix exceeds the memory budget; use the bidiagonal sampler")
        if not self.scaling_constant > 0:
            raise ValueError("scaling_constant must be positive")

    def describe(self) -> str:
        return " ".join(f"{k}={v}" for k, v in asdict(self).items())


@dataclass(frozen=True)
class EmpiricalCdf:
    """Sorted smallest eigenvalues (unscaled)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or np.any(np.diff(v) < 0) or np.any(v < 0):
            raise ValueError("values must be a sorted 1-d array of non-negative numbers")

    def __len__(self):
        return len(self.values)


def block_rng(master_seed: int, block: int) -> np.random.Generator:
    key = np.random.SeedSequence([master_seed & 0xFFFFFFFF, master_seed >> 32, block]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def quaternion_embedding(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Complex ``2n x 2p`` representation of the quaternion matrix ``a + b j``."""
    return np.block([[a, b], [-b.conj(), a.conj()]])


def _dense_matrix(rng, beta, N, nu):
    if beta == 1:
        return rng.standard_normal((N, N + nu))
    shape = (N, N + nu)
    a = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / 2
    b = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / 2
    return quaternion_embedding(a, b)


def dense_spectrum(rng: np.random.Generator, beta: int, N: int, nu: int) -> np.ndarray:
    """All squared singular values of one dense draw (2N of them for beta=4)."""
    sv = np.linalg.svd(_dense_matrix(rng, beta, N, nu), compute_uv=False)
    return np.sort(sv**2)


def _block_dense(rng, beta, N, nu, count):
    out = np.empty(count)
    for i in range(count):
        sv = np.linalg.svd(_dense_matrix(rng, beta, N, nu), compute_uv=False)
        out[i] = sv[-1] ** 2
    return out


def _block_bidiagonal(rng, beta, N, nu, count):
    # chi^2 with beta k degrees of freedom, divided by beta, matches the entry scale
    d = np.sqrt(rng.chisquare(np.broadcast_to(beta * (N + nu - np.arange(N)), (count, N))) / beta)
    if N == 1:
        return d[:, 0] ** 2
    o = np.sqrt(rng.chisquare(np.broadcast_to(beta * (N - 1 - np.arange(N - 1)), (count, N - 1))) / beta)
    # Golub-Kahan form: zero diagonal, off-diagonal d0, o0, d1, o1, ..., eigenvalues +-sigma
    off = np.empty((count, 2 * N - 1))
    off[:, 0::2] = d
    off[:, 1::2] = o
    zero = np.zeros(2 * N)
    out = np.empty(count)
    for i in range(count):
        out[i] = eigvalsh_tridiagonal(zero, off[i], select="i", select_range=(N, N))[0]
    return out**2


def _sample_block(args):
    run, block = args
    start = block * run.block_size
    count = min(run.block_size, run.samples - start)
    rng = block_rng(run.master_seed, block)
    if run.sampler == "dense":
        return _block_dense(rng, run.beta, run.N, run.nu, count)
    return _block_bidiagonal(rng, run.beta, run.N, run.nu, count)


def sample_smallest(run: McRun, workers: int = 1) -> EmpiricalCdf:
    """Smallest eigenvalue of ``W W^dagger`` for ``run.samples`` draws."""
    blocks = [(run, b) for b in range(math.ceil(run.samples / run.block_size))]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_block, blocks))
    else:
        parts = [_sample_block(b) for b in blocks]
    return EmpiricalCdf(np.sort(np.concatenate(parts)))


def empirical_gap(cdf: EmpiricalCdf, run: McRun, s):
    """Fraction of samples with ``lambda_min > s / (c N)``; vectorised in ``s``."""
    x = np.asarray(s, dtype=float) / (run.scaling_constant * run.N)
    above = len(cdf.values) - np.searchsorted(cdf.values, x, side="right")
    out = above / len(cdf.values)
    return float(out) if np.ndim(out) == 0 else out


def ks_distance(cdf: EmpiricalCdf, run: McRun, theoretical, s_max: float | None = None) -> float:
    """``sup |empirical_gap - Q|`` over the sample-induced breakpoints.

    ``theoretical`` must accept numpy arrays of scaled arguments.  Only the
    value at each breakpoint is compared, so the classical two-sided
    statistic can exceed this by at most ``1 / samples``.
    """
    scale = run.scaling_constant * run.N
    x = cdf.values
    if s_max is not None:
        x = x[x * scale <= s_max]
    if len(x) == 0:
        return 0.0
    emp = (len(cdf.values) - np.searchsorted(cdf.values, x, side="right")) / len(cdf.values)
    theo = np.asarray(theoretical(x * scale), dtype=float)
    return float(np.max(np.abs(emp - theo)))


@dataclass
class ScalingFit:
    c: float
    per_N: dict
    c_grid: list
    ks_tables: dict
    plateaus: dict
    stable: bool
    extrapolated: bool
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _ks_for_c(values, N, c, theoretical):
    s = values * (c * N)
    n = len(values)
    emp = 1.0 - np.arange(1, n + 1) / n  # fraction strictly above each sorted sample (no ties)
    return float(np.max(np.abs(emp - theoretical(s))))


def calibrate_scaling(beta: int, N_list, nu: int, samples: int, seed: int, theoretical,
                      c_grid=DEFAULT_C_GRID, sampler: str = "bidiagonal", workers: int = 1,
                      noise_band: float | None = None) -> ScalingFit:
    """Fit the hard-edge scaling constant ``c`` in ``lambda_min ~ s / (c N)``.

    For each ``N`` the KS distance is scanned over ``c_grid`` and the minimum
    refined by bounded scalar minimisation.  With several ``N`` the per-N
    optima are extrapolated linearly in ``1/N`` to remove the finite-N bias;
    the fit is stable when the extrapolated value lies inside every per-N
    plateau widened by the spread of the per-N optima.
    """
    N_list = sorted(int(n) for n in N_list)
    grid = [float(c) for c in c_grid]
    if noise_band is None:
        noise_band = 1.36 / math.sqrt(samples)
    per_N, tables, plateaus = {}, {}, {}
    notes = []
    for i, N in enumerate(N_list):
        run = McRun(beta, N, nu, samples, seed + i, sampler=sampler)
        values = sample_smallest(run, workers).values
        ks = [_ks_for_c(values, N, c, theoretical) for c in grid]
        j = int(np.argmin(ks))
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        res = minimize_scalar(lambda c: _ks_for_c(values, N, c, theoretical),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-3})
        best = float(res.x) if res.fun <= ks[j] else grid[j]
        per_N[N] = {"c": best, "ks": float(min(res.fun, ks[j]))}
        tables[N] = ks
        floor = min(ks)
        plateau = [c for c, k in zip(grid, ks) if k <= floor + noise_band]
        plateaus[N] = [min(plateau), max(plateau)]
    if len(N_list) == 1:
        msg = "single N: finite-N bias and scaling constant are confounded"
        warnings.warn(msg)
        notes.append(msg)
        c = per_N[N_list[0]]["c"]
        extrapolated = False
    else:
        inv = np.array([1.0 / n for n in N_list])
        cs = np.array([per_N[n]["c"] for n in N_list])
        slope, intercept = np.polyfit(inv, cs, 1)
        c = float(intercept)
        extrapolated = True
    spread = max(p["c"] for p in per_N.values()) - min(p["c"] for p in per_N.values())
    stable = all(lo - spread <= c <= hi + spread for lo, hi in plateaus.values())
    if not stable:
        msg = f"scaling fit not stable across N: c={c:.3f}, plateaus={plateaus}"
        warnings.warn(msg)
        notes.append(msg)
    return ScalingFit(c, per_N, grid, tables, plateaus, stable, extrapolated, notes)


def calibrate_scaling_beta4(N_list, m: int, samples: int, seed: int, theoretical=None,
                            composition: str = "tau_sum", **kwargs) -> ScalingFit:
    """Scaling constant for quaternion matrices against ``Q4_m``."""
    if theoretical is None:
        from .gap import gap_curve
        theoretical = gap_curve(4, m, composition=composition)
    return calibrate_scaling(4, N_list, m, samples, seed, theoretical, **kwargs)


def arbitrate_composition(N_list, samples: int, seed: int, ks_N: int, ks_samples: int,
                          ks_ms=(0, 1), ks_tol: float = 0.03,
                          compositions=("literal", "tau_sum"), **kwargs) -> dict:
    """Try each prefactor composition for ``Q4`` in turn.

    For each reading the scaling constant is fitted on ``m = 0`` over
    ``N_list`` and frozen; then the KS distance at ``N = ks_N`` is measured for
    every ``m`` in ``ks_ms``.  The first reading within ``ks_tol`` for all of
    them is selected.
    """
    from .gap import gap_curve

    results = {}
    chosen = None
    for comp in compositions:
        fit = calibrate_scaling(4, N_list, 0, samples, seed, gap_curve(4, 0, composition=comp), **kwargs)
        ks = {}
        for m in ks_ms:
            run = McRun(4, ks_N, m, ks_samples, seed + 1000 + m, scaling_constant=fit.c)
            ks[m] = ks_distance(sample_smallest(run), run, gap_curve(4, m, composition=comp))
        ok = all(v <= ks_tol for v in ks.values())
        results[comp] = {"c": fit.c, "stable": fit.stable, "plateaus": fit.plateaus, "ks": ks, "passed": ok}
        if chosen is None and ok:
            chosen = comp
    return {"chosen": chosen, "results": results}


def kramers_paired(spectrum: np.ndarray, rtol: float = 1e-8) -> bool:
    """True if the sorted spectrum splits into consecutive equal pairs."""
    v = np.sort(np.asarray(spectrum, dtype=float))
    if len(v) % 2:
        return False
    lo, hi = v[0::2], v[1::2]
    return bool(np.all(np.abs(hi - lo) <= rtol * np.maximum(np.abs(hi), np.finfo(float).tiny)))


def _mp_cdf(x, ratio):
    """Marchenko-Pastur distribution function for aspect ratio ``ratio <= 1``."""
    a, b = (1 - math.sqrt(ratio)) ** 2, (1 + math.sqrt(ratio)) ** 2

    def density(t):
        return math.sqrt(max((b - t) * (t - a), 0.0)) / (2 * math.pi * ratio * t)

    x = min(max(x, a), b)
    if x <= a:
        return 0.0
    val, _ = integrate.quad(density, a, x, limit=200)
    return val


def bulk_chi2(eigenvalues: np.ndarray, ratio: float, bins: int = 20) -> dict:
    """Chi^2 of normalised eigenvalues against Marchenko-Pastur, equal-mass bins."""
    eig = np.asarray(eigenvalues, dtype=float)
    a, b = (1 - math.sqrt(ratio)) ** 2, (1 + math.sqrt(ratio)) ** 2
    edges = [-np.inf] + [_bisect_cdf(p, ratio, a, b) for p in np.linspace(0, 1, bins + 1)[1:-1]] + [np.inf]
    counts, _ = np.histogram(eig, bins=edges)
    expected = np.full(bins, len(eig) / bins)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return {"chi2": chi2, "p_value": float(stats.chi2.sf(chi2, bins - 1)), "count": int(len(eig))}


def marchenko_pastur_chi2(beta: int, N: int, nu: int, matrices: int, seed: int, bins: int = 20) -> dict:
    """Histogram test of the dense sampler's bulk spectrum.

    Eigenvalues are divided by ``N + nu`` (quaternion pairs deduplicated),
    which puts them on ``[(1-sqrt(r))^2, (1+sqrt(r))^2]`` with
    ``r = N / (N + nu)`` when the sampler normalisation is right.  Eigenvalues
    of one matrix are strongly repelled, so the statistic is well below its
    nominal chi^2 distribution for a correct sampler; a wrong scale inflates
    it by orders of magnitude.
    """
    eig = []
    for k in range(matrices):
        spectrum = dense_spectrum(block_rng(seed, k), beta, N, nu)
        if beta == 4:
            spectrum = spectrum[::2]
        eig.append(spectrum / (N + nu))
    return bulk_chi2(np.concatenate(eig), N / (N + nu), bins)


def _bisect_cdf(p, ratio, a, b):
    lo, hi = a, b
    for _ in range(60):
        mid = (lo + hi) / 2
        if _mp_cdf(mid, ratio) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def dump_samples(path, cdf: EmpiricalCdf, run: McRun) -> None:
    """One smallest eigenvalue per line; a header comment records the run."""
    with open(path, "w") as fh:
        fh.write(f"# McRun {run.describe()}\n")
        for v in cdf.values:
            fh.write(f"{float(v):.17g}\n")


def load_samples(path) -> tuple[dict, EmpiricalCdf]:
    with open(path) as fh:
        header = fh.readline()
        values = np.array([float(line) for line in fh if line.strip()])
    params = dict(item.split("=", 1) for item in header.split()[2:])
    return params, EmpiricalCdf(values)
