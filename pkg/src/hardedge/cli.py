"""Command-line front end.

    hardedge eval   --beta 1 --nu 0 --grid 0:16:5 --quantity Q
    hardedge verify toda --nu 2:12
    hardedge mc     --beta 1 --N 200 --nu 0 --samples 200000 --seed 7 --grid 0:16:9

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a verification
or goodness-of-fit check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import gap, montecarlo, verification
from .special import PrecisionError, PrecisionRequest

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_FAILED = 0, 1, 2, 3
CSV_FIELDS = ("beta", "nu", "s", "quantity", "value", "prec_bits", "metadata")
PREC_ENV = "HARDEDGE_PREC_BITS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    text = text.strip()
    if not text:
        raise UsageError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid range must be start:stop:count, got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad grid {text!r}: {exc}") from None
        if count < 1:
            raise UsageError("empty grid")
        points = [start] if count == 1 else list(np.linspace(start, stop, count))
    else:
        try:
            points = [float(p) for p in text.split(",") if p.strip()]
        except ValueError as exc:
            raise UsageError(f"bad grid {text!r}: {exc}") from None
    if not points:
        raise UsageError("empty grid")
    if not all(math.isfinite(p) for p in points):
        raise UsageError("grid points must be finite")
    return [float(p) for p in points]


def parse_indices(text: str) -> list[int]:
    """``a:b`` (inclusive) or a comma-separated list of non-negative integers."""
    try:
        if ":" in text:
            a, b = (int(t) for t in text.split(":"))
            out = list(range(a, b + 1))
        else:
            out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad index list {text!r}") from None
    if not out or min(out) < 0:
        raise UsageError(f"index list must be non-empty and non-negative, got {text!r}")
    return out


def _precision(args) -> PrecisionRequest:
    bits = args.prec_bits
    if bits is None:
        env = os.environ.get(PREC_ENV)
        try:
            bits = int(env) if env else 256
        except ValueError:
            raise UsageError(f"{PREC_ENV} must be an integer, got {env!r}") from None
    try:
        return PrecisionRequest(bits, args.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _index(args) -> int:
    value = args.m if args.m is not None else args.nu
    if value is None:
        raise UsageError("--nu (or --m for beta 4) is required")
    return value


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    return "nan" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.17g}"


def _meta_str(meta: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in meta.items())


def write_records(records: list[dict], as_json: bool, out=None) -> None:
    out = out or sys.stdout
    if as_json:
        clean = []
        for r in records:
            r = dict(r)
            if isinstance(r["value"], float) and math.isnan(r["value"]):
                r["value"] = None
            clean.append(r)
        out.write(json.dumps(clean, indent=1) + "\n")
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([r["beta"], r["nu"], _fmt(r["s"]), r["quantity"], _fmt(r["value"]),
                    r["prec_bits"], _meta_str(r["metadata"])])
    out.write(buf.getvalue())


def _record(beta, nu, s, quantity, value, bits, meta):
    return {"beta": beta, "nu": nu, "s": float(s), "quantity": quantity,
            "value": float(value), "prec_bits": bits, "metadata": meta}


def _emit_report(report: dict, passed: bool) -> int:
    sys.stdout.write(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_FAILED


# ---------------------------------------------------------------- eval


def _eval_point(job):
    beta, nu, x, quantity, dirac, prec, composition = job
    try:
        return gap.evaluate_quantity(beta, nu, x, quantity, dirac, prec, composition), None
    except (PrecisionError, ArithmeticError) as exc:
        return (float("nan"), 0), f"{type(exc).__name__}: {exc}"


def _check_eval_domain(beta, grid, quantity, dirac):
    for x in grid:
        s = x if dirac else (math.sqrt(x) if x >= 0 else -1.0)
        if not 0 <= s <= gap.S_MAX:
            bound = gap.S_MAX if dirac else gap.S_MAX**2
            raise UsageError(f"grid point {x} outside [0, {bound:g}]")
        if quantity == "P" and not dirac and x == 0:
            raise UsageError("P in the Wishart variable needs x > 0")


def cmd_eval(args) -> int:
    if args.beta not in (1, 4):
        raise UsageError("--beta must be 1 or 4")
    nu = _index(args)
    grid = parse_grid(args.grid)
    _check_eval_domain(args.beta, grid, args.quantity, args.dirac)
    prec = _precision(args)
    meta = {"variable": "dirac" if args.dirac else "wishart"}
    if args.beta == 4:
        meta["composition"] = args.beta4_composition
    jobs = [(args.beta, nu, x, args.quantity, args.dirac, prec, args.beta4_composition) for x in grid]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_eval_point, jobs))
    else:
        results = [_eval_point(j) for j in jobs]
    records, failed = [], False
    for x, ((value, bits), err) in zip(grid, results):
        m = dict(meta)
        if err:
            m["error"] = err.replace(";", ",")
            failed = True
        records.append(_record(args.beta, nu, x, args.quantity, value, bits, m))
    write_records(records, args.json)
    return EXIT_NUMERICAL if failed else EXIT_OK


# ---------------------------------------------------------------- verify

DEFAULT_TODA_GRID = "0.5,1,2,3,5,7.5,10"
DEFAULT_PAINLEVE_GRID = "0.5,1,2,3,5,7.5,10"
DEFAULT_CROSSCHECK_GRID = "0.5,1,2,5,10,20"


def cmd_verify(args) -> int:
    prec = _precision(args)
    suite = args.suite
    if suite == "toda":
        nus = parse_indices(args.nu or "2:12")
        if min(nus) < 2:
            raise UsageError("the Toda identity needs nu >= 2")
        grid = _positive_grid(args.grid or DEFAULT_TODA_GRID)
        rep = verification.toda_report(nus, grid, prec)
        _summary(rep.label, rep.max_residual, rep.tolerance, rep.passed)
        return _emit_report(rep.to_dict(), rep.passed)

    if suite == "painleve":
        idx = parse_indices(args.m or args.nu or ("2:8" if args.beta == 1 else "1:4"))
        grid = _positive_grid(args.grid or DEFAULT_PAINLEVE_GRID)
        cal_grid = grid[: min(len(grid), 4)]
        try:
            if args.beta == 1:
                conv = verification.calibrate_convention(idx, cal_grid, prec, composition=args.beta4_composition)
            else:
                conv = verification.calibrate_convention((), cal_grid, prec, quaternion_m=idx,
                                                         composition=args.beta4_composition)
        except verification.CalibrationError as exc:
            print(f"warning: {exc}", file=sys.stderr)
            return _emit_report({"label": f"painleve_beta{args.beta}", "calibration": "failed",
                                 "reason": str(exc), "table": exc.table}, False)
        rep = verification.painleve_report(args.beta, idx, grid, conv, prec, composition=args.beta4_composition)
        _summary(f"{rep.label} ({conv.name})", rep.max_residual, rep.tolerance, rep.passed)
        return _emit_report(rep.to_dict(), rep.passed)

    if suite == "boundary":
        idx = parse_indices(args.m or args.nu or ("0:8" if args.beta == 1 else "1:2"))
        grid = _positive_grid(args.grid) if args.grid else (0.1, 0.05, 0.02, 0.01)
        try:
            reports = [verification.boundary_report(args.beta, i, grid, prec,
                                                    composition=args.beta4_composition) for i in idx]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for r, i in zip(reports, idx):
            _summary(f"{r.label} index={i} ratio={r.metadata['ratios'][-1]:.6f}",
                     abs(r.residuals[-1]), r.tolerance, r.passed)
        ok = all(r.passed for r in reports)
        return _emit_report({"label": f"boundary_beta{args.beta}", "passed": ok,
                             "reports": [r.to_dict() for r in reports]}, ok)

    if suite == "crosscheck":
        ms = parse_indices(args.m or "1:8")
        grid = _positive_grid(args.grid or DEFAULT_CROSSCHECK_GRID)
        parities = ("odd", "even") if args.parity == "both" else (args.parity,)
        reports = [verification.crosscheck_entries(p, m, grid) for p in parities for m in ms]
        worst = max(r.max_residual for r in reports)
        ok = all(r.passed for r in reports)
        _summary("crosscheck", worst, verification.CROSSCHECK_TOL, ok)
        return _emit_report({"label": "crosscheck", "passed": ok, "max_residual": worst,
                             "reports": [r.to_dict() for r in reports]}, ok)
    raise UsageError(f"unknown suite {suite!r}")


def _positive_grid(text):
    grid = parse_grid(text) if isinstance(text, str) else list(text)
    if min(grid) <= 0:
        raise UsageError("verification grids must be positive")
    return grid


def _summary(label, worst, tol, ok):
    print(f"{'PASS' if ok else 'FAIL'} {label}: max residual {worst:.3e} (tol {tol:g})", file=sys.stderr)


# ---------------------------------------------------------------- mc


def cmd_mc(args) -> int:
    if args.beta not in (1, 4):
        raise UsageError("--beta must be 1 or 4")
    nu = _index(args)
    Ns = parse_indices(args.N)
    if args.calibrate_scaling:
        theoretical = gap.gap_curve(args.beta, nu, composition=args.beta4_composition)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit = montecarlo.calibrate_scaling(args.beta, Ns, nu, args.samples, args.seed, theoretical,
                                               sampler=args.sampler, workers=args.workers)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        report = fit.to_dict()
        report["per_N"] = {str(k): v for k, v in report["per_N"].items()}
        report["ks_tables"] = {str(k): v for k, v in report["ks_tables"].items()}
        report["plateaus"] = {str(k): v for k, v in report["plateaus"].items()}
        print(f"fitted scaling constant c = {fit.c:.4f} (stable: {fit.stable})", file=sys.stderr)
        for N, (lo, hi) in fit.plateaus.items():
            print(f"  N={N}: argmin c={fit.per_N[N]['c']:.4f}, plateau [{lo}, {hi}]", file=sys.stderr)
        return _emit_report(report, fit.stable)

    grid = parse_grid(args.grid)
    if min(grid) < 0:
        raise UsageError("grid points must be >= 0")
    try:
        runs = [montecarlo.McRun(args.beta, N, nu, args.samples, args.seed, args.scaling, args.sampler)
                for N in Ns]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    theoretical = gap.gap_curve(args.beta, nu, composition=args.beta4_composition)
    prec = _precision(args)
    records, worst = [], 0.0
    for run in runs:
        cdf = montecarlo.sample_smallest(run, args.workers)
        if args.dump:
            path = args.dump if len(runs) == 1 else f"{args.dump}.N{run.N}"
            montecarlo.dump_samples(path, cdf, run)
        meta = {"N": run.N, "samples": run.samples, "seed": run.master_seed,
                "scaling": run.scaling_constant, "sampler": run.sampler}
        if args.beta == 4:
            meta["composition"] = args.beta4_composition
        for x in grid:
            records.append(_record(args.beta, nu, x, "Q_mc", montecarlo.empirical_gap(cdf, run, x), 53, meta))
            if x <= gap.S_MAX**2:
                value, bits = gap.evaluate_quantity(args.beta, nu, x, "Q", False, prec, args.beta4_composition)
            else:
                value, bits = 0.0, 53
            records.append(_record(args.beta, nu, x, "Q", value, bits, meta))
        ks = montecarlo.ks_distance(cdf, run, theoretical)
        worst = max(worst, ks)
        records.append(_record(args.beta, nu, float("nan"), "ks", ks, 53, meta))
        print(f"N={run.N}: KS = {ks:.5f}", file=sys.stderr)
    write_records(records, args.json)
    if args.ks_tol is not None and worst > args.ks_tol:
        return EXIT_FAILED
    return EXIT_OK


# ---------------------------------------------------------------- main


def _common(p, index_type):
    # verify takes index ranges such as 2:12, eval and mc a single index
    p.add_argument("--nu", type=index_type)
    p.add_argument("--m", type=index_type, help="quaternion index (alias of --nu)")
    p.add_argument("--prec-bits", type=int, default=None, help=f"working precision (default ${PREC_ENV} or 256)")
    p.add_argument("--tol", type=float, default=1e-40, help="target relative tolerance")
    p.add_argument("--beta4-composition", choices=gap.COMPOSITIONS, default=gap.DEFAULT_COMPOSITION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardedge", description="Hard-edge gap probabilities of Wishart matrices.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate Q, P or F on a grid")
    p.add_argument("--beta", type=int, required=True)
    p.add_argument("--grid", required=True, help="start:stop:count or a,b,c")
    p.add_argument("--quantity", choices=gap.QUANTITIES, default="Q")
    p.add_argument("--dirac", action="store_true", help="grid is the Dirac variable s = sqrt(x)")
    p.add_argument("--json", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    _common(p, int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=("toda", "painleve", "boundary", "crosscheck"))
    p.add_argument("--beta", type=int, choices=(1, 4), default=1)
    p.add_argument("--grid", default=None)
    p.add_argument("--parity", choices=("odd", "even", "both"), default="both")
    _common(p, str)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mc", help="Monte Carlo comparison with the limit law")
    p.add_argument("--beta", type=int, required=True)
    p.add_argument("--N", default="200", help="matrix size(s): 200 or 50,100,200")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default="0:16:9", help="Wishart-variable grid")
    p.add_argument("--scaling", type=float, default=4.0, help="c in lambda_min = s / (c N)")
    p.add_argument("--calibrate-scaling", action="store_true")
    p.add_argument("--sampler", choices=montecarlo.SAMPLERS, default="bidiagonal")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump", default=None, help="write raw smallest eigenvalues here")
    p.add_argument("--ks-tol", type=float, default=None, help="exit 3 if KS exceeds this")
    p.add_argument("--json", action="store_true")
    _common(p, int)
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hardedge: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"hardedge: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PrecisionError, ArithmeticError) as exc:
        print(f"hardedge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
