import contextlib
import io
import json
import math
from pathlib import Path

import pytest

from hardedge import cli, gap
from hardedge.special import PrecisionError

GOLDEN = Path(__file__).parent / "golden"


def run(args, env=None, monkeypatch=None):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = cli.main(args)
        except SystemExit as exc:
            code = exc.code
    return code, out.getvalue(), err.getvalue()


@pytest.mark.parametrize("name,args", [
    ("eval_beta1_nu0_Q.csv", ["eval", "--beta", "1", "--nu", "0", "--grid", "0:16:5", "--quantity", "Q"]),
    ("eval_beta4_m1_P.json", ["eval", "--beta", "4", "--m", "1", "--grid", "0.5,2", "--quantity", "P", "--json"]),
    ("mc_beta1_nu1.csv", ["mc", "--beta", "1", "--N", "20", "--nu", "1", "--samples", "500", "--seed", "3",
                          "--grid", "0:8:3"]),
])
def test_golden_output(name, args):
    code, out, _ = run(args)
    assert code == 0
    assert out == (GOLDEN / name).read_text()


def test_csv_schema_and_values():
    code, out, _ = run(["eval", "--beta", "1", "--nu", "2", "--grid", "1"])
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "beta,nu,s,quantity,value,prec_bits,metadata"
    assert float(row.split(",")[4]) == pytest.approx(0.9801840996682194, rel=1e-15)


def test_dirac_flag():
    _, a, _ = run(["eval", "--beta", "1", "--nu", "3", "--grid", "2", "--dirac", "--json"])
    _, b, _ = run(["eval", "--beta", "1", "--nu", "3", "--grid", "4", "--json"])
    ra, rb = json.loads(a)[0], json.loads(b)[0]
    assert ra["value"] == rb["value"]
    assert ra["metadata"]["variable"] == "dirac"


def test_precision_env_variable(monkeypatch):
    monkeypatch.setenv(cli.PREC_ENV, "1024")
    _, out, _ = run(["eval", "--beta", "1", "--nu", "1", "--grid", "1", "--json"])
    assert json.loads(out)[0]["prec_bits"] >= 1024
    monkeypatch.setenv(cli.PREC_ENV, "lots")
    assert run(["eval", "--beta", "1", "--nu", "1", "--grid", "1"])[0] == cli.EXIT_INVALID


@pytest.mark.parametrize("args", [
    ["eval", "--beta", "1", "--nu", "0", "--grid", "0:1:0"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", ""],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "a,b"],
    ["eval", "--beta", "2", "--nu", "0", "--grid", "1"],
    ["eval", "--beta", "1", "--grid", "1"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "-1"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "2000"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "0", "--quantity", "P"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "1", "--prec-bits", "10"],
    ["eval", "--beta", "1", "--nu", "0", "--grid", "1", "--bogus"],
    ["verify", "toda", "--nu", "1:3"],
    ["verify", "boundary", "--grid", "0.5"],
    ["mc", "--beta", "4", "--m", "0", "--N", "3000", "--sampler", "dense", "--samples", "2"],
])
def test_validation_errors_exit_1(args):
    code, out, _ = run(args)
    assert code == cli.EXIT_INVALID
    assert out == ""


def test_numerical_failure_exit_2(monkeypatch):
    def boom(*a, **k):
        raise PrecisionError("forced")

    monkeypatch.setattr(gap, "evaluate_quantity", boom)
    code, out, _ = run(["eval", "--beta", "1", "--nu", "0", "--grid", "1,2"])
    assert code == cli.EXIT_NUMERICAL
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 2 and all(",nan," in r and "error=" in r for r in rows)


def test_verify_toda_passes():
    code, out, err = run(["verify", "toda", "--nu", "2:12", "--grid", "0.5,1,2,5,10"])
    assert code == 0
    rep = json.loads(out)
    assert rep["passed"] and rep["max_residual"] < 1e-8
    assert "PASS" in err


def test_verify_painleve_reports_convention():
    code, out, _ = run(["verify", "painleve", "--nu", "2:4", "--grid", "0.5,2,6"])
    assert code == 0
    assert json.loads(out)["metadata"]["convention"] == "double_t"


def test_verify_painleve_degenerate():
    code, out, err = run(["verify", "painleve", "--nu", "0:1"])
    assert code == cli.EXIT_FAILED
    assert json.loads(out)["calibration"] == "failed"
    assert "degenerate" in err


def test_verify_boundary_quaternion():
    code, out, err = run(["verify", "boundary", "--beta", "4", "--m", "1"])
    assert code == 0
    rep = json.loads(out)["reports"][0]
    assert abs(rep["metadata"]["ratios"][-1] - 1) < 0.05
    assert "ratio=" in err


def test_verify_crosscheck():
    code, out, _ = run(["verify", "crosscheck", "--m", "3", "--grid", "1,10"])
    assert code == 0 and json.loads(out)["passed"]


def test_verify_failure_exit_3(monkeypatch):
    from hardedge import verification

    real = verification.toda_report
    # an impossible tolerance forces a failing report
    monkeypatch.setattr(verification, "toda_report", lambda nus, grid, prec: real(nus, grid, prec, tol=-1.0))
    code, _, err = run(["verify", "toda", "--nu", "2", "--grid", "1"])
    assert code == cli.EXIT_FAILED and "FAIL" in err


def test_mc_determinism_across_workers(tmp_path):
    args = ["mc", "--beta", "4", "--N", "10", "--m", "1", "--samples", "3000", "--seed", "5", "--grid", "0:4:3"]
    a = run(args)
    b = run(args + ["--workers", "2"])
    assert a[0] == 0 and a[1] == b[1]
    ks = [r for r in a[1].splitlines() if ",ks," in r]
    assert len(ks) == 1


def test_mc_ks_tolerance_and_dump(tmp_path):
    dump = tmp_path / "raw.txt"
    code, _, _ = run(["mc", "--beta", "1", "--N", "10", "--nu", "0", "--samples", "200", "--seed", "1",
                      "--ks-tol", "1e-9", "--dump", str(dump)])
    assert code == cli.EXIT_FAILED
    lines = dump.read_text().splitlines()
    assert lines[0].startswith("# McRun") and len(lines) == 201


def test_mc_calibrate_scaling():
    code, out, err = run(["mc", "--beta", "1", "--calibrate-scaling", "--nu", "0", "--N", "20,40",
                          "--samples", "3000", "--seed", "2"])
    rep = json.loads(out)
    assert set(rep["plateaus"]) == {"20", "40"}
    assert math.isfinite(rep["c"]) and "fitted scaling constant" in err
    assert code in (0, 3)
