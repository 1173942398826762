import io
import json
import subprocess
import sys

import jsonschema
import pytest

from flatlab.cli import report_schema, run
from flatlab.fileformat import fixture_text
from flatlab.repro import STAGES, repro_counterexample

VALIDATOR = jsonschema.Draft202012Validator(report_schema())


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def call_json(*argv):
    code, out, err = call("--json", *argv)
    report = json.loads(out)
    VALIDATOR.validate(report)
    assert report["exit_code"] == code
    return code, report, out


def test_schema_is_valid():
    jsonschema.Draft202012Validator.check_schema(report_schema())


# -- check-sfl --------------------------------------------------------------


def test_check_sfl_appendix():
    code, report, _ = call_json("check-sfl", "appendix_prolonged.sys")
    assert code == 0
    assert report["result"]["dimensions"] == [2, 4, 6, 8, 9]
    assert report["status"] == "pass"


def test_check_sfl_counterexample_text():
    code, out, _ = call("check-sfl", "eq3.sys")
    assert code == 1
    assert "D^1: dim 4, NOT involutive" in out
    assert "witness [g1, g2] = (u2/u1^2)*d/dx3" in out


def test_check_sfl_brunovsky():
    assert call("check-sfl", "brunovsky_2_2.sys")[0] == 0


def test_reruns_are_byte_identical():
    a = call("--json", "check-sfl", "eq3.sys")[1]
    b = call("--json", "check-sfl", "eq3.sys")[1]
    assert a == b


def test_seed_flag_beats_environment(monkeypatch):
    monkeypatch.setenv("FLATLAB_SEED", "5")
    assert call_json("check-sfl", "eq3.sys")[1]["seed"] == 5
    assert call_json("--seed", "7", "check-sfl", "eq3.sys")[1]["seed"] == 7
    assert call_json("check-sfl", "eq3.sys", "--seed", "0x10")[1]["seed"] == 16
    monkeypatch.delenv("FLATLAB_SEED")
    assert call_json("check-sfl", "eq3.sys")[1]["seed"] == 0xF1A7


def test_bad_environment_seed(monkeypatch):
    monkeypatch.setenv("FLATLAB_SEED", "abc")
    assert call("check-sfl", "eq3.sys")[0] == 2


def test_format_error_exit_code(tmp_path):
    p = tmp_path / "bad.sys"
    p.write_text("[states]\nx1\n[inputs]\nu1 u2\n[dynamics]\nx1 = u1\n")
    code, report, _ = call_json("check-sfl", str(p))
    assert code == 2 and report["status"] == "input-error"
    assert "bad.sys:6:" in report["result"]["error"]
    assert call("check-sfl", str(tmp_path / "none.sys"))[0] == 2


# -- verify-flat ------------------------------------------------------------


def test_verify_flat_symbolic():
    code, report, _ = call_json("verify-flat", "eq3.sys", "eq3.cert")
    assert code == 0
    assert set(report["result"]["residuals"].values()) == {"0"}


def test_verify_flat_numeric():
    code, report, _ = call_json("--tol", "1e-6", "verify-flat", "eq3.sys", "eq3.cert",
                                "--mode", "numeric")
    assert code == 0
    assert report["result"]["max_residual"] < 1e-6


def test_verify_flat_corrupted_certificate_names_residual(tmp_path):
    p = tmp_path / "bad.cert"
    p.write_text(fixture_text("eq3.cert").replace("u2 = -y1*(", "u2 = -2*y1*("))
    code, out, _ = call("verify-flat", "eq3.sys", str(p))
    assert code == 1
    assert "nonzero residual: u2" in out
    assert "certificate: INVALID" in out


def test_verify_flat_singular_signal_exit_code():
    code, report, _ = call_json("verify-flat", "eq3.sys", "eq3.cert", "--mode", "numeric",
                                "--signal", "t - 1/2", "--signal", "1")
    assert code == 3 and report["status"] == "singular"


# -- prolong ----------------------------------------------------------------


def test_prolong_reproduces_appendix_system_bytewise():
    code, out, _ = call("prolong", "eq3.sys", "--transform", "eq3_input.tr", "--order", "4")
    assert code == 0
    assert out == fixture_text("appendix_prolonged.sys")


def test_prolong_order_zero_is_canonical_echo():
    code, out, _ = call("prolong", "appendix_prolonged.sys", "--order", "0")
    assert out == fixture_text("appendix_prolonged.sys")
    code, out, _ = call("prolong", "eq3.sys", "--order", "0")
    assert code == 0 and "x3' = (2*u1*x1 + u2^2)/(2*u1)" in out


def test_prolong_writes_file(tmp_path):
    p = tmp_path / "out.sys"
    code, out, _ = call("prolong", "brunovsky_2_2.sys", "--order", "2", "-o", str(p))
    assert code == 0 and out == ""
    assert p.read_text() == (
        "[states]\nx1_1 x1_2 x2_1 x2_2 u1 u1_1\n\n[inputs]\nu1_2 u2\n\n[dynamics]\n"
        "x1_1' = x1_2\nx1_2' = u1\nx2_1' = x2_2\nx2_2' = u2\nu1' = u1_1\nu1_1' = u1_2\n")


def test_prolong_non_invertible_transform(tmp_path):
    p = tmp_path / "bad.tr"
    p.write_text("[new_inputs]\nv1 v2\n\n[inverse]\nu1 = v1\nu2 = 2*v1\n")
    code, report, _ = call_json("prolong", "eq3.sys", "--transform", str(p), "--order", "1")
    assert code == 2
    assert report["result"]["rank"] == 1
    assert "generic rank 1" in report["result"]["error"]


# -- obstruct and relative-degree --------------------------------------------


def test_obstruct_case1_level1():
    code, out, _ = call("obstruct", "case1.sys", "--level", "1")
    assert code == 0
    assert "forced: a(x1,x2,x3,v1) = 0" in out
    assert "  a(x1,x2,x3,v1)^2 = 0" in out


def test_obstruct_level2_json():
    code, r1, _ = call_json("obstruct", "case1.sys", "--level", "2")
    code, r2, _ = call_json("obstruct", "case2.sys", "--level", "2")
    last1 = r1["result"]["steps"][-1]
    last2 = r2["result"]["steps"][-1]
    assert last1["conditions"] == ["diff(b(x1,x2,x3,v1),v1)"]
    assert last2["conditions"] == ["b(x1,x2,x3,v1)*diff(b(x1,x2,x3,v1),v1)"]
    assert r1["result"]["contradiction"] and r2["result"]["contradiction"]


def test_obstruct_without_ansatz():
    code, report, _ = call_json("obstruct", "case2.sys", "--ansatz", "none")
    assert code == 0 and len(report["result"]["conditions"]) == 2
    assert call("obstruct", "eq3.sys")[0] == 2


def test_relative_degree_linearizing_output():
    code, report, _ = call_json("relative-degree", "appendix_prolonged.sys", "v1",
                                "(v1^2*x1 - 2*v1*x2 + 2*x3)*v1_1 - 2*v1*x1 + 2*x2")
    assert code == 0
    assert report["result"]["rho"] == [4, 3]
    assert report["result"]["linearizing"]["decoupling_rank"] == 2


def test_relative_degree_single_and_negative():
    code, out, _ = call("relative-degree", "eq3.sys", "x3")
    assert code == 0 and "= 1" in out
    assert call("relative-degree", "eq3.sys", "x1", "x2")[0] == 1
    assert call("relative-degree", "eq3.sys", "q9")[0] == 2


# -- repro-paper -----------------------------------------------------------


def test_repro_default_run():
    code, report, _ = call_json("repro-paper")
    assert code == 0
    assert [s["stage"] for s in report["result"]["stages"]] == list(STAGES)
    assert all(s["passed"] for s in report["result"]["stages"])


def test_repro_single_stage():
    code, out, _ = call("repro-paper", "--stage", "sfl-original")
    assert code == 0
    assert out.splitlines()[0] == "sfl-original: PASS"
    assert "1/1 stages pass" in out


def test_repro_tampered_fixture_names_failed_stage(tmp_path):
    (tmp_path / "eq3.cert").write_text(
        fixture_text("eq3.cert").replace("y2 = 2*x2", "y2 = -2*x2", 1))
    code, out, _ = call("repro-paper", "--fixtures", str(tmp_path))
    assert code == 1
    assert "certificate: FAIL" in out
    assert "failed: certificate" in out


def test_repro_three_fold_prolongation_fails_sfl_stage():
    report = repro_counterexample(stages=["sfl-prolonged"], prolongation_order=3)
    assert report.failed() == ["sfl-prolonged"]
    code, out, _ = call("repro-paper", "--stage", "sfl-prolonged", "--prolongation-order", "3")
    assert code == 1 and "sfl-prolonged: FAIL" in out


def test_repro_broken_fixture_is_reported_not_raised():
    report = repro_counterexample(stages=["case1"], overrides={"case1.sys": "[states]\n"})
    assert report.failed() == ["case1"]
    assert "FormatError" in report.stages[0].details["error"]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flatlab.cli", "check-sfl", "eq3.sys"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "verdict: not static feedback linearizable" in proc.stdout


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        run(["check-sfl"])
    assert info.value.code == 2
