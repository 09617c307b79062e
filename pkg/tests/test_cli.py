import json
import shutil
import subprocess
import sys

import pytest

from chorver.cli import main

from conftest import CORPUS


def c(name):
    return str(CORPUS / name)


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_dh(capsys):
    code, out, _ = call(capsys, "run", c("dh.chor"), c("dh.state"))
    assert code == 0 and "p.s = 2" in out and "q.s = 2" in out
    code, out, _ = call(capsys, "run", c("dh.chor"), c("dh.state"), "--json")
    rep = json.loads(out)
    assert rep["outcome"]["final_state"]["p"]["s"] == 2 and rep["command"] == "run"
    assert set(rep["inputs"]) == {c("dh.chor")}


def test_run_nil(capsys):
    code, out, _ = call(capsys, "run", c("nil.chor"), c("empty.state"))
    assert code == 0 and "after 0 steps" in out


def test_random_runs_are_byte_identical(capsys):
    args = ("run", c("zeros.chor"), c("zeros.state"), "--policy", "random", "--seed", "7")
    first = call(capsys, *args)
    assert first == call(capsys, *args) and first[0] == 0


def test_fixed_policy_and_overrides(capsys):
    code, out, _ = call(capsys, "run", c("dh.chor"), c("dh.state"), "--policy", "fixed",
                        "--choices", "1,1,1")
    assert code == 0 and "p.s = 2" in out
    code, out, _ = call(capsys, "run", c("dh.chor"), c("dh.state"), "--set", "q.b=3")
    assert code == 0 and "p.s = 6" in out and "q.s = 6" in out  # 5^18 mod 23


def test_exit_codes(capsys, tmp_path):
    assert call(capsys, "run", c("dh.chor"), c("empty.state"))[0] == 2
    assert call(capsys, "run", c("zeros.chor"), c("zeros.state"), "--fuel", "3")[0] == 3
    bad = tmp_path / "bad.chor"
    bad.write_text("processes p; main { p.x := ; 0 }")
    code, _, err = call(capsys, "run", str(bad), c("empty.state"))
    assert code == 2 and "1:" in err
    assert call(capsys, "run", str(tmp_path / "missing.chor"))[0] == 2


def test_verify_dh(capsys):
    code, out, _ = call(capsys, "verify", c("dh.chor"), c("dh.spec"), "--wlp")
    assert code == 0 and "verify: Valid" in out and out.startswith("wlp: ")
    code, out, _ = call(capsys, "verify", c("dh.chor"), c("dh.spec"), "--json", "--derivation")
    rep = json.loads(out)["outcome"]
    assert rep["verdict"] == "Valid" and rep["derivation"]["rule"] == "H|Weak"
    assert rep["derivation_check"] == "ok"


def test_verify_zeros_checks(capsys):
    code, out, _ = call(capsys, "verify", c("zeros.chor"), c("zeros.spec"),
                        "--check", "consistency", "--check", "adequacy")
    assert code == 0
    assert "consistency Z: Valid" in out and "adequacy Z: Valid" in out


def test_verify_broken(capsys):
    code, out, _ = call(capsys, "verify", c("dh.chor"), c("broken.spec"), "--json")
    assert code == 1
    rep = json.loads(out)["outcome"]
    assert rep["verdict"] == "Refuted"
    assert rep["replay"]["pre_holds"] and rep["replay"]["violating"]
    assert "state_file" in rep["counterexample"]


def test_wlp_and_explore(capsys):
    code, out, _ = call(capsys, "wlp", c("dh.chor"), c("dh.spec"))
    assert code == 0 and out.strip() == \
        "(q.g ^ q.b mod q.m) ^ p.a mod p.m == (p.g ^ p.a mod p.m) ^ q.b mod q.m"
    code, out, _ = call(capsys, "wlp", c("dh.chor"), "--post", "p.s == 3")
    assert code == 0 and "== 3" in out
    code, out, _ = call(capsys, "explore", c("dh.chor"), c("dh.state"))
    assert code == 0 and "1 terminal state(s)" in out


def test_fuzz_and_oracle(capsys):
    code, out, _ = call(capsys, "fuzz", c("dh.chor"), c("dh.spec"), "--trials", "50")
    assert code == 0 and "0 violations" in out
    code, out, _ = call(capsys, "fuzz", c("dh.chor"), c("broken.spec"), "--trials", "5")
    assert code == 1
    code, out, _ = call(capsys, "oracle", "--instances", "5", "--domain", "0..2")
    assert code == 0 and "0 divergences" in out


@pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not installed")
def test_smt_backend(capsys):
    code, out, _ = call(capsys, "verify", c("zeros.chor"), c("zeros.spec"), "--backend", "smt",
                        "--check", "consistency")
    assert code == 0
    # variable exponents are outside what the solver adapter can express
    code, _, _ = call(capsys, "verify", c("dh.chor"), c("dh.spec"), "--backend", "smt")
    assert code == 2


def test_console_script():
    exe = shutil.which("chorver")
    cmd = [exe] if exe else [sys.executable, "-m", "chorver.cli"]
    p = subprocess.run(cmd + ["run", c("nil.chor"), c("empty.state")], capture_output=True,
                       text=True)
    assert p.returncode == 0
