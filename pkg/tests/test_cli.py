import json
import subprocess
import sys

import pytest

from chasebag.cli import main

from conftest import FIXTURES


def fx(name):
    return str(FIXTURES / name)


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def test_answer_both_id_chain(capsys):
    status, out, err = run(capsys, "answer", "-i", fx("id_chain.idb"), "-q", fx("q1.uq"), "--mode", "both", "--format", "csv")
    assert status == 0 and err == ""
    assert out == (
        "## chase\ncol1,multiplicity\na,1\n"
        "## rewrite\ncol1,multiplicity\na,1\n"
        "## divergences\nnone\n"
    )


def test_chase_loop_capped(capsys):
    status, out, _ = run(capsys, "chase", "-i", fx("tgd_loop.idb"), "--max-level", "3")
    assert status == 0
    lines = out.splitlines()
    assert lines[-1] == "levels=3 terminated=false facts=4"
    assert len([l for l in lines if l.startswith("S(")]) == 4


def test_undeclared_relation(capsys):
    status, out, err = run(capsys, "answer", "-i", fx("id_chain.idb"), "-q", fx("q_bad.uq"))
    assert status == 1 and out == ""
    assert err == f"error[parse]: {fx('q_bad.uq')}:1:9: unknown relation Missing\n"


def test_both_reports_tgd_divergence(capsys):
    status, out, _ = run(capsys, "answer", "-i", fx("witness.idb"), "-q", fx("q_witness.uq"), "--mode", "both")
    assert status == 0
    assert out.endswith("## divergences\nchase vs rewrite: (a) 1 != 2\n")


def test_verify_clean_and_planted(capsys, tmp_path):
    status, out, _ = run(capsys, "answer", "-i", fx("sales.idb"), "-q", fx("q_audited.uq"), "--verify")
    assert status == 0 and out.endswith("## verify\nno divergences\n")
    # rewrite mode over-counts the TGD witness already present in the data
    prog = tmp_path / "w.idb"
    prog.write_text("rel P/1. rel R/2. P(a). R(a,b). P(x) -> exists y: R(x,y).\n")
    status, out, _ = run(capsys, "answer", "-i", str(prog), "-q", fx("q_witness.uq"), "--mode", "rewrite", "--verify")
    assert status == 3
    assert "rewrite vs oracle: (a) 2 != 1" in out
    assert out.startswith("col1 | multiplicity")


def test_lower_bound_footer(capsys):
    status, out, _ = run(capsys, "answer", "-i", fx("tgd_loop.idb"), "-q", fx("q_loop.uq"), "--max-level", "5", "--format", "json")
    assert status == 0
    assert json.loads(out) == {"tuple": [], "multiplicity": 6, "exact": False}


def test_env_default_level(capsys, monkeypatch):
    monkeypatch.setenv("CHASEBAG_MAX_LEVEL", "2")
    _, out, _ = run(capsys, "chase", "-i", fx("tgd_loop.idb"))
    assert out.splitlines()[-1] == "levels=2 terminated=false facts=3"
    _, out, _ = run(capsys, "chase", "-i", fx("tgd_loop.idb"), "--max-level", "1")
    assert out.splitlines()[-1] == "levels=1 terminated=false facts=2"


def test_trace_lines(capsys):
    _, out, _ = run(capsys, "chase", "-i", fx("tgd_loop.idb"), "--max-level", "1", "--trace")
    assert out.splitlines()[0] == "level 1: dep#0 + S(a,b) => S(b,_:n0)"


def test_rewrite_command(capsys):
    status, out, _ = run(capsys, "rewrite", "-i", fx("id_chain.idb"), "-q", fx("q1.uq"))
    assert status == 0 and out == "q(x) <- P(x) | T(x).\n"


def test_aggregate_avg(capsys):
    status, out, _ = run(capsys, "aggregate", "-i", fx("sales.idb"), "-q", fx("q_amounts.uq"), "--fn", "avg", "--arg", "2")
    assert status == 0 and out == "fn=avg value=40/3 (13.3333333333) exact=true\n"


def test_aggregate_non_numeric(capsys):
    status, _, err = run(capsys, "aggregate", "-i", fx("sales.idb"), "-q", fx("q_amounts.uq"), "--fn", "sum", "--arg", "1")
    assert status == 2 and err.startswith("error[aggregate]: non-numeric aggregate column")


def test_aggregate_inexact_refusal(capsys, tmp_path):
    q = tmp_path / "q.uq"
    q.write_text("q(y) <- S(x,y).\n")
    status, _, err = run(capsys, "aggregate", "-i", fx("tgd_loop.idb"), "-q", str(q), "--fn", "count_distinct", "--max-level", "3")
    assert status == 2 and "inexact input" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["aggregate", "-i", "x.idb", "-q", "x.uq"],
        ["aggregate", "-i", "x.idb", "-q", "x.uq", "--fn", "sum"],
        ["answer", "-i", "x.idb", "-q", "x.uq", "--mode", "rewrite", "--max-level", "3"],
        ["answer", "-i", "x.idb", "-q", "x.uq", "--mode", "rewrite", "--strategy", "oblivious"],
        ["chase", "-i", "x.idb", "--max-level", "unbounded", "--strategy", "oblivious"],
        ["chase", "-i", "x.idb", "--max-level", "-1"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(capsys, argv):
    status, out, err = run(capsys, *argv)
    assert status == 1 and out == ""
    assert err.startswith("error[usage]:") and err.count("\n") == 1


def test_missing_file(capsys):
    status, _, err = run(capsys, "chase", "-i", "/nonexistent.idb")
    assert status == 1 and err.startswith("error[io]:")


def test_oracle_guard(capsys, tmp_path):
    prog = tmp_path / "big.idb"
    prog.write_text("rel R/1.\n" + "".join(f"R(c{i}).\n" for i in range(12)))
    q = tmp_path / "q.uq"
    q.write_text("q(x) <- R(x).\n")
    status, _, err = run(capsys, "answer", "-i", str(prog), "-q", str(q), "--verify")
    assert status == 2 and err.startswith("error[oracle]: oracle scale exceeded")


def test_out_file(capsys, tmp_path):
    target = tmp_path / "out.txt"
    status, out, _ = run(capsys, "chase", "-i", fx("id_chain.idb"), "--out", str(target))
    assert status == 0 and out == ""
    assert target.read_text().endswith("levels=1 terminated=true facts=2\n")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "chasebag", "chase", "-i", fx("id_chain.idb")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout == "T(a).\nP(a).\nlevels=1 terminated=true facts=2\n"
