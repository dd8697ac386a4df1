from pathlib import Path

import pytest

from microverif.cli import Config, main

ROOT = Path(__file__).resolve().parents[1]
STATE = str(ROOT / "data" / "shrd_demo.state")
SHRD = "48 0F AC D1 10"


def _kv(out):
    return dict(line.split(": ", 1) for line in out.splitlines() if ": " in line and not line.startswith(" "))


def test_run_prints_state_diff(capsys):
    assert main(["run", "--bytes", SHRD, "--state", STATE]) == 0
    kv = _kv(capsys.readouterr().out)
    assert kv["GPR[RCX]"] == "0x0123456789ABCDEF -> 0x77880123456789AB"
    assert kv["IP"].endswith("-> 0x0000000000001005")
    assert "GPR[RDX]" not in kv


def test_run_rtl_engine_agrees(capsys):
    main(["run", "--bytes", SHRD, "--state", STATE])
    spec = capsys.readouterr().out.replace("engine: spec", "")
    main(["run", "--bytes", SHRD, "--state", STATE, "--engine", "rtl"])
    rtl = capsys.readouterr().out.replace("engine: rtl", "")
    spec_regs = [l for l in spec.splitlines() if l.startswith(("GPR", "IP"))]
    rtl_regs = [l for l in rtl.splitlines() if l.startswith(("GPR", "IP"))]
    assert spec_regs == rtl_regs


def test_run_fault_exit_code(capsys):
    assert main(["run", "--bytes", "F0 " + SHRD, "--state", STATE]) == 1
    assert _kv(capsys.readouterr().out)["fault"] == "#UD"


@pytest.mark.parametrize("engine", ["spec", "rtl"])
def test_trace_matches_golden(capsys, engine):
    assert main(["trace-ucode", "--bytes", SHRD, "--state", STATE, "--exec", engine]) == 0
    assert capsys.readouterr().out == (ROOT / "tests" / "golden" / "shrd_demo.trace").read_text()


def test_prove_decode(capsys, tmp_path):
    rc = main(["prove", "decode", "0F_AC", "--save", str(tmp_path / "r.json"), "--report-dir", str(tmp_path)])
    out = _kv(capsys.readouterr().out)
    assert rc == 0
    assert out["decode/0F_AC"].startswith("proved")
    assert out["proved"] == "1/1"
    assert (tmp_path / "report.html").exists()
    assert main(["report", "--results", str(tmp_path / "r.json"), "--no-timings"]) == 0
    assert "decode/0F_AC: proved" in capsys.readouterr().out


def test_mutate_writes_counterexample(capsys, tmp_path):
    rc = main(["mutate", "--bug", "exec-dontcare-src2", "--prove", "exec", "AND@64->64",
               "--cex-dir", str(tmp_path)])
    kv = _kv(capsys.readouterr().out)
    assert rc == 1
    assert kv["detected"] == "yes"
    assert list(tmp_path.glob("*.txt"))


def test_mutate_without_bug_is_an_error(capsys):
    assert main(["mutate", "--prove", "exec", "AND"]) == 2


def test_unknown_selector_is_an_error(capsys):
    assert main(["prove", "exec", "FROB"]) == 2
    assert "error" in capsys.readouterr().err


def test_export_cnf(capsys, tmp_path):
    assert main(["export-cnf", "decode", "0F_AC", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "decode_0F_AC.cnf").exists()


def test_env_overrides(monkeypatch, capsys):
    monkeypatch.setenv("MICROVERIF_BUDGET", "0")
    assert main(["prove", "decode", "0F_AC"]) == 2  # budget must be positive
    monkeypatch.setenv("MICROVERIF_BUDGET", "5")
    assert main(["prove", "decode", "0F_AC"]) == 0


def test_config_validation():
    with pytest.raises(ValueError):
        Config(jobs=0)
    with pytest.raises(ValueError):
        Config(budget=-1)


def test_state_file_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.state"
    bad.write_text("GPR[RCX]=nothex\n")
    assert main(["run", "--bytes", SHRD, "--state", str(bad)]) == 2
