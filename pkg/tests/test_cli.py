from __future__ import annotations

import json
import subprocess
import sys

import pytest

from lqtraj import cli
from lqtraj.validation import CriterionResult


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for key in ("quadrature_order", "nbar", "workers", "exit status"):
        assert key in text


def test_unknown_experiment_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["fig2"])
    assert exc.value.code == 2


def test_csv_to_stdout(capsys):
    code, out, _ = run(["fig1-qnd", "--grid", "0:1:2", "--oracle", "off"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "abscissa,value,stderr,method,series"
    assert len(lines) == 5


def test_json_to_file_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["momentum-linear", "--grid", "0:0.2:2", "--trajectories", "3", "--dt", "1e-3", "--format", "json"]
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    assert run(args + ["--out", str(b), "--workers", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    recs = json.loads(a.read_text())
    assert {r["method"] for r in recs} == {"closed-form", "monte-carlo"}


def test_config_file_and_param_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("grid = 0:1:3\noracle = off\nnbar = 4\n")
    code, out, _ = run(["fig1-qnd", "--config", str(cfg), "--param", "grid=0:1:2"], capsys)
    assert code == 0
    assert len(out.strip().splitlines()) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["ho-position", "--dt", "0.3"],
        ["fig1-qnd", "--param", "nonsense"],
        ["fig1-qnd", "--param", "bogus=1"],
        ["fig1-qnd", "--grid", "2:0:3"],
        ["fig1-qnd", "--config", "/nonexistent/file.cfg"],
        ["fig1-qnd", "--criteria", "1"],
        ["validate", "--criteria", "99"],
    ],
)
def test_configuration_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert "configuration error" in err


def test_numerical_error_exit_4(monkeypatch, capsys):
    from lqtraj.errors import NumericalError

    def boom(cfg):
        raise NumericalError("diverged")

    monkeypatch.setitem(cli.RUNNERS, "fig1-qnd", boom)
    code, _, err = run(["fig1-qnd"], capsys)
    assert code == 4 and "diverged" in err


def test_validate_report_ordered_and_failure_exit(monkeypatch, capsys):
    import lqtraj.validation as validation

    def fake(ids=None):
        out = []
        for cid in (2, 1):
            r = CriterionResult(cid, f"c{cid}")
            r.add("x", 0.5 if cid == 2 else 2.0, 1.0)
            out.append(r)
        return sorted(out, key=lambda r: r.id)

    monkeypatch.setattr(validation, "run_validation", fake)
    code, out, err = run(["validate", "--format", "json"], capsys)
    assert code == 3
    report = json.loads(out)
    assert [r["id"] for r in report] == [1, 2]
    assert report[0]["passed"] is False and report[0]["tolerance"] == 1.0
    assert "[FAIL] C1" in err


def test_validate_subset_passes(capsys):
    code, out, _ = run(["validate", "--criteria", "5,4"], capsys)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "id,title,passed,measured,tolerance"
    assert [r.split(",")[0] for r in rows[1:]] == ["4", "5"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lqtraj", "fig1-qnd", "--grid", "0:0:1", "--oracle", "off"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("abscissa,")
