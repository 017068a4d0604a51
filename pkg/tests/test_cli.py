"""CLI behavior, driven in process through main(argv).

Every invocation goes through the real service app via the test transport,
so these double as end-to-end checks of the request/render path.
"""
import csv
import importlib
import json
import xml.etree.ElementTree as ET

import pytest

from ablasim.cli import main
from ablasim.reporting import RUN_CSV_COLUMNS, SUMMARY_CSV_COLUMNS
from ablasim.validation import CheckResult

# the package re-exports the app instance under the submodule's name, so the
# module object itself has to come from the import system
app_module = importlib.import_module("ablasim.service.app")

FAST = {"dt": 0.1, "t_end": 1.0, "target_edge_length": 5e-4, "output_stride": 2}


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def test_run_happy_path(tmp_path, capsys):
    cfg = _write_config(tmp_path, FAST)
    rc = main(["run", "--config", cfg, "--out", str(tmp_path)])
    out = capsys.readouterr()
    assert rc == 0, out.err
    assert out.err == ""
    header, rows = _read_csv(tmp_path / "run.csv")
    assert tuple(header) == RUN_CSV_COLUMNS
    assert len(rows) == 5
    assert rows[-1][0] == "1.0000"
    assert out.out.splitlines()[-1].startswith("done: 5 records, lesion ")


def test_run_with_plots(tmp_path, capsys):
    cfg = _write_config(tmp_path, FAST)
    rc = main(["run", "--config", cfg, "--out", str(tmp_path), "--plots"])
    capsys.readouterr()
    assert rc == 0
    svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert svgs == ["energy.svg", "lesion_volume.svg", "max_temperature.svg", "probes.svg"]
    for p in tmp_path.glob("*.svg"):
        ET.fromstring(p.read_text())


def test_run_zero_voltage_stays_at_rest(tmp_path, capsys):
    cfg = _write_config(tmp_path, dict(FAST, applied_voltage=0.0))
    rc = main(["run", "--config", cfg, "--out", str(tmp_path)])
    capsys.readouterr()
    assert rc == 0
    header, rows = _read_csv(tmp_path / "run.csv")
    col = header.index("T_max_C")
    assert all(r[col] == "37.000000" for r in rows)


def test_run_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"dt": 0.1,\n "t_end": }\n')
    rc = main(["run", "--config", str(path), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "line 2" in err and "column" in err


def test_run_config_not_an_object(tmp_path, capsys):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    rc = main(["run", "--config", str(path), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "top level must be a JSON object" in err


def test_run_missing_config_file(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "cannot read config" in err


def test_run_unknown_field_diagnostic(tmp_path, capsys):
    cfg = _write_config(tmp_path, dict(FAST, dtt=0.1))
    rc = main(["run", "--config", cfg, "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error: field dtt:" in err


def test_run_bad_value_diagnostic(tmp_path, capsys):
    cfg = _write_config(tmp_path, dict(FAST, dt=-1.0))
    rc = main(["run", "--config", cfg, "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error: field dt:" in err and "greater than 0" in err


def test_run_failure_keeps_partial_csv(tmp_path, capsys):
    cfg = _write_config(tmp_path, dict(FAST, target_edge_length=0.5))
    rc = main(["run", "--config", cfg, "--out", str(tmp_path)])
    out = capsys.readouterr()
    assert rc == 1
    assert "run failed during meshing" in out.err
    header, rows = _read_csv(tmp_path / "run.csv")
    assert rows[-1][0] == "truncated"


def test_sweep_with_overrides(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"voltages": [25.0, 30.0], "base": FAST})
    rc = main(["sweep", "--group", "voltage", "--config", cfg,
               "--out", str(tmp_path), "--plots"])
    out = capsys.readouterr()
    assert rc == 0, out.err

    names = sorted(p.name for p in tmp_path.glob("run_*.csv"))
    assert names == ["run_BE_V25_r1.csv", "run_BE_V30_r1.csv",
                     "run_HBE_V25_r1.csv", "run_HBE_V30_r1.csv"]
    header, rows = _read_csv(tmp_path / "summary.csv")
    assert tuple(header) == SUMMARY_CSV_COLUMNS
    assert [r[1] for r in rows] == ["25", "30"]
    # 1 s horizon: nothing above threshold yet and no crossover to report
    assert all(r[3] == "" for r in rows)
    assert all(r[6] == "0.000000" for r in rows)

    # the difference-ratio panel needs the settled window, absent in a 1 s run
    svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert svgs == ["energy.svg", "lesion_volume.svg", "max_temperature.svg"]


def test_sweep_rejects_empty_points(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"voltages": []})
    rc = main(["sweep", "--group", "voltage", "--config", cfg, "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "non-empty" in err


def test_mesh_info(capsys):
    rc = main(["mesh", "--info"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("nodes:")
    assert "volume Muscle" in out and "volume total" in out


def test_mesh_export(tmp_path, capsys):
    target = tmp_path / "mesh.txt"
    rc = main(["mesh", "--export", str(target)])
    out = capsys.readouterr().out
    assert rc == 0
    assert str(target) in out
    counts = target.read_text().splitlines()[0].split()
    assert len(counts) == 3 and all(c.isdigit() for c in counts)


def test_validate_pass_and_fail(capsys, monkeypatch):
    good = [CheckResult("a", 0.0, 1.0, "<=", True)]
    monkeypatch.setattr(app_module, "run_validation_suite", lambda: good)
    assert main(["validate"]) == 0
    assert "1/1 checks passed" in capsys.readouterr().out

    bad = [CheckResult("a", 2.0, 1.0, "<=", False)]
    monkeypatch.setattr(app_module, "run_validation_suite", lambda: bad)
    assert main(["validate"]) == 1
    assert "0/1 checks passed" in capsys.readouterr().out


def test_serve_delegates_to_uvicorn(monkeypatch):
    calls = {}

    def fake_run(target, host, port):
        calls.update(target=target, host=host, port=port)

    monkeypatch.setattr("uvicorn.run", fake_run)
    rc = main(["serve", "--host", "0.0.0.0", "--port", "9001"])
    assert rc == 0
    assert calls == {"target": "ablasim.service.app:app",
                     "host": "0.0.0.0", "port": 9001}


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("ablasim ")


def test_subcommand_required(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
