from __future__ import annotations

import pytest

from mixedlap.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_SOLVER, run
from mixedlap.config import load_config, parse_config, parse_entries
from mixedlap.dissipation import ScheduleMode
from mixedlap.errors import ConfigError, ConfigParseError, IoError, OverlapError
from mixedlap.io import RunManifest, read_csv, write_csv

BASE = "omega.a = 0\nomega.b = 1\n"


def test_parse_minimal_defaults():
    cfg = parse_config(BASE)
    assert cfg.domain.omega == (0.0, 1.0)
    assert cfg.domain.neumann_set == ()
    assert cfg.h == 1 / 64 and cfg.seed == 0 and cfg.schedule is None


def test_comments_and_indexed_keys():
    text = BASE + "# note\nneumann[1].a = -2\nneumann[1].b = -1  # trailing\nneumann[0].a = 1\nneumann[0].b = 2\n"
    cfg = parse_config(text)
    assert cfg.domain.neumann_set == ((-2.0, -1.0), (1.0, 2.0))


@pytest.mark.parametrize(
    "text, fragment",
    [
        (BASE + "bogus = 1\n", "unknown key"),
        (BASE + "s = 0.5\ns = 0.4\n", "duplicate key"),
        (BASE + "s = half\n", "expects a number"),
        (BASE + "no equals sign\n", "expected 'key = value'"),
        (BASE + "neumann[0].a = 1\n", "missing key"),
        ("omega.a = 0\n", "missing required key"),
        (BASE + "nonlocal_weight = 0.5\n", "must be 0 or 1"),
        (BASE + "schedule.k_max = 3\n", "without schedule.mode"),
        (BASE + "schedule.mode = sideways\n", "unknown schedule mode"),
    ],
)
def test_parse_errors_name_line_and_key(text, fragment):
    with pytest.raises(ConfigParseError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_line_number_reported():
    with pytest.raises(ConfigParseError) as info:
        parse_entries("omega.a = 0\n\nbogus = 1\n")
    assert info.value.line == 3 and info.value.key == "bogus"


def test_geometry_error_propagates():
    with pytest.raises(OverlapError):
        parse_config(BASE + "neumann[0].a = 0.5\nneumann[0].b = 2\n")


def test_pure_neumann_autofill():
    cfg = parse_config(BASE + "pure_neumann = true\n")
    assert cfg.domain.neumann_set == ((-4.0, 0.0), (1.0, 4.0))


def test_schedule_and_nonlinearity_sections():
    text = BASE + "schedule.mode = dirichlet_separated\nschedule.k_max = 3\nnonlinearity.kind = logistic\nnonlinearity.p = 5\ncontinuation.max_steps = 7\n"
    cfg = parse_config(text)
    assert cfg.schedule.mode == ScheduleMode.DIRICHLET_SEPARATED and cfg.schedule.k_max == 3
    assert cfg.nonlinearity.p == 5
    assert cfg.continuation.max_steps == 7


def test_every_shipped_config_loads(config_dir):
    paths = sorted(config_dir.glob("*.cfg"))
    assert len(paths) == 8
    for p in paths:
        assert load_config(p).source == str(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_csv_writer(tmp_path):
    path = write_csv(("a", "b"), [(1, 0.1), (True, float("inf"))], tmp_path / "t.csv")
    assert path.read_bytes() == b"a,b\n1,0.10000000000000001\ntrue,inf\n"
    assert read_csv(path) == (["a", "b"], [["1", "0.10000000000000001"], ["true", "inf"]])
    with pytest.raises(IoError):
        write_csv(("a",), [], tmp_path / "empty.csv")
    with pytest.raises(IoError):
        write_csv(("a",), [(1, 2)], tmp_path / "wide.csv")


def test_manifest_roundtrip(tmp_path):
    m = RunManifest("eig", "c.cfg", [("omega.a", "0"), ("s", "0.3")], "out", 4, "9", {"total": 1.5}, {"x": 2.0})
    m.write(tmp_path / "manifest.txt")
    back = RunManifest.read(tmp_path / "manifest.txt")
    assert back.config_entries == m.config_entries
    assert back.subcommand == "eig" and back.seed == 4
    assert back.config_text() == "omega.a = 0\ns = 0.3\n"


def test_cli_constants(capsys):
    assert run(["constants", "--s", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "s,integral_form,gamma_form,rel_diff"
    assert out[1].startswith("0.5,0.318309886")


def test_cli_eig_and_rerun(tmp_path, config_dir):
    out = tmp_path / "eig"
    assert run(["eig", "--config", str(config_dir / "mixed_demo.cfg"), "--out", str(out), "--h", "0.0625"]) == EXIT_OK
    header, rows = read_csv(out / "eigenvectors.csv")
    assert header == ["node_x", "role", "value_1", "value_2", "value_3"]
    manifest = RunManifest.read(out / "manifest.txt")
    assert ("mesh.h", "0.0625") in manifest.config_entries
    first = (out / "eigenvectors.csv").read_bytes()
    again = tmp_path / "again"
    assert run(["rerun", "--manifest", str(out / "manifest.txt"), "--out", str(again)]) == EXIT_OK
    assert (again / "eigenvectors.csv").read_bytes() == first


def test_cli_verify_writes_report(tmp_path, config_dir):
    out = tmp_path / "v"
    code = run(["verify", "--config", str(config_dir / "mixed_demo.cfg"), "--out", str(out), "--h", "0.03125"])
    assert code == EXIT_OK
    header, rows = read_csv(out / "verify.csv")
    assert header == ["check", "passed", "margin", "witness"]
    assert {r[0] for r in rows} >= {"principal_positivity", "picone", "neumann_reconstruction"}
    assert all(r[1] == "true" for r in rows)


def test_cli_verify_reports_failure(tmp_path, config_dir, monkeypatch):
    import mixedlap.cli as cli
    from mixedlap.report import CheckReport

    monkeypatch.setattr(cli, "picone_check", lambda *a: CheckReport("picone", False, -1.0))
    out = tmp_path / "v"
    code = run(["verify", "--config", str(config_dir / "mixed_demo.cfg"), "--out", str(out), "--h", "0.0625"])
    assert code == EXIT_FAILED
    assert "extra.failed = picone" in (out / "manifest.txt").read_text()


def test_cli_sweep_mode_mismatch(tmp_path, config_dir, capsys):
    code = run(["sweep-neumann", "--config", str(config_dir / "separated_dissipation_s075.cfg"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "neumann_shrink" in capsys.readouterr().err


def test_cli_exit_codes(tmp_path, capsys):
    assert run(["eig", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text(BASE + "s = 2\n")
    assert run(["eig", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    singular = tmp_path / "singular.cfg"
    singular.write_text(BASE + "neumann[0].a = 1\nneumann[0].b = 1.5\nnonlocal_weight = 0\nmesh.h = 0.125\n")
    assert run(["eig", "--config", str(singular), "--out", str(tmp_path)]) == EXIT_SOLVER
    err = capsys.readouterr().err
    assert "configuration error" in err and "solver error" in err


def test_cli_bifurcate_inverted(tmp_path, config_dir):
    out = tmp_path / "b"
    args = ["bifurcate", "--config", str(config_dir / "bifurcation_logistic_p3.cfg"), "--out", str(out), "--h", "0.0625"]
    assert run(args + ["--inverted"]) == EXIT_OK
    header, rows = read_csv(out / "branch.csv")
    assert header == ["index", "lambda", "linf_norm", "l2_norm", "arclength", "newton_iters"]
    _, inv = read_csv(out / "branch_inverted.csv")
    assert len(inv) == len(rows)
    assert float(inv[-1][2]) == pytest.approx(1 / float(rows[-1][2]))
