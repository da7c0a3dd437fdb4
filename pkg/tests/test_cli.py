import json
from pathlib import Path

import numpy as np
import pytest

from specularvp.cli import (
    ParseError,
    ValidationError,
    bounce3d_config_text,
    main,
    parse_config,
    run,
)
from specularvp.flow import Backend
from specularvp.geometry import Ball, HalfSpace

MINIMAL = """
[domain]
kind = halfspace
dim = 3

[regularization]
eps_mollify = 0.05
r_sign = 0.05
zeta = 0.1
delta = 0.1

[initial]
type = uniform_box
n = 2
mass = 0.1
seed = 0
x_min = 1.0, -1.0, -1.0
x_max = 2.0, 1.0, 1.0
v_min = -0.5, -0.5, -0.5
v_max = 0.5, 0.5, 0.5

[stepper]
dt = 1e-3
t_end = 0.01
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_minimal_config(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        assert isinstance(cfg.domain, HalfSpace)
        assert cfg.dt == 1e-3
        assert cfg.t_end == 0.01
        assert cfg.backend is Backend.EVENT_DRIVEN
        assert cfg.params.zeta == 0.1

    def test_zeta_zero_is_a_validation_error(self, tmp_path):
        text = MINIMAL.replace("zeta = 0.1", "zeta = 0")
        with pytest.raises(ValidationError, match="zeta must be > 0"):
            parse_config(write(tmp_path, text))

    def test_unknown_key_is_a_parse_error(self, tmp_path):
        text = MINIMAL.replace("dt = 1e-3", "dt = 1e-3\nfoo = 1")
        with pytest.raises(ParseError, match="unknown key 'foo'"):
            parse_config(write(tmp_path, text))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ParseError, match=r"unknown section \[frobnicate\]"):
            parse_config(write(tmp_path, MINIMAL + "\n[frobnicate]\nx = 1\n"))

    def test_error_carries_line_and_column(self, tmp_path):
        text = MINIMAL.replace("dt = 1e-3", "dt = 1e-3\nfoo = 1")
        try:
            parse_config(write(tmp_path, text))
        except ParseError as exc:
            assert exc.line > 0 and exc.col > 0
            assert f"line {exc.line}" in str(exc)
        else:
            pytest.fail("expected ParseError")

    def test_malformed_line(self, tmp_path):
        with pytest.raises(ParseError, match="key = value"):
            parse_config(write(tmp_path, "[domain]\nkind halfspace\n"))

    def test_ball_domain(self, tmp_path):
        text = MINIMAL.replace("kind = halfspace", "kind = ball\nradius = 2.0")
        text = text.replace("x_min = 1.0, -1.0, -1.0", "x_min = -0.5, -0.5, -0.5")
        text = text.replace("x_max = 2.0, 1.0, 1.0", "x_max = 0.5, 0.5, 0.5")
        cfg = parse_config(write(tmp_path, text))
        assert isinstance(cfg.domain, Ball)
        assert cfg.domain.radius == 2.0

    def test_explicit_particles(self, tmp_path):
        cfg = parse_config(write(tmp_path, bounce3d_config_text(), "bounce3d.cfg"))
        ic, weights = cfg.initial
        assert ic.n == 64
        assert weights.shape == (64,)


class TestRun:
    def test_zero_t_end_single_snapshot(self, tmp_path):
        text = MINIMAL.replace("t_end = 0.01", "t_end = 0.0")
        cfg = parse_config(write(tmp_path, text))
        out = tmp_path / "out"
        assert run(cfg, out) == 0
        snap = (out / "snapshots.csv").read_text().splitlines()
        assert len(snap) == 1 + 2  # header + 2 particles at t=0
        events = (out / "events.csv").read_text().splitlines()
        assert len(events) == 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["complete"] is True
        assert set(manifest["files"]) == {
            "snapshots.csv", "events.csv", "ledger.csv", "diagnostics.json"}

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run(cfg, out1)
        run(cfg, out2)
        for name in ("snapshots.csv", "events.csv", "ledger.csv",
                     "diagnostics.json", "manifest.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_worker_count_changes_nothing(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        out1, out8 = tmp_path / "w1", tmp_path / "w8"
        run(cfg, out1, workers=1)
        run(cfg, out8, workers=8)
        for name in ("snapshots.csv", "ledger.csv", "manifest.json"):
            assert (out1 / name).read_bytes() == (out8 / name).read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cfg = parse_config(write(tmp_path, MINIMAL))
        out1, out2 = tmp_path / "s0", tmp_path / "s1"
        run(cfg, out1, seed=0)
        run(cfg, out2, seed=1)
        assert (out1 / "snapshots.csv").read_bytes() != (out2 / "snapshots.csv").read_bytes()


class TestCommands:
    def test_simulate_and_diagnose(self, tmp_path):
        cfg_path = write(tmp_path, MINIMAL)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert main(["diagnose", "--ledger", str(out / "ledger.csv")]) == 0

    def test_audit_green_passes(self, capsys):
        assert main(["audit-green", "--pairs", "2000", "--seed", "1"]) == 0
        assert "PASS" in capsys.readouterr().out
        assert main(["audit-green", "--pairs", "2000", "--seed", "1",
                     "--domain", "ball"]) == 0

    def test_compare_backends(self, tmp_path):
        text = MINIMAL.replace("t_end = 0.01", "t_end = 0.05")
        cfg_path = write(tmp_path, text)
        assert main(["compare-backends", "--config", str(cfg_path),
                     "--out", str(tmp_path / "cmp")]) == 0

    def test_picard_writes_contraction_csv(self, tmp_path):
        text = MINIMAL + "\n[picard]\nt0 = 0.01\nn_max = 3\n"
        cfg_path = write(tmp_path, text)
        out = tmp_path / "picard"
        assert main(["picard", "--config", str(cfg_path), "--out", str(out)]) == 0
        lines = (out / "contraction.csv").read_text().splitlines()
        assert lines[0] == "n,Z_n,ratio,w1_exact"
        assert len(lines) == 4

    def test_bad_config_exit_code(self, tmp_path):
        cfg_path = write(tmp_path, MINIMAL.replace("zeta = 0.1", "zeta = -1"))
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(tmp_path / "x")]) == 2


class TestBounceFixture:
    def test_config_text_is_stable(self):
        assert bounce3d_config_text() == bounce3d_config_text()

    def test_fixture_runs(self, tmp_path):
        cfg = parse_config(write(tmp_path, bounce3d_config_text(t_end=0.01)))
        out = tmp_path / "fx"
        assert run(cfg, out) == 0
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["particles"] == 64
