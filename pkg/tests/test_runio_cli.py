"""Artifacts, archives, replay, and the command-line interface."""

import csv
import io
import json
import math

import pytest

from pronksim.cli import main
from pronksim.config import default_config, parse_config
from pronksim.runio import (
    STABILITY_HEADER,
    STRIDES_HEADER,
    SWEEP_HEADER,
    TRAJECTORY_HEADER,
    execute,
    fmt,
    run_single,
    run_sweep,
    strides_csv,
    trajectory_csv,
)

SHORT_RUN = "[experiment]\nstrides = 4\n"
SHORT_SWEEP = ("[experiment]\nkind = sweep\n"
               "[sweep]\ndeviation_min = -0.05\ndeviation_max = 0.05\n"
               "deviation_step = 0.05\nadaptation = off\n")


def rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestFormatting:
    def test_fmt_round_trips(self):
        for x in (0.1, 1.0 / 3.0, -2.5e-7, 1234.5):
            assert float(fmt(x)) == x

    def test_fmt_nan_is_empty(self):
        assert fmt(math.nan) == ""


class TestCsvContracts:
    def test_strides_header_exact(self):
        cfg = parse_config(SHORT_RUN)
        text = strides_csv(run_single(cfg), cfg)
        assert text.splitlines()[0] == STRIDES_HEADER
        assert STRIDES_HEADER == ("n,z,ydot,alpha,alphadot,theta_td,r_td,r_lo,"
                                  "z_pred,ydot_pred,e_z,e_ydot,k_hat,fault")

    def test_trajectory_header_exact(self):
        assert TRAJECTORY_HEADER == "t,phase,y,z,alpha,ydot,zdot,alphadot,event"

    def test_strides_row_count_and_fields(self):
        cfg = parse_config(SHORT_RUN)
        data = rows(strides_csv(run_single(cfg), cfg))
        assert len(data) == 1 + 4
        assert all(len(r) == 14 for r in data)
        assert [r[0] for r in data[1:]] == ["0", "1", "2", "3"]

    def test_trajectory_time_and_y_monotone(self):
        cfg = parse_config(SHORT_RUN)
        recs = run_single(cfg, collect=True)
        data = rows(trajectory_csv(recs, cfg))[1:]
        ts = [float(r[0]) for r in data]
        assert all(b >= a for a, b in zip(ts, ts[1:]))
        assert {r[1] for r in data} == {"flight", "stance"}
        marked = [r[8] for r in data if r[8]]
        assert any("touchdown" in m for m in marked)
        assert any("liftoff" in m for m in marked)

    def test_si_conversion(self):
        cfg = parse_config(SHORT_RUN)
        recs = run_single(cfg)
        nd = rows(strides_csv(recs, cfg, si=False))[1]
        si = rows(strides_csv(recs, cfg, si=True))[1]
        sc = cfg.plant_params().scale
        assert float(si[1]) == pytest.approx(float(nd[1]) * 0.175)
        assert float(si[2]) == pytest.approx(
            float(nd[2]) * math.sqrt(9.81 * 0.175))
        # angle column is unit-free in both
        assert si[5] == nd[5]

    def test_bitwise_determinism(self):
        cfg = parse_config(SHORT_RUN)
        a = strides_csv(run_single(cfg), cfg)
        b = strides_csv(run_single(cfg), cfg)
        assert a == b


class TestSweepWorkers:
    def test_workers_match_serial(self):
        cfg = parse_config(SHORT_SWEEP)
        serial = run_sweep(cfg, workers=1)
        par = run_sweep(cfg, workers=2)
        assert [(a, p.parameter, p.deviation, p.e_z, p.e_ydot)
                for a, p in serial] == \
               [(a, p.parameter, p.deviation, p.e_z, p.e_ydot)
                for a, p in par]


class TestArchive:
    def test_archive_contents(self, tmp_path):
        cfg = parse_config(SHORT_RUN)
        arch = execute(cfg, tmp_path / "run", trajectory=True)
        names = {p.name for p in arch.root.iterdir()}
        assert {"strides.csv", "trajectory.csv", "response.svg",
                "config.ini", "meta.json"} <= names
        meta = json.loads((arch.root / "meta.json").read_text())
        assert meta["kind"] == "single-run"
        assert meta["flags"] == {"si": False, "trajectory": True}
        assert "experiment.seed" in meta["defaulted_keys"]
        assert "experiment.strides" not in meta["defaulted_keys"]
        # embedded config re-parses to the same effective values
        assert parse_config((arch.root / "config.ini").read_text()).values \
            == cfg.values


class TestCli:
    def _write(self, tmp_path, text, name="cfg.ini"):
        p = tmp_path / name
        p.write_text(text)
        return p

    def test_simulate_exit_zero(self, tmp_path, capsys):
        cfg = self._write(tmp_path, SHORT_RUN)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out),
                     "--trajectory"]) == 0
        assert (out / "strides.csv").is_file()
        assert (out / "trajectory.csv").is_file()

    def test_recorded_fault_still_exit_zero(self, tmp_path):
        # A grossly infeasible target makes the stride fault; the run is
        # still a successful experiment with the fault recorded in-band.
        cfg = self._write(tmp_path, "[experiment]\nstrides = 3\n"
                          "[target]\napex_height = 0.9\nforward_speed = 4.0\n")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(out)]) == 0
        data = rows((out / "strides.csv").read_text())
        assert any(r[13] for r in data[1:])

    def test_missing_config_exit_two_no_partial_output(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(tmp_path / "absent.ini"),
                     "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 2
        assert "config error" in captured.err
        assert not out.exists()

    def test_invalid_value_exit_two(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[experiment]\nstrides = 0\n")
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == 2
        assert "strides: must be >= 1" in capsys.readouterr().err

    def test_unknown_section_exit_two(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[gait]\nmode = pronk\n")
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == 2

    def test_sweep_and_headers(self, tmp_path):
        cfg = self._write(tmp_path, SHORT_SWEEP)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--out", str(out),
                     "--workers", "2"]) == 0
        text = (out / "sweep.csv").read_text()
        assert text.splitlines()[0] == SWEEP_HEADER
        assert (out / "sweep.svg").is_file()

    def test_stability_small_grid(self, tmp_path):
        cfg = self._write(
            tmp_path,
            "[experiment]\nkind = stability\n"
            "[stability]\napex_height_count = 1\nforward_speed_count = 1\n"
            "apex_height_min = 0.195\nforward_speed_min = 1.6\n")
        out = tmp_path / "out"
        assert main(["stability", "--config", str(cfg),
                     "--out", str(out)]) == 0
        data = rows((out / "stability.csv").read_text())
        assert data[0] == STABILITY_HEADER.split(",")
        assert len(data) == 2
        assert data[1][5] == "true"    # converged
        assert data[1][7] == "true"    # stable

    def test_replay_bitwise(self, tmp_path, capsys):
        cfg = self._write(tmp_path, SHORT_RUN)
        out = tmp_path / "orig"
        assert main(["simulate", "--config", str(cfg), "--out", str(out),
                     "--trajectory"]) == 0
        assert main(["replay", str(out),
                     "--out", str(tmp_path / "again")]) == 0
        assert "reproduced bitwise" in capsys.readouterr().out

    def test_replay_detects_tampering(self, tmp_path, capsys):
        cfg = self._write(tmp_path, SHORT_RUN)
        out = tmp_path / "orig"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        path = out / "strides.csv"
        path.write_text(path.read_text().replace("0", "1", 1))
        assert main(["replay", str(out),
                     "--out", str(tmp_path / "again")]) == 3

    def test_replay_missing_archive_exit_two(self, tmp_path, capsys):
        assert main(["replay", str(tmp_path / "nowhere")]) == 2

    def test_command_overrides_config_kind(self, tmp_path):
        # A sweep-kind config run through `simulate` produces a single run.
        cfg = self._write(tmp_path, "[experiment]\nkind = sweep\nstrides = 3\n")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(out)]) == 0
        assert (out / "strides.csv").is_file()
        assert not (out / "sweep.csv").exists()
