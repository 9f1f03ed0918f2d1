import pathlib
import subprocess
import sys

import numpy as np
import pytest

from calibdis import ACTIVE_BACKEND, core, formats, worlds
from calibdis.cli import cli

FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"


def write_world_file(tmp_path, world, name="w.txt"):
    p = tmp_path / name
    formats.write_world(world, str(p))
    return str(p)


def worked_example_world_file(tmp_path):
    w = worlds.FiniteWorld(
        x_masses=np.array([1.0]),
        label_table=np.array([[0.7, 0.3]]),
        member_tables=np.array([[[0.2, 0.8]], [[0.2, 0.8]]]),
        name="worked-example",
    )
    return write_world_file(tmp_path, w)


class TestMetricsCommand:
    def test_report_values(self, tmp_path):
        out = tmp_path / "report.txt"
        rc = cli(["metrics", "--predictions",
                  str(FIXTURES / "worked_example.bin"), "--out", str(out)])
        assert rc == 0
        rep = formats.parse_report(out.read_text())
        assert rep["kind"] == "metrics"
        assert rep["samples"] == "10"
        assert abs(float(rep["acc"]) - 0.38) < 1e-6
        assert abs(float(rep["pred_acc"]) - 0.68) < 1e-6
        assert abs(float(rep["gde_gap"]) - 0.30) < 1e-6
        assert abs(float(rep["top1_conf"]) - 0.80) < 1e-6
        assert abs(float(rep["dis"]) - 0.32) < 1e-6
        assert rep["input"].startswith("sha256:")

    def test_deterministic_bytes(self, tmp_path):
        args = ["metrics", "--predictions", str(FIXTURES / "random_dump.bin")]
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert cli(args + ["--out", str(a)]) == 0
        assert cli(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_diagram_output(self, tmp_path):
        out = tmp_path / "r.txt"
        dia = tmp_path / "d.csv"
        rc = cli(["metrics", "--predictions", str(FIXTURES / "random_dump.bin"),
                  "--out", str(out), "--diagram", str(dia)])
        assert rc == 0
        lines = dia.read_text().strip().split("\n")
        assert lines[0].startswith("bin_index,")
        assert len(lines) == 16

    def test_csv_input_with_labels(self, tmp_path):
        out = tmp_path / "r.txt"
        rc = cli(["metrics",
                  "--predictions", str(FIXTURES / "random_dump.csv"),
                  "--labels", str(FIXTURES / "random_dump.labels.csv"),
                  "--out", str(out)])
        assert rc == 0

    def test_csv_without_labels_is_usage_error(self, tmp_path):
        rc = cli(["metrics", "--predictions",
                  str(FIXTURES / "random_dump.csv"),
                  "--out", str(tmp_path / "r.txt")])
        assert rc == 2

    def test_missing_file_is_input_error(self, tmp_path):
        rc = cli(["metrics", "--predictions", str(tmp_path / "nope.bin"),
                  "--out", str(tmp_path / "r.txt")])
        assert rc == 3

    def test_corrupt_dump_is_input_error(self, tmp_path):
        data = bytearray((FIXTURES / "random_dump.bin").read_bytes())
        data[40] ^= 0x55
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(data))
        rc = cli(["metrics", "--predictions", str(bad),
                  "--out", str(tmp_path / "r.txt")])
        assert rc == 3

    def test_alternate_binning_and_base(self, tmp_path):
        out = tmp_path / "r.txt"
        rc = cli(["metrics", "--predictions", str(FIXTURES / "random_dump.bin"),
                  "--binning", "equal-count", "--bins", "8",
                  "--log-base", "2", "--out", str(out)])
        assert rc == 0
        rep = formats.parse_report(out.read_text())
        assert rep["log_base"] == "2"
        assert rep["bins"] == "8"

    def test_top_flag(self, tmp_path):
        out = tmp_path / "r.txt"
        rc = cli(["metrics", "--predictions", str(FIXTURES / "random_dump.bin"),
                  "--top", "--out", str(out)])
        assert rc == 0
        rep = formats.parse_report(out.read_text())
        assert rep["top"] == "true"
        # one-hot members make the two disagreement quantities coincide
        assert abs(float(rep["dis"]) - float(rep["approx_bald_mean"])) < 1e-12


class TestRejectionCommand:
    def test_csv_output_with_meta_sidecar(self, tmp_path):
        out = tmp_path / "curve.csv"
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--score", "pred-error", "--grid", "10", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("threshold,retained_count,")
        assert len(lines) == 11
        meta = formats.parse_report((tmp_path / "curve.csv.meta.txt").read_text())
        assert meta["kind"] == "rejection-meta"
        assert meta["score_kind"] == "pred-error"
        assert meta["curve"] == formats.file_digest(str(out))

    def test_structured_output(self, tmp_path):
        out = tmp_path / "curve.txt"
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--score", "bald", "--grid", "5", "--out", str(out)])
        assert rc == 0
        text = out.read_text()
        assert text.startswith("calibdis-curve v1\n")
        assert "score_kind bald" in text
        assert not (tmp_path / "curve.txt.meta.txt").exists()

    def test_absolute_thresholds(self, tmp_path):
        out = tmp_path / "curve.csv"
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--absolute", "0.2,0.5,0.9", "--out", str(out)])
        assert rc == 0
        assert len(out.read_text().strip().split("\n")) == 4

    def test_bad_absolute_list(self, tmp_path):
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--absolute", "0.2,huge", "--out", str(tmp_path / "c.csv")])
        assert rc == 2

    def test_threads_do_not_change_bytes(self, tmp_path):
        common = ["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"), "--grid", "8"]
        one, four = tmp_path / "one.csv", tmp_path / "four.csv"
        assert cli(common + ["--threads", "1", "--out", str(one)]) == 0
        assert cli(common + ["--threads", "4", "--out", str(four)]) == 0
        assert one.read_bytes() == four.read_bytes()

    def test_reverse_and_fixed_bins(self, tmp_path):
        out = tmp_path / "curve.csv"
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--reverse", "--fixed-bins", "--out", str(out)])
        assert rc == 0
        meta = formats.parse_report((tmp_path / "curve.csv.meta.txt").read_text())
        assert meta["reverse"] == "true"
        assert meta["fixed_bins"] == "true"


class TestVerifyCommand:
    def test_world_passes(self, tmp_path, capsys):
        path = worked_example_world_file(tmp_path)
        rc = cli(["verify", "--world", path])
        out = capsys.readouterr().out
        assert rc == 0
        assert "verdict pass" in out
        assert "FAIL" not in out

    def test_dataset_passes(self, tmp_path, capsys):
        rc = cli(["verify", "--predictions",
                  str(FIXTURES / "random_dump.bin")])
        assert rc == 0
        assert "verdict pass" in capsys.readouterr().out

    def test_report_written(self, tmp_path, capsys):
        out = tmp_path / "verify.txt"
        rc = cli(["verify", "--predictions", str(FIXTURES / "random_dump.bin"),
                  "--out", str(out)])
        assert rc == 0
        assert formats.parse_report(out.read_text())["verdict"] == "pass"
        capsys.readouterr()

    def test_wants_exactly_one_subject(self, tmp_path):
        path = worked_example_world_file(tmp_path)
        assert cli(["verify"]) == 2
        assert cli(["verify", "--world", path, "--predictions",
                    str(FIXTURES / "random_dump.bin")]) == 2

    def test_violation_exits_4(self, tmp_path, capsys, monkeypatch):
        broken = worlds.TheoremReport(checks=(
            worlds.TheoremCheck(name="invented-identity", passed=False,
                                slack=-0.5, tolerance=1e-12),))
        monkeypatch.setattr("calibdis.cli.worlds.verify_dataset",
                            lambda ds, cfg: broken)
        rc = cli(["verify", "--predictions",
                  str(FIXTURES / "random_dump.bin")])
        out = capsys.readouterr().out
        assert rc == 4
        assert "verdict FAIL" in out
        assert "invented-identity FAIL" in out


class TestSynthAndOracle:
    def test_synth_matched_world_verifies(self, tmp_path, capsys):
        out = tmp_path / "world.txt"
        rc = cli(["synth", "--seed", "7", "--classes", "3", "--xcount", "6",
                  "--members", "2", "--out", str(out)])
        assert rc == 0
        text = out.read_text()
        assert text.startswith("# tool_version")
        assert "mode matched" in text.split("\n")[1]
        world = formats.read_world(str(out))
        assert worlds.check_classwise_calibration(world).passed
        assert cli(["verify", "--world", str(out)]) == 0
        capsys.readouterr()

    def test_synth_levelset_mixed_odd_x_fails(self, tmp_path):
        rc = cli(["synth", "--seed", "1", "--classes", "3", "--xcount", "7",
                  "--members", "2", "--mode", "levelset-mixed",
                  "--out", str(tmp_path / "w.txt")])
        assert rc == 3

    def test_synth_random_mode(self, tmp_path):
        out = tmp_path / "w.txt"
        rc = cli(["synth", "--seed", "2", "--classes", "4", "--xcount", "5",
                  "--members", "3", "--mode", "random", "--out", str(out)])
        assert rc == 0
        w = formats.read_world(str(out))
        assert (w.x_count, w.class_count, w.member_count) == (5, 4, 3)

    def test_oracle_worked_example(self, tmp_path):
        path = worked_example_world_file(tmp_path)
        out = tmp_path / "oracle.txt"
        rc = cli(["oracle", "--world", path, "--out", str(out)])
        assert rc == 0
        rep = formats.parse_report(out.read_text())
        assert abs(float(rep["acc"]) - 0.38) < 1e-12
        assert abs(float(rep["pred_acc"]) - 0.68) < 1e-12
        assert abs(float(rep["top1_acc"]) - 0.3) < 1e-12
        assert abs(float(rep["top1_conf"]) - 0.8) < 1e-12
        assert abs(float(rep["gde_gap"]) - 0.3) < 1e-12
        # two levels: 0.2 and 0.8
        assert rep.get("level") is not None

    def test_oracle_top_transform(self, tmp_path):
        path = worked_example_world_file(tmp_path)
        out = tmp_path / "oracle.txt"
        rc = cli(["oracle", "--world", path, "--top", "--out", str(out)])
        assert rc == 0
        rep = formats.parse_report(out.read_text())
        assert float(rep["acc"]) == 0.3
        assert float(rep["pred_acc"]) == 1.0
        assert float(rep["dis"]) == 0.0


class TestConvertCommand:
    def test_binary_csv_binary_identity(self, tmp_path):
        src = FIXTURES / "random_dump.bin"
        mid = tmp_path / "mid.csv"
        back = tmp_path / "back.bin"
        assert cli(["convert", "--in", str(src), "--out", str(mid)]) == 0
        assert (tmp_path / "mid.csv.labels.csv").exists()
        assert cli(["convert", "--in", str(mid), "--labels",
                    str(tmp_path / "mid.csv.labels.csv"),
                    "--out", str(back)]) == 0
        assert back.read_bytes() == src.read_bytes()

    def test_csv_input_needs_labels(self, tmp_path):
        rc = cli(["convert", "--in", str(FIXTURES / "random_dump.csv"),
                  "--out", str(tmp_path / "o.bin")])
        assert rc == 2

    def test_explicit_labels_out(self, tmp_path):
        out = tmp_path / "o.csv"
        lab = tmp_path / "labels_here.csv"
        rc = cli(["convert", "--in", str(FIXTURES / "random_dump.bin"),
                  "--out", str(out), "--labels-out", str(lab)])
        assert rc == 0
        assert lab.exists()


@pytest.mark.skipif(ACTIVE_BACKEND != "numba",
                    reason="golden files were produced with the numba backend")
class TestGoldenOutputs:
    def test_metrics_report_matches_golden(self, tmp_path):
        out = tmp_path / "report.txt"
        rc = cli(["metrics", "--predictions",
                  str(FIXTURES / "random_dump.bin"), "--out", str(out)])
        assert rc == 0
        assert out.read_bytes() == (FIXTURES / "golden_metrics_report.txt").read_bytes()

    def test_curve_matches_golden(self, tmp_path):
        out = tmp_path / "curve.csv"
        rc = cli(["rejection", "--predictions",
                  str(FIXTURES / "random_dump.bin"),
                  "--score", "pred-error", "--grid", "20", "--out", str(out)])
        assert rc == 0
        assert out.read_bytes() == (FIXTURES / "golden_curve.csv").read_bytes()


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "calibdis.cli", "--version"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("calibdis ")

    def test_console_script_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "calibdis.cli", "metrics", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "--predictions" in proc.stdout
