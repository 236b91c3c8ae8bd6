import csv

import numpy as np
import pytest

from batchode.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestVdpBatching:
    def test_csv_schema_and_success(self, tmp_path):
        out = tmp_path / "runs.csv"
        trace = tmp_path / "trace.csv"
        code = main(
            [
                "vdp-batching",
                "--n", "2",
                "--mu", "2",
                "--mode", "independent",
                "--out", str(out),
                "--trace-out", str(trace),
            ]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["instance", "mode", "mu", "n_steps", "n_accepted", "n_f_evals", "status"]
        assert len(rows) == 3
        assert rows[1][1] == "independent"
        assert rows[1][6] == "success"
        trows = read_csv(trace)
        assert trows[0] == ["instance", "step", "t", "dt"]
        assert len(trows) > 10

    def test_joint_mode_replicates_counts(self, tmp_path):
        out = tmp_path / "joint.csv"
        code = main(
            ["vdp-batching", "--n", "2", "--mu", "2", "--mode", "joint", "--out", str(out)]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[1][3] == rows[2][3]

    def test_n1_joint_equals_independent(self, tmp_path):
        outs = {}
        for mode in ("independent", "joint"):
            out = tmp_path / f"{mode}.csv"
            assert main(
                ["vdp-batching", "--n", "1", "--mu", "2", "--mode", mode, "--out", str(out)]
            ) == 0
            outs[mode] = read_csv(out)[1]
        assert outs["independent"][3:6] == outs["joint"][3:6]

    def test_figure_rendered(self, tmp_path):
        out = tmp_path / "runs.csv"
        fig = tmp_path / "trace.png"
        code = main(
            ["vdp-batching", "--n", "2", "--mu", "2", "--out", str(out), "--figure", str(fig)]
        )
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            main(["vdp-batching", "--n", "2", "--mu", "2", "--out", str(path)])
        assert a.read_text() == b.read_text()

    def test_random_phases_seeded(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            main(
                [
                    "vdp-batching", "--n", "2", "--mu", "2", "--random-phases",
                    "--seed", "7", "--out", str(path),
                ]
            )
        assert a.read_text() == b.read_text()


class TestPidSweep:
    def test_csv_schema_and_baseline_ratio(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(
            ["pid-sweep", "--mu", "2", "--presets", "PI42,H211", "--out", str(out)]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["mu", "preset", "n_steps", "n_accepted", "ratio_vs_integral"]
        assert rows[1][1] == "integral"
        assert float(rows[1][4]) == 1.0
        assert {r[1] for r in rows[1:]} == {"integral", "PI42", "H211"}

    def test_unknown_preset_is_usage_error(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["pid-sweep", "--mu", "2", "--presets", "NOPE", "--out", str(out)]) == 2

    def test_figure_rendered(self, tmp_path):
        out = tmp_path / "sweep.csv"
        fig = tmp_path / "sweep.png"
        code = main(
            [
                "pid-sweep", "--mu", "2", "--presets", "PI42",
                "--out", str(out), "--figure", str(fig),
            ]
        )
        assert code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestLooptime:
    def test_rows_and_aggregate(self, tmp_path):
        out = tmp_path / "loop.csv"
        code = main(
            [
                "looptime", "--n", "8", "--d", "2", "--steps", "50",
                "--repeats", "3", "--out", str(out),
            ]
        )
        assert code == 0
        rows = read_csv(out)
        assert rows[0] == ["run", "n", "d", "steps", "loop_time_us"]
        assert len(rows) == 5  # three runs plus one aggregate row
        assert rows[4][0] == "mean+-sd"
        steps = int(rows[1][3])
        assert 45 <= steps <= 60

    def test_zero_steps_is_usage_error(self, tmp_path):
        out = tmp_path / "loop.csv"
        with pytest.raises(SystemExit) as exc:
            main(["looptime", "--steps", "0", "--out", str(out)])
        assert exc.value.code == 2

    def test_loop_time_reported_not_asserted(self, tmp_path):
        out = tmp_path / "loop.csv"
        main(["looptime", "--n", "4", "--d", "1", "--steps", "20", "--repeats", "2", "--out", str(out)])
        rows = read_csv(out)
        for row in rows[1:3]:
            assert np.isfinite(float(row[4]))
