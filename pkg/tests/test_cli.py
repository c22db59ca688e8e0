import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from evr_lab import __version__
from evr_lab.allocation import egalitarian_draw
from evr_lab.cli import run

GOLDEN = Path(__file__).parent / "golden"


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def rows(text):
    return list(csv.DictReader(data_lines(text)))


class TestGolden:
    def test_table1(self):
        code, out, _ = invoke("report", "table1")
        assert code == 0
        assert data_lines(out) == data_lines((GOLDEN / "table1.csv").read_text())

    def test_table2_small(self):
        code, out, _ = invoke("report", "table2", "--N", "1000", "--reps", "60", "--seed", "7")
        assert code == 0
        assert data_lines(out) == data_lines((GOLDEN / "table2_small.csv").read_text())

    def test_metadata_comments(self):
        _, out, _ = invoke("report", "table2", "--N", "1000", "--reps", "10", "--seed", "7",
                           "--b", "10")
        head = out.splitlines()[:3]
        assert head[0].startswith("# command: evr-lab report table2")
        assert head[1] == "# seed: 7"
        assert head[2] == f"# version: {__version__}"


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ("calc", "excess", "--rho", "1.5"),
        ("evr", "sample-size", "--d", "-0.2"),
        ("alloc", "draw", "--N", "10", "--n", "11", "--seed", "1", "--study-id", "0"),
        ("calc", "quantile", "--p", "1.0"),
        ("evr", "nonsense"),
    ])
    def test_invalid_invocations(self, argv, capsys):
        code, out, err = invoke(*argv)
        assert code == 2
        assert out == ""

    @pytest.mark.parametrize("argv", [
        ("sim", "control-group", "--N", "100", "--C", "2", "--reps", "10"),
        ("sim", "clt-check"),
        ("report", "table2"),
        ("alloc", "draw", "--N", "10", "--n", "3", "--study-id", "0"),
    ])
    def test_seed_required(self, argv, capsys):
        assert invoke(*argv)[0] == 2
        assert "--seed" in capsys.readouterr().err

    def test_domain_error_message(self):
        code, _, err = invoke("alloc", "split", "--N", "5", "--C", "6")
        assert code == 2 and err.startswith("evr-lab: error:")

    def test_help_is_success(self, capsys):
        assert invoke("--help")[0] == 0

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "evr_lab", "calc", "quantile", "--p", "0.975"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert float(rows(proc.stdout)[0]["z"]) == pytest.approx(1.95996, abs=1e-5)


class TestCommands:
    def test_json_output(self):
        code, out, _ = invoke("calc", "bvn", "--x", "1", "--y", "2", "--rho", "0.3", "--format", "json")
        rec = json.loads(out)
        assert code == 0
        assert rec["metadata"]["version"] == __version__
        assert rec["metadata"]["command"].startswith("evr-lab calc bvn")
        assert rec["rows"][0]["cdf"] == pytest.approx(0.827283, abs=1e-6)

    def test_precision_flag(self):
        _, out, _ = invoke("calc", "variance", "--C", "10", "--rho", "0.5", "--precision", "3")
        assert rows(out)[0]["variance"] == "1.08"

    def test_variance_from_matrix_file(self, tmp_path):
        p = tmp_path / "eye.csv"
        p.write_text("\n".join(",".join("1" if i == j else "0" for j in range(10)) for i in range(10)))
        _, out, _ = invoke("calc", "variance", "--matrix", str(p))
        assert float(rows(out)[0]["variance"]) == pytest.approx(0.475)

    def test_power_and_sample_size(self):
        _, out, _ = invoke("evr", "power", "--d", "0.2", "--n", "1000")
        assert float(rows(out)[0]["power"]) == pytest.approx(0.994, abs=1e-3)
        _, out, _ = invoke("evr", "sample-size", "--d", "0.2")
        assert rows(out)[0]["n_per_arm"] == "920"
        _, out, _ = invoke("evr", "sample-size", "--d", "0.2", "--model", "z")
        assert rows(out)[0]["n_per_arm"] == "919"

    def test_capacity(self):
        _, out, _ = invoke("evr", "capacity", "--N", "10000", "--b", "10", "--kappa", "0.5", "--delta", "0.1")
        assert rows(out)[0]["max_studies"] == "33"
        _, out, _ = invoke("evr", "capacity", "--N", "10000", "--rule", "splitting", "--delta", "0.1",
                           "--min-per-study", "1000")
        assert rows(out)[0]["max_studies"] == "10"

    def test_alloc_draw_formats(self):
        ref = egalitarian_draw(50, 7, 3, 2).indices.tolist()
        base = ("alloc", "draw", "--N", "50", "--n", "7", "--seed", "3", "--study-id", "2")
        _, text, _ = invoke(*base, "--format", "text")
        assert [int(v) for v in text.split()] == ref
        _, js, _ = invoke(*base, "--format", "json")
        assert json.loads(js)["indices"] == ref
        _, c, _ = invoke(*base)
        assert [int(r["index"]) for r in rows(c)] == ref

    def test_alloc_split(self):
        _, out, _ = invoke("alloc", "split", "--N", "10", "--C", "3")
        got = rows(out)
        assert len(got) == 10
        assert {r["study"] for r in got} == {"0", "1", "2"}

    def test_alloc_overlap(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.json"
        _, text, _ = invoke("alloc", "draw", "--N", "100", "--n", "20", "--seed", "1", "--study-id", "0",
                            "--format", "text")
        a.write_text(text)
        _, js, _ = invoke("alloc", "draw", "--N", "100", "--n", "20", "--seed", "1", "--study-id", "1",
                          "--format", "json")
        b.write_text(js)
        _, out, _ = invoke("alloc", "overlap", "--N", "100", str(a), str(b))
        got = rows(out)
        assert [(r["i"], r["j"]) for r in got] == [("0", "0"), ("0", "1"), ("1", "1")]
        shared = np.intersect1d(egalitarian_draw(100, 20, 1, 0).indices,
                                egalitarian_draw(100, 20, 1, 1).indices).size
        assert int(got[1]["overlap_count"]) == shared

    def test_sim_control_group_deterministic(self):
        argv = ("sim", "control-group", "--N", "200", "--C", "4", "--reps", "120", "--seed", "5",
                "--rule", "all", "--b", "5")
        first, second = invoke(*argv)[1], invoke(*argv)[1]
        assert first == second
        assert [r["rule"] for r in rows(first)] == ["gluttony", "splitting", "egalitarian(b=5)"]

    def test_sim_sur_regime(self):
        code, out, _ = invoke("sim", "sur", "--regime", "full", "--N", "500", "--reps", "20", "--seed", "1",
                              "--rule", "splitting")
        assert code == 0 and rows(out)[0]["num_studies"] == "10"
        assert invoke("sim", "sur", "--N", "500", "--reps", "20", "--seed", "1")[0] == 2

    def test_clt_check_small(self):
        code, out, _ = invoke("sim", "clt-check", "--N", "1000", "--n", "200", "--overlap", "100",
                              "--reps", "2000", "--seed", "3")
        r = rows(out)[0]
        assert code == 0
        assert float(r["target_corr"]) == pytest.approx(0.5)
        assert abs(float(r["deviation_se"])) < 4

    def test_figures(self):
        _, out, _ = invoke("report", "fig-fwer-sd", "--step", "0.5")
        got = rows(out)
        assert [float(r["rho"]) for r in got] == [0.0, 0.5, 1.0]
        assert float(got[-1]["fwer"]) == pytest.approx(0.05)
        _, out, _ = invoke("report", "fig-subquadratic", "--step", "0.25")
        assert all(float(r["gap"]) >= 0 for r in rows(out))

    def test_output_file(self, tmp_path):
        p = tmp_path / "t1.csv"
        code, out, _ = invoke("report", "table1", "-o", str(p))
        assert code == 0 and out == ""
        assert data_lines(p.read_text()) == data_lines((GOLDEN / "table1.csv").read_text())

    def test_table2_matrix_dir(self, tmp_path):
        d = tmp_path / "eye"
        d.mkdir()
        eye = "\n".join(",".join("1" if i == j else "0" for j in range(3)) for i in range(3))
        (d / "sigma_x.csv").write_text(eye)
        (d / "sigma_y.csv").write_text(eye)
        code, out, _ = invoke("report", "table2", "--matrices", str(tmp_path), "--N", "300", "--C", "3",
                              "--reps", "10", "--seed", "2", "--b", "5")
        assert code == 0
        assert {r["regime"] for r in rows(out)} == {"eye"}
