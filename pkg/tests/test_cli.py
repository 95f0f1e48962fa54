import csv
import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest
from jsonschema import Draft202012Validator

from ggs.cli import main, parse_lambdas, UsageError
from ggs.data import Dataset, save_csv

from oracles import DenseObjective


def schema(name):
    text = resources.files("ggs").joinpath("schemas", f"{name}.schema.json").read_text()
    return Draft202012Validator(json.loads(text))


@pytest.fixture
def synth_file(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["synth", "--output", str(out), "--n", "4", "--segments", "3",
                 "--seg-len", "60", "--seed", "2"]) == 0
    return out


def run(argv, capsys):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestFit:
    def test_recovers_truth(self, tmp_path, capsys):
        data, out = tmp_path / "bench.csv", tmp_path / "fit.json"
        assert main(["synth", "--output", str(data)]) == 0
        code, _, _ = run(["fit", "--input", data, "--kmax", 9, "--lambda", 10,
                          "--output", out], capsys)
        assert code == 0
        rep = json.loads(out.read_text())
        schema("fit").validate(rep)
        meta = json.loads((tmp_path / "bench.csv.meta.json").read_text())
        assert rep["solutions"][9]["breakpoints"] == meta["true_breakpoints"]
        assert [s["K"] for s in rep["solutions"]] == list(range(10))
        assert rep["T"] == 1000 and rep["n"] == 25

    def test_kmax_zero_to_stdout(self, synth_file, capsys):
        code, out, _ = run(["fit", "--input", synth_file, "--kmax", 0], capsys)
        assert code == 0
        rep = json.loads(out)
        schema("fit").validate(rep)
        assert [s["breakpoints"] for s in rep["solutions"]] == [[]]

    def test_cyclic(self, synth_file, capsys):
        code, out, _ = run(["fit", "--input", synth_file, "--kmax", 2, "--lambda", 1.0,
                            "--cyclic"], capsys)
        assert code == 0
        rep = json.loads(out)
        schema("fit").validate(rep)
        assert rep["method"] == "ggs-cyclic"

    @pytest.mark.parametrize("cyclic", [False, True])
    def test_verify_roundtrip(self, synth_file, tmp_path, capsys, cyclic):
        out = tmp_path / "fit.json"
        argv = ["fit", "--input", synth_file, "--kmax", 3, "--lambda", 0.5, "--output", out]
        assert run(argv + (["--cyclic"] if cyclic else []), capsys)[0] == 0
        code, stdout, _ = run(["verify", "--input", synth_file, "--report", out], capsys)
        assert code == 0
        assert stdout.startswith("verify ok")

        rep = json.loads(out.read_text())
        rep["solutions"][-1]["objective"] += 1e-3
        out.write_text(json.dumps(rep))
        code, stdout, _ = run(["verify", "--input", synth_file, "--report", out], capsys)
        assert code == 1
        assert stdout.startswith("verify FAILED")


class TestExitCodes:
    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code, _, err = run(["fit", "--input", tmp_path / "nope.csv"], capsys)
        assert code == 1
        assert "data error" in err

    def test_parse_error_reports_location(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3,oops\n")
        code, _, err = run(["fit", "--input", p], capsys)
        assert code == 1
        assert "row 2, column 2" in err

    @pytest.mark.parametrize("argv", [
        ["fit", "--kmax", "-1"],
        ["fit", "--lambda", "0"],
        ["cv", "--lambdas", "a,b"],
        ["cv", "--folds", "1"],
        ["stream", "--window", "1"],
    ])
    def test_usage_errors(self, synth_file, capsys, argv):
        code, _, _ = run(argv + ["--input", synth_file], capsys)
        assert code == 2

    def test_missing_input(self, capsys):
        assert run(["fit"], capsys)[0] == 2

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as info:
            main(["fit", "--kmax", "many"])
        assert info.value.code == 2

    def test_dp_infeasible(self, tmp_path, capsys):
        p = tmp_path / "tiny.csv"
        p.write_text("1\n2\n3\n")
        assert run(["dp", "--input", p, "--kmax", 5], capsys)[0] in (1, 2)

    def test_module_entry_point(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x\n")
        res = subprocess.run([sys.executable, "-m", "ggs", "fit", "--input", str(p)],
                             capture_output=True, text=True)
        assert res.returncode == 1


class TestCv:
    def test_deterministic_outputs(self, synth_file, tmp_path, capsys):
        outs = []
        for i in range(2):
            out = tmp_path / f"cv{i}.json"
            code, stdout, _ = run(["cv", "--input", synth_file, "--kmax", 3,
                                   "--lambdas", "0.1,10", "--folds", 3, "--seed", 4,
                                   "--output", out], capsys)
            assert code == 0
            outs.append((out.read_bytes(), (tmp_path / f"cv{i}.curves.csv").read_bytes(), stdout))
        assert outs[0] == outs[1]
        rep = json.loads(outs[0][0])
        schema("cv").validate(rep)
        last = outs[0][2].strip().splitlines()[-1]
        assert last == f"chosen K={rep['chosen']['K']} lambda={rep['chosen']['lambda']:.17g}"

    def test_curves_layout(self, synth_file, tmp_path, capsys):
        curves = tmp_path / "c.csv"
        code, _, _ = run(["cv", "--input", synth_file, "--kmax", 2, "--lambdas", "1:100:3",
                          "--folds", 2, "--curves", curves, "--output", "-"], capsys)
        assert code == 0
        with curves.open() as fh:
            rows = list(csv.DictReader(fh))
        assert set(rows[0]) == {"lambda", "K", "fold", "train_ll", "test_ll", "train_std", "test_std"}
        means = [r for r in rows if r["fold"] == "mean"]
        per_fold = [r for r in rows if r["fold"] != "mean"]
        assert len({r["lambda"] for r in rows}) == 3
        for m in means:
            vals = [float(r["test_ll"]) for r in per_fold
                    if (r["lambda"], r["K"]) == (m["lambda"], m["K"])]
            assert float(m["test_ll"]) == pytest.approx(np.mean(vals), rel=1e-12)


def test_parse_lambdas():
    assert parse_lambdas("1e-3, 1 ,10") == [1e-3, 1.0, 10.0]
    np.testing.assert_allclose(parse_lambdas("1e-2:1e2:5"), [1e-2, 1e-1, 1, 10, 100])
    for bad in ("1:2", "1:2:0", "x"):
        with pytest.raises(UsageError):
            parse_lambdas(bad)


def test_dp_matches_exhaustive(tmp_path, capsys):
    rng = np.random.default_rng(7)
    x = np.vstack([rng.standard_normal((8, 2)), 3 * rng.standard_normal((8, 2))])
    p = tmp_path / "x.csv"
    save_csv(p, Dataset(x))
    code, out, _ = run(["dp", "--input", p, "--kmax", 2, "--lambda", 1.0], capsys)
    assert code == 0
    rep = json.loads(out)
    schema("fit").validate(rep)
    b_ref, phi_ref = max(DenseObjective(x, 1.0).enumerate(2), key=lambda item: item[1])
    (sol,) = rep["solutions"]
    assert tuple(sol["breakpoints"]) == b_ref
    assert sol["objective"] == pytest.approx(phi_ref, abs=1e-9)


def test_synth_is_reproducible(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["synth", "--output", str(tmp_path / name), "--n", "3",
                     "--segments", "2", "--seg-len", "10", "--seed", "5"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_stream_full_window(synth_file, capsys):
    code, out, _ = run(["stream", "--input", synth_file, "--kmax", 2, "--lambda", 1.0], capsys)
    assert code == 0
    rep = json.loads(out)
    schema("stream").validate(rep)
    assert rep["window"] == 180
    assert len(rep["steps"]) == 180
    assert rep["final"]["window_start"] == 1
    assert rep["final"]["breakpoints"] == rep["final"]["window_breakpoints"]
    x = np.loadtxt(synth_file, delimiter=",")
    b = rep["final"]["breakpoints"]
    assert DenseObjective(x, 1.0).one_opt_violation(b) <= 1e-9
