import json

import numpy as np
import pytest

from gofmult.distributions import MultivariateT
from gofmult.harness import (
    CsvParseError,
    ExperimentConfig,
    read_csv,
    run_experiment,
    run_gradient_check,
    run_single,
    run_timing,
)
from gofmult.harness.cli import main
from gofmult.registry import get_family
from gofmult.rng import stream


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_csv_with_and_without_header(tmp_path):
    a = read_csv(write(tmp_path, "a.csv", "x,y\n1,2\n3.5,-4e-1\n"))
    b = read_csv(write(tmp_path, "b.csv", "1,2\n\n3.5,-4e-1\n"))
    assert np.array_equal(a, b)
    assert a.shape == (2, 2)


@pytest.mark.parametrize("text,row,col", [
    ("1,2\n3,abc\n", 2, 2),
    ("a,b\n1,2\n3\n", 3, 2),
    ("1,2\n3,nan\n", 2, 2),
])
def test_read_csv_reports_location(tmp_path, text, row, col):
    with pytest.raises(CsvParseError) as err:
        read_csv(write(tmp_path, "bad.csv", text))
    assert (err.value.row, err.value.column) == (row, col)
    assert f"row {row}, column {col}" in str(err.value)


def small_config(**kw):
    base = dict(true_family="norm", true_params=[10.0, 1.0], hypothesized=["norm", "logis"], n_grid=[40, 60],
                reps=6, N=100, statistics=["Sn*", "Tn"], methods=["MP"], seed=99)
    base.update(kw)
    return ExperimentConfig(**base)


def test_experiment_thread_count_does_not_change_results():
    a = run_experiment(small_config(threads=1))
    b = run_experiment(small_config(threads=3))
    assert [c.pvalues for c in a.cells] == [c.pvalues for c in b.cells]


def test_cells_are_independently_seeded():
    full = run_experiment(small_config())
    part = run_experiment(small_config(n_grid=[60]))
    # the n = 60 row uses a different index in the two designs, so compare on the same design with fewer families
    again = run_experiment(small_config(hypothesized=["norm"]))
    for c in again.cells:
        assert c.pvalues == full.cell(c.family, c.n, c.statistic, c.method).pvalues
    assert len(part.cells) == 4


def test_report_arithmetic_and_files(tmp_path):
    report = run_experiment(small_config(methods=["MP", "PB"], hypothesized=["norm"]), out_dir=tmp_path)
    assert len(report.cells) == 2 * 1 * 2 * 2
    for c in report.cells:
        assert 0.0 <= c.rate <= 1.0
        assert abs(c.rate * c.reps - round(c.rate * c.reps)) < 1e-9
    manifest = json.loads((tmp_path / "experiment.json").read_text())
    assert manifest["config"]["seed"] == 99
    assert "std_error" in manifest["cells"][0]
    header = (tmp_path / "experiment.csv").read_text().splitlines()[0]
    assert header.startswith("true,n,norm:Sn*:MP")


def test_config_validation_and_loading(tmp_path):
    with pytest.raises(ValueError):
        small_config(level=1.5)
    with pytest.raises(ValueError):
        small_config(reps=0)
    with pytest.raises(ValueError):
        small_config(hypothesized=["mvnorm"])
    cfg = {"true_family": "norm", "true_params": [0, 1], "hypothesized": ["norm"], "n_grid": [30], "reps": 2}
    p = write(tmp_path, "c.json", json.dumps(cfg))
    assert ExperimentConfig.load(p).n_grid == [30]
    t = write(tmp_path, "c.toml", 'true_family = "norm"\ntrue_params = [0, 1]\nhypothesized = ["norm"]\nn_grid = [30]\n')
    assert ExperimentConfig.load(t).true_family == "norm"
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**cfg, "colour": "red"})


@pytest.mark.parametrize("ident,dim", [("mvt5", 2), ("mvt10", 3)])
def test_gradient_check_passes(ident, dim):
    report = run_gradient_check(get_family(ident, dim), trials=100, seed=1)
    assert report.passed, report.as_dict()


def test_gradient_check_detects_sign_error():
    def flip(g):
        g = g.copy()
        g[:, -1] *= -1
        return g

    report = run_gradient_check(MultivariateT(2, 5), trials=5, seed=1, corrupt=flip)
    assert not report.passed


def test_gradient_check_needs_t_family():
    with pytest.raises(ValueError):
        run_gradient_check(get_family("mvnorm", 2))


def test_timing_report_univariate():
    x = get_family("norm").sample(np.array([0.0, 1.0]), 200, stream(1))
    r = run_timing(get_family("norm"), x, N=200)
    assert r.mp_analytic is None and r.pb_replicates_run == 200
    # same order of magnitude in d = 1
    assert 0.1 <= r.pb / r.mp_numeric <= 100


def heavy_tailed(tmp_path):
    # daily-return-like tails; t10 itself is too close to normal to be rejected at n = 1262
    x = get_family("t4").sample(np.array([0.0, 4e-4]), 1262, stream(2))
    path = tmp_path / "returns.csv"
    np.savetxt(path, x, delimiter=",")
    return path


def test_run_single_rejects_normal_for_heavy_tails(tmp_path):
    result, report = run_single(heavy_tailed(tmp_path), "norm", "Sn*", "MP", 1000, seed=3)
    assert result.pvalue < 0.01
    assert json.loads(report.read_text())["n"] == 1262


def test_cli_test_command(tmp_path, capsys):
    path = heavy_tailed(tmp_path)
    code = main(["test", str(path), "--family", "t10", "--stat", "snstar", "--nrep", "200", "--seed", "1",
                 "--report", str(tmp_path / "r.json")])
    assert code == 0
    assert "p-value" in capsys.readouterr().out
    assert json.loads((tmp_path / "r.json").read_text())["statistic"] == "Sn*"


def test_cli_exit_codes(tmp_path):
    assert main(["test", str(tmp_path / "missing.csv"), "--family", "norm"]) == 3
    bad = write(tmp_path, "bad.csv", "1\nx\n")
    assert main(["test", str(bad), "--family", "norm"]) == 3
    const = write(tmp_path, "const.csv", "1\n" * 30)
    assert main(["test", str(const), "--family", "norm", "--nrep", "100"]) == 2
    ok = write(tmp_path, "ok.csv", "\n".join(str(v) for v in np.linspace(1, 2, 30)))
    assert main(["test", str(ok), "--family", "nosuch"]) == 1
    with pytest.raises(SystemExit) as err:
        main(["test", str(ok)])
    assert err.value.code == 1


def test_cli_study_and_gradcheck(tmp_path, capsys):
    cfg = write(tmp_path, "s.json", json.dumps({
        "true_family": "norm", "true_params": [0, 1], "hypothesized": ["norm"], "n_grid": [30], "reps": 3, "N": 100}))
    assert main(["study", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "experiment.csv").exists()
    assert main(["gradcheck", "--family", "mvt5", "--trials", "5"]) == 0
    assert '"passed": true' in capsys.readouterr().out
