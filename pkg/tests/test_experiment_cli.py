import json

import numpy as np
import pytest

from odcreg.cli import main
from odcreg.exceptions import InvalidConfigError
from odcreg.experiment import ExperimentConfig, load_data, loglog_slope, run_experiment, speedup_bench


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        ExperimentConfig(synth="manifold", p=[1.5])
    with pytest.raises(InvalidConfigError):
        ExperimentConfig()
    with pytest.raises(InvalidConfigError):
        ExperimentConfig.from_dict({"synth": "manifold", "bogus": 1})
    cfg = ExperimentConfig(synth="manifold", M="50", deterministic=True, n_jobs=4)
    assert cfg.M == [50] and cfg.n_jobs == 1
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_overlap_sweep_trend():
    # a statistical trend: single seeds can go either way, so average five
    gaps = []
    for seed in range(5):
        cfg = ExperimentConfig(synth="manifold", N=1000, M=[100], p=[0.0, 0.9], seed=seed)
        rows = run_experiment(cfg).rows
        assert len(rows) == 2
        gaps.append(rows[0]["error"] - rows[1]["error"])
    assert np.mean(gaps) >= 0


def test_nn_with_all_points_equals_full():
    cfg = ExperimentConfig(synth="manifold", N=60, test_size=10, M=[50], modes=["nn", "full"])
    rows = run_experiment(cfg).rows
    assert rows[0]["error"] == pytest.approx(rows[1]["error"], abs=1e-10)


def test_empty_sweep_and_skipped_cells():
    assert run_experiment(ExperimentConfig(synth="manifold", N=100, M=[])).rows == []
    cfg = ExperimentConfig(synth="manifold", N=100, M=[20, 500], Kprime=[1, 2])
    rows = run_experiment(cfg).rows
    assert len(rows) == 4
    assert [r["skip_reason"] is None for r in rows] == [True, True, False, False]


def test_reports_bit_reproducible():
    cfg = ExperimentConfig(synth="manifold", N=300, M=[60], p=[0.5], Kprime=[1, 2], seed=3)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert [r["error"] for r in a.rows] == [r["error"] for r in b.rows]


def test_report_formats(tmp_path):
    report = run_experiment(ExperimentConfig(synth="manifold", N=200, M=[50]))
    report.write(tmp_path / "r.csv")
    header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["mode", "machine", "clustering"]
    assert json.loads(report.to_json())["rows"][0]["M"] == 50


def test_speedup_bench_small():
    cfg = ExperimentConfig(synth="manifold", N=1200, M=[100, 200], bench_queries=20, warmup=2)
    report, slopes = speedup_bench(cfg)
    assert all(r["ratio"] > 1 for r in report.rows)
    assert np.isfinite(slopes["odc"]) and np.isfinite(slopes["nn"])


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
    assert np.isnan(loglog_slope([1], [1]))


def test_load_data_from_files(tmp_path):
    (tmp_path / "x.csv").write_text("\n".join(f"{i},{i * 2}" for i in range(10)))
    (tmp_path / "y.csv").write_text("\n".join(str(i) for i in range(10)))
    cfg = ExperimentConfig(features=str(tmp_path / "x.csv"), outputs=str(tmp_path / "y.csv"),
                           test_size=0.3)
    train, test = load_data(cfg)
    assert (train.N, test.N) == (7, 3)


# command line

def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_train_predict_inspect(tmp_path, capsys):
    model = str(tmp_path / "m.odcm")
    code, out, _ = run(["train", "--synth", "manifold", "--N", "300", "--M", "60", "--p", "0.5",
                        "--model", model], capsys)
    assert code == 0 and json.loads(out)["K"] >= 1
    code, out, _ = run(["inspect-model", model], capsys)
    assert code == 0 and json.loads(out)["config"]["M"] == 60
    X = np.random.default_rng(0).standard_normal((4, 10))
    np.savetxt(tmp_path / "q.csv", X, delimiter=",")
    np.savetxt(tmp_path / "a.csv", np.zeros((4, 3)), delimiter=",")
    code, out, err = run(["predict", "--model", model, "--features", str(tmp_path / "q.csv"),
                          "--outputs", str(tmp_path / "a.csv")], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "y0,y1,y2" and len(lines) == 5
    assert json.loads(err)["metric"] == "euclidean"


def test_cli_sweep_json(capsys):
    code, out, _ = run(["sweep", "--synth", "manifold", "--N", "200", "--M", "40,50",
                        "--format", "json"], capsys)
    assert code == 0 and len(json.loads(out)["rows"]) == 2


def test_cli_config_file(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"synth": "manifold", "N": 200, "M": [50]}))
    code, out, _ = run(["sweep", "--config", str(tmp_path / "c.json"), "--Kprime", "1,2"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 3


def test_cli_exit_codes(tmp_path, capsys):
    assert run(["sweep", "--synth", "spiral"], capsys)[0] == 2
    assert run(["sweep", "--synth", "manifold", "--p", "abc"], capsys)[0] == 2
    assert run(["train", "--synth", "manifold"], capsys)[0] == 2
    bad = tmp_path / "bad.odcm"
    bad.write_bytes(b"ODCM\x01")
    assert run(["inspect-model", str(bad)], capsys)[0] == 3
    assert run(["predict", "--model", str(tmp_path / "missing"), "--features", "x"], capsys)[0] == 3
    (tmp_path / "x.csv").write_text("1,2\n3,oops\n")
    code, _, err = run(["sweep", "--features", str(tmp_path / "x.csv"), "--outputs",
                        str(tmp_path / "x.csv")], capsys)
    assert code == 3 and "line 2" in err
