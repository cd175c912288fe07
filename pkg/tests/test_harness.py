import csv
import json
import math

import numpy as np
import pytest

from latticelab import cli, harness
from latticelab.ensembles import EnsembleSpec
from latticelab.errors import ConfigError
from latticelab.harness import ExperimentConfig, TolerancePolicy, compare, run_experiment, write_artifacts
from latticelab.transforms import Ball, Estimate, Gaussian, TestFunction
from latticelab.weights import TruncatedValue, zeta_val

G = TestFunction([Gaussian(1.0)], [])


def siegel_config(samples=4000, seed=0, **kw):
    return ExperimentConfig("siegel", n=2, k1=1, k2=0, test_function=G, ensemble=EnsembleSpec.x2(samples, seed), seed=seed, **kw)


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_compare_examples():
    z, v = compare(Estimate(4.75, 0.02, 100, 0), TruncatedValue(4.784, 0.0, 0))
    assert v == "pass" and z == pytest.approx(-1.7)
    _, v = compare(Estimate(4.60, 0.02, 100, 0), TruncatedValue(4.784, 0.0, 0))
    assert v == "fail"
    # large |Δ| in units of stderr but inside the tail, with a stderr above the floor
    z, v = compare(Estimate(4.0, 0.05, 100, 0), TruncatedValue(4.784, 1.0, 0), TolerancePolicy(max_stderr=0.01))
    assert v == "inconclusive" and abs(z) > 3


def test_compare_uses_tail_and_floor():
    z, v = compare(Estimate(1.0, 0.0, 1, 0), TruncatedValue(1.0, 0.0, 0))
    assert v == "pass" and z == 0
    _, v = compare(Estimate(1.0 + 1e-6, 0.0, 1, 0), TruncatedValue(1.0, 2e-6, 0))
    assert v == "pass"


def test_dual_needs_n_above_k1_k2():
    with pytest.raises(ConfigError):
        ExperimentConfig("dual", n=2, k1=1, k2=1, test_function=TestFunction([Gaussian(1.0)], [Gaussian(1.0)]), ensemble=EnsembleSpec.x2(10))


@pytest.mark.parametrize(
    "kw",
    [
        {"kind": "nope"},
        {"kind": "siegel", "test_function": G},
        {"kind": "siegel", "ensemble": EnsembleSpec.x2(10)},
        {"kind": "siegel", "n": 3, "test_function": G, "ensemble": EnsembleSpec.x2(10)},
        {"kind": "siegel", "k1": 2, "test_function": G, "ensemble": EnsembleSpec.x2(10)},
        {"kind": "siegel", "H": 0, "test_function": G, "ensemble": EnsembleSpec.x2(10)},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_config_roundtrip_and_unknown_keys():
    cfg = siegel_config(tolerance=TolerancePolicy(2.5, 0.1))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**cfg.to_dict(), "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 2})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        harness.load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        harness.load_config(bad)


def test_ensemble_seed_defaults_to_config_seed():
    d = {"kind": "siegel", "seed": 7, "test_function": {"primal": [{"gaussian": 1.0}]}, "ensemble": {"kind": "x2", "samples": 10}}
    assert ExperimentConfig.from_dict(d).ensemble.seed == 7


def test_with_seed_reseeds_sampled_ensembles_only():
    assert siegel_config(seed=1).with_seed(5).ensemble.seed == 5
    cfg = ExperimentConfig("rogers", n=3, k1=1, test_function=G, ensemble=EnsembleSpec.hecke(3, 5))
    assert cfg.with_seed(5).ensemble == cfg.ensemble


def test_siegel_run_passes():
    rep = run_experiment(siegel_config(20000, 3))
    assert rep.rhs.value == 2.0
    assert rep.verdict == "pass"
    assert set(rep.manifest) >= {"seed", "code_version", "timestamp"}


def test_siegel_control_variate_run():
    rep = run_experiment(siegel_config(20000, 3, options={"control_variate": True}))
    plain = run_experiment(siegel_config(20000, 3))
    assert rep.verdict == "pass"
    assert rep.lhs.stderr < 0.1 * plain.lhs.stderr


def test_control_variate_needs_matching_setup():
    cfg = ExperimentConfig(
        "siegel", n=3, k1=1, test_function=G, ensemble=EnsembleSpec.hecke(3, 5), options={"control_variate": True}
    )
    with pytest.raises(ConfigError):
        run_experiment(cfg)
    tf = TestFunction([Gaussian(1.0)], [Gaussian(1.0)])
    cfg = ExperimentConfig("fbeta", n=4, k1=1, k2=1, test_function=tf, ensemble=EnsembleSpec.hecke(4, 7), options={"beta": [[0]], "control_variate": True})
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_primitive_run_on_x2():
    cfg = ExperimentConfig("rogers", n=2, k1=1, test_function=G, ensemble=EnsembleSpec.x2(20000, 1), options={"primitive": True})
    rep = run_experiment(cfg)
    assert rep.rhs.value == pytest.approx(1 / zeta_val(2))
    assert rep.verdict == "pass"


def test_fbeta_controlled_run_is_reproducible():
    tf = TestFunction([Gaussian(1.0)], [Gaussian(1.0)])
    cfg = ExperimentConfig(
        "fbeta", n=4, k1=1, k2=1, test_function=tf, ensemble=EnsembleSpec.hecke(4, 1009, "sampled", 1500, 2), seed=2, options={"beta": [[1]], "control_variate": True}
    )
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.lhs.mean == b.lhs.mean
    assert a.details["control_coefficients"] == b.details["control_coefficients"]


def test_weights_and_selftest_runs():
    rep = run_experiment(ExperimentConfig("weights", n=5, options={"theta": [[1]], "q": 2}, Dmax=300))
    assert rep.verdict == "pass" and rep.rhs.value == 1 / 32
    rep = run_experiment(ExperimentConfig("selftest"))
    assert rep.verdict == "pass"
    assert rep.lhs.mean == rep.rhs.value


def test_moments_run_marks_limit_only():
    cfg = ExperimentConfig("moments", n=3, k1=0, ensemble=EnsembleSpec.hecke(3, 5), options={"V": [1.0], "W": [1.0]})
    rep = run_experiment(cfg)
    assert rep.details["limit_only"] and rep.rhs.value == 1.0


def test_moments_rejects_unsorted():
    cfg = ExperimentConfig("moments", n=3, k1=0, ensemble=EnsembleSpec.hecke(3, 5), options={"V": [2.0, 1.0]})
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_artifacts_and_replay(tmp_path):
    rep = run_experiment(siegel_config(2500, 4))
    run = write_artifacts(rep, tmp_path)
    assert run.name.startswith("run-") and run.name.endswith("-4")
    report = json.loads((run / "report.json").read_text())
    assert report["verdict"] == rep.verdict and report["config"] == rep.config.to_dict()
    manifest = json.loads((run / "manifest.json").read_text())
    with open(run / "members.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["member_index", "statistic_value"]
    assert len(rows) - 1 == 2500
    assert math.fsum(float(r[1]) for r in rows[1:]) / 2500 == rep.lhs.mean
    again = harness.replay(manifest)
    assert again.lhs.mean == rep.lhs.mean and again.lhs.stderr == rep.lhs.stderr


def test_worker_count_does_not_change_result(monkeypatch):
    cfg = siegel_config(3000, 6)
    monkeypatch.setenv("LAB_THREADS", "1")
    one = run_experiment(cfg)
    monkeypatch.setenv("LAB_THREADS", "2")
    assert harness.worker_count() == 2
    two = run_experiment(cfg)
    assert one.lhs.mean == two.lhs.mean and one.lhs.stderr == two.lhs.stderr


def test_worker_count_parsing(monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "zero")
    with pytest.raises(ConfigError):
        harness.worker_count()


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "runs")
    assert cli.main(["selftest", "--out", out]) == 0
    assert cli.main(["siegel", "--out", out]) == 2
    assert cli.main(["siegel", "--config", str(tmp_path / "missing.json"), "--out", out]) == 2
    good = siegel_config(2000, 1).to_dict()
    path = write_json(tmp_path / "siegel.json", good)
    assert cli.main(["siegel", "--config", path, "--out", out, "--strict"]) == 0
    assert cli.main(["rogers", "--config", path, "--out", out]) == 2
    # zero sigmas: any sampling error is a failure
    failing = write_json(tmp_path / "fail.json", {**good, "tolerance": {"sigmas": 0}})
    assert cli.main(["siegel", "--config", failing, "--out", out]) == 0
    assert cli.main(["siegel", "--config", failing, "--out", out, "--strict"]) == 1
    dual = write_json(tmp_path / "dual.json", {"kind": "dual", "n": 2, "test_function": {"primal": [{"gaussian": 1}], "dual": [{"gaussian": 1}]}, "ensemble": {"kind": "x2", "samples": 10}})
    assert cli.main(["dual", "--config", dual, "--out", out]) == 2
    capsys.readouterr()


def test_cli_emit_and_seed(tmp_path, capsys):
    path = write_json(tmp_path / "s.json", siegel_config(1500, 1).to_dict())
    assert cli.main(["siegel", "--config", path, "--seed", "9", "--out", str(tmp_path), "--emit", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["config"]["seed"] == 9 and data["config"]["ensemble"]["seed"] == 9
    assert cli.main(["siegel", "--config", path, "--out", str(tmp_path), "--emit", "csv"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0][0] == "kind" and rows[1][0] == "siegel"


def test_fixed_ensemble_exact_lhs():
    Z2 = np.eye(2)
    cfg = ExperimentConfig.from_dict({"kind": "siegel", "n": 2, "test_function": {"primal": [{"ball": 5.0}]}, "ensemble": {"kind": "fixed", "lattices": [Z2.tolist(), Z2.tolist()]}})
    rep = run_experiment(cfg)
    assert rep.lhs.mean == 4.0 and rep.lhs.stderr == 0.0
    assert rep.verdict == "fail"
    assert Ball(5.0) == cfg.test_function.primal_slots[0]
