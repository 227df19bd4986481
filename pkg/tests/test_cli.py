import json
import subprocess
import sys

import numpy as np
import pytest

from monomial_nfn.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, invariance_tolerance, main
from monomial_nfn.groups import GroupElement
from monomial_nfn.weightspace import deserialize


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    doc = json.loads(out) if out.strip() else None
    return code, doc, err


@pytest.fixture
def weights(tmp_path, capsys):
    path = tmp_path / "net.json"
    code, doc, _ = run(capsys, "--seed", "3", "gen", "--channels", "2,3,4,1", "--output", str(path))
    assert code == EXIT_PASS and doc["path"] == str(path)
    return path


def test_gen_to_stdout(capsys):
    code, doc, _ = run(capsys, "gen", "--channels", "2,3,1", "--weight-dim", "2,1")
    assert code == EXIT_PASS
    assert doc["spec"]["channels"] == [2, 3, 1]
    assert np.array(doc["weights"][0]).shape == (3, 2, 2)


def test_augment_trivial_is_identity(tmp_path, capsys, weights):
    out = tmp_path / "aug"
    code, doc, _ = run(capsys, "augment", str(weights), "--subgroup", "trivial", "--output", str(out))
    assert code == EXIT_PASS
    assert deserialize((out / "net.aug0.json").read_bytes()).flatten().tolist() == \
        deserialize(weights.read_bytes()).flatten().tolist()


def test_augment_signflip_entries(tmp_path, capsys, weights):
    out = tmp_path / "aug"
    code, doc, _ = run(capsys, "--seed", "1", "augment", str(weights), "--subgroup", "signflip", "--count", "3",
                       "--output", str(out))
    assert code == EXIT_PASS and len(doc["files"]) == 3
    for entry in doc["files"]:
        g = GroupElement.from_dict(json.loads(open(entry["group"]).read()))
        for layer in g.layers:
            assert set(np.abs(layer.diag)) == {1.0}


def test_augment_mismatch_warns(tmp_path, capsys, weights):
    code, _, err = run(capsys, "augment", str(weights), "--subgroup", "positive", "--sigma", "tanh",
                       "--output", str(tmp_path / "aug"))
    assert code == EXIT_PASS and "warning" in err


def test_augmented_file_passes_audit(tmp_path, capsys, weights):
    out = tmp_path / "aug"
    run(capsys, "augment", str(weights), "--subgroup", "positive", "--scale-range", "1,1e6", "--log-uniform",
        "--output", str(out))
    code, doc, _ = run(capsys, "audit", "invariance", "--input", str(out / "net.aug0.json"), "--sigma", "relu",
                       "--subgroup", "positive", "--scale-range", "1,1e6", "--trials", "50")
    assert code == EXIT_PASS and doc["tolerance"] == 1e-6 and doc["pass"]


def test_audit_invariance_pass(capsys):
    code, doc, _ = run(capsys, "audit", "invariance", "--sigma", "tanh", "--subgroup", "signflip", "--net", "cnn",
                       "--trials", "40")
    assert code == EXIT_PASS
    assert doc["trials"] == 40 and doc["max_rel_dev"] <= 1e-10
    assert "elapsed_ms" not in doc


def test_audit_mismatch_fails_with_witness(capsys):
    code, doc, err = run(capsys, "audit", "invariance", "--sigma", "relu", "--subgroup", "signflip",
                         "--adversarial", "--trials", "20")
    assert code == EXIT_FAIL and not doc["pass"]
    assert doc["witness_trial"] == doc["argmax_trial"]
    assert "warning" in err


def test_audit_equivariance_and_inv_layer(capsys):
    for argv in (["audit", "equivariance", "--family", "sintanh", "--trials", "30"],
                 ["audit", "inv-layer", "--family", "relu", "--trials", "30"],
                 ["audit", "inv-layer", "--stack", "--family", "sintanh", "--trials", "10"]):
        code, doc, _ = run(capsys, *argv)
        assert code == EXIT_PASS and doc["pass"]


def test_audit_preserve(capsys):
    code, doc, _ = run(capsys, "audit", "preserve", "--sigma", "sin", "--sizes", "2", "--trials", "5")
    assert code == EXIT_PASS and doc["checked"] == 72 + 5 and doc["misclassified"] == 0
    code, doc, _ = run(capsys, "audit", "preserve", "--sigma", "relu", "--matrix", "[[1, 1], [0, 1]]")
    assert code == EXIT_PASS and doc["preserved"] is False and doc["expected"] is False


def test_params(capsys):
    code, doc, _ = run(capsys, "params", "--channels", "1,2,2,1")
    assert code == EXIT_PASS and doc["exact"] == 9
    assert doc["ratio"] == doc["exact"] / doc["baseline_hnp"]
    code, doc, _ = run(capsys, "params", "--width", "4", "--depths", "4,8,12")
    assert doc["exact_deltas"][0] == doc["exact_deltas"][1]


def test_params_from_spec_file(capsys, weights):
    code, doc, _ = run(capsys, "params", "--spec", str(weights), "--family", "sintanh")
    assert code == EXIT_PASS and doc["source"]["channels"] == [2, 3, 4, 1]


def test_pool_fixture(capsys):
    code, doc, _ = run(capsys, "pool")
    assert code == EXIT_PASS
    assert np.allclose(doc["pooled"][0], [11 / 28, 9 / 28, 8 / 28], rtol=0, atol=1e-12)
    assert all(abs(s - 1.0) <= 1e-12 for s in doc["sums"])


def test_completeness(capsys):
    code, doc, _ = run(capsys, "completeness", "--channels", "1,2,2,1", "--family", "sintanh")
    assert code == EXIT_PASS and doc["oracle_dimension"] == doc["param_count"] == 11


def test_train_toy_short(tmp_path, capsys):
    model = tmp_path / "model.json"
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"n_train": 8, "n_test": 4}))
    code, doc, err = run(capsys, "train-toy", "--config", str(config), "--steps", "2", "--save-model", str(model))
    # two steps cannot halve the loss
    assert code == EXIT_FAIL and doc["status"] == "ok" and len(doc["losses"]) == 3
    assert json.loads(model.read_text())["layers"]


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    cases = [
        ["frobnicate"],
        ["gen"],
        ["audit", "invariance", "--trials", "0"],
        ["--jobs", "0", "pool"],
        ["augment", str(tmp_path / "missing.json"), "--subgroup", "positive"],
        ["pool", str(bad)],
        ["audit", "preserve", "--matrix", "[[1, 2, 3]]"],
        ["completeness", "--channels", "10,10,10,10"],
        ["train-toy", "--config", str(bad)],
        ["audit", "invariance", "--scale-range", "2,1"],
    ]
    for argv in cases:
        assert main(argv) == EXIT_USAGE, argv
        capsys.readouterr()


def test_output_file_copy(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, doc, _ = run(capsys, "--output", str(out), "params", "--channels", "2,2,1")
    assert json.loads(out.read_text()) == doc


def test_jobs_do_not_change_reports(capsys):
    argv = ["audit", "invariance", "--sigma", "relu", "--subgroup", "positive", "--trials", "30"]
    _, single, _ = run(capsys, "--jobs", "1", *argv)
    _, multi, _ = run(capsys, "--jobs", "2", *argv)
    single.pop("command"), multi.pop("command")
    assert single == multi


def test_timing_flag_adds_elapsed(capsys):
    _, doc, _ = run(capsys, "--timing", "audit", "equivariance", "--trials", "3")
    assert doc["elapsed_ms"] >= 0


def test_tolerance_formula():
    assert invariance_tolerance((0.1, 10.0)) == 1e-10
    assert invariance_tolerance((1.0, 1e6)) == pytest.approx(1e-6, rel=1e-12)


def test_module_entry_point_is_byte_deterministic(tmp_path):
    cmd = [sys.executable, "-m", "monomial_nfn", "--seed", "7", "audit", "inv-layer", "--trials", "20"]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and json.loads(first)["pass"]
