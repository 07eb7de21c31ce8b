import csv
import io
import json
import math

import pytest

from entrocon.cli import main
from entrocon.functionals import binary_entropy


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_emit_load_emit_is_bytewise_stable(tmp_path, capsys):
    path = tmp_path / "chain.json"
    assert main(["emit", "--gallery", "three_state", "--M", "100", "--out", str(path)]) == 0
    code, out, _ = run(capsys, "emit", "--file", str(path))
    assert code == 0 and out == path.read_text()


def test_constants_three_state(capsys):
    code, out, _ = run(capsys, "constants", "--gallery", "three_state", "--M", "1e4",
                       "--which", "delta,rho0")
    rep = json.loads(out)
    assert code == 0 and set(rep["brackets"]) == {"delta", "rho0"}
    h = float(binary_entropy(0.25))
    assert rep["brackets"]["delta"]["upper"]["value"] <= h / math.log(1e4 + 2) + 1e-6
    assert rep["ordering"]["consistent"]


def test_constants_complete_lazy_all_five(capsys):
    code, out, _ = run(capsys, "constants", "--gallery", "complete_lazy", "--n", "5")
    rep = json.loads(out)
    assert code == 0
    assert set(rep["brackets"]) == {"rho", "alpha", "delta", "rho0", "lambda"}
    assert rep["ordering"]["violations"] == []


def test_constants_lambda_from_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"pi": [0.5, 0.5], "P": [[0.75, 0.25], [0.25, 0.75]]}))
    code, out, _ = run(capsys, "constants", "--file", str(path), "--which", "lambda")
    rep = json.loads(out)
    assert code == 0 and rep["brackets"]["lambda"]["estimate"] == pytest.approx(0.5)


def test_constants_nonreversible_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"pi": [0.5, 0.5], "P": [[0.9, 0.1], [0.3, 0.7]]}))
    code, out, _ = run(capsys, "constants", "--file", str(path), "--which", "rho,eta_tv")
    rep = json.loads(out)
    assert code == 2 and rep["aborted"] == ["rho"] and "eta_tv" in rep["brackets"]


@pytest.mark.parametrize("content", ["not json", '{"pi": [0.5, 0.6], "P": [[1, 0], [0, 1]]}'])
def test_invalid_file(tmp_path, capsys, content):
    path = tmp_path / "c.json"
    path.write_text(content)
    code, _, err = run(capsys, "constants", "--file", str(path))
    assert code == 2 and "invalid input" in err


def test_unknown_constant(capsys):
    code, _, _ = run(capsys, "constants", "--gallery", "three_state", "--which", "beta")
    assert code == 2


def test_separation_is_deterministic_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["separation", "one_to_k", "--grid", "3,4", "--k", "2", "--out", str(a),
                 "--threads", "1", "--seed", "5"]) == 0
    assert main(["separation", "one_to_k", "--grid", "3,4", "--k", "2", "--out", str(b),
                 "--threads", "3", "--seed", "5"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_trajectory_from_pi_is_zero(capsys):
    code, out, _ = run(capsys, "trajectory", "--gallery", "three_state", "--M", "100",
                       "--nu0", "pi", "--points", "4", "--steps", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and all(float(r["entropy"]) == 0.0 for r in rows)


def test_trajectory_envelopes_and_comparison(capsys, tmp_path):
    manifest = tmp_path / "m.json"
    code, out, err = run(capsys, "trajectory", "--gallery", "three_state", "--M", "100",
                         "--nu0", "2", "--manifest", str(manifest))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    for r in rows:
        assert float(r["entropy"]) <= float(r["entropy_envelope"]) * (1 + 1e-9)
    one_step = next(float(r["entropy"]) for r in rows if r["mode"] == "discrete" and r["time"] == "1")
    assert "continuous at t=1" in err
    assert json.loads(manifest.read_text())["command"] == "trajectory"
    assert one_step > 0


def test_trajectory_support_violation(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"pi": [1.0, 0.0], "P": [[1.0, 0.0], [0.5, 0.5]]}))
    code, _, _ = run(capsys, "trajectory", "--file", str(path), "--nu0", "1")
    assert code == 2


def test_factorize_lazy_file(tmp_path, capsys):
    path = tmp_path / "lazy.json"
    path.write_text(json.dumps({"pi": [0.5, 0.25, 0.25],
                                "P": [[0.75, 0.125, 0.125], [0.25, 0.75, 0.0], [0.25, 0.0, 0.75]]}))
    code, out, err = run(capsys, "factorize", "--file", str(path))
    doc = json.loads(out)
    assert code == 0 and "output_states" in doc
    assert err.strip() == "product residual 0"


def test_factorize_rejects_flip(tmp_path, capsys):
    path = tmp_path / "flip.json"
    path.write_text(json.dumps({"pi": [0.5, 0.5], "P": [[0.0, 1.0], [1.0, 0.0]]}))
    code, _, err = run(capsys, "factorize", "--file", str(path))
    assert code == 2 and "no factorization exists" in err


def test_coupling_bernoulli_laplace(capsys):
    code, out, _ = run(capsys, "coupling", "bernoulli_laplace", "--n", "6", "--k", "2")
    rep = json.loads(out)
    assert code == 0 and rep["kappa"] == "3/8" and rep["kappa_float"] == 0.375


def test_certify_failure_and_cap(capsys):
    code, out, _ = run(capsys, "certify", "bipartite", "--spacing", "1e-3")
    assert code == 3 and json.loads(out)["verdict"] is None
    code, _, err = run(capsys, "certify", "bipartite", "--budget", "1000")
    assert code == 4 and "resource cap" in err


def test_guard_violation(capsys):
    code, _, _ = run(capsys, "emit", "--gallery", "random_transposition", "--n", "9")
    assert code == 2
