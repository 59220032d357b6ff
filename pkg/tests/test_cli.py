import json
from pathlib import Path

import pytest

from latticesfe import cli

CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("name,command", [
    ("kernel_rc", "kernel"), ("diam_rc", "diam"), ("consistency_griffiths", "consistency"),
    ("sfe_ising_chain", "sfe"), ("finite_energy_pointmass", "finite-energy"),
    ("dlr_griffiths", "dlr"), ("sample_chain", "sample"),
])
def test_demo_configs_succeed(tmp_path, name, command):
    out = tmp_path / "out"
    assert _run(command, "--config", CONFIGS / f"{name}.json", "--out-dir", out, "--seed", 1) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["command"] == command
    for f in out.glob("*.csv"):
        assert "nan" not in f.read_text().lower()


def test_unknown_key_is_config_error(tmp_path, capsys):
    assert _run("kernel", "--config", CONFIGS / "bad_key.json", "--out-dir", tmp_path) == 2
    assert "windw" in capsys.readouterr().err
    assert _run("kernel", "--out-dir", tmp_path) == 2


def test_oversized_window_is_capacity_error(tmp_path):
    cfg = {"model": {"variant": "random_cluster", "p": 0.5, "q": 2.0}, "window": {"box": 3}}
    out = tmp_path / "out"
    assert _run("kernel", "--config", _write(tmp_path, cfg), "--out-dir", out) == 3
    assert "kind" in json.loads((out / "failure.json").read_text())


def test_failed_invariant_exits_four(tmp_path):
    # a point mass passes nothing: expecting finite energy must fail
    cfg = json.loads((CONFIGS / "finite_energy_pointmass.json").read_text())
    cfg["expect"] = True
    out = tmp_path / "out"
    assert _run("finite-energy", "--config", _write(tmp_path, cfg), "--out-dir", out) == 4
    assert json.loads((out / "failure.json").read_text())["failed"]


def test_diam_unit_q_is_zero(tmp_path):
    cfg = {"model": {"variant": "random_cluster", "p": 0.4, "q": 1.0}, "window": {"box": 0}}
    out = tmp_path / "out"
    assert _run("diam", "--config", _write(tmp_path, cfg), "--out-dir", out) == 0
    row = (out / "diam.csv").read_text().splitlines()[1].split(",")
    assert float(row[2]) == 0.0 and float(row[3]) == 0.0


def test_sfe_zero_potential_product(tmp_path):
    model = {"variant": "potential", "alphabet": {"labels": ["a", "b"], "weights": [0.5, 0.5]},
             "tail": 0, "terms": [{"offsets": [[0]], "table": [0.0, 0.0]}]}
    cfg = {"model": model,
           "mu": {"kind": "product"}, "n_max": 3}
    out = tmp_path / "out"
    assert _run("sfe", "--config", _write(tmp_path, cfg), "--out-dir", out) == 0
    lines = (out / "sfe.csv").read_text().splitlines()
    assert len(lines) == 5
    for line in lines[1:]:
        f = line.split(",")
        assert float(f[2]) == 0.0 and float(f[3]) == 0.0 and float(f[4]) == 0.0


@pytest.mark.parametrize("command,name,files", [
    ("sfe", "sfe_ising_chain", ["sfe.csv"]),
    ("sample", "sample_chain", ["samples.csv", "trajectories.json"]),
    ("consistency", "consistency_griffiths", ["consistency.csv"]),
])
def test_outputs_identical_across_runs_and_threads(tmp_path, command, name, files):
    outs = []
    for i, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"o{i}"
        assert _run(command, "--config", CONFIGS / f"{name}.json", "--out-dir", out,
                    "--threads", threads, "--seed", 9) == 0
        outs.append(out)
    for f in files:
        blobs = {(o / f).read_bytes() for o in outs}
        assert len(blobs) == 1
    hashes = {json.loads((o / "manifest.json").read_text())["config_hash"] for o in outs}
    assert len(hashes) == 1


def test_environment_overrides(tmp_path, monkeypatch):
    out = tmp_path / "env_out"
    monkeypatch.setenv("LATTICESFE_CONFIG", str(CONFIGS / "diam_rc.json"))
    monkeypatch.setenv("LATTICESFE_OUT_DIR", str(out))
    monkeypatch.setenv("LATTICESFE_THREADS", "2")
    monkeypatch.setenv("LATTICESFE_SEED", "17")
    assert cli.main(["diam"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["threads"] == 2 and man["seed"] == 17
    # the flag wins over the environment
    assert cli.main(["diam", "--seed", "3"]) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3


def test_config_hash_ignores_key_order():
    a = {"model": {"p": 0.5, "q": 2.0}, "window": {"box": 0}}
    b = {"window": {"box": 0}, "model": {"q": 2.0, "p": 0.5}}
    assert cli.config_hash(a) == cli.config_hash(b)
