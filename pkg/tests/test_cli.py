import json

import pytest

from chemoflow.cli import main
from chemoflow.harness import EXIT_CONFIG, EXIT_OK

CONFIG = """
[domain]
length_x = 1.0
length_y = 1.0
cells_x = 16
cells_y = 16

[params]
r = 1.0
mu = 2.0
gamma = 2.0
kappa = 1
epsilon = 0.05
sigma = 0.2
gravity = 0.5

[initial]
preset = gaussian-bump
seed = 3
mass = 1.0
u_amplitude = 0.1

[run]
t_end = 0.3
dt_max = 0.005
record_every = 5
fixed_dt = true

[output]
dir = {out}
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(CONFIG.format(out=tmp_path / "bundle"))
    return path


def test_run_and_check(config_file, tmp_path, capsys):
    assert main(["run", str(config_file), "--no-svg"]) == EXIT_OK
    bundle = tmp_path / "bundle"
    assert (bundle / "records.csv").exists()
    assert not (bundle / "records.svg").exists()
    assert main(["check", str(bundle)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mass_inequality" in out


def test_run_renders_svg(config_file, tmp_path):
    assert main(["run", str(config_file)]) == EXIT_OK
    assert (tmp_path / "bundle" / "records.svg").exists()


def test_run_out_override(config_file, tmp_path):
    out = tmp_path / "elsewhere"
    assert main(["run", str(config_file), "--out", str(out), "--no-svg"]) == EXIT_OK
    assert (out / "summary.json").exists()


def test_seed_override_changes_output(config_file, tmp_path):
    a, b, c = (tmp_path / x for x in ("a", "b", "c"))
    main(["run", str(config_file), "--out", str(a), "--no-svg"])
    main(["run", str(config_file), "--out", str(b), "--no-svg", "--seed", "3"])
    main(["run", str(config_file), "--out", str(c), "--no-svg", "--seed", "4"])
    ra, rb, rc = ((p / "records.csv").read_bytes() for p in (a, b, c))
    assert ra == rb  # same seed as config
    assert ra != rc


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(CONFIG.format(out=tmp_path).replace("gamma = 2.0", "gamma = 1.0"))
    assert main(["run", str(bad), "--no-svg"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini"), "--no-svg"]) == EXIT_CONFIG


def test_sweep_eps_cli(config_file, tmp_path, capsys):
    code = main(["sweep-eps", str(config_file), "--eps", "0.2", "0.1", "0.05", "--no-svg"])
    assert code == EXIT_OK
    bundle = tmp_path / "bundle"
    assert (bundle / "eps_sweep.json").exists()
    doc = json.loads((bundle / "eps_sweep.json").read_text())
    assert doc["schema"] == 1
    assert doc["verdicts"]["cauchy_decreasing"] in (True, False)


def test_sweep_eps_rejects_nondecreasing(config_file):
    assert main(["sweep-eps", str(config_file), "--eps", "0.2", "0.2", "0.1",
                 "--no-svg"]) == EXIT_CONFIG


def test_mms_cli(config_file, tmp_path):
    assert main(["mms", str(config_file), "--levels", "3", "--no-svg"]) == EXIT_OK
    assert (tmp_path / "bundle" / "mms.json").exists()


def test_gn_estimate_cli(config_file, tmp_path, capsys):
    assert main(["gn-estimate", str(config_file)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["c_star_lower"] >= 1.0 - 1e-12
    cache = tmp_path / "bundle" / "gn_cache.json"
    assert cache.exists()


def test_threads_env_fallback(config_file, tmp_path, monkeypatch):
    monkeypatch.setenv("CHEMOFLOW_THREADS", "2")
    assert main(["sweep-eps", str(config_file), "--eps", "0.2", "0.1", "0.05",
                 "--no-svg"]) == EXIT_OK
