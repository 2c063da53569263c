import json
import subprocess
import sys

import pytest

from anderson_lab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_spectral_writes_tables_and_manifest(tmp_path):
    code, out = run(tmp_path, "s", "spectral", "--seed", "3", "n_phi=1000000")
    assert code == EXIT_OK
    assert (out / "phi.csv").read_text().splitlines()[0] == "e,phi,phi_stderr,R,I"
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and man["status"] == "ok"
    assert man["config"]["params"]["n_phi"] == 1_000_000
    assert "phi.csv" in man["outputs"]


def test_coeffs_outputs(tmp_path):
    code, out = run(tmp_path, "c", "coeffs")
    assert code == EXIT_OK
    assert (out / "coefficients.csv").read_text().splitlines()[:3] == ["n,c_n", "1,1", "2,-1"]
    deg = json.loads((out / "degrees.json").read_text())
    assert deg


def test_manifest_replay_reproduces_outputs(tmp_path):
    code, a = run(tmp_path, "a", "wigner", "--seed", "2", "L=4", "n_states=3", "x_bins=2", "e_bins=3")
    assert code == EXIT_OK
    code, b = run(tmp_path, "b", "wigner", "--config", str(a / "manifest.json"))
    assert code == EXIT_OK
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert mb["seed"] == 2
    for name in ("wigner.json", "wigner_snapshot.csv"):
        assert ma["outputs"][name] == mb["outputs"][name]


@pytest.mark.parametrize("args", [
    ["ladder", "lam=0.2"],
    ["ladder", "lam=0.2", "T=1", "kappa=0.2"],
    ["coeffs", "bogus=1"],
    ["wigner", "L=five"],
])
def test_configuration_errors_exit_2(tmp_path, args):
    code, out = run(tmp_path, "e", *args)
    assert code == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path):
    # ten mean free times are too short for the autocorrelation fit window
    code, out = run(tmp_path, "b", "boltzmann", "n_phi=1000000", "n=2000", "free_times=10")
    assert code == EXIT_NUMERIC
    assert "numerical" in (out / "summary.txt").read_text()


def test_evolve_small_run(tmp_path):
    code, out = run(tmp_path, "v", "evolve", "lam=0.3", "L=8", "R=2", "t=1", "enforce_margin=false",
                    "n_phi=1000000", "checkpoints=0.5,1.0")
    assert code == EXIT_OK
    data = json.loads((out / "ensemble.json").read_text())
    assert data["realization_seeds"]


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "anderson_lab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("spectral", "shell", "boltzmann", "evolve", "wigner", "ladder", "coeffs", "compare"):
        assert sub in res.stdout
