import json
import os

import numpy as np
import pytest

import qctl
from qctl.cli import EXIT_INVALID, EXIT_OK, main
from tests.data import ft_matrices, matrix_json, write_configs


def _run(command, config, out, *extra):
  return main([command, "--config", config, "--out", out, "-c", "1", *extra])


def _write(path, name, cfg):
  filename = os.path.join(path, f"{name}.json")
  with open(filename, "w") as f:
    json.dump(cfg, f)
  return filename


def _load(path):
  with open(path, "r") as f:
    return json.load(f)


@pytest.fixture
def configs(tmp_path):
  return write_configs(str(tmp_path))


def test_version(capsys):
  with pytest.raises(SystemExit) as e:
    main(["--version"])
  assert e.value.code == 0
  assert qctl.__version__ in capsys.readouterr().out


def test_controllability_report(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("controllability", configs["controllability"], out) == EXIT_OK
  report = _load(os.path.join(out, "report.json"))
  assert report["dimension"] == 15
  assert report["max_dimension"] == 16
  assert report["controllable"] is True
  assert report["truncated"] is False
  assert report["config"]["chain"]["coupling"] == "heisenberg"


@pytest.mark.parametrize(
  "generators, dimension, controllable",
  [("switch_pair", 3, True), ("drift_only", 1, False)],
)
def test_two_spin_controllability(
  tmp_path, generators, dimension, controllable
):
  cfg = {
    "chain": {"E": [0.5, -0.5], "d": [1.0]},
    "controllability": {"generators": generators},
  }
  config = _write(str(tmp_path), "two", cfg)
  out = str(tmp_path / "out")
  assert _run("controllability", config, out) == EXIT_OK
  report = _load(os.path.join(out, "report.json"))
  assert report["dimension"] == dimension
  assert report["controllable"] is controllable


def test_identity_synthesis(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("synth", configs["synth_identity"], out) == EXIT_OK
  schedule = _load(os.path.join(out, "schedule.json"))
  assert schedule["m"] == [] and schedule["t"] == []
  assert schedule["fidelity"] == pytest.approx(1)
  assert schedule["status"] == "converged"
  assert schedule["config"]["synthesis"]["fidelity_goal"] == 0.9999
  assert os.path.exists(os.path.join(out, "switching.csv"))


def test_seed_override_is_echoed(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("synth", configs["synth_identity"], out, "--seed", "5") == 0
  schedule = _load(os.path.join(out, "schedule.json"))
  assert schedule["config"]["synthesis"]["seed"] == 5


def test_missing_field_is_reported(tmp_path, capsys):
  cfg = {"chain": {"E": [0.0, 0.0]}, "controllability": {}}
  config = _write(str(tmp_path), "bad", cfg)
  assert _run("controllability", config, str(tmp_path)) == EXIT_INVALID
  assert "chain.d" in capsys.readouterr().err


def test_unknown_field_is_rejected(tmp_path, capsys):
  cfg = {"chain": {"coupling": "heisenberg", "J": [1.0], "Jz": [1.0]}}
  config = _write(str(tmp_path), "bad", cfg)
  assert _run("controllability", config, str(tmp_path)) == EXIT_INVALID
  assert "chain.Jz" in capsys.readouterr().err


def test_missing_section_and_file(configs, tmp_path, capsys):
  out = str(tmp_path / "out")
  assert _run("synth", configs["controllability"], out) == EXIT_INVALID
  assert "synthesis" in capsys.readouterr().err
  missing = str(tmp_path / "nowhere.json")
  assert _run("controllability", missing, out) == EXIT_INVALID


def test_ft_analyze(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("ft-analyze", configs["ft"], out) == EXIT_OK
  report = _load(os.path.join(out, "weights.json"))
  theta = 0.3
  # the XX error is pulled back through the CNOT onto the control qubit
  assert report["weights"] == pytest.approx(
    [np.cos(theta)**2, np.sin(theta)**2, 0], abs=1e-12
  )
  assert report["fidelity"] == pytest.approx(np.cos(theta), abs=1e-12)
  assert report["penalized"] == pytest.approx(report["fidelity"], abs=1e-12)


def test_ft_analyze_of_exact_gate(tmp_path):
  target = ft_matrices()["target"]
  _write(str(tmp_path), "u", matrix_json(target))
  config = _write(
    str(tmp_path), "exact", {"ft": {"target": "u.json", "realized": "u.json"}}
  )
  out = str(tmp_path / "out")
  assert _run("ft-analyze", config, out) == EXIT_OK
  report = _load(os.path.join(out, "weights.json"))
  assert report["penalized"] == pytest.approx(1, abs=1e-12)
  assert report["weights"] == pytest.approx([1, 0, 0], abs=1e-12)
  assert report["lambda"] == [1.0]


def test_simulate_amplitude_damping(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("simulate", configs["simulate"], out) == EXIT_OK
  master = np.loadtxt(
    os.path.join(out, "master.csv"), delimiter=",", comments="#"
  )
  assert master.shape == (11, 3)
  assert master[0, 2] == 1
  assert abs(master[-1, 2] - np.exp(-1)) <= 1e-6 * (1 + np.exp(-1))
  with open(os.path.join(out, "master.csv"), "r") as f:
    assert f.readline().startswith("# config: ")


def test_simulate_is_deterministic(configs, tmp_path):
  outs = [str(tmp_path / "a"), str(tmp_path / "b")]
  for out in outs:
    assert _run("simulate", configs["simulate_homodyne"], out) == EXIT_OK
  for name in ("ensemble.csv", "trajectory_0.csv", "trajectory_9.csv"):
    with open(os.path.join(outs[0], name), "rb") as f:
      a = f.read()
    with open(os.path.join(outs[1], name), "rb") as f:
      b = f.read()
    assert a == b
  ensemble = np.loadtxt(
    os.path.join(outs[0], "ensemble.csv"), delimiter=",", comments="#"
  )
  assert np.max(ensemble[:, -1]) <= 0.05
  assert not os.path.exists(os.path.join(outs[0], "trajectory_10.csv"))


@pytest.mark.slow
def test_synth_cnot(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("synth", configs["synth_cnot"], out) == EXIT_OK
  schedule = _load(os.path.join(out, "schedule.json"))
  assert schedule["fidelity"] >= 0.9999


@pytest.mark.slow
def test_pulse_flips_nuclear_spin(configs, tmp_path):
  out = str(tmp_path / "out")
  assert _run("pulse", configs["pulse"], out) == EXIT_OK
  bloch = np.loadtxt(
    os.path.join(out, "bloch.csv"), delimiter=",", comments="#"
  )
  assert bloch[-1, 3] <= -0.98
  pulse = _load(os.path.join(out, "pulse.json"))
  assert len(pulse["amplitudes"]) == 100
  assert pulse["fidelity"] >= 0.99
