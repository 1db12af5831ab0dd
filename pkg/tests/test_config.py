import json

import numpy as np
import pytest

from qctl.config import MHZ, parse_config
from qctl.errors import ConfigError, InvalidInputError
from qctl.io import (
  encode,
  format_float,
  matrix_from_json,
  matrix_to_json,
  read_matrix,
  write_csv,
  write_matrix,
)
from qctl.spin import HyperfineParams, build_1e1n_hamiltonian
from tests.data import controllability, pulse, simulate, synth


def _field(raw):
  with pytest.raises(ConfigError) as e:
    parse_config(raw)
  return e.value.field


def test_defaults_are_resolved():
  cfg = parse_config(synth("cnot"))
  assert cfg.chain.N == 4 and cfg.r == 1
  assert cfg.synthesis.max_segments == 40
  assert cfg.synthesis.fidelity_mode == "phase_sensitive"
  assert cfg.resolved["synthesis"]["restarts"] == 32
  assert cfg.resolved["chain"]["N"] == 4


def test_pulse_units():
  cfg = parse_config(pulse(u_max_MHz=50.0))
  assert cfg.pulse.u_max == pytest.approx(50 * MHZ)
  assert cfg.pulse.nu_n_MHz == 18.1
  assert cfg.pulse.horizon == 200.0
  assert cfg.pulse.frame == "electron-rotating"


def test_hyperfine_fields_stay_in_mhz():
  raw = pulse(nu_n_MHz=10.0, A_zx_MHz=0.0, A_zz_MHz=0.0)
  sec = parse_config(raw).pulse
  assert sec.nu_n_MHz == 10.0 and sec.nu_s == 11.885
  params = HyperfineParams(sec.nu_s, sec.nu_n_MHz, sec.A_zx_MHz, sec.A_zz_MHz)
  drift, _ = build_1e1n_hamiltonian(params)
  w = np.linalg.eigvalsh(drift.matrix)
  # nuclear Larmor splitting in rad/ns
  assert w[-1] - w[0] == pytest.approx(2 * np.pi * 10.0 * MHZ)


def test_seed_override():
  cfg = parse_config(dict(synth("cnot"), **simulate()), seed=11)
  assert cfg.synthesis.seed == 11 and cfg.simulate.seed == 11


@pytest.mark.parametrize(
  "raw, field",
  [
    ({"chain": {"coupling": "heisenberg", "J": [1.0]}, "extra": {}}, "extra"),
    ({"chain": {"E": [0.0], "d": "x"}}, "chain.d"),
    (dict(controllability(), actuator={"r": 4}), "actuator.r"),
    (dict(controllability(), actuator={"r": 0}), "actuator.r"),
    (synth("toffoli"), "synthesis.gate"),
    (synth("cnot", fidelity_goal=1.5), "synthesis.fidelity_goal"),
    (synth("cnot", switching_csv=1), "synthesis.switching_csv"),
    (pulse(segments=0), "pulse.segments"),
    (pulse(horizon_ns=float("inf")), "pulse.horizon_ns"),
    ({"ft": {"target": 1, "realized": "u.json"}}, "ft.target"),
  ],
)
def test_invalid_fields(raw, field):
  assert _field(raw) == field


def test_invalid_chain_is_a_config_error():
  assert _field({"chain": {"E": [0.0, 0.0], "d": [0.0]}}) == "chain"


def test_simulate_sections():
  raw = simulate(gamma=1.0, kappa=0.5)
  raw["simulate"]["feedback"] = {"mode": "current_proportional", "gain": 0.1}
  assert _field(raw) == "simulate.feedback.actuator"
  raw["simulate"]["feedback"]["actuator"] = [[0, 1], [1, 0]]
  cfg = parse_config(raw)
  assert cfg.simulate.feedback_gain == 0.1
  assert len(cfg.simulate.measured) == 1
  assert cfg.simulate.trajectory_files == 0
  raw["simulate"]["feedback"]["delay"] = 1
  assert _field(raw) == "simulate.feedback.delay"
  raw = simulate()
  raw["simulate"]["collapse"] = [[[0, 1]], [[0, 1], [0, 0]]]
  assert _field(raw) == "simulate.collapse[0]"


def test_matrix_json():
  m = np.array([[1, 2j], [-1j, 0.5]])
  np.testing.assert_array_equal(matrix_from_json(matrix_to_json(m)), m)
  np.testing.assert_array_equal(
    matrix_from_json({"matrix": [[1, 0], [0, 1]]}), np.eye(2)
  )
  with pytest.raises(InvalidInputError):
    matrix_from_json([[1, 0], [0]])
  with pytest.raises(InvalidInputError):
    matrix_from_json([[[1, 0, 0]]])
  with pytest.raises(InvalidInputError):
    matrix_from_json([["a"]])


def test_float_encoding():
  assert format_float(0.1) == "0.10000000000000001"
  assert format_float(2.0) == "2.0"
  assert format_float(1e-20) == "9.9999999999999995e-21"
  assert float(format_float(np.pi)) == np.pi
  expected = '{\n  "a": [1.0, 2],\n  "b": true\n}'
  assert encode({"a": [1.0, 2], "b": True}) == expected
  assert encode(np.float64(0.5)) == "0.5"
  assert encode(1j) == "[0.0, 1.0]"


def test_matrix_file(tmp_path):
  path = str(tmp_path / "u.json")
  m = np.array([[0, 1j], [1j, 0]]) / np.sqrt(2) + np.eye(2) / np.sqrt(2)
  write_matrix(path, m)
  np.testing.assert_array_equal(read_matrix(path), m)
  with pytest.raises(InvalidInputError):
    read_matrix(str(tmp_path / "missing.json"))


def test_csv_config_header(tmp_path):
  path = str(tmp_path / "out.csv")
  config = {"dt": 0.1, "simulate": {"T": 1.0, "rho0": [[1, 0], [0, 0]]}}
  write_csv(path, ["t", "p"], [[0.0, 1.0], [0.1, 0.5]], config)
  with open(path, "r") as f:
    first, second = f.readline(), f.readline()
  assert first == (
    '# config: {"dt": 0.10000000000000001, '
    '"simulate": {"T": 1.0, "rho0": [[1, 0], [0, 0]]}}\n'
  )
  assert second == "# t,p\n"
  assert json.loads(first[len("# config: "):]) == config
  data = np.loadtxt(path, delimiter=",", comments="#")
  np.testing.assert_array_equal(data, [[0.0, 1.0], [0.1, 0.5]])
