import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qctl.errors import InvalidInputError, WrongObjectiveError
from qctl.grape import (
  ControlProblem,
  GateTarget,
  PenalizedGate,
  PulseProgram,
  StateTransfer,
  basis_state,
  bloch_trajectory,
  bloch_vector,
  fidelity_gradient,
  gate_problem,
  grape_multistart,
  grape_optimize,
  nuclear_flip_problem,
  objective_value,
  partial_trace_electron,
  propagate_piecewise,
  random_program,
  transfer_fidelity,
)
from qctl.linalg import PAULI_X, PAULI_Y, PAULI_Z
from qctl.pauli import PenaltyWeights
from tests.data import random_density, random_hermitian, random_unitary

HAD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _random_state(rng: np.random.Generator, d: int) -> np.ndarray:
  psi = rng.normal(size=d) + 1j * rng.normal(size=d)
  return psi / np.linalg.norm(psi)


def _random_problem(seed: int, objective: str = "state") -> ControlProblem:
  rng = np.random.default_rng(seed)
  d = 4 if objective == "penalized" else int(rng.integers(2, 5))
  if objective == "state":
    goal = StateTransfer(_random_state(rng, d), _random_state(rng, d))
  elif objective == "gate":
    goal = GateTarget(random_unitary(rng, d))
  else:
    goal = PenalizedGate(random_unitary(rng, d), PenaltyWeights((0.3,)))
  return ControlProblem(
    random_hermitian(rng, d),
    (random_hermitian(rng, d), random_hermitian(rng, d)),
    goal,
    horizon=1.5,
    segments=6,
  )


def _finite_differences(p: ControlProblem, u: PulseProgram) -> np.ndarray:
  eps = 1e-6
  x = np.array(u.amplitudes)
  fd = np.zeros_like(x)
  for idx in np.ndindex(*x.shape):
    step = np.zeros_like(x)
    step[idx] = eps
    fd[idx] = (
      objective_value(p, p.program(x + step)) -
      objective_value(p, p.program(x - step))
    ) / (2 * eps)
  return fd


def _qubit_problem(goal, segments=10, horizon=1.0, drift=None):
  drift = np.zeros((2, 2)) if drift is None else drift
  return ControlProblem(
    drift, (PAULI_X / 2, PAULI_Y / 2), goal, horizon, segments
  )


def test_program_validation():
  with pytest.raises(InvalidInputError):
    PulseProgram(0.0, np.zeros((3, 1)))
  with pytest.raises(InvalidInputError):
    PulseProgram(0.1, np.zeros(3))
  with pytest.raises(InvalidInputError):
    PulseProgram(0.1, np.full((3, 1), np.nan))
  assert PulseProgram(0.1, np.full((3, 2), 0.5)).within(0.5)
  assert not PulseProgram(0.1, np.full((3, 2), 0.5)).within(0.4)


def test_problem_validation():
  goal = StateTransfer(basis_state(2, 0), basis_state(2, 1))
  with pytest.raises(InvalidInputError):
    ControlProblem(np.zeros((2, 2)), (), goal, 1.0, 4)
  with pytest.raises(InvalidInputError):
    ControlProblem(np.zeros((4, 4)), (np.eye(4),), goal, 1.0, 4)
  with pytest.raises(InvalidInputError):
    ControlProblem(np.zeros((2, 2)), (PAULI_X,), goal, -1.0, 4)
  with pytest.raises(InvalidInputError):
    StateTransfer([1, 1], [1, 0])
  p = _qubit_problem(goal)
  with pytest.raises(InvalidInputError):
    propagate_piecewise(p, PulseProgram(p.dt, np.zeros((9, 2))))
  with pytest.raises(InvalidInputError):
    propagate_piecewise(p, PulseProgram(2 * p.dt, np.zeros((10, 2))))


def test_zero_control_is_drift_evolution():
  p = _random_problem(0)
  u = propagate_piecewise(p, p.program(np.zeros((6, 2))))
  np.testing.assert_allclose(
    u.matrix, expm(-1j * p.horizon * p.drift.matrix), atol=1e-12
  )


def test_constant_x_drive():
  goal = StateTransfer(basis_state(2, 0), basis_state(2, 1))
  p = _qubit_problem(goal)
  u = propagate_piecewise(p, p.program(np.tile([np.pi, 0.0], (10, 1))))
  np.testing.assert_allclose(u.matrix, -1j * PAULI_X, atol=1e-12)


def test_propagator_matches_sequential_product():
  p = _random_problem(1)
  rng = np.random.default_rng(2)
  u = p.program(rng.normal(size=(6, 2)))
  expected = np.eye(p.dim)
  for amps in u.amplitudes:
    h = p.drift.matrix + sum(a * c.matrix for a, c in zip(amps, p.controls))
    expected = expm(-1j * p.dt * h) @ expected
  np.testing.assert_allclose(
    propagate_piecewise(p, u).matrix, expected, atol=1e-12
  )


def test_propagator_composes_over_halves():
  p = _random_problem(3)
  x = np.random.default_rng(4).normal(size=(6, 2))
  half = ControlProblem(p.drift, p.controls, p.objective, p.horizon / 2, 3)
  first = propagate_piecewise(half, half.program(x[:3])).matrix
  second = propagate_piecewise(half, half.program(x[3:])).matrix
  np.testing.assert_allclose(
    propagate_piecewise(p, p.program(x)).matrix, second @ first, atol=1e-12
  )


def test_transfer_fidelity():
  rng = np.random.default_rng(5)
  p0 = _random_problem(5)
  u = p0.program(rng.normal(size=(6, 2)))
  psi0 = p0.objective.psi0
  reached = propagate_piecewise(p0, u).matrix @ psi0
  hit = ControlProblem(
    p0.drift, p0.controls, StateTransfer(psi0, reached), 1.5, 6
  )
  assert transfer_fidelity(hit, u) == pytest.approx(1)
  d = p0.dim
  other = _random_state(rng, d)
  other = other - np.vdot(reached, other) * reached
  miss = ControlProblem(
    p0.drift, p0.controls,
    StateTransfer(psi0, other / np.linalg.norm(other)), 1.5, 6
  )
  assert transfer_fidelity(miss, u) == pytest.approx(0, abs=1e-12)
  with pytest.raises(WrongObjectiveError):
    transfer_fidelity(_random_problem(5, "gate"), u)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
  p = _random_problem(seed)
  rng = np.random.default_rng(100 + seed)
  for _ in range(4):
    u = p.program(rng.normal(size=(6, 2)))
    g = fidelity_gradient(p, u)
    fd = _finite_differences(p, u)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-3)


@pytest.mark.parametrize("objective", ["gate", "penalized"])
def test_gate_gradients_match_finite_differences(objective):
  p = _random_problem(7, objective)
  u = p.program(np.random.default_rng(8).normal(size=(6, 2)))
  fd = _finite_differences(p, u)
  g = fidelity_gradient(p, u)
  assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-3)


def test_gradient_with_degenerate_spectrum():
  goal = GateTarget(expm(-0.4j * PAULI_X))
  p = ControlProblem(np.zeros((2, 2)), (PAULI_X, PAULI_Z), goal, 1.0, 4)
  u = p.program(np.zeros((4, 2)))
  fd = _finite_differences(p, u)
  np.testing.assert_allclose(fidelity_gradient(p, u), fd, atol=1e-8)


def test_gradient_vanishes_at_perfect_transfer():
  rng = np.random.default_rng(9)
  p0 = _random_problem(9)
  u = p0.program(rng.normal(size=(6, 2)))
  psi0 = p0.objective.psi0
  goal = StateTransfer(psi0, propagate_piecewise(p0, u).matrix @ psi0)
  p = ControlProblem(p0.drift, p0.controls, goal, 1.5, 6)
  assert np.linalg.norm(fidelity_gradient(p, u)) <= 1e-8
  result = grape_optimize(p, u)
  assert len(result.history) == 1
  np.testing.assert_array_equal(result.program.amplitudes, u.amplitudes)


def test_paired_channels_get_equal_gradients():
  p = ControlProblem(
    PAULI_Z / 2, (PAULI_X / 2, PAULI_X / 2), GateTarget(HAD), 1.0, 5
  )
  g = fidelity_gradient(p, p.program(np.zeros((5, 2))))
  np.testing.assert_allclose(g[:, 0], g[:, 1], atol=1e-14)
  assert np.abs(g).max() > 1e-6


def test_x_gate_is_reached():
  p = gate_problem(
    np.zeros((2, 2)), [PAULI_X / 2, PAULI_Y / 2], PAULI_X, 1.0, 10
  )
  result = grape_optimize(p, iters=200, seed=1)
  assert objective_value(p, result.program) >= 1 - 1e-6
  assert result.history[-1] >= result.history[0]
  assert all(b >= a - 1e-12 for a, b in zip(result.history, result.history[1:]))


def test_amplitude_bound_is_respected():
  goal = StateTransfer(basis_state(2, 0), basis_state(2, 1))
  p = ControlProblem(np.zeros((2, 2)), (PAULI_X / 2,), goal, 1.0, 8, u_max=1.0)
  init = p.program(np.full((8, 1), 5.0))
  result = grape_optimize(p, init, iters=50)
  assert result.program.within(1.0)
  # rotation angle is capped at u_max * horizon = 1
  assert objective_value(p, result.program) == pytest.approx(
    np.sin(0.5)**2, abs=1e-8
  )


def test_multistart_is_reproducible():
  goal = StateTransfer(basis_state(2, 0), HAD[:, 0])
  p = _qubit_problem(goal, segments=4, drift=PAULI_Z)
  a = grape_multistart(p, starts=3, iters=30, seed=2)
  b = grape_multistart(p, starts=3, iters=30, seed=2, n_cpu=2)
  np.testing.assert_array_equal(a.program.amplitudes, b.program.amplitudes)
  assert a.history == b.history
  r0 = random_program(p, [2, 0])
  assert r0.amplitudes.shape == (4, 2)
  with pytest.raises(InvalidInputError):
    grape_multistart(p, starts=0)


def test_bloch_vector_examples():
  up, down = np.diag([1, 0]), np.diag([0, 1])
  np.testing.assert_allclose(bloch_vector(up), [0, 0, 1])
  np.testing.assert_allclose(bloch_vector(down), [0, 0, -1])
  np.testing.assert_allclose(bloch_vector(np.eye(2) / 2), [0, 0, 0])
  plus_i = np.array([[1, -1j], [1j, 1]]) / 2
  np.testing.assert_allclose(bloch_vector(plus_i), [0, 1, 0])
  with pytest.raises(InvalidInputError):
    bloch_vector(np.eye(2))
  with pytest.raises(InvalidInputError):
    bloch_vector(np.eye(4) / 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bloch_vector_is_in_the_ball(seed):
  rng = np.random.default_rng(seed)
  assert np.linalg.norm(bloch_vector(random_density(rng, 2))) <= 1 + 1e-9
  psi = _random_state(rng, 2)
  pure = bloch_vector(np.outer(psi, psi.conj()))
  assert np.linalg.norm(pure) == pytest.approx(1)


def test_partial_trace_of_product_state():
  rho_e = random_density(np.random.default_rng(1), 2)
  rho_n = random_density(np.random.default_rng(2), 2)
  np.testing.assert_allclose(
    partial_trace_electron(np.kron(rho_e, rho_n)), rho_n, atol=1e-14
  )
  with pytest.raises(InvalidInputError):
    partial_trace_electron(np.eye(2) / 2)


def test_bloch_trajectory_starts_up():
  p = nuclear_flip_problem(segments=10, horizon=20.0)
  times, vectors = bloch_trajectory(p, p.program(np.zeros((10, 2))))
  assert times.shape == (11,) and vectors.shape == (11, 3)
  assert times[-1] == pytest.approx(20.0)
  np.testing.assert_allclose(vectors[0], [0, 0, 1])
  assert np.all(np.linalg.norm(vectors, axis=1) <= 1 + 1e-9)
  with pytest.raises(WrongObjectiveError):
    gp = _random_problem(0, "gate")
    bloch_trajectory(gp, gp.program(np.zeros((6, 2))))


@pytest.mark.slow
def test_malonic_nuclear_flip():
  p = nuclear_flip_problem()
  result = grape_multistart(p, starts=4, iters=500)
  assert transfer_fidelity(p, result.program) >= 0.99
  assert result.program.within(0.1)
  _, vectors = bloch_trajectory(p, result.program)
  assert vectors[-1, 2] <= -0.98
