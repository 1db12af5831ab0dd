"""Piecewise-constant pulse optimization (GRAPE) and Bloch trajectories.

Every objective reports its value J(U) together with a matrix A such that
dJ = Re Tr(A dU); segment gradients then follow from forward and backward
propagator products and the exact derivative of each segment exponential.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from qctl.errors import InvalidInputError, WrongObjectiveError
from qctl.linalg import HermitianOperator, UnitaryOperator, as_matrix
from qctl.pauli import PenaltyWeights, penalized_objective_adjoint
from qctl.spin import HyperfineParams, build_1e1n_hamiltonian

CPU_COUNT = os.cpu_count() or 1
GRAD_TOL = 1e-8
TRACE_TOL = 1e-9
DEGENERATE_TOL = 1e-9


def _unit_vector(v: Any, name: str) -> np.ndarray:
  psi = np.asarray(v, dtype=complex).reshape(-1)
  if not np.all(np.isfinite(psi)) or abs(np.linalg.norm(psi) - 1) > 1e-10:
    raise InvalidInputError(f"{name} must be a finite unit vector.")
  psi = psi.copy()
  psi.setflags(write=False)
  return psi


@dataclass(frozen=True, eq=False)
class StateTransfer:
  """|<psi_goal| U |psi0>|^2."""

  psi0: np.ndarray
  psi_goal: np.ndarray

  def __post_init__(self) -> None:
    psi0 = _unit_vector(self.psi0, "psi0")
    goal = _unit_vector(self.psi_goal, "psi_goal")
    if psi0.shape != goal.shape:
      raise InvalidInputError("psi0 and psi_goal differ in dimension.")
    object.__setattr__(self, "psi0", psi0)
    object.__setattr__(self, "psi_goal", goal)

  @property
  def dim(self) -> int:
    return self.psi0.shape[0]

  def adjoint(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
    p = np.outer(self.psi0, self.psi_goal.conj())
    a = np.sum(p * u.T)
    return float(abs(a)**2), 2 * np.conj(a) * p


@dataclass(frozen=True, eq=False)
class GateTarget:
  """|Tr(U_T^dag U) / d|^2, blind to global phase."""

  target: UnitaryOperator

  def __post_init__(self) -> None:
    if not isinstance(self.target, UnitaryOperator):
      object.__setattr__(self, "target", UnitaryOperator(self.target))

  @property
  def dim(self) -> int:
    return self.target.dim

  def adjoint(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
    p = self.target.matrix.conj().T / self.dim
    a = np.sum(p * u.T)
    return float(abs(a)**2), 2 * np.conj(a) * p


@dataclass(frozen=True, eq=False)
class PenalizedGate:
  """Re F(U) minus the weighted error mass at Pauli weight >= 2."""

  target: UnitaryOperator
  weights: PenaltyWeights

  def __post_init__(self) -> None:
    if not isinstance(self.target, UnitaryOperator):
      object.__setattr__(self, "target", UnitaryOperator(self.target))

  @property
  def dim(self) -> int:
    return self.target.dim

  def adjoint(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
    return penalized_objective_adjoint(u, self.target.matrix, self.weights)


Objective = Union[StateTransfer, GateTarget, PenalizedGate]


@dataclass(frozen=True, eq=False)
class PulseProgram:
  dt: float
  amplitudes: np.ndarray

  def __post_init__(self) -> None:
    if not (math.isfinite(self.dt) and self.dt > 0):
      raise InvalidInputError(f"dt must be positive, got {self.dt}.")
    amps = np.array(self.amplitudes, dtype=float, copy=True)
    if amps.ndim != 2:
      raise InvalidInputError("amplitudes must be segments x channels.")
    if not np.all(np.isfinite(amps)):
      raise InvalidInputError("amplitudes have non-finite entries.")
    amps.setflags(write=False)
    object.__setattr__(self, "dt", float(self.dt))
    object.__setattr__(self, "amplitudes", amps)

  @property
  def segments(self) -> int:
    return self.amplitudes.shape[0]

  @property
  def channels(self) -> int:
    return self.amplitudes.shape[1]

  def within(self, u_max: float) -> bool:
    return bool(np.all(np.abs(self.amplitudes) <= u_max))


@dataclass(frozen=True, eq=False)
class ControlProblem:
  drift: HermitianOperator
  controls: Tuple[HermitianOperator, ...]
  objective: Objective
  horizon: float
  segments: int
  u_max: Optional[float] = None

  def __post_init__(self) -> None:
    drift = self.drift
    if not isinstance(drift, HermitianOperator):
      drift = HermitianOperator(drift)
    controls = tuple(
      h if isinstance(h, HermitianOperator) else HermitianOperator(h)
      for h in self.controls
    )
    if not controls:
      raise InvalidInputError("Need at least one control Hamiltonian.")
    if any(h.dim != drift.dim for h in controls) or \
        self.objective.dim != drift.dim:
      raise InvalidInputError("Drift, controls and objective disagree in dim.")
    if int(self.segments) != self.segments or self.segments < 1:
      raise InvalidInputError("segments must be a positive integer.")
    if not (math.isfinite(self.horizon) and self.horizon > 0):
      raise InvalidInputError("horizon must be positive.")
    if self.u_max is not None and not self.u_max > 0:
      raise InvalidInputError("u_max must be positive.")
    object.__setattr__(self, "drift", drift)
    object.__setattr__(self, "controls", controls)
    object.__setattr__(self, "segments", int(self.segments))

  @property
  def dt(self) -> float:
    return self.horizon / self.segments

  @property
  def dim(self) -> int:
    return self.drift.dim

  def program(self, amplitudes: Any) -> PulseProgram:
    return PulseProgram(self.dt, amplitudes)


def _check_shapes(p: ControlProblem, u: PulseProgram) -> None:
  if u.amplitudes.shape != (p.segments, len(p.controls)):
    raise InvalidInputError(
      f"Pulse of shape {u.amplitudes.shape} does not fit "
      f"{p.segments} segments x {len(p.controls)} channels."
    )
  if abs(u.dt - p.dt) > 1e-12 * p.dt:
    raise InvalidInputError(f"Pulse dt {u.dt} differs from problem dt {p.dt}.")


def _segment_hamiltonians(p: ControlProblem, amps: np.ndarray) -> np.ndarray:
  hc = np.stack([h.matrix for h in p.controls])
  return p.drift.matrix[None] + np.einsum("kc,cij->kij", amps, hc)


def _segment_propagators(
  p: ControlProblem, amps: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  w, v = np.linalg.eigh(_segment_hamiltonians(p, amps))
  u = (v * np.exp(-1j * p.dt * w)[:, None, :]) @ v.conj().transpose(0, 2, 1)
  return u, w, v


def _forward(props: np.ndarray) -> List[np.ndarray]:
  """R_k = U_{k-1} ... U_1 for k = 0 .. N."""
  out = [np.eye(props.shape[1], dtype=complex)]
  for uk in props:
    out.append(uk @ out[-1])
  return out


def propagate_piecewise(p: ControlProblem, u: PulseProgram) -> UnitaryOperator:
  """Product of segment exponentials, last segment leftmost."""
  _check_shapes(p, u)
  props, _, _ = _segment_propagators(p, u.amplitudes)
  return UnitaryOperator(_forward(props)[-1])


def objective_value(p: ControlProblem, u: PulseProgram) -> float:
  return p.objective.adjoint(propagate_piecewise(p, u).matrix)[0]


def transfer_fidelity(p: ControlProblem, u: PulseProgram) -> float:
  if not isinstance(p.objective, StateTransfer):
    raise WrongObjectiveError("transfer_fidelity needs a state-transfer goal.")
  return objective_value(p, u)


def _divided_differences(w: np.ndarray, dt: float) -> np.ndarray:
  """G[a, b] with dU = V (G o V^dag dH V) V^dag for U = exp(-i dt H)."""
  e = np.exp(-1j * dt * w)
  dw = w[:, None] - w[None, :]
  close = np.abs(dw) < DEGENERATE_TOL * max(1.0, float(np.max(np.abs(w))))
  safe = np.where(close, 1.0, dw)
  mid = np.exp(-1j * dt * (w[:, None] + w[None, :]) / 2)
  return np.where(close, -1j * dt * mid, (e[:, None] - e[None, :]) / safe)


def _value_and_grad(p: ControlProblem,
                    amps: np.ndarray) -> Tuple[float, np.ndarray]:
  props, w, v = _segment_propagators(p, amps)
  fwd = _forward(props)
  value, a = p.objective.adjoint(fwd[-1])
  grad = np.zeros_like(amps)
  hc = np.stack([h.matrix for h in p.controls])
  back = np.eye(p.dim, dtype=complex)  # L_k = U_N ... U_{k+1}
  for k in range(p.segments - 1, -1, -1):
    vk = v[k]
    x = vk.conj().T @ (fwd[k] @ a @ back) @ vk
    g = _divided_differences(w[k], p.dt)
    hk = vk.conj().T @ hc @ vk
    grad[k] = np.real(np.einsum("ba,ab,cab->c", x, g, hk))
    back = back @ props[k]
  return value, grad


def fidelity_gradient(p: ControlProblem, u: PulseProgram) -> np.ndarray:
  """Exact d(objective)/d(u_kc), segments x channels."""
  _check_shapes(p, u)
  return _value_and_grad(p, u.amplitudes)[1]


class GrapeResult(NamedTuple):
  program: PulseProgram
  history: List[float]


def random_program(p: ControlProblem, seed: Any) -> PulseProgram:
  """Seeded uniform amplitudes in +-u_max/2 (or +-pi/horizon unbounded)."""
  rng = np.random.default_rng(seed)
  scale = p.u_max / 2 if p.u_max is not None else np.pi / p.horizon
  amps = rng.uniform(-scale, scale, size=(p.segments, len(p.controls)))
  return p.program(amps)


def grape_optimize(
  p: ControlProblem,
  init: Optional[PulseProgram] = None,
  iters: int = 500,
  seed: int = 0,
) -> GrapeResult:
  """Bounded quasi-Newton ascent; history holds one value per iterate.

  The amplitude bound is the box of the line search, so every iterate is
  already projected onto |u| <= u_max.
  """
  if init is None:
    init = random_program(p, seed)
  _check_shapes(p, init)
  shape = init.amplitudes.shape
  x0 = np.array(init.amplitudes, dtype=float).reshape(-1)
  if p.u_max is not None:
    x0 = np.clip(x0, -p.u_max, p.u_max)

  value, grad = _value_and_grad(p, x0.reshape(shape))
  history = [value]
  if np.linalg.norm(grad) < GRAD_TOL or iters < 1:
    return GrapeResult(init, history)

  def loss(x: np.ndarray) -> Tuple[float, np.ndarray]:
    v, g = _value_and_grad(p, x.reshape(shape))
    return -v, -g.reshape(-1)

  def record(x: np.ndarray) -> None:
    history.append(_value_and_grad(p, x.reshape(shape))[0])

  bound = (None, None) if p.u_max is None else (-p.u_max, p.u_max)
  res = minimize(
    loss,
    x0,
    jac=True,
    method="L-BFGS-B",
    bounds=[bound] * x0.size,
    callback=record,
    options={"maxiter": iters, "gtol": GRAD_TOL, "ftol": 1e-15},
  )
  best = res.x if -res.fun >= history[0] else x0
  return GrapeResult(p.program(best.reshape(shape)), history)


def _run_start(args: Tuple[ControlProblem, int, int, int]) -> GrapeResult:
  p, iters, seed, index = args
  return grape_optimize(p, random_program(p, [seed, index]), iters, seed)


def grape_multistart(
  p: ControlProblem,
  starts: int = 4,
  iters: int = 500,
  seed: int = 0,
  n_cpu: int = 1,
) -> GrapeResult:
  """Best of ``starts`` seeded runs; ties go to the lower start index."""
  if starts < 1:
    raise InvalidInputError("starts must be at least 1.")
  tasks = [(p, iters, seed, k) for k in range(starts)]
  if n_cpu > 1 and starts > 1:
    with ProcessPoolExecutor(min(n_cpu, starts)) as executor:
      results = list(executor.map(_run_start, tasks))
  else:
    results = [_run_start(a) for a in tasks]
  return max(results, key=lambda r: r.history[-1])


def bloch_vector(rho: Any) -> np.ndarray:
  m = as_matrix(rho)
  if m.shape != (2, 2):
    raise InvalidInputError(f"Bloch vector needs a 2x2 state, got {m.shape}.")
  if np.max(np.abs(m - m.conj().T)) > TRACE_TOL:
    raise InvalidInputError("Density matrix is not Hermitian.")
  if abs(np.trace(m) - 1) > TRACE_TOL:
    raise InvalidInputError(f"Density matrix trace {np.trace(m).real} != 1.")
  return np.array([
    2 * m[0, 1].real,
    -2 * m[0, 1].imag,
    (m[0, 0] - m[1, 1]).real,
  ])


def partial_trace_electron(rho: Any) -> np.ndarray:
  """Trace the electron (first tensor factor) out of a 4x4 state."""
  m = as_matrix(rho)
  if m.shape != (4, 4):
    raise InvalidInputError(f"Expected a 4x4 state, got {m.shape}.")
  return np.einsum("ajak->jk", m.reshape(2, 2, 2, 2))


def bloch_trajectory(p: ControlProblem,
                     u: PulseProgram) -> Tuple[np.ndarray, np.ndarray]:
  """Nuclear Bloch vector at t = 0 and after every segment."""
  if not isinstance(p.objective, StateTransfer):
    raise WrongObjectiveError("Bloch trajectory needs a state-transfer goal.")
  _check_shapes(p, u)
  props, _, _ = _segment_propagators(p, u.amplitudes)
  psi = np.array(p.objective.psi0)
  times = p.dt * np.arange(p.segments + 1)
  vectors = np.zeros((p.segments + 1, 3))
  for k in range(p.segments + 1):
    if k:
      psi = props[k - 1] @ psi
    rho = np.outer(psi, psi.conj())
    vectors[k] = bloch_vector(partial_trace_electron(rho))
  return times, vectors


def basis_state(dim: int, index: int) -> np.ndarray:
  psi = np.zeros(dim, dtype=complex)
  psi[index] = 1
  return psi


def nuclear_flip_problem(
  params: Optional[HyperfineParams] = None,
  frame: str = "electron-rotating",
  segments: int = 100,
  horizon: float = 200.0,
  u_max: Optional[float] = 0.1,
) -> ControlProblem:
  """|up>_e|up>_n -> |up>_e|down>_n through the electron drive only.

  Time in ns, amplitudes in GHz (u_max = 0.1 GHz is a 100 MHz drive).
  """
  drift, controls = build_1e1n_hamiltonian(params or HyperfineParams(), frame)
  goal = StateTransfer(basis_state(4, 0), basis_state(4, 1))
  return ControlProblem(drift, tuple(controls), goal, horizon, segments, u_max)


def gate_problem(
  drift: Any,
  controls: Sequence[Any],
  target: Any,
  horizon: float,
  segments: int,
  u_max: Optional[float] = None,
) -> ControlProblem:
  return ControlProblem(
    HermitianOperator(as_matrix(drift)),
    tuple(HermitianOperator(as_matrix(h)) for h in controls),
    GateTarget(UnitaryOperator(as_matrix(target))),
    horizon,
    segments,
    u_max,
  )
