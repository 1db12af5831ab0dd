"""Lindblad and homodyne stochastic master equations with current feedback.

drho = {-i[H, rho] + sum_k D[A_k] rho} dt + sum_c H[B_c] rho dW_c

D[A]rho = A rho A^dag - {A^dag A, rho}/2 and
H[B]rho = B rho + rho B^dag - Tr(B rho + rho B^dag) rho. Conditional states
are stepped with a Kraus map driven by the record dy, which keeps them positive.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from qctl.errors import IntegrationError, InvalidInputError, TrajectoryError
from qctl.linalg import HermitianOperator, as_matrix

FEEDBACK_MODES = ("off", "current_proportional")
DENSITY_TOL = 1e-8
TRACE_DRIFT_TOL = 1e-6
TRACE_COLLAPSE_TOL = 1e-6


def _operator(a: Any, dim: Optional[int] = None) -> np.ndarray:
  m = as_matrix(a)
  if dim is not None and m.shape[0] != dim:
    raise InvalidInputError(
      f"Operator of dimension {m.shape[0]} does not fit dimension {dim}."
    )
  return m


def _frozen(m: np.ndarray) -> np.ndarray:
  m = np.array(m, dtype=complex, copy=True)
  m.setflags(write=False)
  return m


@dataclass(frozen=True, eq=False)
class LindbladModel:
  H: HermitianOperator
  collapse_ops: Tuple[np.ndarray, ...] = ()

  def __post_init__(self) -> None:
    h = self.H if isinstance(self.H, HermitianOperator) else HermitianOperator(
      self.H
    )
    ops = tuple(_frozen(_operator(a, h.dim)) for a in self.collapse_ops)
    object.__setattr__(self, "H", h)
    object.__setattr__(self, "collapse_ops", ops)

  @property
  def dim(self) -> int:
    return self.H.dim


@dataclass(frozen=True, eq=False)
class MeasurementChannel:
  B: np.ndarray

  def __post_init__(self) -> None:
    object.__setattr__(self, "B", _frozen(_operator(self.B)))

  @property
  def dim(self) -> int:
    return self.B.shape[0]


@dataclass(frozen=True, eq=False)
class FeedbackRule:
  """H -> H + gain * (dy/dt) * actuator for the next step."""

  gain: float = 0.0
  actuator: Optional[HermitianOperator] = None
  mode: str = "off"

  def __post_init__(self) -> None:
    if self.mode not in FEEDBACK_MODES:
      raise InvalidInputError(f"Unknown feedback mode {self.mode!r}.")
    if not math.isfinite(self.gain):
      raise InvalidInputError("Feedback gain must be finite.")
    if self.mode == "current_proportional" and self.actuator is None:
      raise InvalidInputError("Current feedback needs an actuator.")
    if self.actuator is not None and not isinstance(
      self.actuator, HermitianOperator
    ):
      object.__setattr__(self, "actuator", HermitianOperator(self.actuator))

  @property
  def active(self) -> bool:
    return self.mode == "current_proportional" and self.gain != 0


NO_FEEDBACK = FeedbackRule()


@dataclass(frozen=True, eq=False)
class DensityEvolution:
  times: np.ndarray
  states: np.ndarray

  @property
  def final(self) -> np.ndarray:
    return self.states[-1]


@dataclass(frozen=True, eq=False)
class QuantumTrajectory:
  """Conditional states at ``times``; record and noise hold one row per step."""

  times: np.ndarray
  states: np.ndarray
  record: np.ndarray
  noise: np.ndarray
  seed: int

  @property
  def final(self) -> np.ndarray:
    return self.states[-1]


def _check_density(rho: Any, dim: int) -> np.ndarray:
  m = _operator(rho, dim)
  if np.max(np.abs(m - m.conj().T)) > DENSITY_TOL:
    raise InvalidInputError("Density matrix is not Hermitian.")
  if abs(np.trace(m) - 1) > DENSITY_TOL:
    raise InvalidInputError(f"Density matrix trace {np.trace(m).real} != 1.")
  if np.min(np.linalg.eigvalsh(m)) < -DENSITY_TOL:
    raise InvalidInputError("Density matrix is not positive semidefinite.")
  return m


def _dissipate(a: np.ndarray, rho: np.ndarray) -> np.ndarray:
  ad = a.conj().T
  ada = ad @ a
  return a @ rho @ ad - (ada @ rho + rho @ ada) / 2


def _innovate(b: np.ndarray, rho: np.ndarray) -> np.ndarray:
  x = b @ rho + rho @ b.conj().T
  tr = np.trace(x, axis1=-2, axis2=-1)
  return x - np.asarray(tr)[..., None, None] * rho


def dissipator_apply(a: Any, rho: Any) -> np.ndarray:
  ma, m = as_matrix(a), as_matrix(rho)
  if ma.shape != m.shape:
    raise InvalidInputError("Collapse operator and state differ in dimension.")
  return _dissipate(ma, m)


def measurement_superop_apply(b: Any, rho: Any) -> np.ndarray:
  mb, m = as_matrix(b), as_matrix(rho)
  if mb.shape != m.shape:
    raise InvalidInputError(
      "Measurement operator and state differ in dimension."
    )
  return _innovate(mb, m)


def _rhs(
  h: np.ndarray, collapse: Sequence[np.ndarray], rho: np.ndarray
) -> np.ndarray:
  out = -1j * (h @ rho - rho @ h)
  for a in collapse:
    out = out + _dissipate(a, rho)
  return out


def _rk4(
  h: np.ndarray, collapse: Sequence[np.ndarray], rho: np.ndarray, dt: float
) -> np.ndarray:
  k1 = _rhs(h, collapse, rho)
  k2 = _rhs(h, collapse, rho + dt / 2 * k1)
  k3 = _rhs(h, collapse, rho + dt / 2 * k2)
  k4 = _rhs(h, collapse, rho + dt * k3)
  return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _hermitize(rho: np.ndarray) -> np.ndarray:
  return (rho + np.swapaxes(rho.conj(), -1, -2)) / 2


def time_grid(T: float, dt: float) -> Tuple[int, float]:
  """Number of steps and the step that lands exactly on T."""
  if not (math.isfinite(dt) and dt > 0):
    raise InvalidInputError(f"dt must be positive, got {dt}.")
  if not (math.isfinite(T) and T >= 0):
    raise InvalidInputError(f"T must be nonnegative, got {T}.")
  if T == 0:
    return 0, dt
  n = max(1, math.ceil(T / dt - 1e-9))
  return n, T / n


def saved_steps(n_steps: int, save_every: int) -> List[int]:
  if save_every < 1:
    raise InvalidInputError("save_every must be at least 1.")
  steps = list(range(0, n_steps + 1, save_every))
  if steps[-1] != n_steps:
    steps.append(n_steps)
  return steps


def lindblad_propagate(
  model: LindbladModel,
  rho0: Any,
  T: float,
  dt: float,
  save_every: int = 1,
) -> DensityEvolution:
  """Fixed-step RK4; states are hermitized after every step."""
  rho = _check_density(rho0, model.dim)
  n_steps, h = time_grid(T, dt)
  saved = saved_steps(n_steps, save_every)
  keep = set(saved)
  ham = np.array(model.H.matrix)
  states = [rho.copy()]
  for step in range(1, n_steps + 1):
    rho = _hermitize(_rk4(ham, model.collapse_ops, rho, h))
    drift = abs(np.trace(rho).real - 1)
    if not drift <= TRACE_DRIFT_TOL:
      raise IntegrationError(
        f"Trace drifted by {drift:.3e} at t = {step * h:.6g}; reduce dt."
      )
    if step in keep:
      states.append(rho.copy())
  return DensityEvolution(np.array(saved) * h, np.array(states))


def _pair_channels(
  collapse: Sequence[np.ndarray], bs: Sequence[np.ndarray]
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
  """Measured operators with no equal collapse operator, and the collapse
  operators left once every measured operator has claimed its twin."""
  free = list(collapse)
  unpaired = []
  for b in bs:
    for i, a in enumerate(free):
      if np.array_equal(a, b):
        del free[i]
        break
    else:
      unpaired.append(b)
  return unpaired, free


def _kraus_step(
  h_batch: np.ndarray,
  damp: np.ndarray,
  bs: Sequence[np.ndarray],
  jumps: Sequence[np.ndarray],
  rho: np.ndarray,
  dy: np.ndarray,
  dt: float,
) -> np.ndarray:
  """M rho M^dag + dt sum_k A_k rho A_k^dag, unnormalized.

  M = I - (iH + damp/2) dt + sum_c B_c dy_c
      + sum_{c,c'} B_c B_c' (dy_c dy_c' - delta_cc' dt) / 2
  """
  m = np.eye(rho.shape[-1]) - (1j * h_batch + damp / 2) * dt
  for c, b in enumerate(bs):
    m = m + b * dy[:, c, None, None]
    for c2, b2 in enumerate(bs):
      w = dy[:, c] * dy[:, c2] - (dt if c == c2 else 0.0)
      m = m + (b @ b2) * (w / 2)[:, None, None]
  out = m @ rho @ np.swapaxes(m.conj(), -1, -2)
  for a in jumps:
    out = out + dt * (a @ rho @ a.conj().T)
  return out


def sme_ensemble(
  model: LindbladModel,
  channels: Sequence[MeasurementChannel],
  fb: FeedbackRule,
  rho0: Any,
  T: float,
  dt: float,
  trajectories: int,
  seed: int,
  save_every: int = 1,
) -> List[QuantumTrajectory]:
  """Integrate ``trajectories`` conditional states as one batch.

  Trajectory k draws its Wiener increments from SeedSequence([seed, k]).
  With measurement channels each step is a Kraus map built from the
  record dy of that step, so every conditional state stays positive; the
  record is evaluated at the start state. Each measured B is matched
  with one equal collapse operator, and a measured B without a match
  contributes its own D[B]. Without channels the step is the RK4 step of
  ``lindblad_propagate``.
  """
  rho = _check_density(rho0, model.dim)
  if trajectories < 1:
    raise InvalidInputError("Need at least one trajectory.")
  bs = [_operator(c.B, model.dim) for c in channels]
  if fb.actuator is not None and fb.actuator.dim != model.dim:
    raise InvalidInputError("Feedback actuator does not fit the model.")
  n_steps, h = time_grid(T, dt)
  saved = saved_steps(n_steps, save_every)
  keep = set(saved)
  n_ch = len(bs)

  noise = np.zeros((trajectories, n_steps, n_ch))
  if n_ch:
    for k in range(trajectories):
      rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
      noise[k] = rng.normal(0.0, math.sqrt(h), size=(n_steps, n_ch))
  record = np.zeros_like(noise)

  ham = np.array(model.H.matrix)
  act = None if fb.actuator is None else np.array(fb.actuator.matrix)
  unpaired, jumps = _pair_channels(model.collapse_ops, bs)
  damp = sum(
    (a.conj().T @ a for a in list(model.collapse_ops) + unpaired),
    np.zeros(ham.shape, dtype=complex),
  )
  rho = np.broadcast_to(rho, (trajectories,) + rho.shape).copy()
  h_batch = np.broadcast_to(ham, rho.shape).copy()
  states = [rho.copy()]
  for step in range(n_steps):
    dw = noise[:, step, :]
    for c, b in enumerate(bs):
      mean = np.trace(b @ rho + rho @ b.conj().T, axis1=1, axis2=2).real
      record[:, step, c] = mean * h + dw[:, c]
    if n_ch:
      nxt = _kraus_step(
        h_batch, damp, bs, jumps, rho, record[:, step, :], h
      )
    else:
      nxt = _rk4(h_batch, model.collapse_ops, rho, h)
    nxt = _hermitize(nxt)
    tr = np.trace(nxt, axis1=1, axis2=2).real
    if not np.all(tr >= TRACE_COLLAPSE_TOL):
      k = int(np.argmin(np.where(np.isfinite(tr), tr, -np.inf)))
      raise TrajectoryError(
        f"Trajectory {k} lost its trace ({tr[k]:.3e}) at t = "
        f"{(step + 1) * h:.6g}; reduce dt."
      )
    rho = nxt / tr[:, None, None]
    if fb.active and act is not None:
      current = record[:, step, :].sum(axis=1) / h
      h_batch = ham[None] + fb.gain * current[:, None, None] * act[None]
    if step + 1 in keep:
      states.append(rho.copy())

  times = np.array(saved) * h
  stacked = np.stack(states, axis=1)
  return [
    QuantumTrajectory(times, stacked[k], record[k], noise[k], seed)
    for k in range(trajectories)
  ]


def sme_trajectory(
  model: LindbladModel,
  channels: Sequence[MeasurementChannel],
  fb: FeedbackRule,
  rho0: Any,
  T: float,
  dt: float,
  seed: int,
  save_every: int = 1,
) -> QuantumTrajectory:
  return sme_ensemble(
    model, channels, fb, rho0, T, dt, 1, seed, save_every=save_every
  )[0]


def ensemble_average(
  trajectories: Sequence[QuantumTrajectory]
) -> DensityEvolution:
  if not trajectories:
    raise InvalidInputError("Cannot average an empty ensemble.")
  times = trajectories[0].times
  for tr in trajectories[1:]:
    if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
      raise InvalidInputError("Trajectories have different time grids.")
  mean = np.mean([tr.states for tr in trajectories], axis=0)
  return DensityEvolution(times.copy(), mean)


def liouvillian(model: LindbladModel) -> np.ndarray:
  """d^2 x d^2 generator acting on column-stacked vec(rho)."""
  d = model.dim
  eye = np.eye(d)
  h = np.array(model.H.matrix)
  out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
  for a in model.collapse_ops:
    ada = a.conj().T @ a
    out += np.kron(a.conj(), a) - (np.kron(eye, ada) + np.kron(ada.T, eye)) / 2
  return out


def steady_state(model: LindbladModel, rcond: float = 1e-10) -> np.ndarray:
  kernel = null_space(liouvillian(model), rcond=rcond)
  if kernel.shape[1] == 0:
    raise InvalidInputError("Liouvillian has no null vector.")
  if kernel.shape[1] > 1:
    warnings.warn(
      f"Steady state is not unique ({kernel.shape[1]} null vectors); "
      "returning the first."
    )
  d = model.dim
  rho = kernel[:, 0].reshape(d, d, order="F")
  rho = _hermitize(rho / np.trace(rho))
  return rho


def homodyne_model(
  H: Any,
  measured: Sequence[Any],
  extra_collapse: Sequence[Any] = (),
) -> Tuple[LindbladModel, List[MeasurementChannel]]:
  """Unit-efficiency homodyne: each C enters as D[C] and as H[C]."""
  ops = [as_matrix(c) for c in measured]
  collapse = tuple(ops) + tuple(as_matrix(a) for a in extra_collapse)
  model = LindbladModel(H, collapse)
  return model, [MeasurementChannel(c) for c in ops]


def trace_distance(rho: Any, sigma: Any) -> float:
  a, b = as_matrix(rho), as_matrix(sigma)
  if a.shape != b.shape:
    raise InvalidInputError("States differ in dimension.")
  return float(np.sum(np.abs(np.linalg.eigvalsh(_hermitize(a - b)))) / 2)
