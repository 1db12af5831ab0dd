"""Pauli-group error analysis of realized gates.

A realized gate U_R is compared to its target U_T through the error operator
U_E = U_T^dag U_R, expanded over the n-qubit Pauli group. Weight-1 terms are
what a distance-3 code corrects; the penalized objective trades fidelity
against error mass at weight 2 and above.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from qctl import np_solver
from qctl.errors import InvalidInputError
from qctl.linalg import (
  UnitaryOperator,
  as_matrix,
  pauli_matrix,
  tensor_product,
)

DEFAULT_BACKEND = "numpy"
ALL_BACKEND = ["numpy"]

try:
  from qctl import numba_solver
  ALL_BACKEND += ["numba"]
except ImportError:
  numba_solver = None  # type: ignore

_INSTALL_HINT = {
  "numpy": "Please run `pip install numpy`.",
  "numba": "Please run `pip install numba`.",
}

_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


@dataclass(frozen=True)
class PauliString:
  """Tensor product of single-qubit Paulis; letter k acts on qubit k + 1."""

  letters: str

  def __post_init__(self) -> None:
    if not self.letters or set(self.letters) - set("IXYZ"):
      raise InvalidInputError(f"Invalid Pauli string {self.letters!r}.")

  @classmethod
  def from_masks(cls, x: int, z: int, n: int) -> "PauliString":
    bits = [((x >> (n - 1 - k)) & 1, (z >> (n - 1 - k)) & 1) for k in range(n)]
    return cls("".join(_LETTER[b] for b in bits))

  @property
  def n(self) -> int:
    return len(self.letters)

  @property
  def weight(self) -> int:
    return sum(c != "I" for c in self.letters)

  @property
  def x_mask(self) -> int:
    return sum(1 << (self.n - 1 - k) for k, c in enumerate(self.letters)
               if c in "XY")

  @property
  def z_mask(self) -> int:
    return sum(1 << (self.n - 1 - k) for k, c in enumerate(self.letters)
               if c in "ZY")

  def matrix(self) -> np.ndarray:
    mats = [pauli_matrix(c) for c in self.letters]
    if len(mats) == 1:
      return mats[0]
    return tensor_product(*mats)

  def apply(self, state: np.ndarray) -> np.ndarray:
    """P|psi> in O(2^n): P|j> = i^#Y (-1)^popcount(j & z) |j ^ x>."""
    psi = np.asarray(state, dtype=complex).reshape(-1)
    if psi.shape[0] != 1 << self.n:
      raise InvalidInputError(
        f"State of length {psi.shape[0]} does not fit {self.n} qubits."
      )
    j = np.arange(psi.shape[0])
    x, z = self.x_mask, self.z_mask
    sign = 1 - 2 * (np_solver.popcount(j & z) & 1)
    phase = np_solver.Y_PHASE[np_solver.popcount(np.array(x & z)) % 4]
    out = np.empty_like(psi)
    out[j ^ x] = phase * sign * psi
    return out

  def commutes_with(self, other: "PauliString") -> bool:
    if other.n != self.n:
      raise InvalidInputError("Pauli strings act on different qubit counts.")
    anti = sum(
      a != "I" and b != "I" and a != b
      for a, b in zip(self.letters, other.letters)
    )
    return anti % 2 == 0

  def __str__(self) -> str:
    return self.letters


class PauliProcessor(object):
  """Dispatch the 4^n coefficient sweep to an available backend."""

  def __init__(self, backend: str = DEFAULT_BACKEND):
    core: Optional[Any] = None
    if backend == "numpy":
      core = np_solver.PauliSolver()
    elif backend == "numba" and numba_solver is not None:
      core = numba_solver.PauliSolver()
    if core is None:
      hint = _INSTALL_HINT.get(backend, "")
      raise InvalidInputError(f"Invalid backend {backend}. {hint}".strip())
    self.backend = backend
    self.core = core

  def coefficients(self, u: np.ndarray, n: int) -> np.ndarray:
    return self.core.coefficients(u, n)

  def operator(self, c: np.ndarray, n: int) -> np.ndarray:
    return self.core.operator(c, n)


_PROCESSORS: Dict[str, PauliProcessor] = {}


def get_processor(backend: str = DEFAULT_BACKEND) -> PauliProcessor:
  if backend not in _PROCESSORS:
    _PROCESSORS[backend] = PauliProcessor(backend)
  return _PROCESSORS[backend]


def qubit_count(u: Any, n: Optional[int] = None) -> int:
  dim = as_matrix(u).shape[0]
  if dim & (dim - 1):
    raise InvalidInputError(f"Dimension {dim} is not a power of two.")
  bits = dim.bit_length() - 1
  if n is not None and n != bits:
    raise InvalidInputError(f"Dimension {dim} does not match n={n} qubits.")
  return bits


def weight_table(n: int) -> np.ndarray:
  """weight[x, z] = number of non-identity letters of P_xz."""
  m = np.arange(1 << n)
  return np_solver.popcount(m[:, None] | m[None, :])


def pauli_coefficient_array(
  u: Any, n: Optional[int] = None, backend: str = DEFAULT_BACKEND
) -> np.ndarray:
  m = as_matrix(u)
  n = qubit_count(m, n)
  return get_processor(backend).coefficients(m, n)


def pauli_expand(
  u: Any, n: int, backend: str = DEFAULT_BACKEND
) -> Dict[PauliString, complex]:
  c = pauli_coefficient_array(u, n, backend)
  dim = 1 << n
  return {
    PauliString.from_masks(x, z, n): complex(c[x, z])
    for x in range(dim)
    for z in range(dim)
  }


def reconstruct(
  coeffs: Dict[PauliString, complex], backend: str = DEFAULT_BACKEND
) -> np.ndarray:
  """sum_P c_P P."""
  if not coeffs:
    raise InvalidInputError("Empty Pauli expansion.")
  n = next(iter(coeffs)).n
  c = np.zeros((1 << n, 1 << n), dtype=complex)
  for p, v in coeffs.items():
    c[p.x_mask, p.z_mask] = v
  return get_processor(backend).operator(c, n)


@dataclass(frozen=True)
class PauliWeightSpectrum:
  W: Tuple[float, ...]

  @property
  def n(self) -> int:
    return len(self.W) - 1

  def __getitem__(self, k: int) -> float:
    return self.W[k]


def weight_spectrum(coeffs: Any) -> PauliWeightSpectrum:
  """W_k = sum over weight-k strings of |c_P|^2.

  Accepts the mapping from ``pauli_expand`` or a c[x, z] coefficient array.
  """
  if isinstance(coeffs, dict):
    if not coeffs:
      raise InvalidInputError("Empty Pauli expansion.")
    n = next(iter(coeffs)).n
    W = np.zeros(n + 1)
    for p, v in coeffs.items():
      W[p.weight] += abs(v)**2
  else:
    c = np.asarray(coeffs)
    n = c.shape[0].bit_length() - 1
    W = np.bincount(
      weight_table(n).reshape(-1),
      weights=np.abs(c.reshape(-1))**2,
      minlength=n + 1,
    )
  return PauliWeightSpectrum(tuple(float(w) for w in W))


@dataclass(frozen=True)
class PenaltyWeights:
  """lambda_k for k = 2 .. n, stored from k = 2 upwards."""

  lam: Tuple[float, ...]

  def __post_init__(self) -> None:
    lam = tuple(float(v) for v in self.lam)
    if any(not np.isfinite(v) or v < 0 for v in lam):
      raise InvalidInputError("Penalty weights must be finite and >= 0.")
    object.__setattr__(self, "lam", lam)

  @classmethod
  def default(cls, n: int) -> "PenaltyWeights":
    return cls(tuple(10.0**(k - 2) for k in range(2, n + 1)))

  def as_vector(self, n: int) -> np.ndarray:
    """Length n + 1, zero at weights 0 and 1."""
    if len(self.lam) != max(n - 1, 0):
      raise InvalidInputError(
        f"Need {max(n - 1, 0)} penalty weights for n={n}, got {len(self.lam)}."
      )
    vec = np.zeros(n + 1)
    vec[2:] = self.lam
    return vec


def error_operator(
  u_t: UnitaryOperator, u_r: UnitaryOperator
) -> UnitaryOperator:
  """U_E = U_T^dag U_R."""
  if as_matrix(u_t).shape != as_matrix(u_r).shape:
    raise InvalidInputError("Target and realized gates differ in dimension.")
  if not isinstance(u_t, UnitaryOperator):
    u_t = UnitaryOperator(u_t)
  if not isinstance(u_r, UnitaryOperator):
    u_r = UnitaryOperator(u_r)
  return UnitaryOperator(u_t.matrix.conj().T @ u_r.matrix)


def _checked_pair(u: Any, u_t: Any) -> Tuple[np.ndarray, np.ndarray, int]:
  m, mt = as_matrix(u), as_matrix(u_t)
  if m.shape != mt.shape:
    raise InvalidInputError("Realized and target gates differ in dimension.")
  return m, mt, qubit_count(m)


def penalized_objective(
  u: Any,
  u_t: Any,
  lam: PenaltyWeights,
  backend: str = DEFAULT_BACKEND,
) -> float:
  """Re F(U) - sum_{k >= 2} lambda_k W_k(U_T^dag U)."""
  m, mt, n = _checked_pair(u, u_t)
  dim = m.shape[0]
  fidelity = float(np.real(np.vdot(mt, m)) / dim)
  c = pauli_coefficient_array(mt.conj().T @ m, n, backend)
  W = np.asarray(weight_spectrum(c).W)
  return fidelity - float(np.dot(lam.as_vector(n), W))


def penalized_objective_adjoint(
  u: Any,
  u_t: Any,
  lam: PenaltyWeights,
  backend: str = DEFAULT_BACKEND,
) -> Tuple[float, np.ndarray]:
  """Objective value and A with d(objective) = Re Tr(A dU).

  dW_k = 2 Re sum_P conj(c_P) 2^-n Tr(P U_T^dag dU), and sum_P a_P P is one
  inverse expansion, so the whole penalty collapses into one matrix.
  """
  m, mt, n = _checked_pair(u, u_t)
  dim = m.shape[0]
  proc = get_processor(backend)
  c = proc.coefficients(mt.conj().T @ m, n)
  lam_xz = lam.as_vector(n)[weight_table(n)]
  W = np.asarray(weight_spectrum(c).W)
  value = float(np.real(np.vdot(mt, m)) / dim) - float(
    np.dot(lam.as_vector(n), W)
  )
  q = proc.operator(lam_xz * c.conj(), n) @ mt.conj().T / dim
  return value, mt.conj().T / dim - 2 * q


def penalized_objective_fn(
  u_t: Any,
  lam: PenaltyWeights,
  backend: str = DEFAULT_BACKEND,
) -> Callable[[np.ndarray], float]:
  """The penalized objective as a one-argument callable for optimizers."""
  mt = as_matrix(u_t)

  def objective(u: np.ndarray) -> float:
    return penalized_objective(u, mt, lam, backend)

  return objective


def pauli_strings(labels: Sequence[str]) -> Tuple[PauliString, ...]:
  return tuple(PauliString(s) for s in labels)
