from dataclasses import dataclass
from functools import reduce
from typing import Any, Optional, Tuple, Union

import numpy as np

from qctl.errors import InvalidInputError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def pauli_matrix(letter: str) -> np.ndarray:
  try:
    return _PAULI[letter].copy()
  except KeyError:
    raise InvalidInputError(f"Unknown Pauli letter {letter!r}.") from None


def as_matrix(a: Any) -> np.ndarray:
  """Coerce ``a`` to a finite, square, complex 2-d array."""
  if isinstance(a, (HermitianOperator, UnitaryOperator)):
    return a.matrix
  m = np.asarray(a, dtype=complex)
  if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
    raise InvalidInputError(
      f"Expected a non-empty square matrix, got {m.shape}."
    )
  if not np.all(np.isfinite(m)):
    raise InvalidInputError("Matrix has non-finite entries.")
  return m


def is_hermitian(a: Any, tol: float = HERMITIAN_TOL) -> bool:
  m = as_matrix(a)
  return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def is_unitary(a: Any, tol: float = UNITARY_TOL) -> bool:
  m = as_matrix(a)
  err = m.conj().T @ m - np.eye(m.shape[0])
  return bool(np.max(np.abs(err)) <= tol)


def _freeze(m: np.ndarray) -> np.ndarray:
  m = np.array(m, dtype=complex, copy=True)
  m.setflags(write=False)
  return m


@dataclass(frozen=True, eq=False)
class HermitianOperator:
  """Dense Hermitian matrix, checked to ``HERMITIAN_TOL`` at construction."""

  matrix: np.ndarray

  def __post_init__(self) -> None:
    m = as_matrix(self.matrix)
    if not is_hermitian(m):
      raise InvalidInputError(
        f"Matrix is not Hermitian: max |H - H^dag| = "
        f"{np.max(np.abs(m - m.conj().T)):.3e}."
      )
    object.__setattr__(self, "matrix", _freeze(m))

  @property
  def dim(self) -> int:
    return self.matrix.shape[0]

  def __array__(self, dtype: Any = None, copy: Optional[bool] = None) -> Any:
    return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
  """Dense unitary matrix, checked to ``UNITARY_TOL`` at construction."""

  matrix: np.ndarray

  def __post_init__(self) -> None:
    m = as_matrix(self.matrix)
    if not is_unitary(m):
      raise InvalidInputError("Matrix is not unitary to 1e-10.")
    object.__setattr__(self, "matrix", _freeze(m))

  @property
  def dim(self) -> int:
    return self.matrix.shape[0]

  def dag(self) -> "UnitaryOperator":
    return UnitaryOperator(self.matrix.conj().T)

  def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
    return UnitaryOperator(self.matrix @ as_matrix(other))

  def __array__(self, dtype: Any = None, copy: Optional[bool] = None) -> Any:
    return np.asarray(self.matrix, dtype=dtype)


OperatorLike = Union[np.ndarray, HermitianOperator, UnitaryOperator]


def spectral_propagator(
  h: np.ndarray, t: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  """exp(-i t h) for Hermitian ``h``; also returns (eigvals, eigvecs).

  No validation, this is the inner-loop path.
  """
  w, v = np.linalg.eigh(h)
  return (v * np.exp(-1j * t * w)) @ v.conj().T, w, v


def matrix_exponential_unitary(
  h: Union[HermitianOperator, np.ndarray], t: float
) -> UnitaryOperator:
  if not np.isfinite(t):
    raise InvalidInputError(f"Evolution time must be finite, got {t}.")
  if not isinstance(h, HermitianOperator):
    h = HermitianOperator(h)
  u, _, _ = spectral_propagator(h.matrix, t)
  return UnitaryOperator(u)


def _pair(a: Any, b: Any) -> Tuple[np.ndarray, np.ndarray]:
  ma, mb = as_matrix(a), as_matrix(b)
  if ma.shape != mb.shape:
    raise InvalidInputError(f"Dimension mismatch: {ma.shape} vs {mb.shape}.")
  return ma, mb


def hilbert_schmidt_inner(a: Any, b: Any) -> complex:
  """Tr(A^dag B)."""
  ma, mb = _pair(a, b)
  return complex(np.vdot(ma, mb))


def tensor_product(a: Any, b: Any, *more: Any) -> np.ndarray:
  return reduce(np.kron, [as_matrix(m) for m in (a, b) + more])


def commutator(a: Any, b: Any) -> np.ndarray:
  ma, mb = _pair(a, b)
  return ma @ mb - mb @ ma


def operator_norm_distance(a: Any, b: Any) -> float:
  """Spectral norm of A - B."""
  ma, mb = _pair(a, b)
  return float(np.linalg.norm(ma - mb, 2))
