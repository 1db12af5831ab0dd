import numpy as np
from numba import njit


@njit
def popcount(a: int) -> int:
  c = 0
  while a:
    a &= a - 1
    c += 1
  return c


@njit
def pauli_coefficients(u: np.ndarray, n: int) -> np.ndarray:
  dim = 1 << n
  out = np.zeros((dim, dim), np.complex128)
  conj_phase = np.array([1 + 0j, -1j, -1 + 0j, 1j])
  for x in range(dim):
    for z in range(dim):
      acc = 0j
      for j in range(dim):
        if popcount(j & z) & 1:
          acc -= u[j ^ x, j]
        else:
          acc += u[j ^ x, j]
      out[x, z] = acc * conj_phase[popcount(x & z) % 4] / dim
  return out


@njit
def pauli_operator(c: np.ndarray, n: int) -> np.ndarray:
  dim = 1 << n
  out = np.zeros((dim, dim), np.complex128)
  phase = np.array([1 + 0j, 1j, -1 + 0j, -1j])
  for x in range(dim):
    for z in range(dim):
      a = c[x, z] * phase[popcount(x & z) % 4]
      if a == 0:
        continue
      for j in range(dim):
        if popcount(j & z) & 1:
          out[j ^ x, j] -= a
        else:
          out[j ^ x, j] += a
  return out


class PauliSolver(object):
  """Numba-based Pauli coefficient solver, one O(2^n) loop per string."""

  def __init__(self) -> None:
    super().__init__()

  def coefficients(self, u: np.ndarray, n: int) -> np.ndarray:
    return pauli_coefficients(np.ascontiguousarray(u, np.complex128), n)

  def operator(self, c: np.ndarray, n: int) -> np.ndarray:
    return pauli_operator(np.ascontiguousarray(c, np.complex128), n)
