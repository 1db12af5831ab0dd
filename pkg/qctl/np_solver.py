import numpy as np

# (-i)^k and i^k, indexed by k mod 4
CONJ_Y_PHASE = np.array([1, -1j, -1, 1j])
Y_PHASE = np.array([1, 1j, -1, -1j])


def popcount(a: np.ndarray) -> np.ndarray:
  a = np.asarray(a, dtype=np.int64)
  count = np.zeros_like(a)
  while np.any(a):
    count += a & 1
    a = a >> 1
  return count


def hadamard(n: int) -> np.ndarray:
  """Sylvester matrix, h[z, j] = (-1)^popcount(z & j)."""
  h = np.ones((1, 1))
  for _ in range(n):
    h = np.block([[h, h], [h, -h]])
  return h


class PauliSolver(object):
  """Numpy-based Pauli coefficient solver (Walsh-Hadamard formulation).

  Coefficients are laid out as c[x, z] where x and z are the bit masks of
  the string (qubit 1 is the most significant bit); X = (1, 0), Z = (0, 1),
  Y = (1, 1).
  """

  def __init__(self) -> None:
    super().__init__()
    self.n = -1

  def reset(self, n: int) -> None:
    if n == self.n:
      return
    self.n = n
    dim = 1 << n
    j = np.arange(dim)
    self.rows = j[None, :] ^ j[:, None]  # rows[x, j] = j ^ x
    self.cols = np.broadcast_to(j[None, :], (dim, dim))
    self.h = hadamard(n)
    ny = popcount(j[:, None] & j[None, :])
    self.conj_phase = CONJ_Y_PHASE[ny % 4]
    self.phase = Y_PHASE[ny % 4]

  def coefficients(self, u: np.ndarray, n: int) -> np.ndarray:
    """c[x, z] = 2^-n Tr(P_xz^dag U); each trace touches 2^n entries."""
    self.reset(n)
    # v[x, j] = U[j ^ x, j]: the only entries P_xz^dag can pick up
    v = u[self.rows, self.cols]
    return (v @ self.h) * self.conj_phase / (1 << n)

  def operator(self, c: np.ndarray, n: int) -> np.ndarray:
    """sum_xz c[x, z] P_xz."""
    self.reset(n)
    v = (c * self.phase) @ self.h
    u = np.zeros_like(v)
    u[self.rows, self.cols] = v
    return u
