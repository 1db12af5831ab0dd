import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from qctl.errors import InvalidInputError
from qctl.linalg import HermitianOperator, as_matrix
from qctl.spin import ChainSpec, build_switch_pair


@dataclass(frozen=True)
class LieClosureReport:
  n: int
  dimension: int
  max_dimension: int
  traceless_dimension: int
  rank_tolerance: float
  truncated: bool


class _RealBasis(object):
  """Orthonormal basis of skew-Hermitian matrices under Re Tr(A^dag B)."""

  def __init__(self, n: int, rank_tol: float) -> None:
    super().__init__()
    self.n = n
    self.rank_tol = rank_tol
    self.vectors: List[np.ndarray] = []
    self.matrices: List[np.ndarray] = []

  def _vec(self, m: np.ndarray) -> np.ndarray:
    return np.concatenate([m.real.reshape(-1), m.imag.reshape(-1)])

  def _project_out(self, v: np.ndarray) -> np.ndarray:
    for b in self.vectors:
      v = v - np.dot(b, v) * b
    return v

  def adjoin(self, m: np.ndarray) -> bool:
    v = self._vec(m)
    norm = np.linalg.norm(v)
    if norm == 0:
      return False
    # two Gram-Schmidt passes
    v = self._project_out(self._project_out(v))
    residual = np.linalg.norm(v)
    # operands are unit-norm
    if residual <= self.rank_tol * max(norm, 1.0):
      return False
    v = v / residual
    half = self.n * self.n
    self.vectors.append(v)
    self.matrices.append((v[:half] + 1j * v[half:]).reshape(self.n, self.n))
    return True


def lie_closure(
  generators: Sequence[HermitianOperator],
  rank_tol: float = 1e-10,
  dim_cap: Optional[int] = None,
) -> LieClosureReport:
  """Dimension of the real Lie algebra generated by {i H_m}.

  Commutators are taken breadth-first over basis pairs (i < j) in the order
  the basis grew, so the result is deterministic.
  """
  if len(generators) == 0:
    raise InvalidInputError("Need at least one generator.")
  if rank_tol <= 0:
    raise InvalidInputError("rank_tol must be positive.")
  mats = [as_matrix(g) for g in generators]
  n = mats[0].shape[0]
  if any(m.shape != (n, n) for m in mats):
    raise InvalidInputError("Generators have different dimensions.")
  cap = n * n if dim_cap is None else min(int(dim_cap), n * n)

  basis = _RealBasis(n, rank_tol)
  for m in mats:
    if len(basis.matrices) < cap:
      basis.adjoin(1j * m)
  j = 1
  while j < len(basis.matrices) and len(basis.matrices) < cap:
    b = basis.matrices[j]
    for i in range(j):
      a = basis.matrices[i]
      basis.adjoin(a @ b - b @ a)
      if len(basis.matrices) >= cap:
        break
    j += 1

  dimension = len(basis.matrices)
  # reaching the cap below n^2 means generation was cut short
  truncated = dimension >= cap and cap < n * n
  if truncated:
    warnings.warn(f"Lie closure stopped at dim_cap={cap}.")
  return LieClosureReport(
    n=n,
    dimension=dimension,
    max_dimension=n * n,
    traceless_dimension=n * n - 1,
    rank_tolerance=rank_tol,
    truncated=truncated,
  )


def is_controllable(report: LieClosureReport) -> bool:
  return report.dimension >= report.traceless_dimension


def switch_generators(spec: ChainSpec, r: int) -> List[HermitianOperator]:
  return list(build_switch_pair(spec, r))
