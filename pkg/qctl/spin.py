"""Model Hamiltonians: single-excitation spin chains and the 1e1n system.

Chain Hamiltonians are dimensionless (couplings set the unit). The hyperfine
model is stored in angular frequency with GHz as the frequency unit, so its
natural time unit is the nanosecond.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from qctl.errors import InvalidInputError
from qctl.linalg import (
  PAULI_I,
  PAULI_X,
  PAULI_Y,
  PAULI_Z,
  HermitianOperator,
  tensor_product,
)

COUPLINGS = ("heisenberg", "xy")
FRAMES = ("lab", "electron-rotating")


def _finite(name: str, values: Sequence[float]) -> Tuple[float, ...]:
  arr = np.asarray(values, dtype=float).reshape(-1)
  if not np.all(np.isfinite(arr)):
    raise InvalidInputError(f"{name} has non-finite entries.")
  return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ChainSpec:
  """Tridiagonal single-excitation chain: on-site energies E, couplings d."""

  N: int
  E: Tuple[float, ...]
  d: Tuple[float, ...]

  def __post_init__(self) -> None:
    if int(self.N) != self.N or self.N < 1:
      raise InvalidInputError(f"N must be a positive integer, got {self.N}.")
    E = _finite("E", self.E)
    d = _finite("d", self.d)
    if len(E) != self.N or len(d) != self.N - 1:
      raise InvalidInputError(
        f"Chain of N={self.N} needs {self.N} energies and {self.N - 1} "
        f"couplings, got {len(E)} and {len(d)}."
      )
    if any(x <= 0 for x in d):
      raise InvalidInputError("All couplings d_n must be positive.")
    object.__setattr__(self, "N", int(self.N))
    object.__setattr__(self, "E", E)
    object.__setattr__(self, "d", d)


def build_chain_hamiltonian(spec: ChainSpec) -> HermitianOperator:
  h = np.diag(np.asarray(spec.E, dtype=float))
  if spec.N > 1:
    h += np.diag(spec.d, 1) + np.diag(spec.d, -1)
  return HermitianOperator(h)


def _check_couplings(J: Sequence[float], N: int) -> np.ndarray:
  J = np.asarray(_finite("J", J))
  if len(J) != N - 1:
    raise InvalidInputError(f"Need {N - 1} couplings for N={N}, got {len(J)}.")
  if np.any(J <= 0):
    raise InvalidInputError("All couplings J_n must be positive.")
  return J


def heisenberg_to_chain(
  J: Sequence[float], N: int, coupling: str = "heisenberg"
) -> ChainSpec:
  """Single-excitation block of an isotropic Heisenberg (or XY) chain.

  Flip-flop terms give d_n = J_n. The ZZ term contributes +J_n/2 for every
  aligned pair and -J_n/2 for the (at most two) pairs touching the flip.
  """
  if coupling not in COUPLINGS:
    raise InvalidInputError(f"Unknown coupling {coupling!r}.")
  J = _check_couplings(J, N)
  E = np.zeros(N)
  if coupling == "heisenberg":
    E += J.sum() / 2
    for n, j in enumerate(J):
      E[n] -= j
      E[n + 1] -= j
  return ChainSpec(N, tuple(E), tuple(J))


def _site(op: np.ndarray, k: int, N: int) -> np.ndarray:
  if N == 1:
    return op
  ops = [PAULI_I] * N
  ops[k] = op
  return tensor_product(*ops)


def spin_chain_hamiltonian(
  J: Sequence[float], coupling: str = "heisenberg"
) -> HermitianOperator:
  """Full 2^N chain Hamiltonian sum_n (J_n/2)(XX + YY [+ ZZ])."""
  if coupling not in COUPLINGS:
    raise InvalidInputError(f"Unknown coupling {coupling!r}.")
  N = len(J) + 1
  J = _check_couplings(J, N)
  paulis = [PAULI_X, PAULI_Y]
  if coupling == "heisenberg":
    paulis.append(PAULI_Z)
  h = np.zeros((2**N, 2**N), dtype=complex)
  for n, j in enumerate(J):
    for p in paulis:
      h += j / 2 * _site(p, n, N) @ _site(p, n + 1, N)
  return HermitianOperator(h)


def single_excitation_indices(N: int) -> List[int]:
  """Basis indices of the single-flip states, ordered by flip position."""
  return [1 << (N - 1 - k) for k in range(N)]


def total_magnetization(N: int) -> np.ndarray:
  return sum(_site(PAULI_Z, k, N) for k in range(N))


def build_switch_pair(spec: ChainSpec,
                      r: int) -> Tuple[HermitianOperator, HermitianOperator]:
  """(H_0, H_0 + H_r): the switch annuls coupling r (1-based) when on."""
  if int(r) != r or not 1 <= r <= spec.N - 1:
    raise InvalidInputError(f"Actuator r={r} outside 1..{spec.N - 1}.")
  h_off = build_chain_hamiltonian(spec)
  h_on = np.array(h_off.matrix)
  h_on[r - 1, r] = h_on[r, r - 1] = 0
  return h_off, HermitianOperator(h_on)


@dataclass(frozen=True)
class HyperfineParams:
  """1e1n hyperfine constants, defaults from the malonic-acid radical."""

  nu_s: float = 11.885  # GHz
  nu_n: float = 18.1  # MHz
  A_zx: float = 14.2  # MHz
  A_zz: float = -42.7  # MHz

  def __post_init__(self) -> None:
    _finite(
      "hyperfine parameters", [self.nu_s, self.nu_n, self.A_zx, self.A_zz]
    )


def electron_op(p: np.ndarray) -> np.ndarray:
  return tensor_product(p, PAULI_I) / 2


def nuclear_op(p: np.ndarray) -> np.ndarray:
  return tensor_product(PAULI_I, p) / 2


def build_1e1n_hamiltonian(
  p: HyperfineParams, frame: str = "electron-rotating"
) -> Tuple[HermitianOperator, List[HermitianOperator]]:
  """Drift and electron-drive controls on |electron> (x) |nucleus>.

  The hyperfine coupling is A_zx S_z I_x + A_zz S_z I_z. The rotating frame
  drops nu_s S_z (rotating-wave approximation).
  """
  if frame not in FRAMES:
    raise InvalidInputError(f"Unknown frame {frame!r}.")
  s_z = electron_op(PAULI_Z)
  i_x, i_z = nuclear_op(PAULI_X), nuclear_op(PAULI_Z)
  mhz = 1e-3
  h = p.nu_n * mhz * i_z + p.A_zx * mhz * s_z @ i_x + p.A_zz * mhz * s_z @ i_z
  if frame == "lab":
    h = h + p.nu_s * s_z
  controls = [
    HermitianOperator(2 * np.pi * electron_op(PAULI_X)),
    HermitianOperator(2 * np.pi * electron_op(PAULI_Y)),
  ]
  return HermitianOperator(2 * np.pi * h), controls
