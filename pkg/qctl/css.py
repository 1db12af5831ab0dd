"""Seven-qubit CSS code: codewords, stabilizer syndromes, single-error fix.

Stabilizer letters act on qubits 1..7 from left to right, qubit 1 being the
most significant tensor factor. Codeword kets are read right to left (qubit 1
is the last character); with that reading every listed codeword is fixed by
every listed stabilizer.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from qctl.errors import (
  IndeterminateSyndromeError,
  InvalidInputError,
  UncorrectableError,
)
from qctl.pauli import PauliString, pauli_strings

SYNDROME_TOL = 1e-8

STEANE_STABILIZERS = (
  "IIIXXXX",
  "IXXIIXX",
  "XIXIXIX",
  "IIIZZZZ",
  "IZZIIZZ",
  "ZIZIZIZ",
)

EVEN_CODEWORDS = (
  "0000000", "1111000", "1100110", "1010101",
  "0011110", "0101101", "0110011", "1001011",
)  # yapf: disable

ODD_CODEWORDS = (
  "1111111", "0000111", "0011001", "0101010",
  "1100001", "1010010", "1001100", "0110100",
)  # yapf: disable

Syndrome = Tuple[int, ...]


def _ket_index(word: str) -> int:
  return int(word[::-1], 2)


def _superposition(words: Tuple[str, ...], n: int) -> np.ndarray:
  psi = np.zeros(1 << n, dtype=complex)
  for w in words:
    psi[_ket_index(w)] = 1
  return psi / np.linalg.norm(psi)


@dataclass(frozen=True, eq=False)
class CssCode:
  n: int
  logical_zero: np.ndarray
  logical_one: np.ndarray
  stabilizers: Tuple[PauliString, ...]

  @property
  def dim(self) -> int:
    return 1 << self.n

  def logical_state(self, alpha: complex, beta: complex) -> np.ndarray:
    """Normalized alpha|0>_L + beta|1>_L."""
    norm = np.hypot(abs(alpha), abs(beta))
    if norm == 0 or not np.isfinite(norm):
      raise InvalidInputError("Logical amplitudes must be finite and nonzero.")
    return (alpha * self.logical_zero + beta * self.logical_one) / norm


@lru_cache(maxsize=None)
def css_steane_code() -> CssCode:
  n = 7
  zero = _superposition(EVEN_CODEWORDS, n)
  one = _superposition(ODD_CODEWORDS, n)
  zero.setflags(write=False)
  one.setflags(write=False)
  return CssCode(n, zero, one, pauli_strings(STEANE_STABILIZERS))


def _check_state(state: np.ndarray, code: CssCode) -> np.ndarray:
  psi = np.asarray(state, dtype=complex).reshape(-1)
  if psi.shape[0] != code.dim:
    raise InvalidInputError(
      f"State of length {psi.shape[0]} does not fit {code.n} qubits."
    )
  norm = np.linalg.norm(psi)
  if abs(norm - 1) > SYNDROME_TOL:
    raise InvalidInputError(f"State is not normalized (norm {norm:.3e}).")
  return psi


def syndrome_extract(state: np.ndarray, code: CssCode) -> Syndrome:
  """Eigenvalue read-off per stabilizer: 0 for +1, 1 for -1."""
  psi = _check_state(state, code)
  bits = []
  for s in code.stabilizers:
    s_psi = s.apply(psi)
    ev = np.real(np.vdot(psi, s_psi))
    sign = 1.0 if ev >= 0 else -1.0
    if np.linalg.norm(s_psi - sign * psi) > SYNDROME_TOL:
      raise IndeterminateSyndromeError(
        f"State is not an eigenvector of {s} (<S> = {ev:.6f})."
      )
    bits.append(0 if sign > 0 else 1)
  return tuple(bits)


def error_syndrome(error: PauliString, code: CssCode) -> Syndrome:
  """Syndrome a Pauli error leaves on any codeword: its anticommutation."""
  return tuple(int(not error.commutes_with(s)) for s in code.stabilizers)


def single_qubit_errors(n: int) -> Tuple[PauliString, ...]:
  return tuple(
    PauliString("I" * q + p + "I" * (n - q - 1))
    for q in range(n)
    for p in "XYZ"
  )


@lru_cache(maxsize=None)
def _table(code: CssCode) -> Dict[Syndrome, PauliString]:
  table: Dict[Syndrome, PauliString] = {}
  for e in single_qubit_errors(code.n):
    syn = error_syndrome(e, code)
    if syn in table:
      raise InvalidInputError(
        f"Errors {table[syn]} and {e} share syndrome {syn}; "
        "code is not single-error correcting."
      )
    table[syn] = e
  return table


def single_error_table(code: CssCode) -> Dict[Syndrome, PauliString]:
  """Nonzero syndrome -> the single-qubit Pauli that produces it."""
  return dict(_table(code))


def correct_single_error(state: np.ndarray, code: CssCode) -> np.ndarray:
  syn = syndrome_extract(state, code)
  psi = np.asarray(state, dtype=complex).reshape(-1)
  if not any(syn):
    return psi.copy()
  fix = _table(code).get(syn)
  if fix is None:
    raise UncorrectableError(f"Syndrome {syn} matches no single-qubit error.")
  return fix.apply(psi)
