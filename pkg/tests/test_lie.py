import numpy as np
import pytest

from qctl.errors import InvalidInputError
from qctl.lie import (
  LieClosureReport,
  is_controllable,
  lie_closure,
  switch_generators,
)
from qctl.linalg import PAULI_X, PAULI_Z
from qctl.spin import ChainSpec, heisenberg_to_chain
from tests.data import random_unitary


def _chain(N: int) -> ChainSpec:
  return heisenberg_to_chain([1.0] * (N - 1), N)


def test_abelian_closure():
  assert lie_closure([PAULI_X]).dimension == 1


def test_su2_closure():
  report = lie_closure([PAULI_X, PAULI_Z])
  assert report.dimension == 3
  assert report.max_dimension == 4
  assert is_controllable(report)


def test_switched_heisenberg_chain_spans_su4():
  spec = _chain(4)
  assert spec.E == (0.5, -0.5, -0.5, 0.5)
  report = lie_closure(switch_generators(spec, 1), rank_tol=1e-10)
  assert report.dimension == 15
  assert not report.truncated
  assert is_controllable(report)


def test_switched_chain_of_five_spans_su5():
  spec = _chain(5)
  # the uniform five-site chain has a trace, which adds the u(1) direction
  assert lie_closure(switch_generators(spec, 1)).dimension == 25
  mean = np.mean(spec.E)
  traceless = ChainSpec(5, tuple(e - mean for e in spec.E), spec.d)
  report = lie_closure(switch_generators(traceless, 1))
  assert report.dimension == 24
  assert is_controllable(report)


def test_single_generator_is_not_controllable():
  h_off, _ = switch_generators(_chain(4), 1)
  report = lie_closure([h_off])
  assert report.dimension == 1
  assert not is_controllable(report)


def test_controllability_threshold():
  assert is_controllable(LieClosureReport(4, 15, 16, 15, 1e-10, False))
  assert not is_controllable(LieClosureReport(4, 3, 16, 15, 1e-10, False))


def test_closure_invariances():
  gens = switch_generators(_chain(4), 1)
  v = random_unitary(np.random.default_rng(5), 4)
  conjugated = [v @ g.matrix @ v.conj().T for g in gens]
  scaled = [2.5 * g.matrix for g in gens]
  base = lie_closure(gens).dimension
  assert lie_closure(conjugated).dimension == base
  assert lie_closure(scaled).dimension == base
  assert lie_closure(gens).dimension == base


def test_dim_cap_truncates_with_warning():
  with pytest.warns(UserWarning):
    report = lie_closure(switch_generators(_chain(4), 1), dim_cap=5)
  assert report.dimension == 5
  assert report.truncated


def test_invalid_generators():
  with pytest.raises(InvalidInputError):
    lie_closure([])
  with pytest.raises(InvalidInputError):
    lie_closure([PAULI_X, np.eye(3)])
  with pytest.raises(InvalidInputError):
    lie_closure([PAULI_X], rank_tol=0)
