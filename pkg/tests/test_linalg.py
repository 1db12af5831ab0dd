import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qctl.errors import InvalidInputError
from qctl.linalg import (
  PAULI_I,
  PAULI_X,
  PAULI_Y,
  PAULI_Z,
  HermitianOperator,
  UnitaryOperator,
  commutator,
  hilbert_schmidt_inner,
  matrix_exponential_unitary,
  operator_norm_distance,
  tensor_product,
)
from qctl.spin import ChainSpec, build_chain_hamiltonian, build_switch_pair
from tests.data import random_hermitian, random_unitary

seeds = st.integers(0, 2**32 - 1)


def test_zero_generator_gives_identity():
  for d in (1, 3, 8):
    u = matrix_exponential_unitary(np.zeros((d, d)), 7.3)
    np.testing.assert_allclose(u.matrix, np.eye(d), atol=1e-15)


def test_pauli_rotation():
  u = matrix_exponential_unitary(PAULI_X, np.pi / 2)
  np.testing.assert_allclose(u.matrix, -1j * PAULI_X, atol=1e-12)


def test_chain_propagator_matches_scaling_and_squaring():
  h = build_chain_hamiltonian(ChainSpec(4, (0, 0, 0, 0), (1, 1, 1)))
  u = matrix_exponential_unitary(h, 1.0)
  assert np.max(np.abs(u.matrix - expm(-1j * h.matrix))) <= 1e-10


def test_non_finite_inputs_rejected():
  with pytest.raises(InvalidInputError):
    matrix_exponential_unitary(PAULI_X, np.inf)
  with pytest.raises(InvalidInputError):
    HermitianOperator(np.array([[np.nan, 0], [0, 1]]))
  with pytest.raises(InvalidInputError):
    HermitianOperator(np.array([[0, 1], [0, 0]]))
  with pytest.raises(InvalidInputError):
    UnitaryOperator(2 * PAULI_I)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 8), st.floats(-5, 5), st.floats(-5, 5))
def test_propagator_semigroup(seed, d, t1, t2):
  h = random_hermitian(np.random.default_rng(seed), d)
  u1 = matrix_exponential_unitary(h, t1).matrix
  u2 = matrix_exponential_unitary(h, t2).matrix
  u12 = matrix_exponential_unitary(h, t1 + t2).matrix
  assert np.max(np.abs(u1 @ u2 - u12)) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 8))
def test_propagator_preserves_norm(seed, d):
  rng = np.random.default_rng(seed)
  u = matrix_exponential_unitary(random_hermitian(rng, d), rng.normal())
  psi = rng.normal(size=d) + 1j * rng.normal(size=d)
  assert np.linalg.norm(u.matrix @ psi) == pytest.approx(np.linalg.norm(psi))


def test_hilbert_schmidt_inner():
  assert hilbert_schmidt_inner(PAULI_X, PAULI_Z) == 0
  assert hilbert_schmidt_inner(PAULI_X, PAULI_X) == pytest.approx(2)
  h_off, h_on = build_switch_pair(ChainSpec(4, (0, 0, 0, 0), (1, 1, 1)), 2)
  assert hilbert_schmidt_inner(h_off, h_on) == pytest.approx(4)
  with pytest.raises(InvalidInputError):
    hilbert_schmidt_inner(PAULI_X, np.eye(4))


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 6))
def test_hilbert_schmidt_self_inner_is_nonnegative(seed, d):
  rng = np.random.default_rng(seed)
  a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
  ip = hilbert_schmidt_inner(a, a)
  assert abs(ip.imag) <= 1e-12
  assert ip.real >= 0


def test_tensor_product():
  np.testing.assert_array_equal(tensor_product(PAULI_I, PAULI_I), np.eye(4))
  ket00 = np.array([1, 0, 0, 0])
  np.testing.assert_array_equal(
    tensor_product(PAULI_X, PAULI_I) @ ket00, [0, 0, 1, 0]
  )
  xz = tensor_product(PAULI_X, PAULI_Z)
  np.testing.assert_array_equal(xz @ xz, np.eye(4))
  assert tensor_product(PAULI_X, PAULI_X, PAULI_X).shape == (8, 8)


def test_commutator():
  np.testing.assert_array_equal(commutator(PAULI_X, PAULI_X), 0)
  np.testing.assert_allclose(commutator(PAULI_X, PAULI_Z), -2j * PAULI_Y)
  rng = np.random.default_rng(3)
  a, b = rng.normal(size=(2, 4, 4))
  np.testing.assert_allclose(commutator(a, b), a @ b - b @ a)
  with pytest.raises(InvalidInputError):
    commutator(PAULI_X, np.eye(3))


def test_unitary_operator_algebra():
  rng = np.random.default_rng(11)
  u = UnitaryOperator(random_unitary(rng, 4))
  v = UnitaryOperator(random_unitary(rng, 4))
  assert operator_norm_distance((u @ u.dag()).matrix, np.eye(4)) < 1e-12
  np.testing.assert_allclose((u @ v).matrix, u.matrix @ v.matrix)
  assert u.dim == 4
