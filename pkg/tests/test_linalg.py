import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsink import linalg
from qsink.errors import NegativeEigenvalue, NotHermitian, SingularLog
from qsink.generate import random_density, random_hermitian


def test_hermitian_symmetrizes_small_asymmetry():
    a = np.array([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
    h = linalg.hermitian(a)
    assert np.array_equal(h, h.conj().T)


def test_hermitian_rejects_asymmetric():
    with pytest.raises(NotHermitian):
        linalg.hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_hermitian_rejects_non_square():
    with pytest.raises(NotHermitian):
        linalg.hermitian(np.zeros((2, 3)))


def test_exp_log_diagonal_exact():
    a = np.diag([0.1, 0.2, 0.7]).astype(complex)
    assert np.allclose(linalg.mat_log(a), np.diag(np.log([0.1, 0.2, 0.7])), atol=1e-15)
    assert np.allclose(linalg.mat_exp(linalg.mat_log(a)), a, atol=1e-15)


def test_mat_exp_shift():
    a = random_hermitian(4, 3.0, seed=1)
    top = linalg.eigvalsh(a)[-1]
    assert np.allclose(linalg.mat_exp(a, shift=top) * np.exp(top), linalg.mat_exp(a), atol=1e-12)


def test_mat_log_errors():
    with pytest.raises(NegativeEigenvalue):
        linalg.mat_log(np.diag([1.0, -0.5]))
    with pytest.raises(SingularLog):
        linalg.mat_log(np.diag([1.0, 0.0]))
    out = linalg.mat_log(np.diag([1.0, 0.0]), support_only=True)
    assert np.allclose(out, 0)


def test_log_trace_exp_large_arguments():
    a = np.diag([1000.0, 1000.0])
    assert linalg.log_trace_exp(a) == pytest.approx(1000.0 + np.log(2.0), abs=1e-12)


def test_norms():
    a = np.diag([-3.0, 1.0, 2.0])
    assert linalg.op_norm(a) == 3.0
    assert linalg.trace_norm(a) == 6.0
    assert linalg.trace(a) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_hermitian_basis_orthonormal(d):
    basis = linalg.hermitian_basis(d)
    assert len(basis) == d * d
    gram = np.array([[linalg.frobenius_inner(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(d * d), atol=1e-14)
    a = random_hermitian(d, 1.0, seed=d)
    assert np.allclose(linalg.from_real_params(linalg.to_real_params(a, basis), basis), a, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_exp_of_log_roundtrip(seed, d):
    g = random_density(d, seed=seed)
    assert np.allclose(linalg.mat_exp(linalg.mat_log(g)), g, atol=1e-12)
    assert linalg.is_psd(g)
