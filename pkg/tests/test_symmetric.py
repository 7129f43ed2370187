import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsink import linalg
from qsink.errors import (
    FermionicSectorEmpty,
    MarginalSingular,
    PauliBoundary,
    PauliInfeasible,
    SymmetryViolation,
)
from qsink.generate import (
    density_with_top_eigenvalue,
    random_density,
    random_hermitian,
    swap_operator,
    symmetric_hamiltonian,
)
from qsink.symmetric import (
    SymmetricInstance,
    Verdict,
    build_sector,
    divergence_potential,
    divergence_witness,
    pauli_feasible,
    project_sector,
    symmetric_dual_value,
    symmetric_solve,
    symmetrize_check,
)
from qsink.tensor import TensorShape, kron_all, kronecker_sum, partial_trace


def test_sector_examples():
    f = build_sector("fermionic", 2, 2)
    assert f.dim == 1 and f.basis == ((0, 1),)
    assert build_sector("bosonic", 2, 2).dim == 3
    assert build_sector("fermionic", 4, 2).dim == 6
    with pytest.raises(FermionicSectorEmpty):
        build_sector("fermionic", 2, 3)


@pytest.mark.parametrize("kind,d,n", [("fermionic", 3, 2), ("fermionic", 4, 3), ("bosonic", 2, 3), ("bosonic", 3, 2)])
def test_embedding_is_isometry_into_symmetry_eigenspace(kind, d, n):
    sec = build_sector(kind, d, n)
    e = sec.embed.toarray()
    assert np.allclose(e.conj().T @ e, np.eye(sec.dim), atol=1e-12)
    shape = TensorShape((d,) * n)
    sign = -1 if kind == "fermionic" else 1
    for i in range(n - 1):
        # swapping two adjacent slots acts as the sign on every sector vector
        order = list(range(n))
        order[i], order[i + 1] = order[i + 1], order[i]
        swapped = e.reshape((d,) * n + (sec.dim,)).transpose(order + [n]).reshape(shape.total, sec.dim)
        assert np.allclose(swapped, sign * e, atol=1e-12)


def test_projection_of_one_body_operator():
    sec = build_sector("fermionic", 2, 2)
    u = np.diag([0.3, 1.7])
    out = project_sector(kronecker_sum([u / 2, u / 2], TensorShape((2, 2))), sec)
    assert out.shape == (1, 1) and out[0, 0].real == pytest.approx(1.0)
    assert np.allclose(project_sector(np.eye(4), sec), np.eye(1))


def test_one_body_spectrum_in_fermionic_sector():
    d, n = 4, 2
    u = np.array([0.2, -1.0, 0.5, 1.3])
    sec = build_sector("fermionic", d, n)
    proj = project_sector(kronecker_sum([np.diag(u) / n] * n, TensorShape((d,) * n)), sec)
    expected = sorted(sum(u[list(j)]) / n for j in sec.basis)
    assert np.allclose(linalg.eigvalsh(proj), expected, atol=1e-12)


def test_symmetrize_check():
    shape = TensorShape((2, 2))
    h = random_hermitian(2, 1.0, seed=1)
    assert symmetrize_check(kronecker_sum([h, h], shape), shape) <= 1e-15
    assert symmetrize_check(swap_operator(2), shape) == 0.0
    assert symmetrize_check(kron_all([np.diag([1.0, 2.0]), np.eye(2)]), shape) > 0.5


def test_pauli_verdicts():
    assert pauli_feasible(np.eye(3) / 3, 2).verdict is Verdict.STRICT
    assert pauli_feasible(np.eye(2) / 2, 2).verdict is Verdict.FEASIBLE
    assert pauli_feasible(np.diag([0.6, 0.4]), 2).verdict is Verdict.INFEASIBLE
    assert pauli_feasible(np.diag([0.5, 0.5]), 2).verdict is Verdict.FEASIBLE
    assert pauli_feasible(np.eye(3) / 3, 2, strict=True) is True


def test_dual_values_at_zero():
    eps = 0.7
    f = SymmetricInstance.create("fermionic", np.eye(2) / 2, np.zeros((4, 4)), eps, 2)
    b = SymmetricInstance.create("bosonic", np.eye(2) / 2, np.zeros((4, 4)), eps, 2)
    assert symmetric_dual_value(f, np.zeros((2, 2))) == pytest.approx(0.0, abs=1e-15)
    assert symmetric_dual_value(b, np.zeros((2, 2))) == pytest.approx(-2 * eps)


def test_fermionic_closed_form_three_orbitals():
    # With H = 0 and diagonal g, pair weights p_jk solve p_12 + p_13 = 2 g_1 etc.,
    # giving p = (0.5, 0.3, 0.2) and U = eps diag(log 0.75, log 1/3, log 0.12).
    eps = 0.6
    g = np.diag([0.4, 0.35, 0.25])
    inst = SymmetricInstance.create("fermionic", g, np.zeros((9, 9)), eps, 2)
    rep = symmetric_solve(inst)
    assert rep.converged
    expected = eps * np.diag(np.log([0.75, 1.0 / 3.0, 0.12]))
    assert np.allclose(rep.potential, expected, atol=1e-9)
    p = np.array([0.5, 0.3, 0.2])
    assert rep.primal == pytest.approx(eps * np.sum(p * np.log(p)), abs=1e-10)
    assert rep.gap <= 1e-7 and rep.max_residual <= 1e-9


def test_bosonic_closed_form_two_modes():
    # H = 0, g = diag(0.7, 0.3): with x_j = exp(u_j / 2 eps) and r = x_1 / x_0,
    # 7 r^2 + 2 r - 3 = 0 and x_0^2 (1 + r/2) = 0.7.
    eps = 1.0
    inst = SymmetricInstance.create("bosonic", np.diag([0.7, 0.3]), np.zeros((4, 4)), eps, 2)
    rep = symmetric_solve(inst)
    r = (-2 + math.sqrt(88)) / 14
    x0sq = 0.7 / (1 + r / 2)
    expected = np.diag([eps * math.log(x0sq), eps * math.log(x0sq * r * r)])
    assert np.allclose(rep.potential, expected, atol=1e-9)
    for i in range(2):
        assert np.allclose(partial_trace(i, rep.gamma, inst.shape), inst.gamma, atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([("fermionic", 3), ("fermionic", 4), ("bosonic", 2), ("bosonic", 3)]))
def test_solve_marginals_and_weak_duality(seed, case):
    kind, d = case
    rng = np.random.default_rng(seed)
    g = density_with_top_eigenvalue(d, 0.5 * (0.5 + 1 / d), rng) if kind == "fermionic" else random_density(d, rng)
    inst = SymmetricInstance.create(kind, g, symmetric_hamiltonian(d, 2, 1.0, rng), 1.0, 2)
    rep = symmetric_solve(inst)
    assert rep.converged and rep.max_residual <= 1e-9 and rep.gap <= 1e-7
    for _ in range(5):
        assert rep.primal >= symmetric_dual_value(inst, random_hermitian(d, 3.0, rng)) - 1e-8


def test_errors():
    h = symmetric_hamiltonian(3, 2, 1.0, seed=0)
    with pytest.raises(PauliInfeasible) as info:
        symmetric_solve(SymmetricInstance.create("fermionic", np.diag([0.6, 0.3, 0.1]), h, 1.0, 2))
    assert info.value.eigenvalue == pytest.approx(0.6)
    assert abs(abs(info.value.witness[0]) - 1) < 1e-12
    with pytest.raises(PauliBoundary):
        symmetric_solve(SymmetricInstance.create("fermionic", np.eye(2) / 2, np.zeros((4, 4)), 1.0, 2))
    with pytest.raises(MarginalSingular):
        symmetric_solve(SymmetricInstance.create("bosonic", np.diag([1.0, 0.0]), np.zeros((4, 4)), 1.0, 2))
    with pytest.raises(SymmetryViolation):
        SymmetricInstance.create("bosonic", np.eye(2) / 2, kron_all([np.diag([1.0, 2.0]), np.eye(2)]), 1.0, 2)


def test_divergence_ray():
    g = np.diag([0.6, 0.25, 0.15])
    inst = SymmetricInstance.create("fermionic", g, symmetric_hamiltonian(3, 2, 1.0, seed=2), 1.0, 2)
    u = divergence_potential(g, 2, 10.0)
    assert np.allclose(linalg.eigvalsh(u), [-10, -10, 10])
    assert linalg.frobenius_inner(u, g) == pytest.approx(10 * (2 * 0.6 - 1))
    wit = divergence_witness(inst)
    assert wit.increasing
    assert all(s >= 0.5 * wit.predicted_slope for s in wit.slopes)


def test_linear_term_estimate():
    # eigenvalues w <= 1/N - delta: sum w_j u_j <= (1/N - delta) sum_{j<=N} u_j + N delta u_{N+1}
    rng = np.random.default_rng(3)
    d, n = 5, 2
    for _ in range(200):
        u = np.sort(rng.normal(scale=5, size=d))[::-1]
        w = linalg.eigvalsh(density_with_top_eigenvalue(d, rng.uniform(0.21, 0.45), rng))[::-1]
        delta = 1 / n - w[0]
        bound = (1 / n - delta) * u[:n].sum() + n * delta * u[n]
        assert np.dot(w, u) <= bound + 1e-12
        assert bound <= u[:n].sum() / n
