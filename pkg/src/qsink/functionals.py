"""Primal and dual objectives of entropic quantum multi-marginal transport.

Conventions: ``S(G) = Tr(G log G)`` (the negative of the von Neumann
entropy, with ``0 log 0 = 0``); the primal is ``Tr(H G) + eps S(G)`` and the
dual is ``sum_i Tr(U_i g_i) - eps Tr exp((+)U - H_O)/eps + eps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import linalg
from .errors import DimensionMismatch, NotDensityMatrix, ReferenceNotPositiveDefinite
from .tensor import ActiveSubspace, TensorShape, kronecker_sum, restrict_instance

DENSITY_TRACE_TOL = 1e-8
OFF_SUPPORT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A marginal-constrained entropic problem, already restricted to its active subspace.

    ``marginals``/``hamiltonian`` are the caller's full-space data;
    ``gammas``/``h_active`` are their compressions to the active subspace,
    where every reduced marginal is strictly positive definite.
    """

    shape: TensorShape
    marginals: tuple[np.ndarray, ...]
    hamiltonian: np.ndarray
    epsilon: float
    subspace: ActiveSubspace
    gammas: tuple[np.ndarray, ...]
    h_active: np.ndarray
    warnings: tuple[str, ...] = ()
    kernel_tol: float | None = None

    @classmethod
    def create(cls, marginals, hamiltonian, epsilon: float, kernel_tol: float | None = None):
        epsilon = float(epsilon)
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        subspace, gammas, h_o, warnings = restrict_instance(marginals, hamiltonian, kernel_tol)
        return cls(
            shape=subspace.full_shape,
            marginals=tuple(linalg.hermitian(g) for g in marginals),
            hamiltonian=linalg.hermitian(hamiltonian),
            epsilon=epsilon,
            subspace=subspace,
            gammas=tuple(gammas),
            h_active=h_o,
            warnings=tuple(warnings),
            kernel_tol=kernel_tol,
        )

    @property
    def N(self) -> int:
        return self.shape.N

    @property
    def reduced_shape(self) -> TensorShape:
        return self.subspace.reduced_shape

    @property
    def hnorm(self) -> float:
        """Operator norm of the active Hamiltonian."""
        return linalg.op_norm(self.h_active)

    def log_gammas(self) -> list[np.ndarray]:
        return [linalg.mat_log(g) for g in self.gammas]


@dataclass(frozen=True, eq=False)
class PotentialVector:
    """Dual potentials ``(U_1, ..., U_N)`` on the reduced spaces.

    ``gauge`` accumulates the zero-sum translations applied so far (for
    instance by renormalisation), so raw and renormalised iterates can be
    related.
    """

    entries: tuple[np.ndarray, ...]
    gauge: np.ndarray = field(default=None)

    def __post_init__(self):
        entries = tuple(np.asarray(u, dtype=complex) for u in self.entries)
        object.__setattr__(self, "entries", entries)
        gauge = np.zeros(len(entries)) if self.gauge is None else np.asarray(self.gauge, dtype=float)
        if gauge.shape != (len(entries),):
            raise DimensionMismatch("gauge must have one entry per potential")
        object.__setattr__(self, "gauge", gauge)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def with_slot(self, i: int, v: np.ndarray) -> PotentialVector:
        entries = list(self.entries)
        entries[i] = np.asarray(v, dtype=complex)
        return replace(self, entries=tuple(entries))

    def translate(self, a) -> PotentialVector:
        """Shift slot i by ``a[i] * 1``; `a` must sum to zero."""
        a = np.asarray(a, dtype=float)
        if a.shape != (len(self),):
            raise DimensionMismatch("translation must have one entry per potential")
        if abs(a.sum()) > 1e-12 * max(1.0, np.abs(a).max()):
            raise ValueError(f"gauge translations must sum to zero, got sum {a.sum():.3e}")
        entries = tuple(u + t * np.eye(u.shape[0]) for u, t in zip(self.entries, a))
        return PotentialVector(entries, self.gauge + a)

    def dims(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.entries)


def check_potentials(inst: ProblemInstance, U: PotentialVector):
    if U.dims() != inst.reduced_shape.dims:
        raise DimensionMismatch(
            f"potentials have dims {U.dims()}, reduced space has {inst.reduced_shape.dims}"
        )


def exponent(inst: ProblemInstance, U) -> np.ndarray:
    """``((+)U - H_O) / eps`` on the active subspace."""
    return (kronecker_sum(list(U), inst.reduced_shape) - inst.h_active) / inst.epsilon


def coupling(inst: ProblemInstance, U) -> np.ndarray:
    """``exp(((+)U - H_O) / eps)`` on the active subspace."""
    return linalg.mat_exp(exponent(inst, U))


def entropy(gamma: np.ndarray, kernel_tol: float | None = None) -> float:
    """``Tr(G log G)`` with eigenvalues at or below `kernel_tol` contributing zero."""
    w = linalg.eigvalsh(gamma)
    tol = linalg.default_kernel_tol(gamma) if kernel_tol is None else kernel_tol
    w = w[w > tol]
    return float(np.sum(w * np.log(w)))


def relative_entropy(gamma: np.ndarray, reference: np.ndarray) -> float:
    """Umegaki relative entropy ``Tr G (log G - log m)`` for positive definite `reference`."""
    return entropy(gamma) - linalg.frobenius_inner(gamma, linalg.mat_log(reference))


def check_density(inst: ProblemInstance, gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.shape != (inst.shape.total, inst.shape.total):
        raise NotDensityMatrix(f"expected a {inst.shape.total}-dimensional matrix, got {gamma.shape}")
    gamma = linalg.hermitian(gamma)
    tr = linalg.trace(gamma)
    if abs(tr - 1.0) > DENSITY_TRACE_TOL:
        raise NotDensityMatrix(f"trace {tr:.12g} differs from 1")
    w = linalg.eigvalsh(gamma)
    if w[0] < -1e-10:
        raise NotDensityMatrix(f"negative eigenvalue {w[0]:.3e}")
    if not inst.subspace.trivial:
        off = tr - linalg.trace(inst.subspace.compress(gamma))
        if off > OFF_SUPPORT_TOL:
            raise NotDensityMatrix(f"mass {off:.3e} outside the active subspace")
    return gamma


def primal_value(inst: ProblemInstance, gamma: np.ndarray) -> float:
    """``Tr(H G) + eps Tr(G log G)`` for a full-space density matrix G."""
    gamma = check_density(inst, gamma)
    return linalg.frobenius_inner(inst.hamiltonian, gamma) + inst.epsilon * entropy(gamma)


def lambda_eps(a: np.ndarray, epsilon: float) -> float:
    """``eps log Tr exp(A / eps)``, evaluated in log space."""
    return epsilon * float(logsumexp(linalg.eigvalsh(a) / epsilon))


def dual_value(inst: ProblemInstance, U) -> float:
    """Dual functional at the potentials `U` (reduced spaces)."""
    if isinstance(U, PotentialVector):
        check_potentials(inst, U)
    eps = inst.epsilon
    linear = sum(linalg.frobenius_inner(u, g) for u, g in zip(U, inst.gammas))
    log_z = float(logsumexp(linalg.eigvalsh(exponent(inst, U))))
    return linear - eps * np.exp(log_z) + eps


def entropy_legendre(y: np.ndarray) -> float:
    """``S*(Y) = Tr exp(Y - 1)``, the Legendre transform of ``Tr(G log G)`` on PSD matrices."""
    return float(np.exp(logsumexp(linalg.eigvalsh(y) - 1.0)))


def duality_gap(inst: ProblemInstance, gamma: np.ndarray, U) -> float:
    return primal_value(inst, gamma) - dual_value(inst, U)


def umegaki_transform(inst: ProblemInstance, refs) -> ProblemInstance:
    """Instance whose plain entropic problem is the relative-entropy problem w.r.t. ``(x) m_i``.

    The new Hamiltonian is ``H - eps (+) log m_i``; each reference must be
    positive definite on its full factor space.
    """
    if len(refs) != inst.N:
        raise DimensionMismatch(f"expected {inst.N} reference matrices, got {len(refs)}")
    logs = []
    for i, m in enumerate(refs):
        m = linalg.hermitian(m)
        if m.shape[0] != inst.shape.dims[i]:
            raise DimensionMismatch(f"reference {i} has dimension {m.shape[0]}, expected {inst.shape.dims[i]}")
        w = linalg.eigvalsh(m)
        if w[0] <= linalg.default_kernel_tol(m):
            raise ReferenceNotPositiveDefinite(f"reference {i} has eigenvalue {w[0]:.3e}")
        logs.append(linalg.mat_log(m))
    h_m = inst.hamiltonian - inst.epsilon * kronecker_sum(logs, inst.shape)
    return ProblemInstance.create(inst.marginals, h_m, inst.epsilon, inst.kernel_tol)
