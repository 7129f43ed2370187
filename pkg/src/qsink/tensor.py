"""Multi-index bookkeeping on a tensor product of finite-dimensional spaces.

Index layout is row-major over ``(j_1, ..., j_N)`` with ``j_1`` slowest, i.e.
the usual ``np.kron`` ordering. Slots are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .errors import DimensionMismatch, MarginalNotPSD, MarginalTraceNotOne

MARGINAL_TRACE_TOL = 1e-10
# eigenvalues in (kernel_tol, AMBIGUOUS_FACTOR * kernel_tol] are dropped with a warning
AMBIGUOUS_FACTOR = 1e4


@dataclass(frozen=True)
class TensorShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or min(dims) < 1:
            raise DimensionMismatch(f"dims must be a non-empty list of positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def permuted(self, i: int) -> TensorShape:
        """Shape after moving slot `i` to the end."""
        return TensorShape(self.dims[:i] + self.dims[i + 1 :] + (self.dims[i],))


def _check_total(a: np.ndarray, shape: TensorShape):
    if a.shape != (shape.total, shape.total):
        raise DimensionMismatch(f"expected a {shape.total}x{shape.total} matrix, got {a.shape}")


def _check_slot(i: int, a: np.ndarray, shape: TensorShape):
    if not 0 <= i < shape.N:
        raise DimensionMismatch(f"slot {i} out of range for N={shape.N}")
    if a.shape != (shape.dims[i], shape.dims[i]):
        raise DimensionMismatch(f"slot {i} expects a {shape.dims[i]}x{shape.dims[i]} matrix, got {a.shape}")


def embed_Q(i: int, a: np.ndarray, shape: TensorShape) -> np.ndarray:
    """``1 x ... x A x ... x 1`` with `a` in slot `i`."""
    a = np.asarray(a)
    _check_slot(i, a, shape)
    left = math.prod(shape.dims[:i])
    right = math.prod(shape.dims[i + 1 :])
    return np.kron(np.kron(np.eye(left), a), np.eye(right))


def partial_trace(i: int, gamma: np.ndarray, shape: TensorShape) -> np.ndarray:
    """Marginal on slot `i`: traces out every other slot.

    Satisfies ``Tr(P_i(G) A) = Tr(G Q_i(A))`` for every A.
    """
    gamma = np.asarray(gamma)
    _check_total(gamma, shape)
    if not 0 <= i < shape.N:
        raise DimensionMismatch(f"slot {i} out of range for N={shape.N}")
    n = shape.N
    t = gamma.reshape(shape.dims + shape.dims)
    rows = list(range(n))
    cols = [j if j != i else n for j in range(n)]
    return np.einsum(t, rows + cols, [i, n])


def kronecker_sum(us, shape: TensorShape) -> np.ndarray:
    """``sum_i Q_i(U_i)``."""
    if len(us) != shape.N:
        raise DimensionMismatch(f"expected {shape.N} operators, got {len(us)}")
    out = np.zeros((shape.total, shape.total), dtype=complex)
    for i, u in enumerate(us):
        out += embed_Q(i, np.asarray(u), shape)
    return out


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def permute_S(i: int, a: np.ndarray, shape: TensorShape) -> np.ndarray:
    """Conjugate `a` by the basis permutation moving slot `i` to the end.

    On simple tensors ``A_1 x ... x A_N`` this gives
    ``A_1 x ... x A_{i-1} x A_{i+1} x ... x A_N x A_i``; the result lives on
    ``shape.permuted(i)``.
    """
    a = np.asarray(a)
    _check_total(a, shape)
    n = shape.N
    order = [j for j in range(n) if j != i] + [i]
    t = a.reshape(shape.dims + shape.dims).transpose(order + [n + j for j in order])
    return t.reshape(shape.total, shape.total)


@dataclass(frozen=True, eq=False)
class ActiveSubspace:
    """Tensor product of the marginal supports, ``O = (ker g_1)^perp x ... x (ker g_N)^perp``.

    ``isometries[i]`` is a ``d_i x dhat_i`` matrix with orthonormal columns
    spanning the support of the i-th marginal (the identity when the kernel
    is trivial).
    """

    full_shape: TensorShape
    isometries: tuple[np.ndarray, ...]
    kernel_dims: tuple[int, ...] = field(default=())

    @property
    def reduced_shape(self) -> TensorShape:
        return TensorShape(tuple(v.shape[1] for v in self.isometries))

    @property
    def trivial(self) -> bool:
        return all(k == 0 for k in self.kernel_dims)

    @cached_property
    def embedding(self) -> np.ndarray:
        """Isometry from the reduced space into the full space."""
        return kron_all(self.isometries)

    @classmethod
    def identity(cls, shape: TensorShape) -> ActiveSubspace:
        return cls(shape, tuple(np.eye(d, dtype=complex) for d in shape.dims), (0,) * shape.N)

    def compress(self, a: np.ndarray) -> np.ndarray:
        """``W* A W`` with W the embedding; the identity map when trivial."""
        if self.trivial:
            return a
        w = self.embedding
        return w.conj().T @ a @ w


def restrict_instance(marginals, hamiltonian, kernel_tol: float | None = None):
    """Restrict a problem to the active subspace of its marginals.

    Returns ``(subspace, reduced_marginals, h_active, warnings)``. With all
    kernels trivial the inputs come back unchanged.

    Raises:
        MarginalNotPSD: a marginal has an eigenvalue below ``-kernel_tol``.
        MarginalTraceNotOne: a marginal's trace is off by more than 1e-10.
    """
    gammas = [linalg.hermitian(g) for g in marginals]
    shape = TensorShape(tuple(g.shape[0] for g in gammas))
    h = linalg.hermitian(hamiltonian)
    _check_total(h, shape)
    warnings = []
    isometries, reduced, kernel_dims = [], [], []
    for i, g in enumerate(gammas):
        tr = linalg.trace(g)
        if abs(tr - 1.0) > MARGINAL_TRACE_TOL:
            raise MarginalTraceNotOne(f"marginal {i} has trace {tr:.12g}")
        w, v = linalg.eigh(g)
        tol = linalg.default_kernel_tol(g) if kernel_tol is None else kernel_tol
        if w[0] < -tol:
            raise MarginalNotPSD(f"marginal {i} has negative eigenvalue {w[0]:.3e}")
        keep = w > AMBIGUOUS_FACTOR * tol
        ambiguous = (w > tol) & ~keep
        if ambiguous.any():
            warnings.append(
                f"marginal {i}: {int(ambiguous.sum())} eigenvalue(s) in the ambiguous band "
                f"({tol:.1e}, {AMBIGUOUS_FACTOR * tol:.1e}] treated as kernel"
            )
        k = int((~keep).sum())
        kernel_dims.append(k)
        if k == 0:
            isometries.append(np.eye(shape.dims[i], dtype=complex))
            reduced.append(g)
        else:
            iso = v[:, keep]
            isometries.append(iso)
            lam = w[keep]
            if ambiguous.any():
                lam = lam / lam.sum()
            reduced.append(np.diag(lam).astype(complex))
    subspace = ActiveSubspace(shape, tuple(isometries), tuple(kernel_dims))
    return subspace, reduced, subspace.compress(h), warnings


def expand_to_full(gamma_o: np.ndarray, subspace: ActiveSubspace) -> np.ndarray:
    """Embed an operator on the active subspace into the full space, zero on its complement."""
    rs = subspace.reduced_shape
    _check_total(np.asarray(gamma_o), rs)
    if subspace.trivial:
        return np.asarray(gamma_o)
    w = subspace.embedding
    return w @ gamma_o @ w.conj().T
