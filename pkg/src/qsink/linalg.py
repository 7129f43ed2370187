"""Dense Hermitian linear algebra.

Every matrix function goes through a full eigendecomposition. Hermitian
operators are plain complex ``numpy`` arrays; :func:`hermitian` is the
validating constructor used at every API boundary.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import EigensolverError, NegativeEigenvalue, NotHermitian, SingularLog

HERMITICITY_RTOL = 1e-8


class Spectrum(NamedTuple):
    """Ascending eigenvalues and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian(a, rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    """Return ``(A + A*)/2`` as a complex array, rejecting non-Hermitian input.

    Relative asymmetry ``|A - A*|_max / max(1, |A|_max)`` above `rtol` raises
    :class:`NotHermitian`; smaller asymmetry (IO rounding) is symmetrized away.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotHermitian(f"expected a non-empty square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.conj().T)))
    if asym > rtol * scale:
        raise NotHermitian(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    return 0.5 * (a + a.conj().T)


def eigh(a: np.ndarray) -> Spectrum:
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(a.shape[0], exc) from exc
    return Spectrum(w, v)


def eigvalsh(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(a.shape[0], exc) from exc


def apply_function(a: np.ndarray, f, spectrum: Spectrum | None = None) -> np.ndarray:
    """Spectral calculus ``V f(diag(w)) V*``."""
    w, v = spectrum if spectrum is not None else eigh(a)
    return (v * f(w)) @ v.conj().T


def mat_exp(a: np.ndarray, shift: float = 0.0, spectrum: Spectrum | None = None) -> np.ndarray:
    """``exp(A - shift * 1)``; pass ``shift = max eigenvalue`` to avoid overflow."""
    return apply_function(a, lambda w: np.exp(w - shift), spectrum)


def default_kernel_tol(a: np.ndarray) -> float:
    return 1e-12 * a.shape[0] * max(op_norm(a), np.finfo(float).tiny)


def mat_log(a: np.ndarray, kernel_tol: float | None = None, support_only: bool = False) -> np.ndarray:
    """Matrix logarithm of a positive semidefinite matrix.

    Args:
        a: Hermitian positive semidefinite matrix.
        kernel_tol: eigenvalues at or below this are treated as kernel.
            Defaults to ``1e-12 * dim * |A|``.
        support_only: return the log on the support of `a` (zero on the
            kernel) instead of raising :class:`SingularLog`.
    """
    w, v = eigh(a)
    tol = default_kernel_tol(a) if kernel_tol is None else kernel_tol
    if w[0] < -tol:
        raise NegativeEigenvalue(f"matrix has negative eigenvalue {w[0]:.3e}")
    on_support = w > tol
    if not on_support.all() and not support_only:
        raise SingularLog(
            f"eigenvalue {w[0]:.3e} below kernel tolerance {tol:.1e}; restrict to the support first"
        )
    logs = np.zeros_like(w)
    logs[on_support] = np.log(w[on_support])
    return (v * logs) @ v.conj().T


def log_trace_exp(a: np.ndarray) -> float:
    """``log Tr exp(A)`` evaluated with a max-eigenvalue shift."""
    return float(logsumexp(eigvalsh(a)))


def op_norm(a: np.ndarray) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    w = eigvalsh(a)
    return float(max(abs(w[0]), abs(w[-1])))


def trace(a: np.ndarray) -> float:
    return float(np.trace(a).real)


def trace_norm(a: np.ndarray) -> float:
    """Sum of absolute eigenvalues (Hermitian input)."""
    return float(np.abs(eigvalsh(a)).sum())


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> float:
    """``Re Tr(A* B)``."""
    return float(np.vdot(a, b).real)


def is_psd(a: np.ndarray, tol: float | None = None) -> bool:
    tol = default_kernel_tol(a) if tol is None else tol
    return bool(eigvalsh(a)[0] >= -tol)


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal basis (for ``Re Tr(AB)``) of the real space of d x d Hermitian matrices."""
    basis = []
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for k in range(d):
        for l in range(k + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[k, l] = e[l, k] = s
            basis.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[k, l] = -1j * s
            f[l, k] = 1j * s
            basis.append(f)
    return basis


def to_real_params(a: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    return np.array([frobenius_inner(b, a) for b in basis])


def from_real_params(theta: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    return np.tensordot(theta, np.asarray(basis), axes=1)
