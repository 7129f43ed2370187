"""Independent reference solvers used to certify the Sinkhorn results.

None of these share the transform machinery: the classical solver works on
probability tensors, and the dense maximisers run Newton's method on the
dual with an analytic Hessian from the divided differences of ``exp``
(the Daleckii-Krein formula), computing gradients from the same spectral data
rather than from partial traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import linalg
from .errors import IterationBudgetExceeded
from .functionals import PotentialVector, ProblemInstance
from .generate import gibbs_state
from .tensor import TensorShape, embed_Q, kronecker_sum, partial_trace


@dataclass(frozen=True)
class ClassicalResult:
    coupling: np.ndarray
    potentials: tuple[np.ndarray, ...]
    marginal_error: float
    iterations: int


def classical_sinkhorn(cost, marginals, epsilon: float, tol: float = 1e-11, max_iter: int = 100000):
    """Log-domain multi-marginal Sinkhorn for ``min <c, P> + eps sum P log P``.

    The coupling is ``P = exp((u_1 (+) ... (+) u_N - c)/eps)`` and the loop
    stops once the summed L1 marginal error is at most `tol`.
    """
    cost = np.asarray(cost, dtype=float)
    mus = [np.asarray(m, dtype=float) for m in marginals]
    n = cost.ndim
    if cost.shape != tuple(len(m) for m in mus):
        raise ValueError(f"cost shape {cost.shape} does not match marginals")
    log_mu = [np.log(m) for m in mus]
    u = [np.zeros(len(m)) for m in mus]

    def broadcast(k):
        shape = [1] * n
        shape[k] = -1
        return u[k].reshape(shape)

    def scaled():
        return (sum(broadcast(k) for k in range(n)) - cost) / epsilon

    err, it = np.inf, 0
    while it < max_iter:
        it += 1
        for i in range(n):
            others = tuple(k for k in range(n) if k != i)
            z = scaled() - (broadcast(i) / epsilon)
            u[i] = epsilon * (log_mu[i] - logsumexp(z, axis=others))
        p = np.exp(scaled())
        err = sum(np.abs(p.sum(axis=tuple(k for k in range(n) if k != i)) - mus[i]).sum() for i in range(n))
        if err <= tol:
            break
    return ClassicalResult(np.exp(scaled()), tuple(u), float(err), it)


def _divided_differences(x: np.ndarray) -> np.ndarray:
    """First divided differences of exp on the points `x`."""
    ex = np.exp(x)
    dx = x[:, None] - x[None, :]
    close = np.abs(dx) < 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (ex[:, None] - ex[None, :]) / dx
    mid = np.exp(0.5 * (x[:, None] + x[None, :]))
    out[close] = mid[close]
    return out


def _spectral_terms(x, w, generators, epsilon):
    """Gradient part ``-Tr(exp(X) G_a)`` and Hessian ``-(1/eps) Re sum L_jk (B_a)_jk (B_b)_kj``.

    Here ``X = (...)/eps`` has eigenvalues `x` and eigenvectors `w`, and each
    generator ``G_a`` is the derivative of ``eps X`` in parameter direction a.
    """
    b = np.array([w.conj().T @ g @ w for g in generators])  # (m, D, D)
    ex = np.exp(x)
    grad = -np.einsum("ajj,j->a", b, ex).real
    lmat = _divided_differences(x)
    hess = -np.einsum("ajk,jk,bkj->ab", b, lmat, b).real / epsilon
    return grad, 0.5 * (hess + hess.T)


def newton_maximize(evaluate, theta0, tol: float = 1e-11, budget: int = 100000):
    """Damped Newton ascent on a concave function.

    `evaluate(theta)` returns ``(value, gradient, hessian)``. Singular
    (gauge) directions of the Hessian are handled by least squares. Steps are
    backtracked until Armijo holds; near the optimum, where the value is flat
    to round-off, a step is also accepted if it reduces the gradient norm.

    Raises:
        IterationBudgetExceeded: more than `budget` steps without reaching `tol`.
    """
    theta = np.asarray(theta0, dtype=float)
    f, g, hess = evaluate(theta)
    for it in range(budget):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return theta, f, gnorm, it
        direction = np.linalg.lstsq(-hess, g, rcond=1e-12)[0]
        slope = float(g @ direction)
        if not slope > 0:
            direction, slope = g, gnorm**2
        t = 1.0
        for _ in range(60):
            cand = theta + t * direction
            fc, gc, hc = evaluate(cand)
            if fc >= f + 1e-4 * t * slope:
                break
            flat = fc >= f - 64 * np.finfo(float).eps * max(1.0, abs(f))
            if flat and np.linalg.norm(gc) < gnorm:
                break
            t *= 0.5
        else:
            raise IterationBudgetExceeded(f"line search failed at gradient norm {gnorm:.3e}")
        theta, f, g, hess = cand, fc, gc, hc
    raise IterationBudgetExceeded(f"no convergence within {budget} Newton steps")


def _slot_layout(dims):
    bases = [linalg.hermitian_basis(d) for d in dims]
    offsets = np.cumsum([0] + [len(b) for b in bases])
    return bases, offsets


def _unpack(theta, bases, offsets):
    return [linalg.from_real_params(theta[offsets[i] : offsets[i + 1]], b) for i, b in enumerate(bases)]


def dense_dual_ascent(inst: ProblemInstance, tol: float = 1e-11, budget: int = 100000) -> PotentialVector:
    """Maximise the dual over all potentials at once by Newton's method.

    Returns potentials in the renormalised gauge (``lambda_eps = 0`` on every
    slot but the last).
    """
    from .sinkhorn import renormalize

    shape = inst.reduced_shape
    if shape.total > 64:
        raise ValueError(f"dense oracle limited to total dimension 64, got {shape.total}")
    eps = inst.epsilon
    bases, offsets = _slot_layout(shape.dims)
    generators = [embed_Q(i, b, shape) for i, basis in enumerate(bases) for b in basis]
    linear_coeffs = np.concatenate([linalg.to_real_params(g, b) for g, b in zip(inst.gammas, bases)])

    def evaluate(theta):
        us = _unpack(theta, bases, offsets)
        x, w = linalg.eigh((kronecker_sum(us, shape) - inst.h_active) / eps)
        grad, hess = _spectral_terms(x, w, generators, eps)
        value = float(linear_coeffs @ theta) - eps * float(np.exp(x).sum()) + eps
        return value, linear_coeffs + grad, hess

    theta0 = np.zeros(offsets[-1])
    theta, *_ = newton_maximize(evaluate, theta0, tol, budget)
    return renormalize(PotentialVector(tuple(_unpack(theta, bases, offsets))), eps)


def sector_newton(inst, tol: float = 1e-11, budget: int = 100000) -> np.ndarray:
    """Maximiser of the bosonic/fermionic sector dual by dense Newton over the d^2 real parameters."""
    from .symmetric import project_sector

    d, n, eps = inst.d, inst.N, inst.epsilon
    basis = linalg.hermitian_basis(d)
    generators = [project_sector(kronecker_sum([b / n] * n, inst.shape), inst.sector) for b in basis]
    linear_coeffs = linalg.to_real_params(inst.gamma, basis)
    one_body = np.array(generators)

    def evaluate(theta):
        x, w = linalg.eigh((np.tensordot(theta, one_body, axes=1) - inst.h_sector) / eps)
        grad, hess = _spectral_terms(x, w, generators, eps)
        value = float(linear_coeffs @ theta) - eps * float(np.exp(x).sum()) + eps
        return value, linear_coeffs + grad, hess

    theta0 = linalg.to_real_params(eps * linalg.mat_log(inst.gamma), basis)
    theta, *_ = newton_maximize(evaluate, theta0, tol, budget)
    return linalg.from_real_params(theta, basis)


@dataclass(frozen=True)
class GibbsReport:
    expected: float  # -eps log Tr exp(-H/eps)
    value: float  # optimal transport value at the Gibbs marginals
    gamma_error: float  # Frobenius distance between solver coupling and Gibbs state
    gibbs: np.ndarray
    marginals: tuple[np.ndarray, ...]

    @property
    def value_error(self) -> float:
        return abs(self.value - self.expected)

    def passed(self, value_tol: float = 1e-7, gamma_tol: float = 1e-8) -> bool:
        return self.value_error <= value_tol and self.gamma_error <= gamma_tol


def gibbs_check(hamiltonian, dims, epsilon: float, settings=None) -> GibbsReport:
    """Solve the transport problem at the marginals of the Gibbs state of H.

    The unconstrained free-energy minimiser is feasible for its own
    marginals, so the optimal value must be ``-eps log Tr exp(-H/eps)`` and
    the optimal coupling the Gibbs state itself.
    """
    from .sinkhorn import TIGHT, solve

    shape = TensorShape(tuple(dims))
    h = linalg.hermitian(hamiltonian)
    if shape.total > 64:
        raise ValueError(f"gibbs_check limited to total dimension 64, got {shape.total}")
    g = gibbs_state(h, epsilon)
    marginals = []
    for i in range(shape.N):
        m = partial_trace(i, g, shape)
        marginals.append(0.5 * (m + m.conj().T) / linalg.trace(m))
    expected = -epsilon * float(logsumexp(-linalg.eigvalsh(h) / epsilon))
    inst = ProblemInstance.create(marginals, h, epsilon)
    report = solve(inst, settings=settings or TIGHT).raise_for_status()
    return GibbsReport(
        expected=expected,
        value=report.dual,
        gamma_error=float(np.linalg.norm(report.gamma - g)),
        gibbs=g,
        marginals=tuple(marginals),
    )
