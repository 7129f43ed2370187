"""Non-commutative (H, eps)-transform of one potential slot.

For slot i and fixed potentials on the other slots, the transform is the
unique maximiser V of the strictly concave inner objective

    T(V) = Tr(V g_i) - eps Tr exp((U_1 (+) ... V ... (+) U_N - H_O) / eps),

equivalently the unique solution of ``P_i(exp(...)) = g_i``.

The inner solve is a damped fixed point

    V <- V + t * eps * (log g_i - log P_i(exp(...)))

which is exact in a single step when everything commutes. If the residual
stalls, the solver switches to Armijo backtracking ascent along the gradient
``g_i - P_i(exp(...))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InnerNoConvergence
from .functionals import ProblemInstance, lambda_eps
from .tensor import embed_Q, kronecker_sum, partial_trace


@dataclass(frozen=True)
class TransformSettings:
    marginal_tol: float = 1e-11
    max_inner_iters: int = 200
    damping: float = 1.0
    min_damping: float = 1.0 / 64

    def __post_init__(self):
        if not self.marginal_tol > 0:
            raise ValueError("marginal_tol must be positive")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class TransformResult:
    V: np.ndarray
    residual: float
    iterations: int
    method: str


@dataclass(frozen=True)
class _Point:
    V: np.ndarray
    objective: float
    residual: float
    scaled_marginal: np.ndarray  # P_i(exp(Y - shift))
    shift: float
    gradient: np.ndarray


class _SlotProblem:
    def __init__(self, inst: ProblemInstance, i: int, others):
        self.inst = inst
        self.i = i
        self.shape = inst.reduced_shape
        self.gamma = inst.gammas[i]
        self.log_gamma = linalg.mat_log(self.gamma)
        eps = inst.epsilon
        base = [np.zeros((d, d)) if j == i else others[j] for j, d in enumerate(self.shape.dims)]
        self.K = (kronecker_sum(base, self.shape) - inst.h_active) / eps

    def evaluate(self, V: np.ndarray) -> _Point:
        eps = self.inst.epsilon
        w, W = linalg.eigh(self.K + embed_Q(self.i, V, self.shape) / eps)
        shift = w[-1]
        e = np.exp(w - shift)
        scaled = partial_trace(self.i, (W * e) @ W.conj().T, self.shape)
        scale = np.exp(shift)
        marginal = scale * scaled
        objective = linalg.frobenius_inner(V, self.gamma) - eps * scale * e.sum()
        grad = self.gamma - marginal
        return _Point(V, objective, linalg.trace_norm(grad), scaled, shift, grad)

    def fixed_point_direction(self, p: _Point) -> np.ndarray:
        w = linalg.eigvalsh(p.scaled_marginal)
        if w[0] <= linalg.default_kernel_tol(p.scaled_marginal):
            raise InnerNoConvergence(self.i, p.residual, 0)
        log_m = linalg.mat_log(p.scaled_marginal, kernel_tol=0.0)
        d = self.gamma.shape[0]
        return self.inst.epsilon * (self.log_gamma - log_m - p.shift * np.eye(d))


def _improves(new: _Point, old: _Point) -> bool:
    if new.objective > old.objective:
        return True
    # near the optimum the objective is flat to round-off; fall back to the residual
    slack = 64 * np.finfo(float).eps * max(1.0, abs(old.objective))
    return new.objective >= old.objective - slack and new.residual < old.residual


def _armijo(problem: _SlotProblem, p: _Point, step: float, settings: TransformSettings, budget: int):
    """Backtracking gradient ascent; returns (point, iterations used)."""
    used = 0
    while used < budget and p.residual > settings.marginal_tol:
        g = p.gradient
        gg = linalg.frobenius_inner(g, g)
        for _ in range(60):
            q = problem.evaluate(p.V + step * g)
            if q.objective >= p.objective + 1e-4 * step * gg or (
                _improves(q, p) and q.objective >= p.objective
            ):
                break
            step *= 0.5
        else:
            break
        p = q
        step *= 2.0
        used += 1
    return p, used


def default_start(inst: ProblemInstance, i: int, others) -> np.ndarray:
    """Closed-form transform for H = 0: ``eps log g_i - sum_{j != i} lambda_eps(U_j)``."""
    eps = inst.epsilon
    shift = sum(lambda_eps(u, eps) for j, u in enumerate(others) if j != i)
    g = inst.gammas[i]
    return eps * linalg.mat_log(g) - shift * np.eye(g.shape[0])


def solve_transform(
    inst: ProblemInstance,
    i: int,
    potentials,
    V0: np.ndarray | None = None,
    settings: TransformSettings | None = None,
) -> TransformResult:
    """Transform slot `i` given the full potential list (slot `i` is ignored).

    Raises:
        InnerNoConvergence: residual above ``marginal_tol`` after both the
            fixed point and the Armijo fallback exhausted their budgets.
    """
    settings = settings or TransformSettings()
    others = list(potentials)
    if len(others) != inst.N:
        raise DimensionMismatch(f"expected {inst.N} potentials, got {len(others)}")
    problem = _SlotProblem(inst, i, others)
    V = default_start(inst, i, others) if V0 is None else np.asarray(V0, dtype=complex)
    if V.shape != problem.gamma.shape:
        raise DimensionMismatch(f"warm start has shape {V.shape}, expected {problem.gamma.shape}")

    p = problem.evaluate(V)
    t = settings.damping
    best, stall, it = p.residual, 0, 0
    budget = settings.max_inner_iters
    while p.residual > settings.marginal_tol and it < budget:
        it += 1
        q = problem.evaluate(p.V + t * problem.fixed_point_direction(p))
        if _improves(q, p):
            p = q
        elif t > settings.min_damping:
            t = max(0.5 * t, settings.min_damping)
        else:
            break
        if p.residual < best:
            best, stall = p.residual, 0
        else:
            stall += 1
            if stall >= budget // 2:
                break
    if p.residual <= settings.marginal_tol:
        return TransformResult(p.V, p.residual, it, "fixed_point")

    p, used = _armijo(problem, p, inst.epsilon, settings, budget)
    if p.residual <= settings.marginal_tol:
        return TransformResult(p.V, p.residual, it + used, "armijo")
    raise InnerNoConvergence(i, p.residual, it + used)


def hep_transform(
    inst: ProblemInstance,
    i: int,
    U_hat,
    V0: np.ndarray | None = None,
    settings: TransformSettings | None = None,
) -> np.ndarray:
    """The (H, eps)-transform of the N-1 potentials `U_hat` into slot `i`."""
    U_hat = list(U_hat)
    if len(U_hat) != inst.N - 1:
        raise DimensionMismatch(f"expected {inst.N - 1} potentials, got {len(U_hat)}")
    d = inst.reduced_shape.dims[i]
    full = U_hat[:i] + [np.zeros((d, d))] + U_hat[i:]
    return solve_transform(inst, i, full, V0, settings).V


def transform_residual(inst: ProblemInstance, i: int, U) -> float:
    """Trace-norm distance between the i-th marginal of ``exp(((+)U - H_O)/eps)`` and ``g_i``."""
    return _SlotProblem(inst, i, list(U)).evaluate(np.asarray(U[i], dtype=complex)).residual


@dataclass(frozen=True)
class RegularityReport:
    """Operator norms of the three bracketed quantities of the a priori transform bounds.

    Each must satisfy ``value <= bound`` up to slack, with bounds
    ``|H|, |H|, 2|H|`` respectively.
    """

    centered: float  # |V - eps log g_i + sum_{j!=i} lambda(U_j)|
    lambda_sum: float  # |sum_{j!=i} lambda(U_j) + lambda(V)|
    renormalized: float  # |V - eps log g_i - lambda(V)|
    hnorm: float

    def excess(self) -> float:
        h = self.hnorm
        return max(self.centered - h, self.lambda_sum - h, self.renormalized - 2 * h)

    def holds(self, slack: float = 1e-8) -> bool:
        return self.excess() <= slack


def check_regularity_bounds(inst: ProblemInstance, i: int, U_hat, V: np.ndarray) -> RegularityReport:
    eps = inst.epsilon
    others = sum(lambda_eps(u, eps) for u in U_hat)
    lam_v = lambda_eps(V, eps)
    eye = np.eye(V.shape[0])
    base = V - eps * linalg.mat_log(inst.gammas[i])
    return RegularityReport(
        centered=linalg.op_norm(base + others * eye),
        lambda_sum=abs(others + lam_v),
        renormalized=linalg.op_norm(base - lam_v * eye),
        hnorm=inst.hnorm,
    )
