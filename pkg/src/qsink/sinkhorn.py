"""Outer non-commutative Sinkhorn iteration.

One sweep applies the slot transforms in order ``0, 1, ..., N-1`` and then
renormalises the potentials so that ``lambda_eps(U_i) = 0`` for ``i < N-1``,
the last slot absorbing the compensating shift. The iterate after k sweeps
is therefore ``tau^k(U0) + alpha^k`` with ``alpha^k`` the accumulated gauge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import DimensionMismatch, MaxSweepsExceeded, PerturbedMarginalInfeasible
from .functionals import (
    PotentialVector,
    ProblemInstance,
    check_potentials,
    dual_value,
    exponent,
    lambda_eps,
    primal_value,
)
from .tensor import expand_to_full, partial_trace
from .transform import TransformSettings, check_regularity_bounds, solve_transform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SinkhornSettings:
    outer_tol: float = 1e-9
    gap_tol: float = 1e-7
    max_sweeps: int = 5000
    trace_every: int = 1
    transform: TransformSettings = field(default_factory=TransformSettings)
    check_bounds: bool = True

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1 or self.trace_every < 1:
            raise ValueError("max_sweeps and trace_every must be at least 1")


@dataclass(frozen=True)
class SweepRecord:
    """State after `sweep` sweeps (sweep 0 is the initial point).

    ``bound_excess`` is ``max_i |U_i - eps log g_i| - 2|H|`` for the
    renormalised iterate; ``transform_bound_excess`` is the worst excess over
    the three transform bounds of the sweep's inner solutions. Non-positive
    values mean the bounds held.
    """

    sweep: int
    dual: float
    max_residual: float
    gap: float
    alpha: tuple[float, ...]
    bound_excess: float
    transform_bound_excess: float
    lambda_bound_excess: float
    inner_iterations: int

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["alpha"] = list(self.alpha)
        return out


@dataclass(frozen=True, eq=False)
class SolveReport:
    gamma: np.ndarray
    potentials: PotentialVector
    primal: float
    dual: float
    gap: float
    marginal_residuals: tuple[float, ...]
    sweeps: int
    converged: bool
    trace: tuple[SweepRecord, ...] = ()
    warnings: tuple[str, ...] = ()
    settings: SinkhornSettings | None = None

    def raise_for_status(self) -> SolveReport:
        if not self.converged:
            raise MaxSweepsExceeded(self)
        return self

    @property
    def max_residual(self) -> float:
        return max(self.marginal_residuals)


@dataclass(frozen=True)
class _State:
    """Everything derivable from one eigendecomposition of the exponent."""

    gamma_o: np.ndarray
    residuals: tuple[float, ...]
    primal: float
    dual: float

    @property
    def gap(self) -> float:
        return self.primal - self.dual


def _evaluate(inst: ProblemInstance, U) -> _State:
    eps = inst.epsilon
    w, v = linalg.eigh(exponent(inst, U))
    p = np.exp(w)
    gamma_o = (v * p) @ v.conj().T
    shape = inst.reduced_shape
    marginals = [partial_trace(i, gamma_o, shape) for i in range(inst.N)]
    residuals = tuple(linalg.trace_norm(m - g) for m, g in zip(marginals, inst.gammas))
    linear = sum(linalg.frobenius_inner(u, g) for u, g in zip(U, inst.gammas))
    energy = linalg.frobenius_inner(inst.h_active, gamma_o)
    primal = energy + eps * float(np.sum(p * w))
    dual = linear - eps * float(p.sum()) + eps
    return _State(gamma_o, residuals, primal, dual)


def initial_potentials(inst: ProblemInstance) -> PotentialVector:
    """``U_i = eps log g_i``, the exact optimum when H = 0."""
    return PotentialVector(tuple(inst.epsilon * g for g in inst.log_gammas()))


def random_potentials(inst: ProblemInstance, seed=None, scale: float = 1.0) -> PotentialVector:
    """Random Hermitian potentials of operator norm `scale`, for seeded initialisation."""
    from .generate import random_hermitian

    rng = np.random.default_rng(seed)
    return PotentialVector(tuple(random_hermitian(d, scale, rng) for d in inst.reduced_shape.dims))


def one_step(inst: ProblemInstance, i: int, U: PotentialVector, settings: SinkhornSettings | None = None):
    """Replace slot `i` by its transform of the other slots (warm-started at ``U_i``)."""
    settings = settings or SinkhornSettings()
    check_potentials(inst, U)
    res = solve_transform(inst, i, U, V0=U[i], settings=settings.transform)
    return U.with_slot(i, res.V)


def sweep_tau(inst: ProblemInstance, U: PotentialVector, settings: SinkhornSettings | None = None):
    """The Sinkhorn operator: transforms of slots ``0 .. N-1`` in order."""
    for i in range(inst.N):
        U = one_step(inst, i, U, settings)
    return U


def renormalize(U: PotentialVector, epsilon: float) -> PotentialVector:
    """Shift slots ``0 .. N-2`` to ``lambda_eps = 0``; the last slot takes the opposite total."""
    lam = np.array([lambda_eps(u, epsilon) for u in U.entries[:-1]])
    return U.translate(np.append(-lam, lam.sum()))


def uniform_bound_excess(inst: ProblemInstance, U) -> float:
    """``max_i |U_i - eps log g_i| - 2|H|``; non-positive when the a priori box holds."""
    eps = inst.epsilon
    worst = max(linalg.op_norm(u - eps * lg) for u, lg in zip(U, inst.log_gammas()))
    return worst - 2.0 * inst.hnorm


def _sweep(inst, U, settings):
    """One checked sweep; returns (U, inner iterations, transform-bound excess, lambda excess)."""
    iters, excess, lam_excess = 0, -np.inf, -np.inf
    for i in range(inst.N):
        res = solve_transform(inst, i, U, V0=U[i], settings=settings.transform)
        iters += res.iterations
        if settings.check_bounds:
            rep = check_regularity_bounds(inst, i, [u for j, u in enumerate(U) if j != i], res.V)
            excess = max(excess, rep.excess())
            lam_excess = max(lam_excess, rep.lambda_sum - rep.hnorm)
        U = U.with_slot(i, res.V)
    return U, iters, excess, lam_excess


def solve(
    inst: ProblemInstance,
    U0: PotentialVector | None = None,
    settings: SinkhornSettings | None = None,
) -> SolveReport:
    """Run Sinkhorn sweeps until residuals and duality gap are both below tolerance.

    Never raises on non-convergence: the returned report has
    ``converged=False`` and :meth:`SolveReport.raise_for_status` raises
    :class:`MaxSweepsExceeded`. Inner-solve failures propagate.
    """
    settings = settings or SinkhornSettings()
    U = initial_potentials(inst) if U0 is None else PotentialVector(tuple(U0), getattr(U0, "gauge", None))
    check_potentials(inst, U)
    U = replace(U, gauge=np.zeros(inst.N))

    state = _evaluate(inst, U)
    trace = [
        SweepRecord(0, state.dual, max(state.residuals), state.gap, tuple(U.gauge),
                    uniform_bound_excess(inst, U) if settings.check_bounds else float("nan"),
                    float("nan"), float("nan"), 0)
    ]
    converged = False
    sweeps = 0
    for sweeps in range(1, settings.max_sweeps + 1):
        U, iters, t_excess, l_excess = _sweep(inst, U, settings)
        U = renormalize(U, inst.epsilon)
        state = _evaluate(inst, U)
        converged = max(state.residuals) <= settings.outer_tol and state.gap <= settings.gap_tol
        if sweeps % settings.trace_every == 0 or converged or sweeps == settings.max_sweeps:
            trace.append(
                SweepRecord(
                    sweeps, state.dual, max(state.residuals), state.gap, tuple(U.gauge),
                    uniform_bound_excess(inst, U) if settings.check_bounds else float("nan"),
                    t_excess if settings.check_bounds else float("nan"),
                    l_excess if settings.check_bounds else float("nan"),
                    iters,
                )
            )
        if converged:
            break

    warnings = list(inst.warnings)
    if not converged:
        warnings.append(f"max_sweeps={settings.max_sweeps} reached without convergence")
        log.warning(warnings[-1])
    gamma = expand_to_full(state.gamma_o, inst.subspace)
    gamma = 0.5 * (gamma + gamma.conj().T)
    try:
        primal = primal_value(inst, gamma)
    except Exception:  # trace far from one before convergence
        primal = state.primal
    dual = dual_value(inst, U)
    return SolveReport(
        gamma=gamma,
        potentials=U,
        primal=primal,
        dual=dual,
        gap=primal - dual,
        marginal_residuals=state.residuals,
        sweeps=sweeps,
        converged=converged,
        trace=tuple(trace),
        warnings=tuple(warnings),
        settings=settings,
    )


def reconstruct(inst: ProblemInstance, U) -> np.ndarray:
    """``exp(((+)U - H_O)/eps)`` expanded to the full space."""
    g = linalg.mat_exp(exponent(inst, U))
    return expand_to_full(g, inst.subspace)


def gauge_align(U, V):
    """Translate `V` towards `U` by a zero-sum constant vector.

    Returns ``(aligned, alpha)`` where ``aligned_i = V_i - alpha_i`` and
    `alpha` minimises ``max_i |U_i - V_i + alpha_i|`` subject to
    ``sum(alpha) = 0``. If ``V = U + a`` exactly then ``alpha = a``.
    """
    if len(U) != len(V):
        raise DimensionMismatch("potential vectors have different lengths")
    c, r = [], []
    for u, v in zip(U, V):
        u, v = np.asarray(u), np.asarray(v)
        if u.shape != v.shape:
            raise DimensionMismatch(f"slot shapes differ: {u.shape} vs {v.shape}")
        w = linalg.eigvalsh(v - u)
        c.append(0.5 * (w[-1] + w[0]))
        r.append(0.5 * (w[-1] - w[0]))
    c, r = np.array(c), np.array(r)
    n = len(c)
    level = max(r.max(), (abs(c.sum()) + r.sum()) / n)
    room = level - r
    s = c.sum() / room.sum() if room.sum() > 0 else 0.0
    alpha = c - s * room
    alpha -= alpha.mean()  # exact zero sum against round-off
    aligned = tuple(np.asarray(v) - a * np.eye(np.asarray(v).shape[0]) for v, a in zip(V, alpha))
    return PotentialVector(aligned), alpha


def potential_distance(U, V) -> float:
    """``max_i |U_i - V_i|`` after optimally gauge-aligning V onto U."""
    aligned, _ = gauge_align(U, V)
    return max(linalg.op_norm(np.asarray(u) - a) for u, a in zip(U, aligned))


#: settings for the extra solves of finite-difference checks
TIGHT = SinkhornSettings(
    outer_tol=1e-12, gap_tol=1e-10, transform=TransformSettings(marginal_tol=1e-13, max_inner_iters=400)
)


def optimal_value(inst: ProblemInstance, settings: SinkhornSettings | None = None) -> float:
    """The entropic transport cost, evaluated as the dual value at convergence."""
    return solve(inst, settings=settings or TIGHT).raise_for_status().dual


def frechet_check(
    inst: ProblemInstance,
    i: int,
    sigma: np.ndarray,
    h: float = 1e-5,
    settings: SinkhornSettings | None = None,
):
    """Compare ``Tr(U_i sigma)`` with a central difference of the optimal value in direction sigma.

    `sigma` is a traceless Hermitian matrix on the full slot-i space; both
    ``g_i + h sigma`` and ``g_i - h sigma`` must be positive definite.

    Returns:
        ``(analytic, numeric)``.
    """
    settings = settings or TIGHT
    sigma = linalg.hermitian(sigma)
    gamma = inst.marginals[i]
    if sigma.shape != gamma.shape:
        raise DimensionMismatch(f"direction has shape {sigma.shape}, expected {gamma.shape}")
    if abs(linalg.trace(sigma)) > 1e-12 * max(1.0, linalg.trace_norm(sigma)):
        raise ValueError("direction must be traceless")
    if not np.any(sigma):
        return 0.0, 0.0
    values = []
    for sign in (1.0, -1.0):
        g = gamma + sign * h * sigma
        w = linalg.eigvalsh(g)
        if w[0] <= linalg.default_kernel_tol(g):
            raise PerturbedMarginalInfeasible(f"g_{i} {'+-'[sign < 0]} h sigma has eigenvalue {w[0]:.3e}")
        marginals = list(inst.marginals)
        marginals[i] = g
        values.append(
            optimal_value(ProblemInstance.create(marginals, inst.hamiltonian, inst.epsilon, inst.kernel_tol), settings)
        )
    base = solve(inst, settings=settings).raise_for_status()
    iso = inst.subspace.isometries[i]
    analytic = linalg.frobenius_inner(base.potentials[i], iso.conj().T @ sigma @ iso)
    numeric = (values[0] - values[1]) / (2.0 * h)
    return analytic, numeric
