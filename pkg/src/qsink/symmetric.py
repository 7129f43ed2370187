"""Bosonic and fermionic sectors: permutation-symmetric problems with a single potential.

With all N marginals equal to one density matrix g on C^d and a Hamiltonian
invariant under slot permutations, the dual has a single potential U on C^d:

    D(U) = Tr(U g) - eps Tr_sector exp(E* ((1/N)(+)U - H) E / eps) + eps,

where E is the isometry from the (anti)symmetric sector into (C^d)^N. For
fermions, feasibility requires ``g <= 1/N`` (the Pauli principle) and a
maximiser exists exactly when ``0 < g < 1/N``.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from . import linalg
from .errors import (
    DimensionMismatch,
    FermionicSectorEmpty,
    MarginalNotPSD,
    MarginalSingular,
    MarginalTraceNotOne,
    PauliBoundary,
    PauliInfeasible,
    SymmetryViolation,
    ValidationError,
)
from .functionals import entropy
from .tensor import TensorShape, kronecker_sum, partial_trace, permute_S

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
PAULI_TOL = 1e-12
KINDS = ("bosonic", "fermionic")


def _permutation_sign(p) -> int:
    sign, seen = 1, [False] * len(p)
    for start in range(len(p)):
        if seen[start]:
            continue
        length, k = 0, start
        while not seen[k]:
            seen[k] = True
            k = p[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Orthonormal basis of the symmetric or antisymmetric N-fold tensor power of C^d.

    Fermionic basis vectors are Slater determinants labelled by strictly
    increasing index tuples; bosonic ones are normalised symmetrisations
    labelled by non-decreasing tuples. Indices are 0-based.
    """

    kind: str
    d: int
    N: int
    basis: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def shape(self) -> TensorShape:
        return TensorShape((self.d,) * self.N)

    @cached_property
    def embed(self) -> sparse.csr_matrix:
        """Sparse ``d^N x dim`` isometry (built on first use)."""
        rows, cols, vals = [], [], []
        weights = [self.d ** (self.N - 1 - m) for m in range(self.N)]
        for col, labels in enumerate(self.basis):
            if self.kind == "fermionic":
                norm = 1.0 / math.sqrt(math.factorial(self.N))
                for p in itertools.permutations(range(self.N)):
                    rows.append(sum(labels[p[m]] * weights[m] for m in range(self.N)))
                    cols.append(col)
                    vals.append(_permutation_sign(p) * norm)
            else:
                perms = set(itertools.permutations(labels))
                norm = 1.0 / math.sqrt(len(perms))
                for p in perms:
                    rows.append(sum(p[m] * weights[m] for m in range(self.N)))
                    cols.append(col)
                    vals.append(norm)
        total = self.d**self.N
        return sparse.csr_matrix((vals, (rows, cols)), shape=(total, self.dim), dtype=complex)

    def projector(self) -> np.ndarray:
        e = self.embed
        return (e @ e.conj().T).toarray()

    def expand(self, g: np.ndarray) -> np.ndarray:
        """``E G E*`` on the full tensor space."""
        e = self.embed
        left = e @ g
        return np.asarray((e.conj() @ left.T).T)


def build_sector(kind: str, d: int, N: int) -> SectorBasis:
    """Raises:
    FermionicSectorEmpty: fermions with ``N > d``.
    """
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}, got {kind!r}")
    if d < 1 or N < 1:
        raise DimensionMismatch(f"d and N must be positive, got d={d}, N={N}")
    if kind == "fermionic":
        if N > d:
            raise FermionicSectorEmpty(f"no antisymmetric states of {N} particles in dimension {d}")
        labels = itertools.combinations(range(d), N)
    else:
        labels = itertools.combinations_with_replacement(range(d), N)
    return SectorBasis(kind, d, N, tuple(labels))


def project_sector(a: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """``E* A E``: the compression of `a` to the sector."""
    a = np.asarray(a)
    total = basis.d**basis.N
    if a.shape != (total, total):
        raise DimensionMismatch(f"expected a {total}x{total} matrix, got {a.shape}")
    e = basis.embed
    left = np.asarray(e.conj().T @ a)  # dim x total
    out = np.asarray((e.T @ left.T).T)
    return 0.5 * (out + out.conj().T)


def symmetrize_check(h: np.ndarray, shape: TensorShape) -> float:
    """Largest operator-norm change of `h` under the slot permutations moving slot i last."""
    h = np.asarray(h)
    if len(set(shape.dims)) != 1:
        raise DimensionMismatch("permutation symmetry needs equal factor dimensions")
    return max(linalg.op_norm(permute_S(i, h, shape) - h) for i in range(shape.N))


class Verdict(enum.Enum):
    INFEASIBLE = "infeasible"
    FEASIBLE = "feasible"
    STRICT = "strict"


@dataclass(frozen=True)
class PauliVerdict:
    verdict: Verdict
    max_eigenvalue: float
    min_eigenvalue: float
    witness: np.ndarray  # eigenvector of the largest eigenvalue

    @property
    def feasible(self) -> bool:
        return self.verdict is not Verdict.INFEASIBLE

    @property
    def strict(self) -> bool:
        return self.verdict is Verdict.STRICT


def pauli_feasible(gamma: np.ndarray, N: int, strict: bool = False, kernel_tol: float | None = None):
    """Classify `gamma` against the Pauli bound ``gamma <= 1/N``.

    STRICT means ``0 < gamma < 1/N``; FEASIBLE means ``gamma <= 1/N`` with a
    kernel or an eigenvalue at the bound. With ``strict=True`` returns a bool
    for STRICT instead of the verdict object.
    """
    gamma = linalg.hermitian(gamma)
    w, v = linalg.eigh(gamma)
    tol = linalg.default_kernel_tol(gamma) if kernel_tol is None else kernel_tol
    top, bottom = float(w[-1]), float(w[0])
    if top > 1.0 / N + PAULI_TOL:
        verdict = Verdict.INFEASIBLE
    elif bottom > tol and top < 1.0 / N - PAULI_TOL:
        verdict = Verdict.STRICT
    else:
        verdict = Verdict.FEASIBLE
    result = PauliVerdict(verdict, top, bottom, v[:, -1])
    return result.strict if strict else result


@dataclass(frozen=True, eq=False)
class SymmetricInstance:
    kind: str
    d: int
    N: int
    gamma: np.ndarray
    hamiltonian: np.ndarray
    epsilon: float
    sector: SectorBasis = field(repr=False)
    h_sector: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, kind: str, gamma, hamiltonian, epsilon: float, N: int):
        """Validate and build; raises on asymmetric H, invalid gamma or an empty sector."""
        epsilon = float(epsilon)
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        gamma = linalg.hermitian(gamma)
        d = gamma.shape[0]
        tr = linalg.trace(gamma)
        if abs(tr - 1.0) > 1e-10:
            raise MarginalTraceNotOne(f"marginal has trace {tr:.12g}")
        w = linalg.eigvalsh(gamma)
        if w[0] < -linalg.default_kernel_tol(gamma):
            raise MarginalNotPSD(f"marginal has negative eigenvalue {w[0]:.3e}")
        h = linalg.hermitian(hamiltonian)
        shape = TensorShape((d,) * N)
        if h.shape != (shape.total, shape.total):
            raise DimensionMismatch(f"hamiltonian must be {shape.total}x{shape.total}, got {h.shape}")
        violation = symmetrize_check(h, shape)
        if violation > SYMMETRY_TOL:
            raise SymmetryViolation(f"hamiltonian is not permutation symmetric (deviation {violation:.3e})")
        sector = build_sector(kind, d, N)
        return cls(kind, d, N, gamma, h, epsilon, sector, project_sector(h, sector))

    @property
    def shape(self) -> TensorShape:
        return TensorShape((self.d,) * self.N)

    @property
    def hnorm(self) -> float:
        return linalg.op_norm(self.hamiltonian)

    def sector_exponent(self, U: np.ndarray) -> np.ndarray:
        """``E* ((1/N)(+)U - H) E / eps``."""
        one_body = project_sector(kronecker_sum([U / self.N] * self.N, self.shape), self.sector)
        return (one_body - self.h_sector) / self.epsilon


def symmetric_dual_value(inst: SymmetricInstance, U: np.ndarray) -> float:
    U = linalg.hermitian(U)
    w = linalg.eigvalsh(inst.sector_exponent(U))
    return linalg.frobenius_inner(U, inst.gamma) - inst.epsilon * float(np.exp(logsumexp(w))) + inst.epsilon


@dataclass(frozen=True)
class _Eval:
    U: np.ndarray
    value: float
    gradient: np.ndarray
    sector_gamma: np.ndarray
    log_eigs: np.ndarray


def _evaluate(inst: SymmetricInstance, U: np.ndarray) -> _Eval:
    w, v = linalg.eigh(inst.sector_exponent(U))
    p = np.exp(w)
    g = (v * p) @ v.conj().T
    marginal = partial_trace(0, inst.sector.expand(g), inst.shape)
    value = linalg.frobenius_inner(U, inst.gamma) - inst.epsilon * float(p.sum()) + inst.epsilon
    return _Eval(U, value, inst.gamma - marginal, g, w)


@dataclass(frozen=True)
class SymmetricSettings:
    outer_tol: float = 1e-10
    gap_tol: float = 1e-7
    max_iters: int = 20000
    newton_threshold: float = 1e-4
    fd_step: float = 1e-5

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class SymmetricReport:
    gamma: np.ndarray  # on the full tensor space
    sector_gamma: np.ndarray
    potential: np.ndarray
    primal: float
    dual: float
    gap: float
    marginal_residuals: tuple[float, ...]
    iterations: int
    gradient_norm: float
    converged: bool
    warnings: tuple[str, ...] = ()

    @property
    def max_residual(self) -> float:
        return max(self.marginal_residuals)


def check_solvable(inst: SymmetricInstance):
    """Raise the appropriate error when no maximiser exists or the marginal is singular."""
    verdict = pauli_feasible(inst.gamma, inst.N)
    if inst.kind == "fermionic":
        if verdict.verdict is Verdict.INFEASIBLE:
            raise PauliInfeasible(
                f"largest eigenvalue {verdict.max_eigenvalue:.12g} exceeds 1/N = {1 / inst.N:.12g}",
                verdict.max_eigenvalue,
                verdict.witness,
            )
        if verdict.max_eigenvalue >= 1.0 / inst.N - PAULI_TOL:
            raise PauliBoundary(
                f"eigenvalue {verdict.max_eigenvalue:.12g} sits on the bound 1/N; the dual has no maximiser",
                verdict.max_eigenvalue,
                verdict.witness,
            )
    if verdict.min_eigenvalue <= linalg.default_kernel_tol(inst.gamma):
        raise MarginalSingular(
            f"marginal has a kernel (eigenvalue {verdict.min_eigenvalue:.3e}); "
            "restrict the one-body space to its support first"
        )
    return verdict


def boundary_threshold(inst: SymmetricInstance, max_eigenvalue: float) -> float:
    """Potential size beyond which a fermionic ascent is declared to run off to the Pauli boundary."""
    margin = max(1.0 / inst.N - max_eigenvalue, 1e-5)
    scale = inst.hnorm + inst.epsilon * math.log(inst.sector.dim) + inst.epsilon
    return min(1e6, 10.0 * scale / margin)


def _fd_hessian(inst, U, basis, step):
    """Central-difference Hessian of the dual in the real Hermitian parameterisation."""
    cols = []
    for b in basis:
        gp = _evaluate(inst, U + step * b).gradient
        gm = _evaluate(inst, U - step * b).gradient
        cols.append(linalg.to_real_params((gp - gm) / (2 * step), basis))
    hess = np.array(cols).T
    return 0.5 * (hess + hess.T)


def symmetric_solve(inst: SymmetricInstance, settings: SymmetricSettings | None = None, U0=None):
    """Maximise the sector dual: backtracking gradient ascent, then finite-difference Newton.

    Raises:
        PauliInfeasible, PauliBoundary: fermionic marginal violating or touching ``1/N``.
        MarginalSingular: marginal with a kernel.
    """
    settings = settings or SymmetricSettings()
    verdict = check_solvable(inst)
    eps = inst.epsilon
    U = eps * linalg.mat_log(inst.gamma) if U0 is None else linalg.hermitian(U0)
    basis = linalg.hermitian_basis(inst.d)
    threshold = boundary_threshold(inst, verdict.max_eigenvalue) if inst.kind == "fermionic" else np.inf

    cur = _evaluate(inst, U)
    step = eps
    it = 0
    gnorm = linalg.trace_norm(cur.gradient)
    while gnorm > settings.outer_tol and it < settings.max_iters:
        it += 1
        direction = cur.gradient
        newton = False
        if gnorm < settings.newton_threshold:
            hess = _fd_hessian(inst, cur.U, basis, settings.fd_step * max(1.0, linalg.op_norm(cur.U)))
            g = linalg.to_real_params(cur.gradient, basis)
            try:
                x = np.linalg.solve(hess, -g)
                if g @ x > 0:
                    direction, newton = linalg.from_real_params(x, basis), True
            except np.linalg.LinAlgError:
                pass
        t = 1.0 if newton else step
        slope = linalg.frobenius_inner(cur.gradient, direction)
        accepted = None
        for _ in range(60):
            cand = _evaluate(inst, cur.U + t * direction)
            if cand.value >= cur.value + 1e-4 * t * slope:
                accepted = cand
                break
            if newton and linalg.trace_norm(cand.gradient) < gnorm and cand.value >= cur.value - 1e-14 * max(1, abs(cur.value)):
                accepted = cand  # objective flat to round-off; trust the gradient decrease
                break
            t *= 0.5
        if accepted is None:
            break
        cur = accepted
        if not newton:
            step = 2.0 * t
        gnorm = linalg.trace_norm(cur.gradient)
        if linalg.op_norm(cur.U) > threshold:
            raise PauliBoundary(
                f"potential norm {linalg.op_norm(cur.U):.3e} exceeded {threshold:.3e}; "
                "ascent is running off towards the Pauli bound",
                verdict.max_eigenvalue,
                verdict.witness,
            )
    return _report(inst, cur, it, gnorm, settings)


def _report(inst, cur: _Eval, iterations, gnorm, settings) -> SymmetricReport:
    gamma = inst.sector.expand(cur.sector_gamma)
    gamma = 0.5 * (gamma + gamma.conj().T)
    residuals = tuple(
        linalg.trace_norm(partial_trace(i, gamma, inst.shape) - inst.gamma) for i in range(inst.N)
    )
    primal = linalg.frobenius_inner(inst.h_sector, cur.sector_gamma) + inst.epsilon * entropy(cur.sector_gamma)
    dual = symmetric_dual_value(inst, cur.U)
    gap = primal - dual
    converged = gnorm <= settings.outer_tol and gap <= settings.gap_tol
    warnings = () if converged else (f"stopped after {iterations} iterations with gradient norm {gnorm:.3e}",)
    return SymmetricReport(
        gamma=gamma,
        sector_gamma=cur.sector_gamma,
        potential=cur.U,
        primal=primal,
        dual=dual,
        gap=gap,
        marginal_residuals=residuals,
        iterations=iterations,
        gradient_norm=gnorm,
        converged=converged,
        warnings=warnings,
    )


def divergence_potential(gamma: np.ndarray, N: int, n: float) -> np.ndarray:
    """``n`` on the top eigenvector of `gamma`, ``-n/(N-1)`` on its orthogonal complement."""
    w, v = linalg.eigh(linalg.hermitian(gamma))
    u = np.full(len(w), -n / (N - 1))
    u[-1] = n
    return (v * u) @ v.conj().T


@dataclass(frozen=True)
class DivergenceWitness:
    ns: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]  # finite-difference slopes between consecutive n
    predicted_slope: float  # (N g_1 - 1)/(N - 1)

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.values, self.values[1:]))


def divergence_witness(inst: SymmetricInstance, ns=(10, 20, 40)) -> DivergenceWitness:
    """Evaluate the fermionic dual along a ray that diverges when ``g_1 > 1/N``."""
    if inst.N < 2:
        raise ValueError("the divergence ray needs N >= 2")
    g1 = float(linalg.eigvalsh(inst.gamma)[-1])
    values = tuple(symmetric_dual_value(inst, divergence_potential(inst.gamma, inst.N, n)) for n in ns)
    slopes = tuple((values[k + 1] - values[k]) / (ns[k + 1] - ns[k]) for k in range(len(ns) - 1))
    return DivergenceWitness(tuple(ns), values, slopes, (inst.N * g1 - 1) / (inst.N - 1))


def fermionic_dual_bound(inst: SymmetricInstance) -> float:
    """Upper bound ``|H|`` of the fermionic dual, valid whenever ``g <= 1/N``."""
    return inst.hnorm
