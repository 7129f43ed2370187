"""Exception hierarchy shared by the solver, the symmetric sector and the CLI."""

from __future__ import annotations


class QsinkError(Exception):
    """Base class for all library errors."""

    #: machine readable tag written to result files by the CLI
    code = "error"


class ValidationError(QsinkError, ValueError):
    code = "invalid_input"

    def __init__(self, message, findings=None):
        super().__init__(message)
        self.findings = list(findings or [message])


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class NotHermitian(ValidationError):
    code = "not_hermitian"


class EigensolverError(QsinkError):
    code = "eigensolver_failure"

    def __init__(self, dim, cause=None):
        super().__init__(f"eigendecomposition failed to converge (dim={dim}): {cause}")
        self.dim = dim


class NegativeEigenvalue(ValidationError):
    code = "negative_eigenvalue"


class SingularLog(QsinkError, ValueError):
    """Logarithm requested on a matrix with a (numerical) kernel."""

    code = "singular_log"


class MarginalNotPSD(ValidationError):
    code = "marginal_not_psd"


class MarginalTraceNotOne(ValidationError):
    code = "marginal_trace"


class NotDensityMatrix(ValidationError):
    code = "not_density_matrix"


class ReferenceNotPositiveDefinite(ValidationError):
    code = "reference_not_positive_definite"


class SymmetryViolation(ValidationError):
    code = "symmetry_violation"


class InnerNoConvergence(QsinkError):
    """The inner (H, eps)-transform solve did not reach its marginal tolerance."""

    code = "inner_no_convergence"

    def __init__(self, slot, residual, iterations):
        super().__init__(
            f"transform for slot {slot} stalled at residual {residual:.3e} "
            f"after {iterations} iterations (epsilon likely too small for |H|)"
        )
        self.slot = slot
        self.residual = residual
        self.iterations = iterations


class MaxSweepsExceeded(QsinkError):
    code = "max_sweeps_exceeded"

    def __init__(self, report):
        super().__init__(
            f"no convergence after {report.sweeps} sweeps "
            f"(max residual {max(report.marginal_residuals):.3e}, gap {report.gap:.3e})"
        )
        self.report = report


class IterationBudgetExceeded(QsinkError):
    code = "iteration_budget_exceeded"


class PerturbedMarginalInfeasible(ValidationError):
    code = "perturbed_marginal_infeasible"


class FermionicSectorEmpty(ValidationError):
    code = "fermionic_sector_empty"


class PauliError(QsinkError):
    """Base for Pauli-principle failures; carries the binding eigenvector."""

    code = "pauli"

    def __init__(self, message, eigenvalue, witness):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.witness = witness


class PauliInfeasible(PauliError):
    code = "pauli_infeasible"


class PauliBoundary(PauliError):
    code = "pauli_boundary"


class MarginalSingular(QsinkError):
    code = "marginal_singular"
