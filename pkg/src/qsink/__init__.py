"""Entropic multi-marginal optimal transport between quantum states by non-commutative Sinkhorn iteration."""

from .errors import (
    FermionicSectorEmpty,
    InnerNoConvergence,
    MarginalSingular,
    MaxSweepsExceeded,
    PauliBoundary,
    PauliInfeasible,
    QsinkError,
    ValidationError,
)
from .functionals import (
    PotentialVector,
    ProblemInstance,
    dual_value,
    lambda_eps,
    primal_value,
    umegaki_transform,
)
from .sinkhorn import (
    SinkhornSettings,
    SolveReport,
    frechet_check,
    gauge_align,
    one_step,
    renormalize,
    solve,
    sweep_tau,
)
from .symmetric import (
    SymmetricInstance,
    build_sector,
    pauli_feasible,
    symmetric_dual_value,
    symmetric_solve,
)
from .transform import TransformSettings, hep_transform, transform_residual

__version__ = "0.1.0"

__all__ = [
    "FermionicSectorEmpty",
    "InnerNoConvergence",
    "MarginalSingular",
    "MaxSweepsExceeded",
    "PauliBoundary",
    "PauliInfeasible",
    "PotentialVector",
    "ProblemInstance",
    "QsinkError",
    "SinkhornSettings",
    "SolveReport",
    "SymmetricInstance",
    "TransformSettings",
    "ValidationError",
    "build_sector",
    "dual_value",
    "frechet_check",
    "gauge_align",
    "hep_transform",
    "lambda_eps",
    "one_step",
    "pauli_feasible",
    "primal_value",
    "renormalize",
    "solve",
    "sweep_tau",
    "symmetric_dual_value",
    "symmetric_solve",
    "transform_residual",
    "umegaki_transform",
]
