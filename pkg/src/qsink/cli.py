"""Command-line interface: ``qsink solve | check | gen``.

Exit codes for ``solve``: 0 converged, 1 unexpected numerical failure,
2 sweep budget exhausted, 3 Pauli infeasible or boundary, 4 invalid input,
5 inner transform did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import linalg
from .errors import (
    InnerNoConvergence,
    MarginalSingular,
    PauliError,
    QsinkError,
    ValidationError,
)
from .io import (
    dumps,
    error_result,
    instance_from_arrays,
    load_instance,
    save_json,
    solve_result,
    symmetric_result,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MAX_SWEEPS = 2
EXIT_PAULI = 3
EXIT_INVALID = 4
EXIT_INNER = 5

log = logging.getLogger("qsink")


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, PauliError):
        return EXIT_PAULI
    if isinstance(exc, (ValidationError, MarginalSingular)):
        return EXIT_INVALID
    if isinstance(exc, InnerNoConvergence):
        return EXIT_INNER
    return EXIT_FAILURE


def _emit(doc: dict, output):
    if output:
        save_json(doc, output)
    else:
        print(dumps(doc))


def cmd_solve(args) -> int:
    from .sinkhorn import SinkhornSettings, random_potentials, solve
    from .symmetric import SymmetricInstance, SymmetricSettings, symmetric_solve

    digest = None
    try:
        data = load_instance(args.instance)
        digest = data.digest()
        inst = data.build()
        if isinstance(inst, SymmetricInstance):
            kw = {}
            if args.tol is not None:
                kw["outer_tol"] = args.tol
            if args.gap_tol is not None:
                kw["gap_tol"] = args.gap_tol
            if args.max_sweeps is not None:
                kw["max_iters"] = args.max_sweeps
            settings = SymmetricSettings(**kw)
            U0 = None
            if args.seeded_init is not None:
                from .generate import random_hermitian

                U0 = random_hermitian(inst.d, 1.0, args.seeded_init)
            report = symmetric_solve(inst, settings, U0)
            doc = symmetric_result(report, settings, digest, args.emit_gamma)
            if args.oracle:
                from .oracle import sector_newton
                from .symmetric import symmetric_dual_value

                U = sector_newton(inst)
                doc["oracle"] = {
                    "dual_difference": abs(symmetric_dual_value(inst, U) - report.dual),
                    "potential_difference": linalg.op_norm(U - report.potential),
                }
        else:
            kw = {}
            if args.tol is not None:
                kw["outer_tol"] = args.tol
            if args.gap_tol is not None:
                kw["gap_tol"] = args.gap_tol
            if args.max_sweeps is not None:
                kw["max_sweeps"] = args.max_sweeps
            settings = SinkhornSettings(**kw)
            U0 = random_potentials(inst, args.seeded_init) if args.seeded_init is not None else None
            report = solve(inst, U0, settings)
            doc = solve_result(report, digest, args.emit_gamma)
            if args.trace:
                with open(args.trace, "w") as fh:
                    for rec in report.trace:
                        fh.write(dumps(rec.as_dict()) + "\n")
            if args.oracle:
                from .functionals import dual_value
                from .oracle import dense_dual_ascent
                from .sinkhorn import potential_distance, reconstruct

                V = dense_dual_ascent(inst)
                doc["oracle"] = {
                    "dual_difference": abs(dual_value(inst, V) - report.dual),
                    "gamma_difference": float(np.linalg.norm(reconstruct(inst, V) - report.gamma)),
                    "potential_distance": potential_distance(report.potentials, V),
                }
    except (QsinkError, ValueError, OSError) as exc:
        if isinstance(exc, OSError):
            exc = ValidationError(f"cannot read instance: {exc}")
        elif isinstance(exc, ValueError) and not isinstance(exc, QsinkError):
            exc = ValidationError(str(exc))
        _emit(error_result(exc, digest), args.output)
        if not args.quiet:
            print(f"qsink: {exc.code}: {exc}", file=sys.stderr)
        return _exit_code(exc)

    _emit(doc, args.output)
    if not args.quiet:
        print(
            f"converged={doc['converged']} primal={doc['primal']:.12g} gap={doc['gap']:.3e} "
            f"max_residual={max(doc['marginal_residuals']):.3e}",
            file=sys.stderr,
        )
    return EXIT_OK if doc["converged"] else EXIT_MAX_SWEEPS


def cmd_check(args) -> int:
    from .symmetric import SymmetricInstance, pauli_feasible, symmetrize_check

    try:
        data = load_instance(args.instance)
    except (ValidationError, OSError) as exc:
        for f in getattr(exc, "findings", [str(exc)]):
            print(f"invalid: {f}")
        return EXIT_INVALID
    findings = []
    lines = []
    if data.symmetric:
        shape_violation = symmetrize_check(linalg.hermitian(data.hamiltonian), _shape(data))
        lines.append(f"symmetry deviation {shape_violation:.3e}")
    try:
        inst = data.build()
    except ValidationError as exc:
        findings.extend(exc.findings)
        inst = None
    if inst is not None and isinstance(inst, SymmetricInstance):
        verdict = pauli_feasible(inst.gamma, inst.N)
        lines.append(
            f"pauli verdict {verdict.verdict.value} (max eigenvalue {verdict.max_eigenvalue:.12g}, 1/N = {1 / inst.N:.12g})"
        )
        lines.append(f"sector dimension {inst.sector.dim}")
        if inst.kind == "fermionic" and not verdict.feasible:
            for line in lines:
                print(line)
            print("infeasible: pauli_infeasible")
            return EXIT_PAULI
    elif inst is not None:
        lines.append(f"dims {list(inst.shape.dims)} reduced {list(inst.reduced_shape.dims)}")
        lines.append(f"kernel dims {list(inst.subspace.kernel_dims)}")
        lines.extend(f"warning: {w}" for w in inst.warnings)
    for line in lines:
        print(line)
    if findings:
        for f in findings:
            print(f"invalid: {f}")
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _shape(data):
    from .tensor import TensorShape

    return TensorShape(data.dims)


def cmd_gen(args) -> int:
    from . import generate

    dims = tuple(int(x) for x in args.dims.split(",")) if args.dims else (2, 2)
    if args.kind == "general":
        raw = generate.named_instance(args.named, dims, args.epsilon, args.hnorm, args.seed)
        data = instance_from_arrays(raw["marginals"], raw["hamiltonian"], raw["epsilon"])
    else:
        if args.d is None or args.N is None:
            print("qsink gen: --d and --N are required for symmetric kinds", file=sys.stderr)
            return EXIT_INVALID
        rng = np.random.default_rng(args.seed)
        h = generate.symmetric_hamiltonian(args.d, args.N, args.hnorm, rng)
        if args.max_eig is not None:
            gamma = generate.density_with_top_eigenvalue(args.d, args.max_eig, rng)
        elif args.kind == "fermionic":
            top = 0.5 * (1.0 / args.N + 1.0 / args.d) if args.d > args.N else 1.0 / args.d
            gamma = generate.density_with_top_eigenvalue(args.d, top, rng)
        else:
            gamma = generate.random_density(args.d, rng)
        data = instance_from_arrays([gamma], h, args.epsilon, kind=args.kind)
    doc = data.to_json()
    doc["seed"] = args.seed
    doc["generator"] = args.named if args.kind == "general" else args.kind
    if args.output:
        save_json(doc, args.output)
    else:
        print(json.dumps(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance file and write a result file")
    p.add_argument("instance")
    p.add_argument("-o", "--output", help="result path (default: stdout)")
    p.add_argument("--tol", type=float, help="marginal residual tolerance")
    p.add_argument("--gap-tol", type=float, help="duality gap tolerance")
    p.add_argument("--max-sweeps", type=int, help="sweep (or ascent step) budget")
    p.add_argument("--emit-gamma", action="store_true", help="include the optimal coupling")
    p.add_argument("--trace", help="write per-sweep records as JSON lines to this path")
    p.add_argument("--seeded-init", type=int, metavar="SEED", help="random initial potentials")
    p.add_argument("--oracle", action="store_true", help="also run the dense Newton oracle and compare")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="validate an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen", help="generate a seeded instance")
    p.add_argument("--named", default="random", choices=("zero", "diagonal", "swap", "gibbs", "random"))
    p.add_argument("--kind", default="general", choices=("general", "bosonic", "fermionic"))
    p.add_argument("--dims", help="comma separated factor dimensions, e.g. 2,3")
    p.add_argument("--d", type=int, help="one-body dimension (symmetric kinds)")
    p.add_argument("--N", type=int, help="particle number (symmetric kinds)")
    p.add_argument("--max-eig", type=float, help="largest marginal eigenvalue (symmetric kinds)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--hnorm", type=float, default=1.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING)
    threads = os.environ.get("QSINK_THREADS")
    if threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=int(threads)):
            return args.func(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
