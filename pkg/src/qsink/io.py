"""JSON instance and result files.

Complex matrices are stored as ``{"re": [[...]], "im": [[...]]}`` (row-major
nested lists; flat lists of length d*d are accepted on input). Floats are
written by ``json`` with the shortest representation that round-trips to the
same double, so loading a saved result reproduces every number bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .tensor import TensorShape

FORMAT_VERSION = 1
KINDS = ("general", "bosonic", "fermionic")


def encode_matrix(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def decode_matrix(obj, name: str = "matrix") -> np.ndarray:
    """Inverse of :func:`encode_matrix`; also accepts a plain real (nested) list."""
    if isinstance(obj, dict):
        if "re" not in obj:
            raise ValidationError(f"{name}: complex matrix needs an 're' field")
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValidationError(f"{name}: 're' and 'im' have different shapes {re.shape}, {im.shape}")
        a = re + 1j * im
    else:
        try:
            a = np.asarray(obj, dtype=float).astype(complex)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{name}: not a numeric matrix ({exc})") from exc
    if a.ndim == 1:
        d = math.isqrt(a.size)
        if d * d != a.size:
            raise ValidationError(f"{name}: flat array of length {a.size} is not square")
        a = a.reshape(d, d)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name}: expected a square matrix, got shape {a.shape}")
    return a


@dataclass
class InstanceFile:
    """A problem as stored on disk.

    For ``general`` instances ``dims`` lists the factor dimensions and there
    is one marginal per factor. For ``bosonic``/``fermionic`` instances all
    factors share dimension ``d``; ``marginals`` holds the single one-body
    density matrix (N identical copies are also accepted).
    """

    kind: str
    epsilon: float
    dims: tuple[int, ...]
    marginals: list[np.ndarray]
    hamiltonian: np.ndarray
    reference: list[np.ndarray] | None = None
    version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def symmetric(self) -> bool:
        return self.kind != "general"

    @property
    def N(self) -> int:
        return len(self.dims)

    def to_json(self) -> dict:
        doc = {"version": self.version, "kind": self.kind, "epsilon": self.epsilon}
        if self.symmetric:
            doc["dims"] = {"d": self.dims[0], "N": self.N}
        else:
            doc["dims"] = list(self.dims)
        doc["marginals"] = [encode_matrix(m) for m in self.marginals]
        doc["hamiltonian"] = encode_matrix(self.hamiltonian)
        if self.reference is not None:
            doc["reference"] = [encode_matrix(m) for m in self.reference]
        doc.update(self.extra)
        return doc

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def build(self):
        """Validated solver instance: a ``ProblemInstance`` or a ``SymmetricInstance``.

        A ``reference`` on a general instance yields the relative-entropy
        problem with respect to the product of the references.
        """
        from .functionals import ProblemInstance, umegaki_transform
        from .symmetric import SymmetricInstance

        if self.symmetric:
            if self.reference is not None:
                raise ValidationError("reference matrices are only supported for general instances")
            return SymmetricInstance.create(self.kind, self.marginals[0], self.hamiltonian, self.epsilon, self.N)
        inst = ProblemInstance.create(self.marginals, self.hamiltonian, self.epsilon)
        if self.reference is not None:
            inst = umegaki_transform(inst, self.reference)
        return inst


def parse_instance(doc: dict) -> InstanceFile:
    """Structural validation of an instance document.

    Raises:
        ValidationError: with every structural finding listed in ``findings``.
    """
    findings = []
    if not isinstance(doc, dict):
        raise ValidationError("instance must be a JSON object")
    version = doc.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        findings.append(f"unsupported version {version!r}")
    kind = doc.get("kind", "general")
    if kind not in KINDS:
        findings.append(f"kind must be one of {KINDS}, got {kind!r}")
    try:
        epsilon = float(doc["epsilon"])
        if not epsilon > 0:
            findings.append(f"epsilon must be positive, got {epsilon}")
    except (KeyError, TypeError, ValueError):
        findings.append("missing or non-numeric 'epsilon'")
        epsilon = float("nan")

    dims_doc = doc.get("dims")
    dims: tuple[int, ...] = ()
    if isinstance(dims_doc, dict):
        try:
            dims = (int(dims_doc["d"]),) * int(dims_doc["N"])
        except (KeyError, TypeError, ValueError):
            findings.append("'dims' object needs integer 'd' and 'N'")
    elif isinstance(dims_doc, list):
        try:
            dims = tuple(int(x) for x in dims_doc)
        except (TypeError, ValueError):
            findings.append("'dims' must be a list of integers")
    else:
        findings.append("missing 'dims'")
    if dims and min(dims) < 1:
        findings.append(f"dimensions must be positive, got {list(dims)}")
        dims = ()

    def matrix(obj, name):
        try:
            return decode_matrix(obj, name)
        except ValidationError as exc:
            findings.extend(exc.findings)
            return None

    marginals = [matrix(m, f"marginals[{k}]") for k, m in enumerate(doc.get("marginals") or [])]
    if not marginals:
        findings.append("missing 'marginals'")
    hamiltonian = matrix(doc["hamiltonian"], "hamiltonian") if "hamiltonian" in doc else None
    if hamiltonian is None and "hamiltonian" not in doc:
        findings.append("missing 'hamiltonian'")
    reference = None
    if doc.get("reference") is not None:
        reference = [matrix(m, f"reference[{k}]") for k, m in enumerate(doc["reference"])]

    if dims and all(m is not None for m in marginals) and marginals:
        if kind == "general":
            if len(marginals) != len(dims):
                findings.append(f"{len(dims)} dims but {len(marginals)} marginals")
            else:
                for k, (m, d) in enumerate(zip(marginals, dims)):
                    if m.shape[0] != d:
                        findings.append(f"marginals[{k}] has dimension {m.shape[0]}, dims says {d}")
        else:
            if len(marginals) not in (1, len(dims)):
                findings.append(f"symmetric instance needs 1 or {len(dims)} marginals, got {len(marginals)}")
            elif any(not np.allclose(m, marginals[0], atol=1e-12) for m in marginals):
                findings.append("symmetric instance marginals differ")
            if marginals[0].shape[0] != dims[0]:
                findings.append(f"marginal has dimension {marginals[0].shape[0]}, d is {dims[0]}")
    if dims and hamiltonian is not None:
        total = TensorShape(dims).total
        if hamiltonian.shape[0] != total:
            findings.append(f"hamiltonian has dimension {hamiltonian.shape[0]}, expected {total} = prod(dims)")
    if reference is not None and dims and all(r is not None for r in reference):
        if len(reference) != len(dims) or any(r.shape[0] != d for r, d in zip(reference, dims)):
            findings.append("reference matrices do not match dims")

    if findings:
        raise ValidationError(findings[0], findings)
    known = {"version", "kind", "epsilon", "dims", "marginals", "hamiltonian", "reference"}
    extra = {k: v for k, v in doc.items() if k not in known}
    return InstanceFile(kind, epsilon, dims, marginals, hamiltonian, reference, version, extra)


def load_instance(path) -> InstanceFile:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return parse_instance(doc)


def instance_from_arrays(marginals, hamiltonian, epsilon, kind="general", reference=None) -> InstanceFile:
    marginals = [np.asarray(m, dtype=complex) for m in marginals]
    h = np.asarray(hamiltonian, dtype=complex)
    if kind == "general":
        dims = tuple(m.shape[0] for m in marginals)
    else:
        d = marginals[0].shape[0]
        n = round(math.log(h.shape[0]) / math.log(d)) if d > 1 else 1
        dims = (d,) * n
        marginals = marginals[:1]
    return InstanceFile(kind, float(epsilon), dims, marginals, h, reference)


def save_json(doc: dict, path):
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=1, allow_nan=False)
        fh.write("\n")


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), allow_nan=False)


def _clean(obj):
    """Replace non-finite floats (not representable in strict JSON) by None."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def solve_result(report, instance_hash: str | None = None, emit_gamma: bool = False) -> dict:
    """Result document for a Sinkhorn solve report."""
    settings = report.settings
    doc = {
        "version": FORMAT_VERSION,
        "solver": "sinkhorn",
        "converged": bool(report.converged),
        "primal": float(report.primal),
        "dual": float(report.dual),
        "gap": float(report.gap),
        "marginal_residuals": [float(r) for r in report.marginal_residuals],
        "sweeps": int(report.sweeps),
        "potentials": [encode_matrix(u) for u in report.potentials],
        "gauge": [float(a) for a in report.potentials.gauge],
        "trace": [
            {"sweep": r.sweep, "dual": r.dual, "max_residual": r.max_residual, "alpha": list(r.alpha)}
            for r in report.trace
        ],
        "warnings": list(report.warnings),
        "settings": None
        if settings is None
        else {
            "outer_tol": settings.outer_tol,
            "gap_tol": settings.gap_tol,
            "max_sweeps": settings.max_sweeps,
            "marginal_tol": settings.transform.marginal_tol,
            "max_inner_iters": settings.transform.max_inner_iters,
        },
        "instance_hash": instance_hash,
    }
    if emit_gamma:
        doc["gamma"] = encode_matrix(report.gamma)
    return doc


def symmetric_result(report, settings, instance_hash: str | None = None, emit_gamma: bool = False) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "solver": "symmetric",
        "converged": bool(report.converged),
        "primal": float(report.primal),
        "dual": float(report.dual),
        "gap": float(report.gap),
        "marginal_residuals": [float(r) for r in report.marginal_residuals],
        "iterations": int(report.iterations),
        "gradient_norm": float(report.gradient_norm),
        "potentials": [encode_matrix(report.potential)],
        "warnings": list(report.warnings),
        "settings": {"outer_tol": settings.outer_tol, "gap_tol": settings.gap_tol, "max_iters": settings.max_iters},
        "instance_hash": instance_hash,
    }
    if emit_gamma:
        doc["gamma"] = encode_matrix(report.gamma)
    return doc


def error_result(exc, instance_hash: str | None = None) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "converged": False,
        "error": getattr(exc, "code", "error"),
        "message": str(exc),
        "instance_hash": instance_hash,
    }
    findings = getattr(exc, "findings", None)
    if findings:
        doc["findings"] = list(findings)
    if hasattr(exc, "witness"):
        doc["eigenvalue"] = float(exc.eigenvalue)
        v = np.asarray(exc.witness, dtype=complex).ravel()
        doc["witness"] = {"re": v.real.tolist(), "im": v.imag.tolist()}
    return doc


def load_result(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
