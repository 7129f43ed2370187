import json

import numpy as np
import pytest

from qsink import cli
from qsink.errors import ValidationError
from qsink.functionals import PotentialVector, ProblemInstance
from qsink.generate import random_density, random_hermitian, symmetric_hamiltonian
from qsink.io import (
    decode_matrix,
    encode_matrix,
    instance_from_arrays,
    load_instance,
    load_result,
    parse_instance,
    save_json,
)
from qsink.sinkhorn import reconstruct, solve
from qsink.symmetric import SymmetricInstance


def _write(tmp_path, name, data):
    path = tmp_path / name
    save_json(data.to_json() if hasattr(data, "to_json") else data, path)
    return str(path)


def _general(seed=0, dims=(2, 2), eps=1.0):
    rng = np.random.default_rng(seed)
    total = int(np.prod(dims))
    return instance_from_arrays([random_density(d, rng) for d in dims], random_hermitian(total, 1.0, rng), eps)


def test_matrix_roundtrip_bit_exact():
    a = random_hermitian(4, 3.0, seed=1) * np.pi
    b = decode_matrix(json.loads(json.dumps(encode_matrix(a))))
    assert np.array_equal(a, b)
    assert np.array_equal(decode_matrix([1.0, 0.0, 0.0, 1.0]), np.eye(2))
    with pytest.raises(ValidationError):
        decode_matrix([1.0, 2.0, 3.0])


def test_instance_roundtrip(tmp_path):
    data = _general(3, (2, 3))
    loaded = load_instance(_write(tmp_path, "inst.json", data))
    assert loaded.dims == (2, 3)
    assert all(np.array_equal(a, b) for a, b in zip(loaded.marginals, data.marginals))
    assert np.array_equal(loaded.hamiltonian, data.hamiltonian)
    assert loaded.digest() == data.digest()
    assert isinstance(loaded.build(), ProblemInstance)


def test_validation_collects_findings():
    doc = _general().to_json()
    doc["epsilon"] = -1
    doc["dims"] = [2, 3]
    with pytest.raises(ValidationError) as info:
        parse_instance(doc)
    assert len(info.value.findings) >= 2


def test_build_rejects_bad_trace_and_asymmetric_h():
    data = _general()
    data.marginals[0] = data.marginals[0] * 0.98
    with pytest.raises(ValidationError):
        data.build()
    h = np.kron(np.diag([1.0, 2.0, 3.0]), np.eye(3))
    bad = instance_from_arrays([np.eye(3) / 3], h, 1.0, kind="fermionic")
    assert bad.dims == (3, 3)
    with pytest.raises(ValidationError):
        bad.build()


def test_symmetric_instance_file(tmp_path):
    h = symmetric_hamiltonian(3, 2, 1.0, seed=2)
    data = instance_from_arrays([np.diag([0.4, 0.35, 0.25])], h, 0.5, kind="fermionic")
    doc = data.to_json()
    assert doc["dims"] == {"d": 3, "N": 2} and len(doc["marginals"]) == 1
    assert isinstance(load_instance(_write(tmp_path, "f.json", data)).build(), SymmetricInstance)


def test_cli_solve_writes_result(tmp_path):
    path = _write(tmp_path, "inst.json", _general(5))
    out = tmp_path / "res.json"
    trace = tmp_path / "trace.jsonl"
    code = cli.main(["solve", path, "-o", str(out), "--emit-gamma", "--trace", str(trace), "--quiet"])
    assert code == 0
    res = load_result(out)
    assert res["converged"] and max(res["marginal_residuals"]) <= 1e-9
    inst = load_instance(path).build()
    pots = PotentialVector(tuple(decode_matrix(u) for u in res["potentials"]))
    gamma = decode_matrix(res["gamma"])
    assert np.allclose(reconstruct(inst, pots), gamma, atol=1e-12)
    assert res["instance_hash"] == load_instance(path).digest()
    lines = trace.read_text().splitlines()
    # sweep 0 records the initial potentials
    assert len(lines) == res["sweeps"] + 1
    first = json.loads(lines[0])
    assert {"sweep", "dual", "max_residual", "gap", "alpha"} <= set(first)


def test_cli_result_matches_library(tmp_path):
    path = _write(tmp_path, "inst.json", _general(6))
    out = tmp_path / "res.json"
    assert cli.main(["solve", path, "-o", str(out), "--quiet"]) == 0
    rep = solve(load_instance(path).build())
    res = load_result(out)
    assert res["primal"] == rep.primal and res["dual"] == rep.dual


def test_cli_deterministic(tmp_path):
    path = _write(tmp_path, "inst.json", _general(7))
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert cli.main(["solve", path, "-o", str(out), "--quiet", "--seeded-init", "11"]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]


def test_cli_max_sweeps_exit(tmp_path):
    path = _write(tmp_path, "inst.json", _general(8, eps=0.2))
    out = tmp_path / "res.json"
    assert cli.main(["solve", path, "-o", str(out), "--max-sweeps", "1", "--quiet"]) == 2
    assert load_result(out)["converged"] is False


def test_cli_pauli_exit(tmp_path, capsys):
    h = symmetric_hamiltonian(3, 2, 1.0, seed=3)
    path = _write(tmp_path, "f.json", instance_from_arrays([np.diag([0.6, 0.3, 0.1])], h, 1.0, kind="fermionic"))
    out = tmp_path / "res.json"
    assert cli.main(["solve", path, "-o", str(out), "--quiet"]) == 3
    res = load_result(out)
    assert res["error"] == "pauli_infeasible" and res["eigenvalue"] == pytest.approx(0.6)
    assert len(res["witness"]["re"]) == 3
    assert cli.main(["check", path]) == 3
    assert "infeasible" in capsys.readouterr().out


def test_cli_invalid_exit(tmp_path, capsys):
    doc = _general().to_json()
    doc["marginals"][0]["re"][0][0] += 0.05
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "res.json"
    assert cli.main(["solve", str(path), "-o", str(out), "--quiet"]) == 4
    assert load_result(out)["error"] == "marginal_trace"
    assert cli.main(["check", str(path)]) == 4
    (tmp_path / "junk.json").write_text("{not json")
    assert cli.main(["solve", str(tmp_path / "junk.json"), "-o", str(out), "--quiet"]) == 4


def test_cli_symmetric_solve_with_oracle(tmp_path):
    h = symmetric_hamiltonian(3, 2, 1.0, seed=4)
    path = _write(tmp_path, "f.json", instance_from_arrays([np.diag([0.4, 0.35, 0.25])], h, 1.0, kind="fermionic"))
    out = tmp_path / "res.json"
    assert cli.main(["solve", path, "-o", str(out), "--oracle", "--quiet"]) == 0
    res = load_result(out)
    assert res["solver"] == "symmetric" and res["oracle"]["potential_difference"] <= 1e-7


@pytest.mark.parametrize("named", ["zero", "diagonal", "gibbs", "random"])
def test_cli_gen_named(tmp_path, named):
    out = tmp_path / f"{named}.json"
    assert cli.main(["gen", "--named", named, "--dims", "2,3", "--seed", "1", "-o", str(out)]) == 0
    data = load_instance(out)
    assert data.dims == (2, 3)
    if named == "zero":
        assert not data.hamiltonian.any()
    if named == "diagonal":
        assert np.array_equal(data.hamiltonian, np.diag(np.diag(data.hamiltonian)))
    again = tmp_path / "again.json"
    cli.main(["gen", "--named", named, "--dims", "2,3", "--seed", "1", "-o", str(again)])
    assert again.read_text() == out.read_text()
    assert cli.main(["solve", str(out), "-o", str(tmp_path / "r.json"), "--quiet"]) == 0


def test_cli_gen_fermionic(tmp_path):
    out = tmp_path / "f.json"
    assert cli.main(["gen", "--kind", "fermionic", "--d", "4", "--N", "2", "--seed", "2", "-o", str(out)]) == 0
    assert cli.main(["check", str(out)]) == 0
    assert cli.main(["gen", "--kind", "fermionic"]) == 4
