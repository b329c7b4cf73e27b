import json
from pathlib import Path

import pytest

from hjgeo import scenario as scn

ROOT = Path(__file__).resolve().parents[1]


def base():
    return {"name": "t", "kind": "autonomous_hj", "n": 1, "hamiltonian": "p1^2/2", "S": "q1"}


def test_bundled_cover_every_kind():
    scs = scn.bundled()
    assert len(scs) >= 8
    assert {s.kind for s in scs} == set(scn.KINDS)
    assert len({s.name for s in scs}) == len(scs)
    for s in scs:
        assert Path(s.source).stem == s.name


def test_docs_schema_matches_package():
    docs = json.loads((ROOT / "docs" / "scenario.schema.json").read_text())
    assert docs == scn.schema()


def test_minimal_valid():
    sc = scn.validate(base())
    assert sc.n == 1 and sc.kind == "autonomous_hj"


@pytest.mark.parametrize("patch, path", [
    ({"hamiltonian": None}, "$.hamiltonian"),
    ({"n": 0}, "$.n"),
    ({"kind": "bogus"}, "$.kind"),
    ({"extra_field": 1}, "$.extra_field"),
    ({"hamiltonian": "p1^^2"}, "$.hamiltonian"),
    ({"hamiltonian": "p1^2 + q3"}, "$.hamiltonian"),
    ({"samples": -5}, "$.samples"),
    ({"box": [1, 2, 3]}, "$.box"),
])
def test_error_paths(patch, path):
    data = base()
    for k, v in patch.items():
        if v is None:
            data.pop(k)
        else:
            data[k] = v
    with pytest.raises(scn.ScenarioError) as err:
        scn.validate(data)
    # union-typed fields like box may point one level deeper
    assert err.value.path == path or err.value.path.startswith(path + "[")
    assert str(err.value).startswith(err.value.path)


def test_gamma_element_path():
    data = base()
    del data["S"]
    data["n"] = 2
    data["hamiltonian"] = "(p1^2 + p2^2)/2"
    data["gamma"] = ["q2", "sin(q1"]
    with pytest.raises(scn.ScenarioError) as err:
        scn.validate(data)
    assert err.value.path == "$.gamma[1]"


def test_gamma_length_checked():
    data = base()
    del data["S"]
    data["gamma"] = ["q1", "q1"]
    with pytest.raises(scn.ScenarioError) as err:
        scn.validate(data)
    assert err.value.path == "$.gamma"


def test_nonholonomic_shapes():
    data = {"name": "x", "kind": "nonholonomic", "n": 2, "mu": [["1", "0", "0"]]}
    with pytest.raises(scn.ScenarioError) as err:
        scn.validate(data)
    assert err.value.path.startswith("$.mu[0]")


def test_load_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(scn.ScenarioError) as err:
        scn.load(p)
    assert err.value.path == "$"


def test_resolve_by_name_and_path(tmp_path):
    assert scn.resolve("oscillator_hj").name == "oscillator_hj.json"
    p = tmp_path / "s.json"
    p.write_text(json.dumps(base()))
    assert scn.resolve(str(p)) == p
    with pytest.raises(FileNotFoundError):
        scn.resolve("no_such_scenario")
