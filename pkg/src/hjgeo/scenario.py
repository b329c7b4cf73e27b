"""Loading and validating scenario files.

A scenario is a JSON object checked first against the bundled JSON Schema
and then semantically: every expression must parse and use only the
variables its field allows, and array shapes must match ``n``.  Failures
raise :class:`ScenarioError` carrying a JSON path such as ``$.gamma[1]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .geometry import p_names, q_names
from .symexpr import ExprSyntaxError, Expression, parse

KINDS = (
    "autonomous_hj", "holonomic", "nonholonomic", "timedep_hj",
    "timedep_holonomic", "timedep_nonholonomic", "lagrangian_test",
)
TIMEDEP_KINDS = {"timedep_hj", "timedep_holonomic", "timedep_nonholonomic"}


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files("hjgeo").joinpath("scenario.schema.json").read_text())


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _schema_error(err: jsonschema.ValidationError) -> ScenarioError:
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [r for r in err.validator_value if r not in err.instance]
        if missing:
            parts.append(missing[0])
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            parts.append(extra[0])
    return ScenarioError(_json_path(parts), err.message)


@dataclass
class Scenario:
    data: dict
    source: str = "<memory>"
    exprs: dict[str, Expression] = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def kind(self) -> str:
        return self.data["kind"]

    @property
    def n(self) -> int:
        return self.data["n"]

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def expr(self, path: str) -> Expression:
        return self.exprs[path]


def _allowed(sc: dict) -> dict[str, set[str]]:
    n = sc["n"]
    q, p = set(q_names(n)), set(p_names(n))
    t = {"t"} if sc["kind"] in TIMEDEP_KINDS else set()
    out = {
        "hamiltonian": q | p | t, "constraints": q | p, "S": q, "W": q | {"t"},
        "gamma": q | t, "mass_matrix": q, "potential": q, "mu": q,
        "lambda_reference": q | p, "expected_H": q | p,
    }
    g = sc.get("graph")
    if isinstance(g, dict) and isinstance(g.get("base"), list):
        bq = {f"q{a}" for a in g["base"] if isinstance(a, int)}
        bp = {f"p{a}" for a in g["base"] if isinstance(a, int)}
        out.update({"S": bq, "W": bq | {"t"}, "h": bq | bp | t, "psi": bq})
    return out


def _walk_exprs(sc: dict):
    """Yield (json path, field key, string) for every expression-valued entry."""
    for key in ("hamiltonian", "S", "W", "potential", "h", "expected_H"):
        if key in sc:
            yield f"$.{key}", key, sc[key]
    for key in ("constraints", "gamma", "lambda_reference"):
        for i, s in enumerate(sc.get(key, [])):
            yield f"$.{key}[{i}]", key, s
    for key in ("mass_matrix", "mu"):
        for i, row in enumerate(sc.get(key, [])):
            for j, s in enumerate(row):
                yield f"$.{key}[{i}][{j}]", key, s
    if "graph" in sc:
        for k, s in sc["graph"]["psi"].items():
            yield f"$.graph.psi.{k}", "psi", s


def _check_box(sc: dict, key: str, dim: int):
    box = sc.get(key)
    if box is None or (len(box) == 2 and not isinstance(box[0], list)):
        return
    if len(box) != dim:
        raise ScenarioError(f"$.{key}", f"expected {dim} [lo, hi] pairs, got {len(box)}")


def _semantic(sc: dict) -> dict[str, Expression]:
    n = sc["n"]
    allowed = _allowed(sc)
    exprs = {}
    for path, key, text in _walk_exprs(sc):
        try:
            e = parse(text)
        except ExprSyntaxError as exc:
            raise ScenarioError(path, str(exc)) from None
        extra = e.free_vars - allowed[key]
        if extra:
            raise ScenarioError(path, f"uses {sorted(extra)}; allowed variables are {sorted(allowed[key])}")
        exprs[path] = e

    if "gamma" in sc and len(sc["gamma"]) != n:
        raise ScenarioError("$.gamma", f"needs {n} components, got {len(sc['gamma'])}")
    if "constraints" in sc:
        k = len(sc["constraints"])
        if sc["kind"] == "lagrangian_test" and k != n:
            raise ScenarioError("$.constraints", f"Lagrangian test needs exactly n={n} constraints, got {k}")
        if k > 2 * n:
            raise ScenarioError("$.constraints", f"at most 2n={2 * n} constraints, got {k}")
    if "mass_matrix" in sc:
        M = sc["mass_matrix"]
        if len(M) != n or any(len(r) != n for r in M):
            raise ScenarioError("$.mass_matrix", f"must be {n}x{n}")
    for i, row in enumerate(sc.get("mu", [])):
        if len(row) != n:
            raise ScenarioError(f"$.mu[{i}]", f"needs {n} entries, got {len(row)}")
    if "lambda_reference" in sc and len(sc["lambda_reference"]) != len(sc.get("mu", [])):
        raise ScenarioError("$.lambda_reference", "needs one expression per constraint row")
    if "graph" in sc:
        g = sc["graph"]
        base = g["base"]
        fiber = [int(k) for k in g["psi"]]
        if sorted(base + fiber) != list(range(1, n + 1)):
            raise ScenarioError("$.graph", f"base and psi indices must partition 1..{n}")
        lam = sc.get("lambda_grid")
        for i, v in enumerate(lam or []):
            if len(v) != len(fiber):
                raise ScenarioError(f"$.lambda_grid[{i}]", f"needs {len(fiber)} entries (one per fiber coordinate)")
    base_dim = len(sc["graph"]["base"]) if "graph" in sc else n
    _check_box(sc, "box", base_dim if "graph" in sc else 2 * n)
    _check_box(sc, "q_box", base_dim)
    fl = sc.get("flow", {})
    if "q0" in fl and len(fl["q0"]) != n:
        raise ScenarioError("$.flow.q0", f"needs {n} entries")
    if "x0" in fl and len(fl["x0"]) != 2 * n:
        raise ScenarioError("$.flow.x0", f"needs {2 * n} entries")
    return exprs


def validate(data: Any, source: str = "<memory>") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        raise _schema_error(jsonschema.exceptions.best_match(errors))
    return Scenario(data, source, _semantic(data))


def load(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    return validate(data, str(path))


def bundled_paths() -> list[Path]:
    root = resources.files("hjgeo").joinpath("scenarios")
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


def bundled() -> list[Scenario]:
    return [load(p) for p in bundled_paths()]


def resolve(ref: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(ref)
    if p.exists():
        return p
    for b in bundled_paths():
        if b.stem == ref or b.name == ref:
            return b
    raise FileNotFoundError(ref)
