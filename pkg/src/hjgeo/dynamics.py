"""Fixed-step flows of vector fields and gamma-relatedness checks."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import _kernels
from .geometry import HamiltonianField, hamiltonian_field, p_names, phase_names, q_names
from .submanifold import OneFormFamily
from .symexpr import Expression, as_expr, diff, substitute, to_python

__all__ = [
    "BlowUpError", "Field", "Trajectory", "VectorFieldOnQ", "GammaRelated",
    "flow", "projected_field", "gamma_related_check",
]


class BlowUpError(ArithmeticError):
    def __init__(self, step: int, detail: str = ""):
        msg = f"non-finite state at step {step}"
        super().__init__(msg + (f": {detail}" if detail else ""))
        self.step = step


@dataclass(frozen=True)
class Field:
    """Generated-code vector field over state variables ``names`` (and ``t``).

    ``outputs`` are Python expressions for the components; ``prelude`` lines
    run first and may define helper locals.  State variable ``names[i]`` is
    available as ``x[i]``.
    """

    names: tuple[str, ...]
    outputs: tuple[str, ...]
    prelude: tuple[str, ...] = ()

    @classmethod
    def from_expressions(cls, exprs: Sequence[Expression], names: Sequence[str]) -> "Field":
        env = {v: f"x[{i}]" for i, v in enumerate(names)}
        env["t"] = "t"
        return cls(tuple(names), tuple(to_python(as_expr(e), env) for e in exprs))

    @property
    def dim(self) -> int:
        return len(self.outputs)

    def source(self) -> str:
        lines = ["def field(t, x, out):"]
        lines += [f"    {ln}" for ln in self.prelude]
        lines += [f"    out[{i}] = {code}" for i, code in enumerate(self.outputs)]
        return "\n".join(lines) + "\n"

    def __call__(self, t: float, x) -> np.ndarray:
        out = np.empty(self.dim)
        _kernels.compile_field(self.source())(float(t), np.asarray(x, dtype=float), out)
        return out


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), k)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        k = self.states.shape[1]
        w.writerow(["t"] + [f"x{i}" for i in range(1, k + 1)])
        for t, row in zip(self.times, self.states):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh: TextIO) -> "Trajectory":
        rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1:])


def _default_names(exprs: Sequence[Expression]) -> list[str]:
    k = len(exprs)
    free = set().union(*(e.free_vars for e in exprs)) - {"t"} if exprs else set()
    if free <= set(q_names(k)):
        return q_names(k)
    if k % 2 == 0 and free <= set(phase_names(k // 2)):
        return phase_names(k // 2)
    raise ValueError(f"cannot infer state variables for field over {sorted(free)}; pass names=")


def _as_field(field, names) -> Field:
    if isinstance(field, Field):
        return field
    if isinstance(field, VectorFieldOnQ):
        return Field.from_expressions(field.components, q_names(field.n))
    if isinstance(field, HamiltonianField):
        return Field.from_expressions(field.components, phase_names(field.n))
    exprs = [as_expr(e) for e in field]
    return Field.from_expressions(exprs, list(names) if names else _default_names(exprs))


def flow(field, x0, t0: float, h: float, steps: int, names: Sequence[str] | None = None,
         backend: str | None = None) -> Trajectory:
    """Classical fixed-step RK4 from (t0, x0); time-dependent fields read ``t``.

    ``field`` is a :class:`Field`, a :class:`VectorFieldOnQ` or a sequence of
    expressions (state names inferred as q1..qk or q1..qn, p1..pn).
    """
    if not h > 0:
        raise ValueError("step size h must be positive")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    F = _as_field(field, names)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != F.dim:
        raise ValueError(f"field has dimension {F.dim}, initial state has {x0.size}")
    mode = _kernels.choose_backend(steps, backend)
    try:
        states, bad = _kernels.run_rk4(F.source(), x0, t0, h, steps, mode)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise BlowUpError(-1, str(exc)) from exc
    if bad >= 0:
        raise BlowUpError(bad)
    times = t0 + h * np.arange(steps + 1)
    return Trajectory(times, states)


@dataclass(frozen=True)
class VectorFieldOnQ:
    n: int
    components: tuple[Expression, ...]

    @property
    def time_dependent(self) -> bool:
        return any("t" in c.free_vars for c in self.components)


def projected_field(H: Expression, gamma: OneFormFamily, t: float | None = None) -> VectorFieldOnQ:
    """T pi_Q o X_H o gamma: component i is dH/dp_i at p = gamma(t, q)."""
    H = as_expr(H)
    n = gamma.n
    g = gamma.at_time(t)
    sub_map = dict(zip(p_names(n), g.components))
    if t is not None:
        sub_map["t"] = t
    return VectorFieldOnQ(n, tuple(substitute(diff(H, pk), sub_map) for pk in p_names(n)))


@dataclass(frozen=True)
class GammaRelated:
    max_gap: float
    gaps: np.ndarray
    base: Trajectory
    lifted: np.ndarray
    phase: Trajectory


def gamma_related_check(H: Expression, gamma: OneFormFamily, q0, t0: float, h: float, steps: int,
                        phase_field=None, base_field=None, backend: str | None = None) -> GammaRelated:
    """Integrate the base field, lift by gamma, and compare with the phase flow.

    ``phase_field`` defaults to X_H; pass a constrained field (e.g. xi_nh)
    to test its gamma-relatedness instead.  ``base_field`` defaults to
    :func:`projected_field`.
    """
    n = gamma.n
    if phase_field is None:
        phase_field = hamiltonian_field(H, n).components
    base = flow(base_field or projected_field(H, gamma), q0, t0, h, steps, backend=backend)
    lifted = np.array([
        np.concatenate([q, gamma(q, t)]) for t, q in zip(base.times, base.states)
    ])
    phase = flow(phase_field, lifted[0], t0, h, steps, names=phase_names(n), backend=backend)
    gaps = np.linalg.norm(lifted - phase.states, axis=1)
    return GammaRelated(float(gaps.max()), gaps, base, lifted, phase)
