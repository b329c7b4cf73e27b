"""Constraint-defined submanifolds of T*Q and their Lagrangian tests.

A submanifold is cut out by k independent constraints Phi^i(q, p) = 0.  For
k = n, Lagrangian-ness is the vanishing of all pairwise Poisson brackets
{Phi^i, Phi^j} on the submanifold.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    CotangentVector, PhasePoint, TangentVector, p_names, phase_names,
    poisson_bracket, q_names,
)
from .sampling import halton
from .symexpr import (
    DomainError, Expression, add, as_expr, diff, lambdify, mul, simplify,
    sub, substitute,
)

log = logging.getLogger(__name__)

__all__ = [
    "SubmanifoldError", "DimensionError", "OffManifoldError", "RegularityError",
    "ProjectionError", "ConvergenceError", "SingularJacobianError",
    "ConstraintSubmanifold", "OneFormFamily", "GraphSubmanifoldOfQ",
    "LagrangianVerdict", "Closedness", "Frames",
    "is_lagrangian", "image_of_one_form", "build_L_N_gamma", "frames",
    "project", "sample_on", "RANK_RTOL",
]

RANK_RTOL = 1e-8


class SubmanifoldError(Exception):
    pass


class DimensionError(SubmanifoldError, ValueError):
    pass


class OffManifoldError(SubmanifoldError, ValueError):
    pass


class RegularityError(SubmanifoldError):
    pass


class ProjectionError(SubmanifoldError, ArithmeticError):
    pass


class ConvergenceError(ProjectionError):
    pass


class SingularJacobianError(ProjectionError):
    pass


def _numeric_rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


@dataclass(frozen=True)
class ConstraintSubmanifold:
    n: int
    constraints: tuple[Expression, ...]
    lagrangian: bool | None = None
    closed: bool | None = None
    jacobian: tuple[tuple[Expression, ...], ...] = field(default=(), compare=False)

    def __post_init__(self):
        cons = tuple(as_expr(c) for c in self.constraints)
        object.__setattr__(self, "constraints", cons)
        if not 1 <= len(cons) <= 2 * self.n:
            raise DimensionError(f"need 1 <= k <= 2n constraints, got k={len(cons)}, n={self.n}")
        if not self.jacobian:
            names = phase_names(self.n)
            jac = tuple(tuple(diff(c, v) for v in names) for c in cons)
            object.__setattr__(self, "jacobian", jac)

    @classmethod
    def from_strings(cls, n: int, constraints: Sequence[str], **kw) -> "ConstraintSubmanifold":
        return cls(n, tuple(as_expr(c) for c in constraints), **kw)

    @property
    def k(self) -> int:
        return len(self.constraints)

    @cached_property
    def arg_names(self) -> list[str]:
        names = phase_names(self.n)
        if any("t" in c.free_vars for c in self.constraints):
            names.append("t")
        return names

    @cached_property
    def _phi(self):
        return lambdify(self.constraints, self.arg_names)

    @cached_property
    def _jac(self):
        return lambdify([d for row in self.jacobian for d in row], self.arg_names)

    def _args(self, x: PhasePoint) -> list[float]:
        vals = x.as_array().tolist()
        if "t" in self.arg_names:
            if x.t is None:
                raise ValueError("time-dependent constraints need a point with t")
            vals.append(float(x.t))
        return vals

    def residual(self, x: PhasePoint) -> np.ndarray:
        return self._phi(self._args(x))

    def jacobian_at(self, x: PhasePoint) -> np.ndarray:
        return self._jac(self._args(x)).reshape(self.k, 2 * self.n)


@dataclass(frozen=True)
class Closedness:
    closed: bool
    method: str  # "symbolic" or "sampled"
    max_asymmetry: float


@dataclass(frozen=True)
class OneFormFamily:
    """Components gamma_i over the coordinates ``names`` (default q1..qn), maybe t."""

    n: int
    components: tuple[Expression, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        if len(comps) != self.n:
            raise DimensionError(f"{self.n}-dimensional 1-form needs {self.n} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)
        if not self.names:
            object.__setattr__(self, "names", tuple(q_names(self.n)))

    @classmethod
    def from_potential(cls, S: Expression | str, n: int, names: Sequence[str] | None = None):
        S = as_expr(S)
        names = tuple(names or q_names(n))
        return cls(n, tuple(diff(S, v) for v in names), names)

    @property
    def time_dependent(self) -> bool:
        return any("t" in c.free_vars for c in self.components)

    def at_time(self, t: float | None) -> "OneFormFamily":
        if t is None or not self.time_dependent:
            return self
        return OneFormFamily(self.n, tuple(substitute(c, {"t": t}) for c in self.components), self.names)

    @cached_property
    def arg_names(self) -> list[str]:
        return list(self.names) + (["t"] if self.time_dependent else [])

    @cached_property
    def _eval(self):
        return lambdify(self.components, self.arg_names)

    def __call__(self, q, t: float | None = None) -> np.ndarray:
        vals = list(np.asarray(q, dtype=float).reshape(self.n))
        if self.time_dependent:
            if t is None:
                raise ValueError("time-dependent 1-form needs t")
            vals.append(float(t))
        return self._eval(vals)

    @cached_property
    def derivative_matrix(self) -> tuple[tuple[Expression, ...], ...]:
        """Entries d gamma_i / d q^j."""
        return tuple(tuple(diff(g, v) for v in self.names) for g in self.components)

    def closedness(self, samples: int = 200, box=(-1.0, 1.0), t_box=(0.5, 2.0),
                   seed: int = 0, tol: float = 1e-10) -> Closedness:
        """Mixed-partial test: symbolic match first, sampled points otherwise."""
        D = self.derivative_matrix
        pairs = list(combinations(range(self.n), 2))
        if all(simplify(D[i][j]) == simplify(D[j][i]) for i, j in pairs):
            return Closedness(True, "symbolic", 0.0)
        asym = [sub(D[i][j], D[j][i]) for i, j in pairs]
        f = lambdify(asym, self.arg_names)
        boxes = [box] * self.n if np.ndim(box) == 1 else list(box)
        if self.time_dependent:
            boxes = boxes + [t_box]
        worst = 0.0
        used = 0
        for pt in halton(samples, boxes, len(boxes), seed):
            try:
                worst = max(worst, float(np.max(np.abs(f(pt.tolist())))))
                used += 1
            except DomainError:
                continue
        if used == 0:
            raise DomainError("no sample point inside the domain of the 1-form")
        return Closedness(worst <= tol, "sampled", worst)


@dataclass(frozen=True)
class GraphSubmanifoldOfQ:
    """N = {q^alpha = Psi^alpha(q^a)}; indices are 1-based coordinate numbers."""

    n: int
    base: tuple[int, ...]
    psi: Mapping[int, Expression]

    def __post_init__(self):
        psi = {int(k): as_expr(v) for k, v in dict(self.psi).items()}
        base = tuple(int(i) for i in self.base)
        if sorted(set(base) | set(psi)) != list(range(1, self.n + 1)) or set(base) & set(psi):
            raise DimensionError("base and fiber indices must partition 1..n")
        allowed = {f"q{i}" for i in base}
        for k, e in psi.items():
            if not e.free_vars <= allowed:
                raise ValueError(f"Psi^{k} may only depend on base coordinates {sorted(allowed)}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "psi", psi)

    def __hash__(self):
        return hash((self.n, self.base, tuple(sorted(self.psi.items()))))

    @property
    def fiber(self) -> tuple[int, ...]:
        return tuple(sorted(self.psi))

    @property
    def m(self) -> int:
        return len(self.base)

    @property
    def base_names(self) -> list[str]:
        return [f"q{a}" for a in self.base]

    @property
    def base_momenta(self) -> list[str]:
        return [f"p{a}" for a in self.base]

    @property
    def fiber_names(self) -> list[str]:
        return [f"q{al}" for al in self.fiber]

    @property
    def fiber_momenta(self) -> list[str]:
        return [f"p{al}" for al in self.fiber]

    def phi(self) -> list[Expression]:
        """Defining constraints phi^alpha = q^alpha - Psi^alpha(q^a)."""
        return [sub(as_expr(f"q{al}"), self.psi[al]) for al in self.fiber]

    def dpsi(self, al: int, a: int) -> Expression:
        return diff(self.psi[al], f"q{a}")

    def embed(self, base_q) -> np.ndarray:
        base_q = np.asarray(base_q, dtype=float).reshape(self.m)
        b = dict(zip(self.base_names, base_q.tolist()))
        q = np.empty(self.n)
        for a, v in zip(self.base, base_q):
            q[a - 1] = v
        if self.fiber:
            vals = lambdify([self.psi[al] for al in self.fiber], self.base_names)(base_q.tolist())
            for al, v in zip(self.fiber, vals):
                q[al - 1] = v
        return q


@dataclass(frozen=True)
class LagrangianVerdict:
    verdict: bool
    max_bracket_residual: float

    def __bool__(self):
        return self.verdict


def is_lagrangian(L: ConstraintSubmanifold, samples: Sequence[PhasePoint], tol: float = 1e-10,
                  sample_tol: float | None = None) -> LagrangianVerdict:
    """Evaluate every {Phi^i, Phi^j} at the samples; Lagrangian iff all <= tol."""
    if L.k != L.n:
        raise DimensionError(f"Lagrangian test needs k = n constraints, got k={L.k}, n={L.n}")
    sample_tol = tol if sample_tol is None else sample_tol
    pairs = list(combinations(range(L.k), 2))
    brackets = [poisson_bracket(L.constraints[i], L.constraints[j], L.n) for i, j in pairs]
    f = lambdify(brackets, L.arg_names)
    worst = 0.0
    for x in samples:
        off = float(np.max(np.abs(L.residual(x))))
        if off > sample_tol:
            raise OffManifoldError(f"sample {x.as_array().tolist()} violates constraints by {off:.3e}")
        if pairs:
            worst = max(worst, float(np.max(np.abs(f(L._args(x))))))
    return LagrangianVerdict(worst <= tol, worst)


def image_of_one_form(gamma: OneFormFamily, t: float | None = None, **closedness_kw) -> ConstraintSubmanifold:
    """Im gamma_t = {p_i = gamma_i(t, q)}; flagged Lagrangian iff gamma is closed."""
    g = gamma.at_time(t)
    if list(g.names) != q_names(g.n):
        raise ValueError("image_of_one_form needs a 1-form over q1..qn")
    closed = g.closedness(**closedness_kw).closed
    cons = tuple(sub(as_expr(pk), gk) for pk, gk in zip(p_names(g.n), g.components))
    if not closed:
        log.info("1-form %s is not closed; Im gamma is not Lagrangian", [str(c) for c in g.components])
    return ConstraintSubmanifold(g.n, cons, lagrangian=closed, closed=closed)


def build_L_N_gamma(N: GraphSubmanifoldOfQ, gamma: OneFormFamily, t: float | None = None,
                    **closedness_kw) -> ConstraintSubmanifold:
    """L_{N,gamma} = {mu : T*i_N(mu) = gamma}.

    Constraints, fiber block first:
        q^alpha - Psi^alpha(q^a) = 0
        p_a - gamma_a + (dPsi^alpha/dq^a) p_alpha = 0
    """
    g = gamma.at_time(t)
    if list(g.names) != N.base_names:
        raise ValueError(f"gamma must be a 1-form on the base coordinates {N.base_names}")
    cons: list[Expression] = list(N.phi())
    for a, ga in zip(N.base, g.components):
        c = sub(as_expr(f"p{a}"), ga)
        for al in N.fiber:
            c = add(c, mul(N.dpsi(al, a), as_expr(f"p{al}")))
        cons.append(c)
    closed = g.closedness(**closedness_kw).closed
    return ConstraintSubmanifold(N.n, tuple(cons), lagrangian=closed, closed=closed)


@dataclass(frozen=True)
class Frames:
    tangent_basis: list[TangentVector]
    annihilator_basis: list[CotangentVector]
    tangent: np.ndarray  # (2n - k, 2n), orthonormal rows
    annihilator: np.ndarray  # (k, 2n), Jacobian rows


def frames(L: ConstraintSubmanifold, x: PhasePoint, tol: float = 1e-8) -> Frames:
    """Tangent basis = ker of the constraint Jacobian; annihilator = its rows."""
    off = float(np.max(np.abs(L.residual(x))))
    if off > tol:
        raise OffManifoldError(f"point violates constraints by {off:.3e}")
    J = L.jacobian_at(x)
    _, s, Vt = np.linalg.svd(J)
    rank = _numeric_rank(s)
    if rank < L.k:
        raise RegularityError(f"constraint Jacobian has rank {rank} < k={L.k} at {x.as_array().tolist()}")
    T = Vt[L.k:]
    n = L.n
    return Frames(
        [TangentVector(x, v[:n], v[n:]) for v in T],
        [CotangentVector(x, row[:n], row[n:]) for row in J],
        T, J,
    )


def project(L: ConstraintSubmanifold, x0: PhasePoint, tol: float = 1e-12, max_iter: int = 50) -> PhasePoint:
    """Gauss-Newton (minimum-norm step) projection of ``x0`` onto L."""
    x = x0.as_array().astype(float)
    t = x0.t
    for _ in range(max_iter + 1):
        pt = PhasePoint.from_array(x, t)
        r = L.residual(pt)
        if np.all(np.abs(r) <= tol):
            return pt
        J = L.jacobian_at(pt)
        s = np.linalg.svd(J, compute_uv=False)
        if s.size == 0 or s[-1] <= 1e-12 * max(s[0], 1.0):
            raise SingularJacobianError(f"singular normal equations at {x.tolist()}")
        y = np.linalg.solve(J @ J.T, r)
        x = x - J.T @ y
        if not np.all(np.isfinite(x)):
            break
    raise ConvergenceError(f"projection did not reach tol={tol} within {max_iter} iterations")


def sample_on(L: ConstraintSubmanifold, count: int, box, seed: int = 0, t: float | None = None,
              tol: float = 1e-12, max_iter: int = 50) -> list[PhasePoint]:
    """Project quasi-random seeds from ``box`` (over q, p) onto L.

    Seeds whose projection fails (singular, no convergence, off-domain) are
    skipped; up to ten times ``count`` seeds are tried.
    """
    dim = 2 * L.n
    seeds = halton(10 * count, box, dim, seed)
    out: list[PhasePoint] = []
    for s in seeds:
        try:
            out.append(project(L, PhasePoint.from_array(s, t), tol, max_iter))
        except (ProjectionError, DomainError):
            continue
        if len(out) == count:
            return out
    raise ConvergenceError(f"only {len(out)} of {count} seeds projected onto the submanifold")
