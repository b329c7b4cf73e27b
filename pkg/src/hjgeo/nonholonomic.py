"""Mechanical systems with linear nonholonomic constraints on the Hamiltonian side.

A mechanical Lagrangian L = 1/2 qd^T M(q) qd - V(q) with constraints
mu^a(q) . qd = 0 is carried to T*Q by the Legendre map p = M qd.  There the
constraint submanifold is C = {mu^a . M^-1 p = 0}, the Chetaev reaction forces
are the semibasic covectors F^a = mu^a_i dq^i, and the constrained field is

    xi_nh = X_H + lambda_a sharp(F^a),   A lambda = -<dC, X_H>,   A_ab = <dC^a, sharp(F^b)>.

Velocities are written qd1..qdn.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np

from . import dynamics
from .dynamics import Field, GammaRelated
from .geometry import PhasePoint, hamiltonian_field, p_names, phase_names, q_names
from .submanifold import OneFormFamily, RANK_RTOL
from .symexpr import (
    ZERO, DomainError, Expression, add, as_expr, diff, div, lambdify, mul, neg,
    simplify, sub, substitute, to_python,
)

__all__ = [
    "NonholonomicError", "SingularMassMatrixError", "CompatibilityError", "GammaOffConstraintError",
    "MechanicalLagrangian", "LinearDistribution", "Legendre", "HamiltonianNonholonomicSystem",
    "Compatibility", "NonholonomicField", "DistributionReport",
    "velocity_names", "legendre", "energy", "build_hamiltonian_system",
    "check_compatibility", "xi_nh", "distribution_hj_check",
]

SINGULAR_RTOL = 1e-10


class NonholonomicError(ArithmeticError):
    pass


class SingularMassMatrixError(NonholonomicError):
    pass


class CompatibilityError(NonholonomicError):
    pass


class GammaOffConstraintError(ValueError):
    pass


def velocity_names(n: int) -> list[str]:
    return [f"qd{i}" for i in range(1, n + 1)]


def _matrix(rows, n: int) -> tuple[tuple[Expression, ...], ...]:
    M = tuple(tuple(as_expr(v) for v in row) for row in rows)
    if len(M) != n or any(len(r) != n for r in M):
        raise ValueError(f"mass matrix must be {n}x{n}")
    return M


def _det(M: list[list[Expression]]) -> Expression:
    if len(M) == 1:
        return M[0][0]
    total: Expression = ZERO
    for j, entry in enumerate(M[0]):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = mul(entry, _det(minor))
        total = add(total, term) if j % 2 == 0 else sub(total, term)
    return total


def _inverse(M: tuple[tuple[Expression, ...], ...]) -> tuple[tuple[Expression, ...], ...]:
    """Symbolic inverse: reciprocal diagonal when M is diagonal, adjugate otherwise."""
    n = len(M)
    if all(M[i][j] == ZERO for i in range(n) for j in range(n) if i != j):
        return tuple(tuple(div(as_expr(1.0), M[i][i]) if i == j else ZERO for j in range(n)) for i in range(n))
    rows = [list(r) for r in M]
    det = _det(rows)
    inv = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(rows) if k != i]
            cof = _det(minor) if minor else as_expr(1.0)
            inv[j][i] = div(cof if (i + j) % 2 == 0 else neg(cof), det)
    return tuple(tuple(simplify(v) for v in r) for r in inv)


@dataclass(frozen=True)
class MechanicalLagrangian:
    n: int
    M: tuple[tuple[Expression, ...], ...]
    V: Expression = ZERO

    def __post_init__(self):
        M = _matrix(self.M, self.n)
        for i, j in combinations(range(self.n), 2):
            if simplify(M[i][j]) != simplify(M[j][i]):
                raise ValueError(f"mass matrix is not symmetric at ({i + 1}, {j + 1})")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "V", as_expr(self.V))

    @classmethod
    def identity(cls, n: int, V: Expression | str = ZERO) -> "MechanicalLagrangian":
        return cls(n, tuple(tuple(1.0 if i == j else 0.0 for j in range(n)) for i in range(n)), V)

    @cached_property
    def _mass(self):
        return lambdify([e for row in self.M for e in row], q_names(self.n))

    def mass_at(self, q) -> np.ndarray:
        """Numeric M(q), checked positive definite by a Cholesky attempt."""
        M = self._mass(list(np.asarray(q, dtype=float).reshape(self.n))).reshape(self.n, self.n)
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise SingularMassMatrixError(f"mass matrix not positive definite at q={list(q)}") from None
        return M

    def kinetic(self) -> Expression:
        qd = [as_expr(v) for v in velocity_names(self.n)]
        T: Expression = ZERO
        for i in range(self.n):
            for j in range(self.n):
                T = add(T, mul(mul(self.M[i][j], qd[i]), qd[j]))
        return mul(as_expr(0.5), T)

    def expression(self) -> Expression:
        return sub(self.kinetic(), self.V)


def energy(L: MechanicalLagrangian) -> Expression:
    """E_L = qd . dL/dqd - L."""
    lag = L.expression()
    total: Expression = ZERO
    for v in velocity_names(L.n):
        total = add(total, mul(as_expr(v), diff(lag, v)))
    return simplify(sub(total, lag))


@dataclass(frozen=True)
class Legendre:
    L: MechanicalLagrangian
    Minv: tuple[tuple[Expression, ...], ...]
    H: Expression

    def FL(self, q, qd) -> np.ndarray:
        return self.L.mass_at(q) @ np.asarray(qd, dtype=float)

    def FL_inv(self, q, p) -> np.ndarray:
        return np.linalg.solve(self.L.mass_at(q), np.asarray(p, dtype=float))


def _momentum_velocity(Minv, n: int) -> list[Expression]:
    """Components of M^-1 p."""
    ps = [as_expr(v) for v in p_names(n)]
    out = []
    for i in range(n):
        e: Expression = ZERO
        for j in range(n):
            e = add(e, mul(Minv[i][j], ps[j]))
        out.append(e)
    return out


def legendre(L: MechanicalLagrangian) -> Legendre:
    """H(q, p) = 1/2 p^T M^-1 p + V (that is, E_L after qd = M^-1 p)."""
    Minv = _inverse(L.M)
    v = _momentum_velocity(Minv, L.n)
    ps = [as_expr(x) for x in p_names(L.n)]
    T: Expression = ZERO
    for pi, vi in zip(ps, v):
        T = add(T, mul(pi, vi))
    return Legendre(L, Minv, simplify(add(mul(as_expr(0.5), T), L.V)))


@dataclass(frozen=True)
class LinearDistribution:
    """D = {qd : mu^a(q) . qd = 0}; ``rows`` are the covectors mu^a."""

    n: int
    rows: tuple[tuple[Expression, ...], ...] = ()

    def __post_init__(self):
        rows = tuple(tuple(as_expr(v) for v in r) for r in self.rows)
        if any(len(r) != self.n for r in rows):
            raise ValueError(f"each constraint row needs {self.n} entries")
        object.__setattr__(self, "rows", rows)

    @property
    def r(self) -> int:
        return len(self.rows)

    @cached_property
    def _mu(self):
        return lambdify([e for row in self.rows for e in row], q_names(self.n))

    def mu_at(self, q) -> np.ndarray:
        return self._mu(list(np.asarray(q, dtype=float).reshape(self.n))).reshape(self.r, self.n)

    def basis(self, q) -> np.ndarray:
        """Orthonormal rows spanning D at q; rank deficiency is an error."""
        if self.r == 0:
            return np.eye(self.n)
        mu = self.mu_at(q)
        _, s, Vt = np.linalg.svd(mu)
        if s[-1] <= RANK_RTOL * max(s[0], 1.0):
            raise NonholonomicError(f"constraint rows are dependent at q={list(q)}")
        return Vt[self.r:]


@dataclass(frozen=True)
class HamiltonianNonholonomicSystem:
    """H with constraints C^a and semibasic forces (dq-components ``forces``)."""

    n: int
    H: Expression
    constraints: tuple[Expression, ...]
    forces: tuple[tuple[Expression, ...], ...]
    lagrangian: MechanicalLagrangian | None = None
    distribution: LinearDistribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "H", as_expr(self.H))
        object.__setattr__(self, "constraints", tuple(as_expr(c) for c in self.constraints))
        object.__setattr__(self, "forces", tuple(tuple(as_expr(v) for v in f) for f in self.forces))
        if len(self.forces) != len(self.constraints):
            raise ValueError("need one force covector per constraint")
        if self.distribution is None:
            # the momentum constraints alone do not recover D; assume forces span it
            object.__setattr__(self, "distribution", LinearDistribution(self.n, self.forces))

    @property
    def r(self) -> int:
        return len(self.constraints)

    def force_covectors(self, q) -> np.ndarray:
        """(r, 2n) array; the dp block is identically zero."""
        out = np.zeros((self.r, 2 * self.n))
        if self.r:
            out[:, : self.n] = self._forces(list(np.asarray(q, dtype=float).reshape(self.n))).reshape(self.r, self.n)
        return out

    @cached_property
    def _forces(self):
        return lambdify([e for f in self.forces for e in f], q_names(self.n))

    @cached_property
    def _C(self):
        return lambdify(self.constraints, phase_names(self.n))

    def constraint_values(self, x: PhasePoint) -> np.ndarray:
        return self._C(x.as_array().tolist()) if self.r else np.zeros(0)

    @cached_property
    def pairing(self) -> tuple[tuple[Expression, ...], ...]:
        """A_ab = <dC^a, sharp F^b> = -sum_i dC^a/dp_i F^b_i."""
        ps = p_names(self.n)
        A = []
        for C in self.constraints:
            dCdp = [diff(C, v) for v in ps]
            row = []
            for F in self.forces:
                e: Expression = ZERO
                for d, f in zip(dCdp, F):
                    e = sub(e, mul(d, f))
                row.append(simplify(e))
            A.append(tuple(row))
        return tuple(A)

    @cached_property
    def rhs(self) -> tuple[Expression, ...]:
        """b_a = -<dC^a, X_H> = -{C^a, H}."""
        X = hamiltonian_field(self.H, self.n).components
        out = []
        for C in self.constraints:
            e: Expression = ZERO
            for v, comp in zip(phase_names(self.n), X):
                e = sub(e, mul(diff(C, v), comp))
            out.append(simplify(e))
        return tuple(out)

    @cached_property
    def _A(self):
        return lambdify([e for row in self.pairing for e in row], phase_names(self.n))

    @cached_property
    def _b(self):
        return lambdify(self.rhs, phase_names(self.n))

    def pairing_at(self, x: PhasePoint) -> np.ndarray:
        return self._A(x.as_array().tolist()).reshape(self.r, self.r)

    def multipliers(self, x: PhasePoint) -> np.ndarray:
        """Numeric lambda at x by a dense linear solve."""
        if self.r == 0:
            return np.zeros(0)
        A = self.pairing_at(x)
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= SINGULAR_RTOL * max(s[0], 1.0):
            raise CompatibilityError(f"singular constraint-force pairing at {x.as_array().tolist()}")
        return np.linalg.solve(A, self._b(x.as_array().tolist()))


def build_hamiltonian_system(L: MechanicalLagrangian, D: LinearDistribution) -> HamiltonianNonholonomicSystem:
    """C^a = mu^a . M^-1 p, forces F^a = mu^a_i dq^i."""
    if D.n != L.n:
        raise ValueError("Lagrangian and distribution dimensions differ")
    leg = legendre(L)
    v = _momentum_velocity(leg.Minv, L.n)
    cons = []
    for row in D.rows:
        e: Expression = ZERO
        for m, vi in zip(row, v):
            e = add(e, mul(m, vi))
        cons.append(simplify(e))
    return HamiltonianNonholonomicSystem(L.n, leg.H, tuple(cons), D.rows, L, D)


@dataclass(frozen=True)
class Compatibility:
    ok: bool
    min_singular_value: float

    def __bool__(self):
        return self.ok


def check_compatibility(sys: HamiltonianNonholonomicSystem, samples: Sequence[PhasePoint]) -> Compatibility:
    """A_ab must be invertible at every sample (smallest singular value above 1e-10 |A|)."""
    if sys.r == 0:
        return Compatibility(True, float("inf"))
    ok, worst = True, float("inf")
    for x in samples:
        s = np.linalg.svd(sys.pairing_at(x), compute_uv=False)
        worst = min(worst, float(s[-1]))
        if not s[-1] > SINGULAR_RTOL * s[0]:
            ok = False
    return Compatibility(ok, worst)


@dataclass(frozen=True)
class NonholonomicField:
    """xi_nh; ``components`` and ``multiplier`` are symbolic when r <= 1."""

    sys: HamiltonianNonholonomicSystem
    components: tuple[Expression, ...] | None
    multiplier: Expression | None
    field: Field

    def at(self, x: PhasePoint) -> np.ndarray:
        return self.field(0.0 if x.t is None else x.t, x.as_array())


def _sharp_force_terms(sys: HamiltonianNonholonomicSystem) -> list[list[Expression]]:
    """sharp(F^a) components, rows per constraint: (0, -F^a)."""
    return [[ZERO] * sys.n + [neg(f) for f in F] for F in sys.forces]


def xi_nh(sys: HamiltonianNonholonomicSystem) -> NonholonomicField:
    names = phase_names(sys.n)
    X = list(hamiltonian_field(sys.H, sys.n).components)
    if sys.r == 0:
        comps = tuple(simplify(c) for c in X)
        return NonholonomicField(sys, comps, None, Field.from_expressions(comps, names))
    sharpF = _sharp_force_terms(sys)
    if sys.r == 1:
        lam = simplify(div(sys.rhs[0], sys.pairing[0][0]))
        comps = tuple(simplify(add(c, mul(lam, s))) for c, s in zip(X, sharpF[0]))
        return NonholonomicField(sys, comps, lam, Field.from_expressions(comps, names))
    # r >= 2: per-point dense solve inside the generated field
    env = {v: f"x[{i}]" for i, v in enumerate(names)}
    env["t"] = "t"
    r = sys.r
    prelude = [f"A = np.empty(({r}, {r}))", f"b = np.empty({r})"]
    for a in range(r):
        for c in range(r):
            prelude.append(f"A[{a}, {c}] = {to_python(sys.pairing[a][c], env)}")
        prelude.append(f"b[{a}] = {to_python(sys.rhs[a], env)}")
    prelude.append("lam = np.linalg.solve(A, b)")
    outputs = []
    for i, c in enumerate(X):
        code = to_python(c, env)
        for a in range(r):
            if sharpF[a][i] != ZERO:
                code = f"({code} + lam[{a}] * {to_python(sharpF[a][i], env)})"
        outputs.append(code)
    return NonholonomicField(sys, None, None, Field(tuple(names), tuple(outputs), tuple(prelude)))


# ---------------------------------------------------------------------------
# Hamilton-Jacobi along a section gamma


@dataclass(frozen=True)
class _GammaPieces:
    """Symbolic data of H o gamma_t shared by the autonomous/time-dependent checks."""

    grad: object  # q -> gradient of H o gamma
    dgamma: object  # q -> flattened d gamma_i / d q^j
    dt: object | None  # q -> d gamma_i / d t, None when t-free


def _gamma_pieces(H: Expression, gamma: OneFormFamily, t: float | None) -> _GammaPieces:
    g = gamma.at_time(t)
    n = g.n
    Hg = substitute(H, dict(zip(p_names(n), g.components)))
    qs = q_names(n)
    grad = lambdify([diff(Hg, v) for v in qs], qs)
    dgamma = lambdify([e for row in g.derivative_matrix for e in row], qs)
    dt = None
    if gamma.time_dependent:
        dt = lambdify([substitute(diff(c, "t"), {"t": t}) for c in gamma.components], qs)
    return _GammaPieces(grad, dgamma, dt)


def _distribution_point(sys: HamiltonianNonholonomicSystem, gamma: OneFormFamily, pieces: _GammaPieces,
                        xi: NonholonomicField, q: np.ndarray, t: float | None, tol: float) -> dict:
    n = sys.n
    p = gamma(q, t)
    x = PhasePoint(q, p, t)
    off = float(np.max(np.abs(sys.constraint_values(x)))) if sys.r else 0.0
    if off > tol:
        raise GammaOffConstraintError(f"gamma(q) is off C by {off:.3e} at q={q.tolist()}")
    B = sys.distribution.basis(q)  # (n - r, n)
    qq = q.tolist()
    Dg = pieces.dgamma(qq).reshape(n, n)
    dt = pieces.dt(qq) if pieces.dt is not None else np.zeros(n)
    # (a) d gamma on D x D: v1^T (Dg - Dg^T) v2
    asym = B @ (Dg - Dg.T) @ B.T
    r_lag = float(np.max(np.abs(asym))) if asym.size else 0.0
    # (b) <d(H o gamma) + dgamma/dt dq, v>
    r_i = float(np.max(np.abs(B @ (pieces.grad(qq) + dt)))) if B.size else 0.0
    # (c) xi - T gamma(d/dt) in span{(v, Dg v)}
    w = xi.at(x) - np.concatenate([np.zeros(n), dt])
    frame = np.vstack([B.T, Dg @ B.T])  # (2n, n - r)
    Q, _ = np.linalg.qr(frame)
    r_ii = float(np.linalg.norm(w - Q @ (Q.T @ w)))
    rec = {"q": q.tolist(), "r_lagrangian": r_lag, "r_condition_i": r_i, "r_membership": r_ii}
    if t is not None:
        rec["t"] = t
    return rec


@dataclass
class DistributionReport:
    records: list[dict]
    gamma_related: GammaRelated | None = None

    def max(self, key: str) -> float:
        return max((r[key] for r in self.records), default=0.0)

    @property
    def gap(self) -> float | None:
        return None if self.gamma_related is None else self.gamma_related.max_gap

    def to_dict(self, points: bool = True) -> dict:
        d = {k: self.max(k) for k in ("r_lagrangian", "r_condition_i", "r_membership")}
        d["gamma_related_gap"] = self.gap
        if points:
            d["points"] = self.records
        return d


def _collect(sys, gamma, samples_q, t, xi, tol) -> list[dict]:
    pieces = _gamma_pieces(sys.H, gamma, t)
    return [_distribution_point(sys, gamma, pieces, xi, np.atleast_1d(np.asarray(q, dtype=float)), t, tol)
            for q in samples_q]


def distribution_hj_check(sys: HamiltonianNonholonomicSystem, gamma: OneFormFamily, samples_q: Sequence,
                          tol: float = 1e-10, q0=None, h: float = 1e-3, steps: int = 1000,
                          backend: str | None = None) -> DistributionReport:
    """Lagrangian-ness of T gamma(D), condition (i), xi_nh membership and gamma-relatedness.

    Trajectories start at ``q0`` (default the first sample); ``steps=0`` skips them.
    """
    if gamma.time_dependent:
        raise ValueError("distribution_hj_check needs a t-free 1-form")
    xi = xi_nh(sys)
    records = _collect(sys, gamma, samples_q, None, xi, tol)
    rel = None
    if steps > 0:
        start = samples_q[0] if q0 is None else q0
        rel = dynamics.gamma_related_check(sys.H, gamma, start, 0.0, h, steps,
                                           phase_field=xi.field, backend=backend)
    return DistributionReport(records, rel)
