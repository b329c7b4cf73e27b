"""Canonical symplectic structure on T*Q = R^{2n} in Darboux coordinates.

Sign conventions: theta = p_i dq^i, omega = -d theta = dq^i ^ dp_i.
Hence flat(dq, dp) = (a, b) = (-dp, dq) and sharp(a, b) = (dq, dp) = (b, -a),
and the Hamiltonian field is X_H = (dH/dp, -dH/dq).

Phase-space variables are named ``q1..qn`` and ``p1..pn``; time is ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .symexpr import Expression, as_expr, diff, lambdify, neg, sub, mul, add, ZERO

__all__ = [
    "q_names", "p_names", "phase_names",
    "PhasePoint", "TangentVector", "CotangentVector", "HamiltonianField",
    "poisson_bracket", "flat", "sharp", "hamiltonian_field",
    "check_imXH_lagrangian", "ImXHReport", "symplectic_matrix",
]


def q_names(n: int) -> list[str]:
    return [f"q{i}" for i in range(1, n + 1)]


def p_names(n: int) -> list[str]:
    return [f"p{i}" for i in range(1, n + 1)]


def phase_names(n: int) -> list[str]:
    return q_names(n) + p_names(n)


def symplectic_matrix(n: int) -> np.ndarray:
    """Matrix of omega: omega(u, v) = u @ J @ v with u = (dq, dp)."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray
    t: float | None = None

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.ndim != 1 or q.shape != p.shape or q.size < 1:
            raise ValueError(f"q and p must be equal-length vectors, got {q.shape}, {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_array(cls, x, t: float | None = None) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:], t)

    @property
    def n(self) -> int:
        return self.q.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    def binding(self) -> dict[str, float]:
        b = dict(zip(phase_names(self.n), self.as_array().tolist()))
        if self.t is not None:
            b["t"] = float(self.t)
        return b

    def values(self, names: Sequence[str]) -> list[float]:
        b = self.binding()
        return [b[k] for k in names]


@dataclass(frozen=True)
class TangentVector:
    base: PhasePoint
    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dq", np.asarray(self.dq, dtype=float).reshape(self.base.n))
        object.__setattr__(self, "dp", np.asarray(self.dp, dtype=float).reshape(self.base.n))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.dq, self.dp])


@dataclass(frozen=True)
class CotangentVector:
    base: PhasePoint
    a: np.ndarray  # dq-components
    b: np.ndarray  # dp-components

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(self.base.n))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(self.base.n))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def pair(self, v: TangentVector) -> float:
        return float(self.a @ v.dq + self.b @ v.dp)


def flat(v: TangentVector) -> CotangentVector:
    """i_v omega: (dq, dp) -> (a, b) = (-dp, dq)."""
    return CotangentVector(v.base, -v.dp, v.dq.copy())


def sharp(c: CotangentVector) -> TangentVector:
    """Inverse of :func:`flat`: (a, b) -> (dq, dp) = (b, -a)."""
    return TangentVector(c.base, c.b.copy(), -c.a)


def poisson_bracket(f: Expression, g: Expression, n: int) -> Expression:
    """{f, g} = df/dq^k dg/dp_k - df/dp_k dg/dq^k."""
    f, g = as_expr(f), as_expr(g)
    out: Expression = ZERO
    for qk, pk in zip(q_names(n), p_names(n)):
        out = add(out, sub(mul(diff(f, qk), diff(g, pk)), mul(diff(f, pk), diff(g, qk))))
    return out


@dataclass(frozen=True)
class HamiltonianField:
    H: Expression
    n: int
    Xq: tuple[Expression, ...]
    Xp: tuple[Expression, ...]

    @property
    def components(self) -> list[Expression]:
        return list(self.Xq) + list(self.Xp)

    def at(self, x: PhasePoint) -> TangentVector:
        names = phase_names(self.n) + (["t"] if "t" in self.H.free_vars else [])
        if "t" in names and x.t is None:
            raise ValueError("time-dependent Hamiltonian needs a PhasePoint with t")
        vals = lambdify(self.components, names)(x.values(names))
        return TangentVector(x, vals[: self.n], vals[self.n:])


def hamiltonian_field(H: Expression, n: int) -> HamiltonianField:
    """Solve i_X omega = dH symbolically: X_H = (dH/dp, -dH/dq)."""
    H = as_expr(H)
    Xq = tuple(diff(H, pk) for pk in p_names(n))
    Xp = tuple(neg(diff(H, qk)) for qk in q_names(n))
    return HamiltonianField(H, n, Xq, Xp)


@dataclass(frozen=True)
class ImXHReport:
    max_residual: float
    per_sample: list[float]

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "per_sample": self.per_sample}


def check_imXH_lagrangian(H: Expression, n: int, samples: Sequence[PhasePoint]) -> ImXHReport:
    """Evaluate the tangent-lift form d_T omega on tangent vectors to Im X_H.

    Im X_H is the section x -> (x, X_H(x)) of T(T*Q); its tangent space at x is
    spanned by (e_k, dX_H/dx_k).  With coordinates (q, p, qdot, pdot),
    d_T omega = dqdot ^ dp + dq ^ dpdot.
    """
    X = hamiltonian_field(H, n)
    names = phase_names(n)
    has_t = "t" in X.H.free_vars
    arg_names = names + (["t"] if has_t else [])
    jac = [diff(c, v) for c in X.components for v in names]
    jac_f = lambdify(jac, arg_names)
    per_sample = []
    for x in samples:
        DX = jac_f(x.values(arg_names)).reshape(2 * n, 2 * n)
        worst = 0.0
        for j, k in combinations(range(2 * n), 2):
            u_base = np.eye(2 * n)[j]
            v_base = np.eye(2 * n)[k]
            u_dot, v_dot = DX[:, j], DX[:, k]
            # dqdot ^ dp + dq ^ dpdot
            val = (u_dot[:n] @ v_base[n:] - v_dot[:n] @ u_base[n:]
                   + u_base[:n] @ v_dot[n:] - v_base[:n] @ u_dot[n:])
            worst = max(worst, abs(float(val)))
        per_sample.append(worst)
    return ImXHReport(max(per_sample, default=0.0), per_sample)
