"""Hamilton-Jacobi conditions for a Lagrangian submanifold L of T*Q.

For L Lagrangian the following are equivalent, and each is measured by a
nonnegative residual at sample points of L:

* pullback:    T*i_L(dH|_L) = 0          max_v |<dH, v>| over unit v in TL
* annihilator: dH|_L in (TL)^0           distance from dH to span(dPhi^i)
* tangency:    X_H|_L in TL              distance from X_H to TL
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import PhasePoint, p_names, phase_names, q_names
from .submanifold import (
    ConstraintSubmanifold, GraphSubmanifoldOfQ, OneFormFamily, build_L_N_gamma, frames,
)
from .symexpr import Expression, add, as_expr, diff, lambdify, mul, substitute

__all__ = [
    "PointRecord", "HJReport", "HolonomicSystem", "HolonomicReport", "HolonomicError",
    "hj_residuals", "classical_hj_residual", "holonomic_extend", "holonomic_hj_check",
    "default_lambda_grid", "points_on_L_N_gamma",
]


class HolonomicError(ValueError):
    pass


@dataclass(frozen=True)
class PointRecord:
    point: PhasePoint
    r_pullback: float
    r_annihilator: float
    r_tangency: float
    H: float

    def to_dict(self) -> dict:
        d = {
            "q": self.point.q.tolist(), "p": self.point.p.tolist(),
            "r_pullback": self.r_pullback, "r_annihilator": self.r_annihilator,
            "r_tangency": self.r_tangency, "H": self.H,
        }
        if self.point.t is not None:
            d["t"] = self.point.t
        return d


@dataclass
class HJReport:
    records: list[PointRecord] = field(default_factory=list)
    t: float | None = None

    @property
    def h_values(self) -> np.ndarray:
        return np.array([r.H for r in self.records])

    @property
    def h_spread(self) -> float:
        h = self.h_values
        return float(h.max() - h.min()) if h.size else 0.0

    def max(self, which: str) -> float:
        return max((getattr(r, which) for r in self.records), default=0.0)

    @property
    def max_residuals(self) -> dict[str, float]:
        return {k: self.max(k) for k in ("r_pullback", "r_annihilator", "r_tangency")}

    def jointly_below(self, tol: float) -> bool:
        return all(v <= tol for v in self.max_residuals.values())

    def to_dict(self, points: bool = True) -> dict:
        d: dict = {"max": self.max_residuals, "h_spread": self.h_spread, "samples": len(self.records)}
        if self.t is not None:
            d["t"] = self.t
        if points:
            d["points"] = [r.to_dict() for r in self.records]
        return d

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in self.max_residuals.items():
            w.writerow([f"max_{k}", f"{v:.17g}"])
        w.writerow(["h_spread", f"{self.h_spread:.17g}"])
        w.writerow(["samples", len(self.records)])
        return buf.getvalue()


def _covector_residuals(c: np.ndarray, T: np.ndarray, J: np.ndarray) -> tuple[float, float, float]:
    """Residuals of covector c against tangent rows T and annihilator rows J."""
    n = c.size // 2
    r_pull = float(np.max(np.abs(T @ c))) if T.size else 0.0
    Q, _ = np.linalg.qr(J.T)
    r_ann = float(np.linalg.norm(c - Q @ (Q.T @ c)))
    X = np.concatenate([c[n:], -c[:n]])  # sharp(c)
    r_tan = float(np.linalg.norm(X - T.T @ (T @ X))) if T.size else float(np.linalg.norm(X))
    return r_pull, r_ann, r_tan


def hj_residuals(H: Expression, L: ConstraintSubmanifold, samples: Sequence[PhasePoint],
                 alpha: Callable[[PhasePoint], np.ndarray] | None = None) -> HJReport:
    """Three HJ residuals of H on L at each sample.

    With ``alpha`` (a covector field on T*Q, returned as (dq, dp) components)
    the residuals are those of dH - alpha, i.e. the time-dependent conditions
    with X_H - sharp(alpha) in place of X_H.
    """
    H = as_expr(H)
    if L.lagrangian is False:
        raise ValueError("hj_residuals needs a Lagrangian submanifold")
    names = phase_names(L.n)
    arg_names = names + (["t"] if "t" in H.free_vars else [])
    grad = lambdify([diff(H, v) for v in names], arg_names)
    hval = lambdify([H], arg_names)
    times = {x.t for x in samples}
    report = HJReport(t=times.pop() if len(times) == 1 else None)
    for x in samples:
        vals = x.values(arg_names)
        c = grad(vals)
        if alpha is not None:
            c = c - alpha(x)
        fr = frames(L, x)
        rp, ra, rt = _covector_residuals(c, fr.tangent, fr.annihilator)
        report.records.append(PointRecord(x, rp, ra, rt, float(hval(vals)[0])))
    return report


def classical_hj_residual(H: Expression, S: Expression | OneFormFamily, E: float | None,
                          sample_q: Sequence) -> float:
    """max |H(q, dS/dq) - E| over samples; the spread of H o dS when E is None.

    ``S`` may be a potential or directly the 1-form with components dS/dq^i.
    """
    H = as_expr(H)
    if isinstance(S, OneFormFamily):
        gamma = S
    else:
        n = len(np.atleast_1d(sample_q[0]))
        gamma = OneFormFamily.from_potential(S, n)
    n = gamma.n
    comp = substitute(H, dict(zip(p_names(n), gamma.components)))
    f = lambdify([comp], q_names(n))
    vals = np.array([f(np.atleast_1d(q).tolist())[0] for q in sample_q])
    if E is None:
        return float(vals.max() - vals.min())
    return float(np.max(np.abs(vals - E)))


@dataclass(frozen=True)
class HolonomicSystem:
    N: GraphSubmanifoldOfQ
    h: Expression
    H: Expression


def holonomic_extend(N: GraphSubmanifoldOfQ, h: Expression) -> HolonomicSystem:
    """H = h o T*i_N, locally (q^a, p_i) -> (q^a, p_a + p_alpha dPsi^alpha/dq^a)."""
    h = as_expr(h)
    allowed = set(N.base_names) | set(N.base_momenta) | {"t"}
    clash = h.free_vars - allowed
    if clash:
        raise HolonomicError(
            f"h may only use base coordinates and momenta {sorted(allowed - {'t'})}; "
            f"variable-name collision with {sorted(clash)}"
        )
    repl = {}
    for a in N.base:
        P = as_expr(f"p{a}")
        for al in N.fiber:
            P = add(P, mul(as_expr(f"p{al}"), N.dpsi(al, a)))
        repl[f"p{a}"] = P
    return HolonomicSystem(N, h, substitute(h, repl))


def default_lambda_grid(fiber_dim: int, count: int = 5, lo: float = -2.0, hi: float = 2.0) -> list[np.ndarray]:
    axis = np.linspace(lo, hi, count)
    return [np.array(v) for v in itertools.product(axis, repeat=fiber_dim)]


def points_on_L_N_gamma(N: GraphSubmanifoldOfQ, gamma: OneFormFamily, base_q, lam,
                        t: float | None = None) -> PhasePoint:
    """The point of L_{N,gamma} over base point ``base_q`` with fiber momenta ``lam``."""
    base_q = np.atleast_1d(np.asarray(base_q, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    q = N.embed(base_q)
    p = np.zeros(N.n)
    for al, l in zip(N.fiber, lam):
        p[al - 1] = l
    g = gamma(base_q, t)
    bind = dict(zip(N.base_names, base_q.tolist()))
    for ia, a in enumerate(N.base):
        val = g[ia]
        for al, l in zip(N.fiber, lam):
            val -= float(lambdify([N.dpsi(al, a)], N.base_names)(list(bind.values()))[0]) * l
        p[a - 1] = val
    return PhasePoint(q, p, t)


@dataclass
class HolonomicReport:
    base_spread: float
    base_differential: float
    extended: list[HJReport]
    lambdas: list[list[float]]
    tol: float

    @property
    def extended_pullback(self) -> list[float]:
        return [r.max("r_pullback") for r in self.extended]

    @property
    def extended_spread(self) -> float:
        h = np.concatenate([r.h_values for r in self.extended])
        return float(h.max() - h.min()) if h.size else 0.0

    @property
    def base_residual(self) -> float:
        return max(self.base_spread, self.base_differential)

    @property
    def extended_residual(self) -> float:
        return max(max(self.extended_pullback, default=0.0), self.extended_spread)

    @property
    def agreement(self) -> bool:
        return (self.base_residual <= self.tol) == (self.extended_residual <= self.tol)

    @property
    def verdict(self) -> bool:
        return self.agreement and self.base_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "base_spread": self.base_spread, "base_differential": self.base_differential,
            "extended_pullback_per_lambda": [
                {"lambda": lam, "max_pullback": v} for lam, v in zip(self.lambdas, self.extended_pullback)
            ],
            "extended_spread": self.extended_spread, "agreement": self.agreement,
        }


def _base_residuals(h_on_gamma: Expression, names: list[str], samples) -> tuple[float, float]:
    grad = lambdify([diff(h_on_gamma, v) for v in names], names)
    val = lambdify([h_on_gamma], names)
    vals, worst = [], 0.0
    for q in samples:
        qq = np.atleast_1d(q).tolist()
        vals.append(float(val(qq)[0]))
        g = grad(qq)
        worst = max(worst, float(np.max(np.abs(g))) if g.size else 0.0)
    return float(max(vals) - min(vals)), worst


def holonomic_hj_check(sys: HolonomicSystem, S_on_N: Expression, samples: Sequence,
                       lambda_grid: Sequence | None = None, tol: float = 1e-10) -> HolonomicReport:
    """Compare h o dS = const on N with the extended condition on L_{N,dS}.

    ``samples`` are base-coordinate points of N; the fiber momenta p_alpha
    run over ``lambda_grid`` (the Lagrange multipliers).
    """
    N = sys.N
    gamma = OneFormFamily.from_potential(S_on_N, N.m, N.base_names)
    h_on_gamma = substitute(sys.h, dict(zip(N.base_momenta, gamma.components)))
    spread, differential = _base_residuals(h_on_gamma, N.base_names, samples)
    L = build_L_N_gamma(N, gamma)
    grid = default_lambda_grid(len(N.fiber)) if lambda_grid is None else [np.atleast_1d(l) for l in lambda_grid]
    extended = []
    for lam in grid:
        pts = [points_on_L_N_gamma(N, gamma, q, lam) for q in samples]
        extended.append(hj_residuals(sys.H, L, pts))
    return HolonomicReport(spread, differential, extended, [np.atleast_1d(l).tolist() for l in grid], tol)
