"""Time-dependent Hamilton-Jacobi theory on T*Q, one time slice at a time.

A family gamma_t of 1-forms gives L_t = Im gamma_t and the 1-form

    alpha_t = flat(T gamma(d/dt)) = -(d gamma_i/dt) dq^i

along L_t.  The HJ conditions become those of the autonomous case with dH
replaced by dH - alpha_t, and X_H by X_H - sharp(alpha_t); the latter must
lie in the affine distribution Sigma_t = sharp(alpha_t) + TL_t.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import dynamics
from .dynamics import GammaRelated
from .geometry import PhasePoint, p_names, phase_names, q_names
from .hj_autonomous import (
    HJReport, HolonomicSystem, _base_residuals, default_lambda_grid, hj_residuals,
    points_on_L_N_gamma,
)
from .nonholonomic import (
    DistributionReport, HamiltonianNonholonomicSystem, _collect, xi_nh,
)
from .submanifold import GraphSubmanifoldOfQ, OneFormFamily, build_L_N_gamma, image_of_one_form
from .symexpr import ZERO, Expression, add, as_expr, diff, lambdify, mul, neg, substitute

__all__ = [
    "DEFAULT_T_GRID", "TimeDependentFamily", "AlphaForm", "PiForm", "SigmaReport",
    "TimedepHJReport", "TimedepHolonomicReport", "TimedepNonholonomicReport",
    "alpha_t", "sigma_membership", "timedep_hj_chain", "moi_residual", "timedep_hj_residual",
    "pi_t", "timedep_holonomic_check", "timedep_nonholonomic_check",
]

DEFAULT_T_GRID = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class TimeDependentFamily:
    gamma: OneFormFamily

    @classmethod
    def from_potential(cls, W: Expression | str, n: int, names: Sequence[str] | None = None):
        return cls(OneFormFamily.from_potential(W, n, names))

    @classmethod
    def from_components(cls, components: Sequence, names: Sequence[str] | None = None):
        return cls(OneFormFamily(len(components), tuple(components), tuple(names or ())))

    @property
    def n(self) -> int:
        return self.gamma.n

    @cached_property
    def dt_component(self) -> tuple[Expression, ...]:
        return tuple(diff(c, "t") for c in self.gamma.components)


@dataclass(frozen=True)
class AlphaForm:
    """A 1-form on T*Q (or on T*N over ``names``) with dq and dp components."""

    dq: tuple[Expression, ...]
    dp: tuple[Expression, ...] = ()
    names: tuple[str, ...] = ()

    def __post_init__(self):
        dq = tuple(as_expr(c) for c in self.dq)
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "dp", tuple(as_expr(c) for c in self.dp) or (ZERO,) * len(dq))
        if not self.names:
            object.__setattr__(self, "names", tuple(q_names(len(dq))))

    @property
    def n(self) -> int:
        return len(self.dq)

    @property
    def momenta(self) -> list[str]:
        return ["p" + v[1:] for v in self.names]

    @property
    def semibasic(self) -> bool:
        return all(c == ZERO for c in self.dp)

    @cached_property
    def _eval(self):
        return lambdify(list(self.dq) + list(self.dp), list(self.names) + self.momenta + ["t"])

    def __call__(self, x: PhasePoint) -> np.ndarray:
        t = 0.0 if x.t is None else float(x.t)
        return self._eval(x.as_array().tolist() + [t])


def alpha_t(fam: TimeDependentFamily) -> AlphaForm:
    return AlphaForm(tuple(neg(c) for c in fam.dt_component), names=tuple(fam.gamma.names))


def _slice_points(gamma: OneFormFamily, t: float | None, samples_q) -> list[PhasePoint]:
    return [PhasePoint(np.atleast_1d(np.asarray(q, dtype=float)), gamma(q, t), t) for q in samples_q]


def timedep_hj_chain(H: Expression, fam: TimeDependentFamily, t: float | None, samples_q: Sequence,
                     alpha: AlphaForm | None = None) -> HJReport:
    """Residuals (i) pullback of dH - alpha_t, (ii) annihilator and (iii) Sigma_t distance on L_t."""
    g = fam.gamma
    L = image_of_one_form(g, t)
    a = alpha_t(fam) if alpha is None else alpha
    return hj_residuals(H, L, _slice_points(g, t, samples_q), alpha=a)


@dataclass
class SigmaReport:
    t: float | None
    residuals: np.ndarray  # |(X - sharp alpha)_p - D gamma (X - sharp alpha)_q|
    distances: np.ndarray  # orthogonal distance to TL_t

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0

    def to_dict(self) -> dict:
        return {"t": self.t, "max_residual": self.max_residual, "max_distance": self.max_distance}


def sigma_membership(H: Expression, fam: TimeDependentFamily, t: float | None, samples_q: Sequence,
                     alpha: AlphaForm | None = None) -> SigmaReport:
    """Membership of X_H in Sigma_t along gamma_t.

    ``residuals`` measure w = X_H - sharp(alpha_t) against the graph frame
    {d/dq^j + (d gamma_i/dq^j) d/dp_i} through its dp-defect w_p - D gamma w_q;
    ``distances`` are least-squares distances to the same span.
    """
    H = as_expr(H)
    g = fam.gamma
    a = alpha_t(fam) if alpha is None else alpha
    n = g.n
    nm = phase_names(n)
    arg_names = nm + (["t"] if "t" in H.free_vars else [])
    grad = lambdify([diff(H, v) for v in nm], arg_names)
    dg = lambdify([e for row in g.derivative_matrix for e in row], g.arg_names)
    res = []
    for x in _slice_points(g, t, samples_q):
        c = grad(x.values(arg_names)) - a(x)
        w = np.concatenate([c[n:], -c[:n]])
        qa = x.q.tolist() + ([float(t)] if g.time_dependent else [])
        D = dg(qa).reshape(n, n)
        res.append(float(np.linalg.norm(w[n:] - D @ w[:n])))
    chain = timedep_hj_chain(H, fam, t, samples_q, alpha=a)
    dist = np.array([r.r_tangency for r in chain.records])
    return SigmaReport(t, np.array(res), dist)


def moi_residual(H: Expression, fam: TimeDependentFamily) -> tuple[Expression, ...]:
    """dH/dq^i + d gamma_i/dt + (d gamma_i/dq^j)(dH/dp_j) at p = gamma(t, q)."""
    H = as_expr(H)
    g = fam.gamma
    n = g.n
    sub_map = dict(zip(p_names(n), g.components))
    Hq = [substitute(diff(H, v), sub_map) for v in q_names(n)]
    Hp = [substitute(diff(H, v), sub_map) for v in p_names(n)]
    out = []
    for i in range(n):
        e = add(Hq[i], fam.dt_component[i])
        for j in range(n):
            e = add(e, mul(g.derivative_matrix[i][j], Hp[j]))
        out.append(e)
    return tuple(out)


@dataclass
class TimedepHJReport:
    spreads: dict[float, float]

    @property
    def max_spread(self) -> float:
        return max(self.spreads.values(), default=0.0)

    def to_dict(self) -> dict:
        return {"per_t": [{"t": t, "spread": s} for t, s in sorted(self.spreads.items())],
                "max_spread": self.max_spread}


def timedep_hj_residual(H: Expression, W: Expression, samples: Sequence[tuple]) -> TimedepHJReport:
    """Per-t spread over q of R = H(q, dW/dq) + dW/dt; ``samples`` are (t, q) pairs."""
    H, W = as_expr(H), as_expr(W)
    first_q = np.atleast_1d(samples[0][1])
    n = first_q.size
    qs = q_names(n)
    R = add(substitute(H, {p: diff(W, q) for p, q in zip(p_names(n), qs)}), diff(W, "t"))
    f = lambdify([R], qs + ["t"])
    by_t: dict[float, list[float]] = {}
    for t, q in samples:
        by_t.setdefault(float(t), []).append(float(f(list(np.atleast_1d(q)) + [float(t)])[0]))
    return TimedepHJReport({t: max(v) - min(v) for t, v in by_t.items()})


@dataclass(frozen=True)
class PiForm:
    """Pullback of alpha by (q^a, p_i) -> (q^a, p_a + p_alpha dPsi^alpha/dq^a), on T*Q coordinates."""

    N: GraphSubmanifoldOfQ
    dq: tuple[Expression, ...]
    dp: tuple[Expression, ...]

    @cached_property
    def _eval(self):
        return lambdify(list(self.dq) + list(self.dp), phase_names(self.N.n) + ["t"])

    def __call__(self, x: PhasePoint) -> np.ndarray:
        t = 0.0 if x.t is None else float(x.t)
        return self._eval(x.as_array().tolist() + [t])


def pi_t(alpha: AlphaForm, N: GraphSubmanifoldOfQ) -> PiForm:
    if list(alpha.names) != N.base_names:
        raise ValueError(f"alpha must be written over the base coordinates {N.base_names}")
    n = N.n
    # P_a = p_a + p_alpha dPsi^alpha/dq^a, in T*Q variables
    P = {}
    for a in N.base:
        e = as_expr(f"p{a}")
        for al in N.fiber:
            e = add(e, mul(as_expr(f"p{al}"), N.dpsi(al, a)))
        P[f"p{a}"] = e
    a_q = [substitute(c, P) for c in alpha.dq]
    a_p = [substitute(c, P) for c in alpha.dp]
    dq = [ZERO] * n
    dp = [ZERO] * n
    for ia, a in enumerate(N.base):
        dp[a - 1] = a_p[ia]
        comp = a_q[ia]
        for ib, b in enumerate(N.base):
            for al in N.fiber:
                # a_P_b * p_alpha * d^2 Psi^alpha / dq^a dq^b
                term = mul(mul(a_p[ib], as_expr(f"p{al}")), diff(N.dpsi(al, b), f"q{a}"))
                comp = add(comp, term)
        dq[a - 1] = comp
    for al in N.fiber:
        e: Expression = ZERO
        for ia, a in enumerate(N.base):
            e = add(e, mul(a_p[ia], N.dpsi(al, a)))
        dp[al - 1] = e
    return PiForm(N, tuple(dq), tuple(dp))


@dataclass
class TimedepHolonomicReport:
    base_spreads: dict[float, float]
    extended: dict[float, list[HJReport]]
    lambdas: list[list[float]]
    tol: float

    @property
    def base_residual(self) -> float:
        return max(self.base_spreads.values(), default=0.0)

    @property
    def extended_residual(self) -> float:
        return max((r.max("r_pullback") for rs in self.extended.values() for r in rs), default=0.0)

    @property
    def agreement(self) -> bool:
        return (self.base_residual <= self.tol) == (self.extended_residual <= self.tol)

    @property
    def verdict(self) -> bool:
        return self.agreement and self.base_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "per_t": [
                {"t": t, "base_spread": self.base_spreads[t],
                 "extended_pullback_per_lambda": [
                     {"lambda": lam, "max_pullback": r.max("r_pullback")}
                     for lam, r in zip(self.lambdas, self.extended[t])]}
                for t in sorted(self.base_spreads)
            ],
            "base_residual": self.base_residual, "extended_residual": self.extended_residual,
            "agreement": self.agreement,
        }


def timedep_holonomic_check(sys: HolonomicSystem, W_on_N: Expression, t_grid: Sequence[float] = DEFAULT_T_GRID,
                            samples: Sequence = (), lambda_grid: Sequence | None = None,
                            tol: float = 1e-10) -> TimedepHolonomicReport:
    """Base spread of h(q^a, dW/dq^a) + dW/dt and pullback of dH - Pi_t on L_{N, gamma_t}."""
    N = sys.N
    W = as_expr(W_on_N)
    fam = TimeDependentFamily.from_potential(W, N.m, N.base_names)
    gamma = fam.gamma
    Pi = pi_t(alpha_t(fam), N)
    h_on_gamma = add(substitute(sys.h, dict(zip(N.base_momenta, gamma.components))), diff(W, "t"))
    grid = default_lambda_grid(len(N.fiber)) if lambda_grid is None else [np.atleast_1d(l) for l in lambda_grid]
    spreads, extended = {}, {}
    for t in t_grid:
        t = float(t)
        spreads[t], _ = _base_residuals(substitute(h_on_gamma, {"t": t}), N.base_names, samples)
        L = build_L_N_gamma(N, gamma, t)
        extended[t] = [
            hj_residuals(sys.H, L, [points_on_L_N_gamma(N, gamma, q, lam, t) for q in samples], alpha=Pi)
            for lam in grid
        ]
    return TimedepHolonomicReport(spreads, extended, [np.atleast_1d(l).tolist() for l in grid], tol)


@dataclass
class TimedepNonholonomicReport:
    slices: dict[float, DistributionReport]
    gamma_related: GammaRelated | None

    def max(self, key: str) -> float:
        return max((r.max(key) for r in self.slices.values()), default=0.0)

    @property
    def gap(self) -> float | None:
        return None if self.gamma_related is None else self.gamma_related.max_gap

    def to_dict(self) -> dict:
        return {
            "per_t": [{"t": t, **r.to_dict(points=False)} for t, r in sorted(self.slices.items())],
            "r_condition_i": self.max("r_condition_i"), "r_membership": self.max("r_membership"),
            "gamma_related_gap": self.gap,
        }


def timedep_nonholonomic_check(sys: HamiltonianNonholonomicSystem, fam: TimeDependentFamily,
                               t_grid: Sequence[float] = DEFAULT_T_GRID, samples_q: Sequence = (),
                               tol: float = 1e-10, q0=None, t0: float | None = None, h: float = 1e-3,
                               steps: int = 1000, backend: str | None = None) -> TimedepNonholonomicReport:
    """Per (t, q): <d(H o gamma_t) + (d gamma/dt) dq, D>, xi_nh in Sigma_t, and gamma_t-relatedness.

    The trajectory starts at (t0, q0), by default the first grid time and sample.
    """
    xi = xi_nh(sys)
    g = fam.gamma
    slices = {}
    for t in t_grid:
        slices[float(t)] = DistributionReport(_collect(sys, g, samples_q, float(t), xi, tol))
    rel = None
    if steps > 0:
        start = samples_q[0] if q0 is None else q0
        start_t = float(t_grid[0]) if t0 is None else float(t0)
        rel = dynamics.gamma_related_check(sys.H, g, start, start_t, h, steps, phase_field=xi.field, backend=backend)
    return TimedepNonholonomicReport(slices, rel)
