"""Verification suites run for each scenario kind.

Every check yields a :class:`Check` naming the library operations it called,
its residual values and a verdict.  A scenario with ``expect: non_solution``
passes a residual check when the residual clearly exceeds the violation
threshold instead of vanishing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__, dynamics, geometry, hj_autonomous as hja, nonholonomic as nh, timedep as td
from .dynamics import Trajectory
from .geometry import PhasePoint, p_names, phase_names, q_names
from .sampling import box_array, halton
from .scenario import Scenario
from .submanifold import (
    ConstraintSubmanifold, GraphSubmanifoldOfQ, OneFormFamily, build_L_N_gamma,
    image_of_one_form, is_lagrangian, sample_on,
)
from .symexpr import ZERO, as_expr, diff, evaluate, lambdify, simplify, to_string

DEFAULT_TOLERANCES = {
    "gap": 1e-6, "energy_drift": 1e-8, "constraint_drift": 1e-6, "endpoint": 1e-7,
    "violation": 1e-3,
}


@dataclass
class Check:
    id: str
    operations: tuple[str, ...]
    verdict: bool
    values: dict
    note: str = ""

    def to_dict(self) -> dict:
        d = {"id": self.id, "verdict": "pass" if self.verdict else "fail",
             "operations": list(self.operations), "values": _clean(self.values)}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Report:
    scenario: str
    kind: str
    seed: int
    tol: float
    checks: list[Check] = field(default_factory=list)
    trajectories: dict[str, Trajectory] = field(default_factory=dict, repr=False)

    @property
    def verdict(self) -> bool:
        return all(c.verdict for c in self.checks)

    @property
    def operations(self) -> set[str]:
        return {op for c in self.checks for op in c.operations}

    def to_dict(self, wall_time: float | None = None) -> dict:
        d = {
            "scenario": self.scenario, "kind": self.kind, "version": __version__,
            "seed": self.seed, "tol": self.tol,
            "checks": [c.to_dict() for c in self.checks],
            "verdict": "pass" if self.verdict else "fail",
        }
        if wall_time is not None:
            d["wall_time_s"] = wall_time
        return d

    def rows(self) -> list[tuple[str, str, str, str]]:
        """(check, verdict, quantity, value) rows for the CSV summary."""
        out = []
        for c in self.checks:
            for k, v in _clean(c.values).items():
                if isinstance(v, (dict, list)):
                    continue
                out.append((c.id, "pass" if c.verdict else "fail", k, _fmt(v)))
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _clean(v):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# shared pieces


class _Ctx:
    def __init__(self, sc: Scenario, tol: float | None, seed: int | None):
        self.sc = sc
        self.n = sc.n
        self.tol = float(tol if tol is not None else sc.get("tol", 1e-8))
        self.seed = int(seed if seed is not None else sc.get("seed", 0))
        self.tols = {**DEFAULT_TOLERANCES, "membership": 10 * self.tol, **sc.get("tolerances", {})}
        self.expect = sc.get("expect", "solution")
        self.report = Report(sc.name, sc.kind, self.seed, self.tol)

    @property
    def solution(self) -> bool:
        return self.expect == "solution"

    def judge(self, value: float, tol: float | None = None) -> bool:
        if self.solution:
            return value <= (self.tol if tol is None else tol)
        return value > self.tols["violation"]

    def add(self, cid: str, ops, verdict: bool, values: dict, note: str = "") -> Check:
        c = Check(cid, tuple(ops), bool(verdict), values, note)
        self.report.checks.append(c)
        return c

    def samples(self, default: int) -> int:
        return int(self.sc.get("samples", default))

    def box(self, dim: int):
        return box_array(self.sc.get("box", [-1.0, 1.0]), dim)

    def q_box(self, dim: int):
        return box_array(self.sc.get("q_box", [-1.0, 1.0]), dim)

    def expr(self, key: str):
        return self.sc.expr(f"$.{key}")

    def exprs(self, key: str):
        return [self.sc.expr(f"$.{key}[{i}]") for i in range(len(self.sc.get(key)))]

    def matrix(self, key: str):
        rows = self.sc.get(key)
        return tuple(tuple(self.sc.expr(f"$.{key}[{i}][{j}]") for j in range(len(r))) for i, r in enumerate(rows))

    def t_grid(self) -> list[float]:
        return [float(t) for t in self.sc.get("t_grid", td.DEFAULT_T_GRID)]


def _hamiltonian_field_check(ctx: _Ctx, H, samples: list[PhasePoint]) -> None:
    """flat(X_H) = dH and sharp(dH) = X_H at the samples."""
    n = ctx.n
    X = geometry.hamiltonian_field(H, n)
    names = phase_names(n) + (["t"] if "t" in H.free_vars else [])
    grad = lambdify([diff(H, v) for v in phase_names(n)], names)
    worst = 0.0
    for x in samples:
        v = X.at(x)
        dH = grad(x.values(names))
        c = geometry.flat(v).as_array()
        back = geometry.sharp(geometry.CotangentVector(x, dH[:n], dH[n:])).as_array()
        worst = max(worst, float(np.max(np.abs(c - dH))), float(np.max(np.abs(back - v.as_array()))))
    im = geometry.check_imXH_lagrangian(H, n, samples[: min(len(samples), 25)])
    ctx.add("hamiltonian_field", ["geometry.hamiltonian_field", "geometry.flat", "geometry.sharp",
                                  "geometry.check_imXH_lagrangian", "symexpr.diff"],
            worst <= 1e-12 and im.max_residual <= 1e-10,
            {"max_flat_mismatch": worst, "imXH_lagrangian_residual": im.max_residual})


def _equivalence(ctx: _Ctx, rep: hja.HJReport, cid: str, ops, check_spread: bool = True) -> str:
    m = rep.max_residuals
    vals = list(m.values())
    if all(v <= 1e-8 for v in vals):
        status = "solution"
    elif all(v > ctx.tols["violation"] for v in vals):
        status = "non_solution"
    else:
        status = "inconsistent"
    split = 0
    for r in rep.records:
        three = (r.r_pullback, r.r_annihilator, r.r_tangency)
        if min(three) <= 1e-10 and max(three) > 1e-4:
            split += 1
    values = {**m, "h_spread": rep.h_spread, "status": status, "split_points": split,
              "samples": len(rep.records)}
    ok = status == ctx.expect and split == 0
    if ctx.solution:
        ok = ok and max(vals) <= ctx.tol
        # H is constant on a connected Lagrangian solution
        if check_spread:
            ok = ok and rep.h_spread <= max(ctx.tol, 1e-8)
    ctx.add(cid, ops, ok, values)
    return status


def _gamma_related(ctx: _Ctx, H, gamma: OneFormFamily, cid: str = "gamma_related", phase_field=None,
                   extra_ops=()) -> None:
    fl = ctx.sc.get("flow")
    if not fl or "q0" not in fl:
        return
    rel = dynamics.gamma_related_check(H, gamma, fl["q0"], fl.get("t0", 0.0), fl["h"], fl["steps"],
                                       phase_field=phase_field)
    ctx.report.trajectories[f"{cid}.base"] = rel.base
    ctx.report.trajectories[f"{cid}.phase"] = rel.phase
    ctx.add(cid, ["dynamics.flow", "dynamics.projected_field", "dynamics.gamma_related_check", *extra_ops],
            ctx.judge(rel.max_gap, ctx.tols["gap"]),
            {"max_gap": rel.max_gap, "t0": fl.get("t0", 0.0), "h": fl["h"], "steps": fl["steps"]})


def _lagrangian_check(ctx: _Ctx, L: ConstraintSubmanifold, samples, ops=()) -> bool:
    v = is_lagrangian(L, samples, tol=max(ctx.tol, 1e-12) if ctx.sc.kind == "lagrangian_test" else ctx.tol,
                      sample_tol=1e-8)
    ops = ["submanifold.is_lagrangian", "geometry.poisson_bracket", "submanifold.project",
           "symexpr.parse", *ops]
    ctx.add("lagrangian", ops, v.verdict if ctx.sc.kind != "lagrangian_test" or ctx.solution else not v.verdict,
            {"max_bracket_residual": v.max_bracket_residual, "lagrangian": v.verdict})
    return v.verdict


def _section(ctx: _Ctx) -> tuple[OneFormFamily | None, list[str]]:
    n = ctx.n
    if ctx.sc.get("S") is not None:
        return OneFormFamily.from_potential(ctx.expr("S"), n), ["symexpr.diff"]
    if ctx.sc.get("W") is not None:
        return OneFormFamily.from_potential(ctx.expr("W"), n), ["symexpr.diff"]
    if ctx.sc.get("gamma") is not None:
        return OneFormFamily(n, tuple(ctx.exprs("gamma"))), []
    return None, []


# ---------------------------------------------------------------------------
# kinds


def _autonomous(ctx: _Ctx) -> None:
    n = ctx.n
    H = ctx.expr("hamiltonian")
    gamma, gops = _section(ctx)
    ops = ["submanifold.sample_on", "submanifold.project", *gops]
    if gamma is None:
        L = ConstraintSubmanifold(n, tuple(ctx.exprs("constraints")))
    else:
        L = image_of_one_form(gamma)
        ops.append("submanifold.image_of_one_form")
    samples = sample_on(L, ctx.samples(100), ctx.box(2 * n), ctx.seed)
    lag = _lagrangian_check(ctx, L, samples, ops) if L.k == n else False
    if not lag:
        ctx.add("hj_equivalence", ["hj_autonomous.hj_residuals"], False, {}, "submanifold is not Lagrangian")
        return
    L = replace(L, lagrangian=True)
    rep = hja.hj_residuals(H, L, samples)
    _equivalence(ctx, rep, "hj_equivalence", ["hj_autonomous.hj_residuals", "submanifold.frames", "symexpr.diff"])
    _hamiltonian_field_check(ctx, H, samples)
    if gamma is not None:
        E = ctx.sc.get("energy")
        res = hja.classical_hj_residual(H, gamma, E, [x.q for x in samples])
        ctx.add("classical_hj", ["hj_autonomous.classical_hj_residual", "symexpr.substitute"],
                ctx.judge(res), {"residual": res, "energy": E})
        _gamma_related(ctx, H, gamma)


def _lagrangian_test(ctx: _Ctx) -> None:
    n = ctx.n
    gamma, gops = _section(ctx)
    ops = ["submanifold.sample_on", *gops]
    if gamma is None:
        L = ConstraintSubmanifold(n, tuple(ctx.exprs("constraints")))
    else:
        cl = gamma.closedness(box=ctx.q_box(n))
        ctx.add("closedness", ["submanifold.OneFormFamily.closedness"], cl.closed == ctx.solution,
                {"closed": cl.closed, "method": cl.method, "max_asymmetry": cl.max_asymmetry})
        L = image_of_one_form(gamma)
        ops.append("submanifold.image_of_one_form")
    samples = sample_on(L, ctx.samples(50), ctx.box(2 * n), ctx.seed)
    _lagrangian_check(ctx, L, samples, ops)


def _graph(ctx: _Ctx) -> GraphSubmanifoldOfQ:
    g = ctx.sc.get("graph")
    psi = {int(k): ctx.sc.expr(f"$.graph.psi.{k}") for k in g["psi"]}
    return GraphSubmanifoldOfQ(ctx.n, tuple(g["base"]), psi)


def _extension_check(ctx: _Ctx, system: hja.HolonomicSystem) -> None:
    values = {"H": to_string(simplify(system.H))}
    ok = True
    if ctx.sc.get("expected_H") is not None:
        target = ctx.expr("expected_H")
        pts = halton(25, [-1.0, 1.0], 2 * ctx.n, ctx.seed)
        names = phase_names(ctx.n)
        worst = max(abs(evaluate(system.H, dict(zip(names, p))) - evaluate(target, dict(zip(names, p))))
                    for p in pts.tolist())
        values["max_mismatch"] = worst
        ok = worst <= 1e-12
    ctx.add("holonomic_extension", ["hj_autonomous.holonomic_extend", "symexpr.substitute", "symexpr.to_string",
                                    "symexpr.simplify", "symexpr.eval"], ok, values)


def _holonomic(ctx: _Ctx) -> None:
    N = _graph(ctx)
    system = hja.holonomic_extend(N, ctx.expr("h"))
    _extension_check(ctx, system)
    S = ctx.expr("S")
    gamma = OneFormFamily.from_potential(S, N.m, N.base_names)
    L = build_L_N_gamma(N, gamma)
    pts = sample_on(L, ctx.samples(100), [-2.0, 2.0], ctx.seed)
    _lagrangian_check(ctx, L, pts, ["submanifold.build_L_N_gamma"])
    rep = hja.hj_residuals(system.H, replace(L, lagrangian=True), pts)
    _equivalence(ctx, rep, "hj_equivalence", ["hj_autonomous.hj_residuals", "submanifold.frames"])
    base = halton(20, ctx.q_box(N.m), N.m, ctx.seed)
    hol = hja.holonomic_hj_check(system, S, base, ctx.sc.get("lambda_grid"), tol=ctx.tol)
    ok = hol.agreement and ctx.judge(hol.base_residual) and ctx.judge(hol.extended_residual)
    ctx.add("holonomic_hj", ["hj_autonomous.holonomic_hj_check", "submanifold.build_L_N_gamma"], ok,
            {**hol.to_dict(), "base_residual": hol.base_residual, "extended_residual": hol.extended_residual})


def _nonholonomic_system(ctx: _Ctx) -> nh.HamiltonianNonholonomicSystem:
    n = ctx.n
    V = ctx.expr("potential") if ctx.sc.get("potential") is not None else ZERO
    if ctx.sc.get("mass_matrix") is not None:
        L = nh.MechanicalLagrangian(n, ctx.matrix("mass_matrix"), V)
    else:
        L = nh.MechanicalLagrangian.identity(n, V)
    D = nh.LinearDistribution(n, ctx.matrix("mu"))
    system = nh.build_hamiltonian_system(L, D)
    # H(q, M qd) = E_L(q, qd)
    leg = nh.legendre(L)
    E = nh.energy(L)
    Hf = lambdify([leg.H], phase_names(n))
    Ef = lambdify([E], q_names(n) + nh.velocity_names(n))
    worst = 0.0
    for row in halton(50, [-1.0, 1.0], 2 * n, ctx.seed):
        q, qd = row[:n], row[n:]
        p = leg.FL(q, qd)
        worst = max(worst, abs(float(Hf(list(q) + list(p))[0]) - float(Ef(list(q) + list(qd))[0])))
    ctx.add("legendre_energy", ["nonholonomic.legendre", "nonholonomic.energy", "nonholonomic.build_hamiltonian_system"],
            worst <= 1e-10, {"max_mismatch": worst, "H": to_string(leg.H)})
    return system


def _xi_properties(ctx: _Ctx, system: nh.HamiltonianNonholonomicSystem) -> nh.NonholonomicField:
    n = ctx.n
    C = ConstraintSubmanifold(n, system.constraints) if system.r else None
    pts = sample_on(C, ctx.samples(100), ctx.box(2 * n), ctx.seed) if C else [
        PhasePoint.from_array(x) for x in halton(ctx.samples(100), ctx.box(2 * n), 2 * n, ctx.seed)]
    comp = nh.check_compatibility(system, pts)
    semibasic = all(np.all(system.force_covectors(x.q)[:, n:] == 0.0) for x in pts[:10])
    ctx.add("compatibility", ["nonholonomic.check_compatibility", "submanifold.sample_on"], comp.ok and semibasic,
            {"ok": comp.ok, "min_singular_value": comp.min_singular_value, "semibasic": semibasic})
    if not comp.ok:
        raise nh.CompatibilityError("constraint-force pairing is singular on the samples")
    xi = nh.xi_nh(system)
    names = phase_names(n)
    grad_H = lambdify([diff(system.H, v) for v in names], names)
    dC = lambdify([diff(c, v) for c in system.constraints for v in names], names)
    X = geometry.hamiltonian_field(system.H, n)
    energy_rate = tangency = brute = lam_err = 0.0
    lam_ref = lambdify(ctx.exprs("lambda_reference"), names) if ctx.sc.get("lambda_reference") else None
    for x in pts:
        v = xi.at(x)
        a = x.as_array().tolist()
        energy_rate = max(energy_rate, abs(float(grad_H(a) @ v)))
        if system.r:
            tangency = max(tangency, float(np.max(np.abs(dC(a).reshape(system.r, 2 * n) @ v))))
        lam = system.multipliers(x)
        direct = X.at(x).as_array()
        for la, F in zip(lam, system.force_covectors(x.q)):
            direct = direct + la * geometry.sharp(geometry.CotangentVector(x, F[:n], F[n:])).as_array()
        brute = max(brute, float(np.max(np.abs(direct - v))))
        if lam_ref is not None:
            lam_err = max(lam_err, float(np.max(np.abs(lam - lam_ref(a)))))
    values = {"max_energy_rate": energy_rate, "max_constraint_rate": tangency, "max_bruteforce_gap": brute}
    ok = energy_rate <= 1e-10 and tangency <= 1e-10 and brute <= 1e-10
    if lam_ref is not None:
        values["max_lambda_error"] = lam_err
        ok = ok and lam_err <= 1e-10
    if xi.multiplier is not None:
        values["lambda"] = to_string(xi.multiplier)
    ctx.add("xi_nh", ["nonholonomic.xi_nh", "geometry.hamiltonian_field"], ok, values)
    return xi


def _constrained_flow(ctx: _Ctx, system, xi: nh.NonholonomicField, gamma: OneFormFamily | None) -> None:
    fl = ctx.sc.get("flow")
    if not fl:
        return
    n = ctx.n
    t0 = fl.get("t0", 0.0)
    if "x0" in fl:
        x0 = np.asarray(fl["x0"], dtype=float)
    elif gamma is not None and "q0" in fl:
        x0 = np.concatenate([fl["q0"], gamma(fl["q0"], t0)])
    else:
        return
    traj = dynamics.flow(xi.field, x0, t0, fl["h"], fl["steps"], names=phase_names(n))
    ctx.report.trajectories["constrained_flow"] = traj
    Hf = lambdify([system.H], phase_names(n))
    H0 = float(Hf(x0.tolist())[0])
    e_drift = max(abs(float(Hf(s)[0]) - H0) for s in traj.states.tolist())
    Cf = lambdify(system.constraints, phase_names(n)) if system.r else None
    c_drift = max(float(np.max(np.abs(Cf(s)))) for s in traj.states.tolist()) if Cf else 0.0
    values = {"energy_drift": e_drift, "constraint_drift": c_drift, "h": fl["h"], "steps": fl["steps"],
              "t_end": float(traj.times[-1])}
    ok = e_drift <= ctx.tols["energy_drift"] and c_drift <= ctx.tols["constraint_drift"]
    if "reference_h" in fl:
        steps = int(round(fl["steps"] * fl["h"] / fl["reference_h"]))
        ref = dynamics.flow(xi.field, x0, t0, fl["reference_h"], steps, names=phase_names(n))
        err = float(np.max(np.abs(ref.end - traj.end)))
        values["endpoint_vs_reference"] = err
        ok = ok and err <= ctx.tols["endpoint"]
    ctx.add("constrained_flow", ["dynamics.flow", "nonholonomic.xi_nh"], ok, values)


def _distribution_values(ctx: _Ctx, rep) -> tuple[bool, dict]:
    a, b, c = rep.max("r_lagrangian"), rep.max("r_condition_i"), rep.max("r_membership")
    values = {"r_lagrangian": a, "r_condition_i": b, "r_membership": c, "gamma_related_gap": rep.gap,
              "equivalent": (b <= 1e-8) == (c <= 1e-7)}
    if ctx.solution:
        ok = a <= ctx.tol and b <= ctx.tol and c <= ctx.tols["membership"]
        if rep.gap is not None:
            ok = ok and rep.gap <= ctx.tols["gap"]
    else:
        ok = b > ctx.tols["violation"] and c > ctx.tols["violation"]
    return ok and values["equivalent"], values


def _nonholonomic(ctx: _Ctx) -> None:
    system = _nonholonomic_system(ctx)
    xi = _xi_properties(ctx, system)
    gamma, gops = _section(ctx)
    _constrained_flow(ctx, system, xi, gamma)
    if gamma is None:
        return
    fl = ctx.sc.get("flow", {})
    qs = halton(ctx.samples(100), ctx.q_box(ctx.n), ctx.n, ctx.seed)
    rep = nh.distribution_hj_check(system, gamma, qs, tol=1e-8, q0=fl.get("q0"), h=fl.get("h", 1e-3),
                                   steps=fl.get("steps", 0) if "q0" in fl else 0)
    if rep.gamma_related is not None:
        ctx.report.trajectories["distribution_hj.base"] = rep.gamma_related.base
    ok, values = _distribution_values(ctx, rep)
    ctx.add("distribution_hj", ["nonholonomic.distribution_hj_check", "dynamics.gamma_related_check", *gops],
            ok, values)


def _timedep_family(ctx: _Ctx) -> td.TimeDependentFamily:
    if ctx.sc.get("W") is not None:
        return td.TimeDependentFamily.from_potential(ctx.expr("W"), ctx.n)
    return td.TimeDependentFamily.from_components(ctx.exprs("gamma"))


def _timedep_hj(ctx: _Ctx) -> None:
    n = ctx.n
    H = ctx.expr("hamiltonian")
    fam = _timedep_family(ctx)
    grid = ctx.t_grid()
    qs = halton(ctx.samples(20), ctx.q_box(n), n, ctx.seed)
    if ctx.sc.get("W") is not None:
        rep = td.timedep_hj_residual(H, ctx.expr("W"), [(t, q) for t in grid for q in qs])
        ctx.add("timedep_hj_equation", ["timedep.timedep_hj_residual"], ctx.judge(rep.max_spread), rep.to_dict())
    moi = lambdify(td.moi_residual(H, fam), q_names(n) + ["t"])
    moi_max = max(float(np.max(np.abs(moi(list(q) + [t])))) for t in grid for q in qs)
    ctx.add("moi", ["timedep.moi_residual"], ctx.judge(moi_max), {"max_residual": moi_max})
    sig = [td.sigma_membership(H, fam, t, qs) for t in grid]
    s_res = max(s.max_residual for s in sig)
    s_dist = max(s.max_distance for s in sig)
    ctx.add("sigma_membership", ["timedep.sigma_membership", "timedep.alpha_t"],
            ctx.judge(s_res) and ((moi_max <= 1e-10) == (s_res <= 1e-10)),
            {"max_residual": s_res, "max_distance": s_dist, "per_t": [s.to_dict() for s in sig]})
    worst = hja.HJReport(records=[r for t in grid for r in td.timedep_hj_chain(H, fam, t, qs).records])
    _equivalence(ctx, worst, "timedep_equivalence", ["timedep.timedep_hj_chain", "timedep.alpha_t",
                                                     "hj_autonomous.hj_residuals", "submanifold.image_of_one_form"],
                 check_spread=False)
    _gamma_related(ctx, H, fam.gamma)


def _timedep_holonomic(ctx: _Ctx) -> None:
    N = _graph(ctx)
    system = hja.holonomic_extend(N, ctx.expr("h"))
    _extension_check(ctx, system)
    W = ctx.expr("W")
    grid = ctx.t_grid()
    base = halton(ctx.samples(20), ctx.q_box(N.m), N.m, ctx.seed)
    rep = td.timedep_holonomic_check(system, W, grid, base, ctx.sc.get("lambda_grid"), tol=ctx.tol)
    ok = rep.agreement and ctx.judge(rep.base_residual) and ctx.judge(rep.extended_residual)
    ctx.add("timedep_holonomic", ["timedep.timedep_holonomic_check", "timedep.pi_t", "timedep.alpha_t",
                                  "submanifold.build_L_N_gamma", "hj_autonomous.hj_residuals"], ok, rep.to_dict())


def _timedep_nonholonomic(ctx: _Ctx) -> None:
    system = _nonholonomic_system(ctx)
    _xi_properties(ctx, system)
    fam = _timedep_family(ctx)
    fl = ctx.sc.get("flow", {})
    qs = halton(ctx.samples(20), ctx.q_box(ctx.n), ctx.n, ctx.seed)
    rep = td.timedep_nonholonomic_check(
        system, fam, ctx.t_grid(), qs, tol=1e-8, q0=fl.get("q0"), t0=fl.get("t0"),
        h=fl.get("h", 1e-3), steps=fl.get("steps", 0) if "q0" in fl else 0)
    if rep.gamma_related is not None:
        ctx.report.trajectories["timedep_nonholonomic.base"] = rep.gamma_related.base
        ctx.report.trajectories["timedep_nonholonomic.phase"] = rep.gamma_related.phase
    merged = nh.DistributionReport([r for s in rep.slices.values() for r in s.records], rep.gamma_related)
    ok, values = _distribution_values(ctx, merged)
    values["per_t"] = rep.to_dict()["per_t"]
    ctx.add("timedep_nonholonomic", ["timedep.timedep_nonholonomic_check", "dynamics.gamma_related_check"], ok, values)


SUITES: dict[str, Callable[[_Ctx], None]] = {
    "autonomous_hj": _autonomous,
    "lagrangian_test": _lagrangian_test,
    "holonomic": _holonomic,
    "nonholonomic": _nonholonomic,
    "timedep_hj": _timedep_hj,
    "timedep_holonomic": _timedep_holonomic,
    "timedep_nonholonomic": _timedep_nonholonomic,
}


def run_scenario(sc: Scenario, tol: float | None = None, seed: int | None = None) -> Report:
    ctx = _Ctx(sc, tol, seed)
    SUITES[sc.kind](ctx)
    return ctx.report


def phase_field_for(sc: Scenario):
    """The phase-space field integrated by ``hjgeo flow``: xi_nh or X_H."""
    if sc.kind in ("nonholonomic", "timedep_nonholonomic"):
        ctx = _Ctx(sc, None, None)
        n = sc.n
        V = ctx.expr("potential") if sc.get("potential") is not None else ZERO
        L = (nh.MechanicalLagrangian(n, ctx.matrix("mass_matrix"), V) if sc.get("mass_matrix") is not None
             else nh.MechanicalLagrangian.identity(n, V))
        return nh.xi_nh(nh.build_hamiltonian_system(L, nh.LinearDistribution(n, ctx.matrix("mu")))).field
    ctx = _Ctx(sc, None, None)
    if sc.kind in ("holonomic", "timedep_holonomic"):
        H = hja.holonomic_extend(_graph(ctx), ctx.expr("h")).H
    elif sc.get("hamiltonian") is not None:
        H = ctx.expr("hamiltonian")
    else:
        raise ValueError(f"scenario kind {sc.kind} has no dynamics to integrate")
    return dynamics.Field.from_expressions(geometry.hamiltonian_field(H, sc.n).components, phase_names(sc.n))


def initial_state(sc: Scenario) -> tuple[np.ndarray, float]:
    fl = sc.get("flow") or {}
    t0 = float(fl.get("t0", 0.0))
    if "x0" in fl:
        return np.asarray(fl["x0"], dtype=float), t0
    if "q0" in fl:
        ctx = _Ctx(sc, None, None)
        if sc.kind in ("timedep_hj", "timedep_nonholonomic"):
            gamma = _timedep_family(ctx).gamma
        else:
            gamma, _ = _section(ctx)
        if gamma is not None:
            return np.concatenate([fl["q0"], gamma(fl["q0"], t0)]), t0
    raise ValueError("scenario has no flow.x0 (or flow.q0 with a 1-form) to start from")
