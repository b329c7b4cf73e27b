"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run under pytest (the lines bypass output capture), or as a
script: ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from hjgeo import dynamics, hj_autonomous as hj, nonholonomic as nh  # noqa: E402
from hjgeo import scenario as scn, submanifold as sm, suites, symexpr as sx, timedep as td  # noqa: E402
from hjgeo.geometry import PhasePoint, hamiltonian_field  # noqa: E402

import exprgen  # noqa: E402
import oracles  # noqa: E402

RESIDUALS = ("r_pullback", "r_annihilator", "r_tangency")


def _emit(number: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


def _check(report: suites.Report, cid: str) -> suites.Check:
    return next(c for c in report.checks if c.id == cid)


def _run(name: str) -> suites.Report:
    return suites.run_scenario(scn.load(scn.resolve(name)))


def criterion_1():
    solutions = ["oscillator_hj", "free_particle_hj", "oscillator_sqrt_form", "holonomic_diagonal"]
    non_solutions = ["oscillator_linear_S", "oscillator_quadratic_S"]
    start = time.perf_counter()
    reports = {n: _run(n) for n in solutions + non_solutions}
    elapsed = time.perf_counter() - start
    ok, worst_sol, least_non = True, 0.0, np.inf
    for name, rep in reports.items():
        v = _check(rep, "hj_equivalence").values
        ok &= v["samples"] == 100
        if name in solutions:
            worst_sol = max(worst_sol, *(v[k] for k in RESIDUALS))
        else:
            least_non = min(least_non, *(v[k] for k in RESIDUALS))
    ok &= worst_sol <= 1e-8 and least_non > 1e-3 and elapsed < 5.0
    return ok, (f"{len(reports)} scenarios x 100 pts; solutions max {worst_sol:.2e} <= 1e-8, "
                f"non-solutions min of maxima {least_non:.3g} > 1e-3; {elapsed:.2f} s < 5 s")


def criterion_2():
    H = sx.parse("(q1^2 + p1^2)/2")
    g = sm.OneFormFamily(1, (sx.parse("sqrt(2*0.5 - q1^2)"),))
    start = time.perf_counter()
    rel = dynamics.gamma_related_check(H, g, [0.0], 0.0, 1e-3, 500)
    elapsed = time.perf_counter() - start
    ok = rel.max_gap <= 1e-6 and elapsed < 1.0 and rel.base.times[-1] == 0.5
    return ok, f"max gap {rel.max_gap:.2e} <= 1e-6 over [0, 0.5]; {elapsed:.3f} s < 1 s"


def criterion_3():
    rng = np.random.default_rng(0)
    qs = rng.uniform(-1, 1, (50, 2))
    closed = sm.OneFormFamily(2, (sx.parse("q2"), sx.parse("q1")))
    bad = sm.OneFormFamily(2, (sx.parse("q2"), sx.parse("-q1")))
    v1 = sm.is_lagrangian(sm.image_of_one_form(closed), [PhasePoint(q, closed(q)) for q in qs], tol=1e-12)
    v2 = sm.is_lagrangian(sm.image_of_one_form(bad), [PhasePoint(q, bad(q)) for q in qs], tol=1e-12)
    ok = (v1.verdict and v1.max_bracket_residual <= 1e-12 and not v2.verdict
          and abs(v2.max_bracket_residual - oracles.NONCLOSED_BRACKET) <= 1e-12)
    return ok, (f"(q2, q1) residual {v1.max_bracket_residual:.1e}; "
                f"(q2, -q1) bracket {v2.max_bracket_residual!r} = 2 +- 1e-12")


def criterion_4():
    N = sm.GraphSubmanifoldOfQ(2, (1,), {2: sx.parse("q1")})
    system = hj.holonomic_extend(N, sx.parse("p1^2/2"))
    samples = [[q] for q in np.linspace(-1, 1, 21)]
    verdicts = []
    worst = 0.0
    for k in (-1.0, 0.5, 1.5):
        rep = hj.holonomic_hj_check(system, sx.parse(f"{k}*q1"), samples)
        worst = max(worst, rep.extended_residual)
        verdicts.append(len(rep.extended) == 5 and rep.extended_residual <= 1e-10 and rep.agreement
                        and (rep.base_residual <= 1e-10) == (rep.extended_residual <= 1e-10))
    scen = _check(_run("holonomic_diagonal"), "holonomic_hj")
    ok = all(verdicts) and scen.verdict
    return ok, f"k in (-1, 0.5, 1.5), 5 lambdas each: extended residual max {worst:.1e} <= 1e-10, agrees with base"


def _particle():
    return nh.build_hamiltonian_system(nh.MechanicalLagrangian.identity(3),
                                       nh.LinearDistribution(3, (("-q2", "0", "1"),)))


def criterion_5():
    start = time.perf_counter()
    system = _particle()
    xi = nh.xi_nh(system)
    rng = np.random.default_rng(1)
    lam_err = 0.0
    for _ in range(100):
        q = rng.uniform(-2, 2, 3)
        p1, p2 = rng.uniform(-2, 2, 2)
        x = PhasePoint(q, np.array([p1, p2, q[1] * p1]))
        lam = sx.evaluate(xi.multiplier, x.binding())
        lam_err = max(lam_err, abs(lam - oracles.particle_lambda(p1, p2, q[1])))
    x0 = np.array([0.0, 0.0, 0.0, 1.0, 0.5, 0.0])
    tr = dynamics.flow(xi.field, x0, 0.0, 1e-3, 10_000)
    ref = dynamics.flow(xi.field, x0, 0.0, 1e-4, 100_000)
    H = sx.lambdify([system.H], ["q1", "q2", "q3", "p1", "p2", "p3"])
    E = np.array([H(s.tolist())[0] for s in tr.states])
    C = np.array([system.constraint_values(PhasePoint.from_array(s))[0] for s in tr.states])
    e_drift = float(np.max(np.abs(E - E[0])))
    c_drift = float(np.max(np.abs(C)))
    end_gap = float(np.max(np.abs(tr.end - ref.end)))
    elapsed = time.perf_counter() - start
    ok = lam_err <= 1e-10 and e_drift <= 1e-8 and c_drift <= 1e-6 and end_gap <= 1e-7 and elapsed < 10.0
    return ok, (f"(a) lambda err {lam_err:.1e}; (b) energy drift {e_drift:.1e}, constraint drift "
                f"{c_drift:.1e}; (c) endpoint vs h=1e-4 {end_gap:.1e}; {elapsed:.2f} s < 10 s")


def criterion_6():
    system = _particle()
    qs = np.random.default_rng(2).uniform(-1, 1, (100, 3))
    worst_i = worst_m = worst_gap = 0.0
    for c in (-1.0, 0.5, 1.0):
        g = sm.OneFormFamily.from_potential(f"{c}*q2", 3)
        rep = nh.distribution_hj_check(system, g, qs, q0=[0.0, 0.0, 0.0], h=1e-3, steps=1000)
        worst_i = max(worst_i, rep.max("r_condition_i"))
        worst_m = max(worst_m, rep.max("r_membership"))
        worst_gap = max(worst_gap, rep.gap)
    pert = sm.OneFormFamily(3, (sx.ZERO, sx.parse("1 + 0.5*q2"), sx.ZERO))
    prep = nh.distribution_hj_check(system, pert, qs, steps=0)
    ok = (worst_i <= 1e-10 and worst_m <= 1e-9 and worst_gap <= 1e-6
          and prep.max("r_condition_i") >= 0.1 and prep.max("r_membership") > 1e-3)
    return ok, (f"W = c y: (i) {worst_i:.1e}, membership {worst_m:.1e}, gap {worst_gap:.1e}; "
                f"perturbed: (i) {prep.max('r_condition_i'):.3f} >= 0.1, membership "
                f"{prep.max('r_membership'):.3f} > 1e-3")


def criterion_7():
    H = sx.parse("p1^2/2")
    W = sx.parse("q1^2/(2*t)")
    fam = td.TimeDependentFamily.from_potential(W, 1)
    grid = (0.5, 1.0, 2.0)
    qs = [[q] for q in np.linspace(-1, 1, 41)]
    spread = td.timedep_hj_residual(H, W, [(t, q) for t in grid for q in qs]).max_spread
    moi_f = sx.lambdify(td.moi_residual(H, fam), ["q1", "t"])
    moi = max(abs(moi_f([q[0], t])[0]) for t in grid for q in qs)
    sig = [td.sigma_membership(H, fam, t, qs) for t in grid]
    sigma = max(max(s.max_residual, s.max_distance) for s in sig)
    gap = dynamics.gamma_related_check(H, fam.gamma, [1.0], 1.0, 1e-3, 1000).max_gap
    ok = spread <= 1e-12 and moi <= 1e-12 and sigma <= 1e-12 and gap <= 1e-6
    return ok, f"spread {spread:.1e}, moi {moi:.1e}, sigma {sigma:.1e} (all <= 1e-12); gap {gap:.1e} <= 1e-6"


def criterion_8():
    parts = []
    ok = True
    for name in ("timedep_holonomic_plane", "timedep_holonomic_parabola", "timedep_holonomic_cubic"):
        v = _check(_run(name), "timedep_holonomic")
        b, e = v.values["base_residual"], v.values["extended_residual"]
        if name.endswith("cubic"):
            ok &= v.verdict and b > 1e-2 and e > 1e-2
        else:
            ok &= v.verdict and b <= 1e-10 and e <= 1e-10
        parts.append(f"{name.split('_')[-1]} {b:.1e}/{e:.1e}")
    v = _check(_run("timedep_nonholonomic_particle"), "timedep_nonholonomic").values
    ok &= v["r_condition_i"] <= 1e-10 and v["r_membership"] <= 1e-10 and v["gamma_related_gap"] <= 1e-6
    parts.append(f"nonholonomic (i) {v['r_condition_i']:.1e}, membership {v['r_membership']:.1e}, "
                 f"gap {v['gamma_related_gap']:.1e}")
    return ok, "holonomic base/extended " + ", ".join(parts)


def criterion_9():
    worst, rejected, accepted = exprgen.fd_oracle(count=1000)
    ok = len(accepted) == 1000 and worst <= 1e-5
    return ok, f"1000 expressions (depth <= 6, {rejected} rejected near singularities): max rel err {worst:.1e}"


def _max_diff(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def criterion_10():
    diffs = {}
    osc = sx.parse("(q1^2 + p1^2)/2 + 0.1*q1^3")
    fam = td.TimeDependentFamily.from_components([sx.parse("sqrt(1 - q1^2)")])
    qs = [[q] for q in np.linspace(-0.9, 0.9, 25)]
    pts = [PhasePoint(np.array(q), fam.gamma(q)) for q in qs]
    auto = hj.hj_residuals(osc, sm.image_of_one_form(fam.gamma), pts)
    chain = td.timedep_hj_chain(osc, fam, None, qs)
    diffs["timedep_hj_chain"] = max(_max_diff([getattr(r, k) for r in chain.records],
                                              [getattr(r, k) for r in auto.records]) for k in RESIDUALS)
    sig = td.sigma_membership(osc, fam, None, qs)
    diffs["sigma_membership"] = _max_diff(sig.distances, [r.r_tangency for r in auto.records])

    alpha = td.alpha_t(fam)
    diffs["alpha_t"] = max(_max_diff(alpha(x), np.zeros(2)) for x in pts)

    # moi of a t-free section is d(H o gamma)
    Hg = sx.substitute(osc, {"p1": fam.gamma.components[0]})
    moi_f = sx.lambdify(td.moi_residual(osc, fam), ["q1"])
    dHg = sx.lambdify([sx.diff(Hg, "q1")], ["q1"])
    diffs["moi_residual"] = max(_max_diff(moi_f(q), dHg(q)) for q in qs)

    S = sx.parse("0.4*q1^2 + sin(q1)")
    rep = td.timedep_hj_residual(osc, S, [(t, q) for t in (0.5, 1.0, 2.0) for q in qs])
    classical = hj.classical_hj_residual(osc, S, None, qs)
    diffs["timedep_hj_residual"] = max(abs(s - classical) for s in rep.spreads.values())

    N = sm.GraphSubmanifoldOfQ(2, (1,), {2: sx.parse("q1^2/2")})
    system = hj.holonomic_extend(N, sx.parse("p1^2/2 + q1^2/2"))
    base = [[q] for q in np.linspace(-1, 1, 9)]
    a = hj.holonomic_hj_check(system, sx.parse("0.7*q1"), base)
    b = td.timedep_holonomic_check(system, sx.parse("0.7*q1"), t_grid=(1.0,), samples=base)
    diffs["timedep_holonomic_check"] = max(
        abs(a.base_spread - b.base_residual),
        max(_max_diff([r.r_pullback for r in ra.records], [r.r_pullback for r in rb.records])
            for ra, rb in zip(a.extended, b.extended[1.0])))
    x = PhasePoint(np.array([0.3, 0.045]), np.array([0.2, -0.4]))
    diffs["pi_t"] = _max_diff(td.pi_t(td.alpha_t(td.TimeDependentFamily.from_potential("0.7*q1", 1, ["q1"])), N)(x),
                              np.zeros(4))

    system = _particle()
    g_fam = td.TimeDependentFamily.from_components([sx.ZERO, sx.parse("0.8"), sx.ZERO])
    nq = np.random.default_rng(3).uniform(-1, 1, (20, 3))
    auto_nh = nh.distribution_hj_check(system, g_fam.gamma, nq, steps=0)
    td_nh = td.timedep_nonholonomic_check(system, g_fam, t_grid=(0.5, 2.0), samples_q=nq, steps=0)
    diffs["timedep_nonholonomic_check"] = max(
        abs(ra[k] - rb[k]) for sl in td_nh.slices.values() for ra, rb in zip(sl.records, auto_nh.records)
        for k in ("r_lagrangian", "r_condition_i", "r_membership"))

    worst = max(diffs.values())
    name = max(diffs, key=diffs.get)
    return worst <= 1e-14, f"{len(diffs)} operations, max |timedep - autonomous| {worst:.1e} ({name}) <= 1e-14"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _judge(number: int, capsys) -> None:
    ok, detail = CRITERIA[number - 1]()
    with capsys.disabled():
        print()
        _emit(number, ok, detail)
    assert ok, detail


def test_criterion_01_three_way_equivalence(capsys):
    _judge(1, capsys)


def test_criterion_02_classical_commutation(capsys):
    _judge(2, capsys)


def test_criterion_03_closed_form(capsys):
    _judge(3, capsys)


def test_criterion_04_holonomic_multipliers(capsys):
    _judge(4, capsys)


def test_criterion_05_nonholonomic_particle(capsys):
    _judge(5, capsys)


def test_criterion_06_distribution_equivalence(capsys):
    _judge(6, capsys)


def test_criterion_07_timedep_free_particle(capsys):
    _judge(7, capsys)


def test_criterion_08_timedep_constrained(capsys):
    _judge(8, capsys)


def test_criterion_09_differentiation_oracle(capsys):
    _judge(9, capsys)


def test_criterion_10_autonomous_degeneration(capsys):
    _judge(10, capsys)


if __name__ == "__main__":
    failed = 0
    for i, crit in enumerate(CRITERIA, 1):
        ok, detail = crit()
        _emit(i, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
