import numpy as np
import pytest

from hjgeo import hj_autonomous as hj
from hjgeo import submanifold as sm
from hjgeo import symexpr as sx
from hjgeo.geometry import PhasePoint

import oracles

OSC = sx.parse("(q1^2 + p1^2)/2")
FREE = sx.parse("p1^2/2")


def test_level_set_residuals_vanish():
    L = sm.ConstraintSubmanifold.from_strings(1, ["(q1^2 + p1^2)/2 - 0.5"], lagrangian=True)
    pts = sm.sample_on(L, 50, [-1, 1], seed=1)
    rep = hj.hj_residuals(OSC, L, pts)
    assert max(rep.max_residuals.values()) <= 1e-12
    assert rep.h_spread <= 1e-12


def test_linear_S_not_tangent():
    k = 0.5
    L = sm.image_of_one_form(sm.OneFormFamily.from_potential(f"{k}*q1", 1))
    pts = [PhasePoint(np.array([q]), np.array([k])) for q in (-0.8, -0.1, 0.3, 0.9)]
    rep = hj.hj_residuals(OSC, L, pts)
    for rec in rep.records:
        assert rec.r_tangency == pytest.approx(abs(rec.point.q[0]), abs=1e-14)
        assert rec.r_pullback > 0 and rec.r_annihilator > 0


def test_free_particle_constant_momentum():
    k = 1.3
    L = sm.image_of_one_form(sm.OneFormFamily.from_potential(f"{k}*q1", 1))
    pts = [PhasePoint(np.array([q]), np.array([k])) for q in np.linspace(-1, 1, 9)]
    rep = hj.hj_residuals(FREE, L, pts)
    assert rep.jointly_below(1e-12)
    assert rep.h_spread <= 1e-12
    assert rep.h_values == pytest.approx(np.full(9, k * k / 2))


def test_residuals_reject_non_lagrangian():
    L = sm.image_of_one_form(sm.OneFormFamily(2, (sx.parse("q2"), sx.parse("-q1"))))
    with pytest.raises(ValueError):
        hj.hj_residuals(sx.parse("p1*p2"), L, [])


def test_three_residuals_agree_on_random_lagrangians():
    # on any Lagrangian L the pullback vanishes exactly when dH is in (TL)^0
    rng = np.random.default_rng(8)
    for _ in range(10):
        c = rng.uniform(-1, 1, 3)
        S = f"({c[0]})*q1^2 + ({c[1]})*q1*q2 + ({c[2]})*q2^2"
        g = sm.OneFormFamily.from_potential(S, 2)
        L = sm.image_of_one_form(g)
        qs = rng.uniform(-1, 1, (5, 2))
        rep = hj.hj_residuals(sx.parse("(p1^2 + p2^2)/2 + q1*q2"), L, [PhasePoint(q, g(q)) for q in qs])
        for r in rep.records:
            assert r.r_annihilator == pytest.approx(r.r_tangency, rel=1e-10, abs=1e-14)
            # |T c|_inf <= |T c|_2 = r_annihilator
            assert r.r_pullback <= r.r_annihilator + 1e-14


def test_classical_examples():
    k = 0.7
    qs = np.linspace(-1, 1, 11)
    assert hj.classical_hj_residual(FREE, f"{k}*q1", k * k / 2, qs) == 0.0
    form = sm.OneFormFamily(1, (sx.parse("sqrt(2*0.5 - q1^2)"),))
    assert hj.classical_hj_residual(OSC, form, 0.5, np.linspace(-0.9, 0.9, 19)) <= 1e-12
    assert hj.classical_hj_residual(OSC, "q1^2", 0.0, [1.0]) == pytest.approx(oracles.CLASSICAL_QUADRATIC)
    # without E: spread of H o dS
    assert hj.classical_hj_residual(OSC, "q1^2", None, [0.0, 1.0]) == pytest.approx(2.5)


def _N(psi):
    return sm.GraphSubmanifoldOfQ(2, (1,), {2: sx.as_expr(psi)})


def test_holonomic_extend_examples():
    b = {"q1": 0.4, "q2": 0.0, "p1": 1.1, "p2": -0.6}
    H = hj.holonomic_extend(_N("0"), sx.parse("p1^2/2")).H
    assert sx.evaluate(H, b) == pytest.approx(1.1 ** 2 / 2)
    H = hj.holonomic_extend(_N("q1"), sx.parse("p1^2/2")).H
    assert sx.evaluate(H, b) == pytest.approx((1.1 - 0.6) ** 2 / 2)
    H = hj.holonomic_extend(_N("q1"), sx.as_expr(3.0)).H
    assert sx.evaluate(H, b) == 3.0


def test_holonomic_extend_rejects_fiber_variables():
    with pytest.raises(hj.HolonomicError):
        hj.holonomic_extend(_N("q1"), sx.parse("p1^2/2 + q2"))


def test_lambda_grid():
    grid = hj.default_lambda_grid(1)
    assert [g.tolist() for g in grid] == [[-2.0], [-1.0], [0.0], [1.0], [2.0]]
    assert len(hj.default_lambda_grid(2)) == 25


def test_points_on_L_N_gamma_lie_on_L():
    N = _N("q1^2")
    g = sm.OneFormFamily.from_potential("sin(q1)", 1, ["q1"])
    L = sm.build_L_N_gamma(N, g)
    for q in (-0.9, 0.2, 0.7):
        for lam in (-2.0, 0.5):
            x = hj.points_on_L_N_gamma(N, g, [q], [lam])
            assert np.max(np.abs(L.residual(x))) <= 1e-15


def test_holonomic_check_plane_and_diagonal():
    k = 1.5
    samples = [[q] for q in np.linspace(-1, 1, 7)]
    for psi in ("0", "q1"):
        sys_ = hj.holonomic_extend(_N(psi), sx.parse("p1^2/2"))
        rep = hj.holonomic_hj_check(sys_, sx.parse(f"{k}*q1"), samples)
        assert rep.base_residual <= 1e-12
        assert max(rep.extended_pullback) <= 1e-12 and rep.extended_spread <= 1e-12
        assert len(rep.extended) == 5 and rep.agreement and rep.verdict
        for r in rep.extended:
            assert r.h_values == pytest.approx(np.full(7, k * k / 2), abs=1e-14)


def test_holonomic_check_violation():
    sys_ = hj.holonomic_extend(_N("q1"), sx.parse("p1^2/2"))
    samples = [[q] for q in (0.5, 0.6, 0.75, 0.9, 1.0, -0.5, -1.0)]
    rep = hj.holonomic_hj_check(sys_, sx.parse("q1^2"), samples)
    assert rep.base_spread == pytest.approx(oracles.HOLONOMIC_VIOLATING_SPREAD)
    assert rep.base_residual > 0.1 and rep.extended_residual > 0.1
    assert rep.agreement and not rep.verdict


def test_report_serialization():
    L = sm.ConstraintSubmanifold.from_strings(1, ["p1 - 0.5"], lagrangian=True)
    rep = hj.hj_residuals(FREE, L, [PhasePoint(np.array([0.1]), np.array([0.5]))])
    d = rep.to_dict()
    assert set(d["max"]) == {"r_pullback", "r_annihilator", "r_tangency"}
    assert len(d["points"]) == 1
    lines = rep.summary_csv().splitlines()
    assert lines[0] == "quantity,value" and lines[-1] == "samples,1"
