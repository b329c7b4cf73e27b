import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjgeo import submanifold as sm
from hjgeo import symexpr as sx
from hjgeo.geometry import PhasePoint

import oracles


def P(q, p, t=None):
    return PhasePoint(np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(p, float)), t)


def test_is_lagrangian_examples():
    L = sm.ConstraintSubmanifold.from_strings(2, ["p1 - q2", "p2 - q1"])
    pts = [P([a, b], [b, a]) for a, b in [(0.1, 0.2), (-1.0, 0.5), (2.0, 3.0)]]
    v = sm.is_lagrangian(L, pts)
    assert v.verdict and v.max_bracket_residual == 0.0

    L = sm.ConstraintSubmanifold.from_strings(2, ["p1", "q1"])
    v = sm.is_lagrangian(L, [P([0, 0.3], [0, 0.7])])
    assert not v.verdict and v.max_bracket_residual == pytest.approx(1.0)

    L = sm.ConstraintSubmanifold.from_strings(1, ["(q1^2 + p1^2)/2 - 0.5"])
    assert sm.is_lagrangian(L, [P(0.6, 0.8)]).verdict


def test_is_lagrangian_errors():
    L = sm.ConstraintSubmanifold.from_strings(2, ["p1"])
    with pytest.raises(sm.DimensionError):
        sm.is_lagrangian(L, [P([0, 0], [0, 0])])
    L = sm.ConstraintSubmanifold.from_strings(1, ["p1 - q1"])
    with pytest.raises(sm.OffManifoldError):
        sm.is_lagrangian(L, [P(0.0, 1.0)])


def test_constraint_count_bounds():
    with pytest.raises(sm.DimensionError):
        sm.ConstraintSubmanifold.from_strings(1, ["q1", "p1", "q1 + p1"])


def test_image_of_one_form_examples():
    g = sm.OneFormFamily.from_potential("q1^3", 1)
    L = sm.image_of_one_form(g)
    assert L.lagrangian
    assert sx.evaluate(L.constraints[0], {"q1": 2.0, "p1": 12.0}) == 0.0

    L = sm.image_of_one_form(sm.OneFormFamily(2, (sx.parse("q2"), sx.parse("q1"))))
    assert L.lagrangian and L.closed

    g = sm.OneFormFamily(2, (sx.parse("q2"), sx.parse("-q1")))
    L = sm.image_of_one_form(g)
    assert L.lagrangian is False
    pts = [P([a, b], g([a, b])) for a, b in [(0.3, -0.2), (1.0, 1.0)]]
    v = sm.is_lagrangian(L, pts, tol=1e-12)
    assert not v.verdict
    assert v.max_bracket_residual == pytest.approx(oracles.NONCLOSED_BRACKET, abs=1e-12)


def test_closedness_sampled_path():
    # symbolic comparison fails (different trees), sampling decides
    g = sm.OneFormFamily(2, (sx.parse("2*q1*q2"), sx.parse("q1*q1 + 0*q2")))
    c = g.closedness()
    assert c.closed and c.method == "sampled" and c.max_asymmetry <= 1e-12


def test_time_dependent_image():
    g = sm.OneFormFamily(1, (sx.parse("q1/t"),))
    L = sm.image_of_one_form(g, t=2.0)
    assert sx.evaluate(L.constraints[0], {"q1": 1.0, "p1": 0.5}) == 0.0


def test_build_L_N_gamma_examples():
    N = sm.GraphSubmanifoldOfQ(2, (1,), {2: sx.ZERO})
    g = sm.OneFormFamily.from_potential("1.5*q1", 1, ["q1"])
    L = sm.build_L_N_gamma(N, g)
    assert L.k == 2 and L.lagrangian
    b = {"q1": 0.3, "q2": 0.0, "p1": 1.5, "p2": 7.0}
    assert [sx.evaluate(c, b) for c in L.constraints] == [0.0, 0.0]

    N = sm.GraphSubmanifoldOfQ(2, (1,), {2: sx.parse("q1^2")})
    L = sm.build_L_N_gamma(N, sm.OneFormFamily(1, (sx.ZERO,), ("q1",)))
    q1, p2 = 0.7, -1.3
    b = {"q1": q1, "q2": q1 ** 2, "p1": -2 * q1 * p2, "p2": p2}
    assert max(abs(sx.evaluate(c, b)) for c in L.constraints) <= 1e-15
    pts = [P([a, a * a], [-2 * a * l, l]) for a, l in [(0.1, 1.0), (-0.5, 2.0), (1.0, -1.0)]]
    assert sm.is_lagrangian(L, pts, tol=1e-12).verdict
    # p = 0 lies on L_{N,0}
    assert max(abs(c) for c in L.residual(P([0.5, 0.25], [0, 0]))) == 0.0


def test_frames_examples():
    L = sm.ConstraintSubmanifold.from_strings(1, ["p1 - q1"])
    fr = sm.frames(L, P(0.0, 0.0))
    t = fr.tangent[0]
    assert abs(t[0]) == pytest.approx(abs(t[1])) and t[0] * t[1] > 0
    assert fr.annihilator[0].tolist() == [-1.0, 1.0]

    L = sm.ConstraintSubmanifold.from_strings(1, ["q1"])
    fr = sm.frames(L, P(0.0, 0.4))
    assert np.abs(fr.tangent[0]).tolist() == [0.0, 1.0]
    assert fr.annihilator[0].tolist() == [1.0, 0.0]


def test_frames_regularity_error():
    L = sm.ConstraintSubmanifold.from_strings(1, ["q1^2"])
    with pytest.raises(sm.RegularityError):
        sm.frames(L, P(0.0, 1.0))


def test_frames_pairing_random():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        a, b, c = rng.uniform(-1, 1, 3)
        L = sm.ConstraintSubmanifold.from_strings(
            2, [f"p1 - ({a})*q1 - ({b})*q2^2", f"p2 - ({c})*sin(q1) - q2"])
        x = sm.project(L, P(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)))
        fr = sm.frames(L, x)
        worst = max(worst, float(np.max(np.abs(fr.annihilator @ fr.tangent.T))))
    assert worst <= 1e-12


def test_project_examples():
    L = sm.ConstraintSubmanifold.from_strings(1, ["p1 - q1"])
    x = sm.project(L, P(1.0, 0.0))
    assert x.as_array() == pytest.approx(oracles.PROJECT_LINE, abs=1e-15)
    on = P(0.25, 0.25)
    assert np.array_equal(sm.project(L, on).as_array(), on.as_array())
    C = sm.ConstraintSubmanifold.from_strings(1, ["q1^2 + p1^2 - 1"])
    with pytest.raises(sm.SingularJacobianError):
        sm.project(C, P(0.0, 0.0))


def test_project_nonconvergence():
    L = sm.ConstraintSubmanifold.from_strings(1, ["exp(q1) + 0*p1"])  # empty zero set
    with pytest.raises(sm.ProjectionError):
        sm.project(L, P(-1.0, 0.0), max_iter=3)


def test_sample_on_is_deterministic():
    L = sm.ConstraintSubmanifold.from_strings(1, ["(q1^2 + p1^2)/2 - 0.5"])
    a = sm.sample_on(L, 20, [-1, 1], seed=3)
    b = sm.sample_on(L, 20, [-1, 1], seed=3)
    assert [x.as_array().tolist() for x in a] == [x.as_array().tolist() for x in b]
    assert max(abs(L.residual(x)[0]) for x in a) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4))
def test_sharp_annihilator_tangent_when_lagrangian(c):
    # Im dS of S = c0 q1^2 + c1 q1 q2 + c2 q2^3 + c3 sin(q1): (TL)^0 is sharp-mapped into TL
    S = f"({c[0]})*q1^2 + ({c[1]})*q1*q2 + ({c[2]})*q2^3 + ({c[3]})*sin(q1)"
    g = sm.OneFormFamily.from_potential(S, 2)
    L = sm.image_of_one_form(g)
    rng = np.random.default_rng(0)
    for q in rng.uniform(-1, 1, (5, 2)):
        fr = sm.frames(L, P(q, g(q)))
        for row in fr.annihilator:
            v = np.concatenate([row[2:], -row[:2]])
            residual = v - fr.tangent.T @ (fr.tangent @ v)
            assert np.linalg.norm(residual) <= 1e-12 * max(1.0, np.linalg.norm(v))
