"""Expected values derived by hand, frozen before the implementation was run.

Each constant records the closed form it comes from.  Tests compare against
these; they are never regenerated from program output.
"""
import math

# d/dq1 (sin(q1) p1) at q1=0, p1=2  ->  cos(0) * 2
DIFF_SIN_P = 2.0

# {q, (q^2 + p^2)/2} = p at p = 2
BRACKET_Q_H = 2.0

# H = (q^2+p^2)/2, S = q^2 -> H(1, 2) - 0 = 1/2 + 2
CLASSICAL_QUADRATIC = 2.5

# projection of (1, 0) onto p = q
PROJECT_LINE = (0.5, 0.5)

# oscillator from (1, 0) for t = 1
OSC_END = (math.cos(1.0), -math.sin(1.0))

# gamma = (q2, -q1): {p1 - q2, p2 + q1} = -1 - 1
NONCLOSED_BRACKET = 2.0

# particle zdot = y xdot, M = I: <dC, sharp F> with dC = (-p1, 0, 0, -y, 0, 1), sharp F = (0, -mu)
def particle_pairing(y: float) -> float:
    return -(1.0 + y * y)


def particle_lambda(p1: float, p2: float, y: float) -> float:
    """-{C, H} / A with {C, H} = -p1 p2 and A = -(1 + y^2)."""
    return -p1 * p2 / (1.0 + y * y)


# timedep: W = q^2/2 violates the free-particle equation; at q = 1 the graph
# defect of X_H along gamma = q is |0 - 1 * 1|
SIGMA_STATIC_W = 1.0
# orthogonal distance from (1, 0) to span{(1, 1)}
SIGMA_STATIC_W_DISTANCE = 1.0 / math.sqrt(2.0)

# H = (q^2+p^2)/2, gamma = q/t: moi residual = q
# H = p^2/2, W = q^3: R = 9 q^4 / 2
def cubic_R(q: float) -> float:
    return 4.5 * q ** 4


# holonomic_violating: h o dS = 2 q1^2 on |q1| in [0.5, 1] has spread 2 - 0.5
HOLONOMIC_VIOLATING_SPREAD = 1.5
