"""Independent reference computations used only by the tests."""

import itertools
import math

import numpy as np
from scipy import integrate, special

from riskgame.model import TieRule


def bvn_quadrature(h, k, rho):
    """Phi_rho(h, k) as a 1-D integral of phi(x) Phi((k - rho x) / sqrt(1 - rho^2))."""
    if rho in (-1.0, 1.0):
        raise ValueError("closed forms cover |rho| = 1")
    s = math.sqrt(1 - rho * rho)

    def f(x):
        return math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * special.ndtr((k - rho * x) / s)

    lo = -40.0
    points = None
    if rho != 0 and lo < k / rho < h:
        points = [k / rho]
    val, _ = integrate.quad(f, lo, h, epsabs=1e-14, epsrel=1e-13, limit=500, points=points)
    return val


def enumerate_n_player(risks, spec):
    """Expected utilities by summing over all 2^n independent failure outcomes."""
    n = len(risks)
    out = [0.0] * n
    for fails in itertools.product((False, True), repeat=n):
        prob = 1.0
        for r, f in zip(risks, fails):
            prob *= r if f else 1 - r
        if prob == 0:
            continue
        survivors = [i for i in range(n) if not fails[i]]
        top = max((risks[i] for i in survivors), default=None)
        winners = [i for i in survivors if risks[i] == top]
        for i in range(n):
            if fails[i]:
                out[i] -= prob * spec.P
            elif i in winners:
                if len(winners) == 1:
                    out[i] += prob * spec.R
                elif spec.tie_rule is TieRule.SHARED:
                    out[i] += prob * spec.R / len(winners)
    return out


def vertex_enumeration(A_ub, b_ub, A_eq, b_eq, c):
    """Max and min of c.x over {A_ub x <= b_ub, A_eq x = b_eq, x >= 0} by brute force."""
    n = len(c)
    G = np.vstack([A_ub, -np.eye(n)])
    h = np.concatenate([b_ub, np.zeros(n)])
    best, worst, vertices = -np.inf, np.inf, []
    need = n - len(A_eq)
    for active in itertools.combinations(range(len(G)), need):
        M = np.vstack([A_eq, G[list(active)]])
        rhs = np.concatenate([b_eq, h[list(active)]])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs)
        if np.all(G @ x <= h + 1e-10) and np.allclose(A_eq @ x, b_eq, atol=1e-10):
            vertices.append(x)
            best = max(best, c @ x)
            worst = min(worst, c @ x)
    return best, worst, vertices


def bracket_integral(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val
