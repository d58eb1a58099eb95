"""Closed-form and numerically solved symmetric equilibria.

Four families are covered: the two-player game, the n-player game (solved
for ``w`` and the cutoff by nested bisection in log space), and the
perfectly correlated / anti-correlated two-player games.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import GameSpec, TieRule, utility2

__all__ = [
    "EquilibriumKind",
    "EquilibriumDensity",
    "ConvergenceError",
    "solve_two_player",
    "solve_multiplayer",
    "solve_correlated_extreme",
    "density_eval",
    "cdf_eval",
    "inverse_cdf",
    "efficiency",
    "pareto_payoff",
    "pure_utility",
    "multiplayer_pure_utility",
]

MULTIPLAYER_ZERO_PENALTY = 1e-12


class EquilibriumKind(str, enum.Enum):
    TWO_PLAYER = "two_player"
    MULTI_PLAYER = "multi_player"
    RHO_PLUS_ONE = "rho_plus_one"
    RHO_MINUS_ONE = "rho_minus_one"


class ConvergenceError(RuntimeError):
    """Raised when a bracketing search fails; ``bracket`` holds its last state."""

    def __init__(self, message, bracket: dict):
        super().__init__(f"{message}: {bracket}")
        self.bracket = bracket


@dataclass(frozen=True)
class EquilibriumDensity:
    kind: EquilibriumKind
    P: float
    n: int
    r_max: float
    r_bar: float
    u_star: float
    k: float | None = None
    w: float | None = None
    log_w: float | None = None
    residuals: tuple = field(default=(), compare=False)

    def density(self, x):
        return density_eval(self, x)

    def cdf(self, x):
        return cdf_eval(self, x)

    def inverse_cdf(self, q):
        return inverse_cdf(self, q)

    def quantile_atoms(self, count: int):
        """Equal-weight atoms at the mid-quantiles ``(i + 1/2) / count``."""
        q = (np.arange(count) + 0.5) / count
        return self.inverse_cdf(q), np.full(count, 1.0 / count)

    def sample(self, count: int, rng: np.random.Generator):
        return self.inverse_cdf(rng.random(count))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "P": self.P, "n": self.n, "r_max": self.r_max,
               "r_bar": self.r_bar, "u_star": self.u_star}
        if self.k is not None:
            out["k"] = self.k
        if self.w is not None:
            out["w"] = self.w
            out["log_w"] = self.log_w
        return out


def solve_two_player(P: float) -> EquilibriumDensity:
    if P < 0:
        raise ValueError("penalty must be nonnegative")
    k = math.sqrt((P + 1) ** 2 + 1)
    r_max = 1 - math.sqrt((k - 1) / (k + 1))
    r_bar = k - (P + 1)
    return EquilibriumDensity(EquilibriumKind.TWO_PLAYER, float(P), 2, r_max, r_bar, r_bar,
                              k=k, w=r_bar, log_w=math.log(r_bar))


def solve_correlated_extreme(P: float, sign: int) -> EquilibriumDensity:
    """Equilibrium of the two-player game with latent correlation ``sign`` (+1 or -1)."""
    if P < 0:
        raise ValueError("penalty must be nonnegative")
    if sign == 1:
        r_max = -math.expm1(-1 / (P + 1))
        r_bar = 1 - (P + 1) * r_max
        kind = EquilibriumKind.RHO_PLUS_ONE
    elif sign == -1:
        if P <= 0:
            raise ValueError("the anti-correlated equilibrium needs P > 0")
        r_max = 0.5 - P * P / (2 * (P + 1) ** 2)
        r_bar = 1 / (2 * P + 2)
        kind = EquilibriumKind.RHO_MINUS_ONE
    else:
        raise ValueError("sign must be +1 or -1")
    return EquilibriumDensity(kind, float(P), 2, r_max, r_bar, r_bar)


# -- n-player antiderivatives in log space -------------------------------------

def _signed_logsumexp(terms):
    """Sum of ``sign * exp(log)`` terms, returned as ``(sign, log|sum|)``."""
    top = max(lg for s, lg in terms if s != 0)
    total = sum(s * math.exp(lg - top) for s, lg in terms if s != 0)
    if total == 0:
        return 0, -math.inf
    return (1 if total > 0 else -1), top + math.log(abs(total))


def _log_lin(log_w, P, x):
    # log(P x + w)
    if x == 0:
        return log_w
    return np.logaddexp(math.log(P) + math.log(x), log_w)


def _log_g(n, P, log_w, x):
    return (_log_lin(log_w, P, x) - math.log1p(-x)) / (n - 1)


def _log_mass_antiderivative(n, P, log_w, log_pw, x):
    """log of (w + nP(1-x) + Px) / (n(1-x)(P+w)) * ((Px+w)/(1-x))^(1/(n-1))."""
    log_num = np.logaddexp(log_w, math.log(P) + math.log(n * (1 - x) + x))
    return log_num - math.log(n) - math.log1p(-x) - log_pw + _log_g(n, P, log_w, x)


def _signed_mean_antiderivative(n, P, log_w, log_pw, x):
    """(sign, log|.|) of (w - nw(1-x) + Px) / (n(1-x)(P+w)) * ((Px+w)/(1-x))^(1/(n-1))."""
    coef = 1 - n * (1 - x)
    terms = [(int(np.sign(coef)), log_w + math.log(abs(coef)) if coef != 0 else 0.0)]
    if x > 0:
        terms.append((1, math.log(P) + math.log(x)))
    sign, log_num = _signed_logsumexp(terms)
    if sign == 0:
        return 0, -math.inf
    return sign, log_num - math.log(n) - math.log1p(-x) - log_pw + _log_g(n, P, log_w, x)


class _MultiState:
    """Antiderivatives for a trial ``log r_bar``; all heavy lifting in log space."""

    def __init__(self, n, P, log_rbar):
        self.n, self.P, self.s = n, P, log_rbar
        self.log_w = (n - 1) * log_rbar
        self.log_pw = np.logaddexp(math.log(P), self.log_w)
        self.log_a0 = _log_mass_antiderivative(n, P, self.log_w, self.log_pw, 0.0)
        self.b0 = _signed_mean_antiderivative(n, P, self.log_w, self.log_pw, 0.0)

    def mass_residual(self, r):
        la = _log_mass_antiderivative(self.n, self.P, self.log_w, self.log_pw, r)
        return _signed_logsumexp([(1, la), (-1, self.log_a0), (-1, 0.0)])

    def mean_residual(self, r):
        # (B(r) - B(0)) / r_bar - 1
        sb, lb = _signed_mean_antiderivative(self.n, self.P, self.log_w, self.log_pw, r)
        s0, l0 = self.b0
        return _signed_logsumexp([(sb, lb - self.s), (-s0, l0 - self.s), (-1, 0.0)])

    def cutoff(self, max_iter):
        lo, hi = 0.0, 1.0 - 2.0 ** -52
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.mass_residual(mid)[0] > 0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)


def solve_multiplayer(n: int, P: float, tol: float = 1e-9, max_iter: int = 200,
                      log_rbar_floor: float = -200.0) -> EquilibriumDensity:
    """Symmetric equilibrium of the n-player game.

    For each trial mean action the cutoff is found by bisection on the mass
    equation, then the mean action by bisection on the mean equation. The
    outer search runs over ``log r_bar`` (so ``log w = (n-1) log r_bar``),
    which keeps ``w`` representable for very large ``n``.
    """
    if int(n) != n or n < 2:
        raise ValueError("need at least two players")
    n = int(n)
    if P < 0:
        raise ValueError("penalty must be nonnegative")
    if P == 0:
        P = MULTIPLAYER_ZERO_PENALTY
    lo, hi = log_rbar_floor, 0.0

    def mean_sign(s):
        state = _MultiState(n, P, s)
        return state.mean_residual(state.cutoff(max_iter))[0], state

    if mean_sign(lo)[0] <= 0:
        raise ConvergenceError("mean equation has no sign change", {"log_rbar": (lo, hi)})
    for _ in range(max_iter):
        if hi - lo < 1e-13:
            break
        mid = 0.5 * (lo + hi)
        if mean_sign(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise ConvergenceError("bisection did not converge", {"log_rbar": (lo, hi)})

    state = _MultiState(n, P, 0.5 * (lo + hi))
    r_max = state.cutoff(max_iter)
    res1 = state.mass_residual(r_max)
    res2 = state.mean_residual(r_max)
    residuals = (res1[0] * math.exp(res1[1]), res2[0] * math.exp(res2[1]))
    if max(abs(v) for v in residuals) > tol:
        raise ConvergenceError("residuals above tolerance",
                               {"log_rbar": (lo, hi), "r_max": r_max, "residuals": residuals})
    r_bar = math.exp(state.s)
    w = math.exp(state.log_w)
    return EquilibriumDensity(EquilibriumKind.MULTI_PLAYER, float(P), n, r_max, r_bar, w,
                              w=w, log_w=state.log_w, residuals=residuals)


# -- density, cdf, inverse -----------------------------------------------------

def _as_out(x, out):
    return out[()] if np.ndim(x) == 0 else out


def _multi_log_density(eq, x):
    n, P = eq.n, eq.P
    log_lin = np.logaddexp(math.log(P) + np.log(np.maximum(x, 1e-300)), eq.log_w)
    log_lin = np.where(x > 0, log_lin, eq.log_w)
    log_pw = np.logaddexp(math.log(P), eq.log_w)
    return (log_pw - math.log(n - 1) - (2 + 1 / (n - 1)) * np.log1p(-x)
            - (1 - 1 / (n - 1)) * log_lin)


def density_eval(eq: EquilibriumDensity, x):
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x < eq.r_max)
    xs = np.where(inside, x, 0.0)
    if eq.kind is EquilibriumKind.TWO_PLAYER:
        f = (eq.k - 1) / (1 - xs) ** 3
    elif eq.kind is EquilibriumKind.MULTI_PLAYER:
        with np.errstate(over="ignore"):  # the spike at 0 exceeds float range for large n
            f = np.exp(_multi_log_density(eq, xs))
    elif eq.kind is EquilibriumKind.RHO_PLUS_ONE:
        f = (1 + eq.P) / (1 - xs)
    else:
        f = eq.P / (1 - 2 * xs) ** 1.5
    return _as_out(x, np.where(inside, f, 0.0))


def _multi_log_mass(eq, x):
    """Vectorised log of the mass antiderivative."""
    n, P, log_w = eq.n, eq.P, eq.log_w
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        log_lin = np.logaddexp(math.log(P) + np.log(x), log_w)
    log_num = np.logaddexp(log_w, math.log(P) + np.log(n * (1 - x) + x))
    log_pw = np.logaddexp(math.log(P), log_w)
    log_g = (log_lin - np.log1p(-x)) / (n - 1)
    return log_num - math.log(n) - np.log1p(-x) - log_pw + log_g


def _multi_cdf(eq, x):
    a0 = _multi_log_mass(eq, 0.0)
    return np.exp(a0) * np.expm1(_multi_log_mass(eq, x) - a0)


def cdf_eval(eq: EquilibriumDensity, x):
    x = np.asarray(x, dtype=float)
    xs = np.clip(x, 0.0, eq.r_max)
    if eq.kind is EquilibriumKind.TWO_PLAYER:
        F = (eq.k - 1) / 2 * (1 / (1 - xs) ** 2 - 1)
    elif eq.kind is EquilibriumKind.MULTI_PLAYER:
        F = _multi_cdf(eq, xs)
    elif eq.kind is EquilibriumKind.RHO_PLUS_ONE:
        F = -(1 + eq.P) * np.log1p(-xs)
    else:
        F = eq.P * ((1 - 2 * xs) ** -0.5 - 1)
    F = np.where(xs >= eq.r_max, 1.0, np.clip(F, 0.0, 1.0))
    return _as_out(x, F)


def inverse_cdf(eq: EquilibriumDensity, q):
    """Right inverse of :func:`cdf_eval`; ``q = 1`` maps to the cutoff."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("quantile level must lie in [0, 1]")
    if eq.kind is EquilibriumKind.TWO_PLAYER:
        x = 1 - (1 + 2 * q / (eq.k - 1)) ** -0.5
    elif eq.kind is EquilibriumKind.RHO_PLUS_ONE:
        x = -np.expm1(-q / (1 + eq.P))
    elif eq.kind is EquilibriumKind.RHO_MINUS_ONE:
        x = (1 - (1 + q / eq.P) ** -2) / 2
    else:
        # bisect in t = log(P x + w): the mass can sit within w / P of zero
        P, w = eq.P, eq.w
        lo = np.full(q.shape, eq.log_w)
        hi = np.full(q.shape, float(np.logaddexp(math.log(P) + math.log(eq.r_max), eq.log_w)))
        for _ in range(96):
            mid = 0.5 * (lo + hi)
            below = cdf_eval(eq, np.maximum(np.exp(mid) - w, 0.0) / P) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = np.maximum(np.exp(0.5 * (lo + hi)) - w, 0.0) / P
    x = np.where(q >= 1, eq.r_max, np.minimum(x, eq.r_max))
    x = np.where(q <= 0, 0.0, x)
    return _as_out(q, x)


# -- efficiency and payoff checks ----------------------------------------------

def efficiency(n: int, w: float) -> tuple[float, float]:
    """Efficiency ``E = n w`` of the symmetric equilibrium and price of anarchy ``1 / E``."""
    if not 0 < w <= 1:
        raise ValueError("w must lie in (0, 1]")
    E = n * w
    if E > 1 + 1e-9:
        raise ValueError(f"efficiency {E} exceeds 1")
    E = min(E, 1.0)
    return E, 1.0 / E


def pareto_payoff(eps: float, P: float) -> float:
    """Per-player payoff when both play uniformly on [0, 2 eps]."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return eps * (1 - eps) - eps * P + (1 - eps) ** 2 / 2


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _piecewise_gauss(func, points):
    """Integrate ``func`` over consecutive ``points`` with 64-node Gauss-Legendre per piece."""
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        if b <= a:
            continue
        half = (b - a) / 2
        x = a + half * (_GL_NODES + 1)
        total += half * float(np.dot(_GL_WEIGHTS, func(x)))
    return total


def pure_utility(eq: EquilibriumDensity, x: float, tie_rule=TieRule.SHARED) -> float:
    """Expected utility of the pure action ``x`` against a two-player equilibrium density.

    Uses the model's utility at the correlation the density belongs to and
    splits the integral where the integrand has kinks or jumps.
    """
    rho = {EquilibriumKind.TWO_PLAYER: 0.0, EquilibriumKind.RHO_PLUS_ONE: 1.0,
           EquilibriumKind.RHO_MINUS_ONE: -1.0}.get(eq.kind)
    if rho is None or eq.n != 2:
        raise ValueError("pure_utility handles two-player densities")
    spec = GameSpec(P=eq.P, rho=rho, tie_rule=tie_rule)
    cuts = sorted({0.0, eq.r_max, *(c for c in (x, 1 - x) if 0 < c < eq.r_max)})
    return _piecewise_gauss(lambda b: utility2(x, b, spec)[0] * density_eval(eq, b), cuts)


def _multi_moment(eq, a, b, power):
    """Integral of y**power * f(y) over [a, b], substituting t = log(P y + w)."""
    P, log_w = eq.P, eq.log_w

    def lin_log(y):
        return np.logaddexp(math.log(P) + math.log(y), log_w) if y > 0 else log_w

    def integrand(t):
        y = np.maximum((np.exp(t) - math.exp(log_w)) / P, 0.0)
        # f(y) dy = f(y) (P y + w) / P dt
        return y ** power * np.exp(_multi_log_density(eq, y) + t - math.log(P))

    return _piecewise_gauss(integrand, np.linspace(lin_log(a), lin_log(b), 9))


def multiplayer_pure_utility(eq: EquilibriumDensity, x: float) -> float:
    """Utility of the pure action ``x`` when the other n-1 players follow the density.

    A player at ``x`` wins when it survives and each rival either plays
    below ``x`` or plays above and fails.
    """
    below = _multi_moment(eq, 0.0, min(x, eq.r_max), 0)
    above = _multi_moment(eq, min(x, eq.r_max), eq.r_max, 1)
    return -x * eq.P + (1 - x) * (below + above) ** (eq.n - 1)
