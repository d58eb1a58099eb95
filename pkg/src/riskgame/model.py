"""Game parameters and expected-utility formulas.

Players pick a failure probability ``r`` in [0, 1]. Each one fails when its
uniform draw ``f`` falls below ``r``; failed players pay ``P`` and the
surviving player with the highest ``r`` collects the reward ``R = 1``.
Correlated failures come from a latent bivariate normal (``f = Phi(z)``),
and frictions replace the hard comparison by a scaled sigmoid.

All functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "TieRule",
    "GameSpec",
    "sigmoid_scaled",
    "std_normal_cdf",
    "std_normal_quantile",
    "bivariate_normal_cdf",
    "joint_failure_prob",
    "pearson_uniform_corr",
    "win_bracket",
    "utility1",
    "utility2",
    "utility_n",
]


class TieRule(str, enum.Enum):
    NO_REWARD = "no_reward"
    SHARED = "shared"


@dataclass(frozen=True)
class GameSpec:
    """One instance of the game.

    ``rho`` is the correlation of the latent normals, not of the uniform
    failure draws (see :func:`pearson_uniform_corr`).
    """

    P: float = 1.0
    tau: float = 0.0
    rho: float = 0.0
    n: int = 2
    tie_rule: TieRule = TieRule.SHARED
    R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tie_rule", TieRule(self.tie_rule))
        if self.R != 1.0:
            raise ValueError("reward is normalised to R = 1")
        if not self.P >= 0:
            raise ValueError(f"penalty must be nonnegative, got {self.P}")
        if not self.tau >= 0:
            raise ValueError(f"friction must be nonnegative, got {self.tau}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"correlation must lie in [-1, 1], got {self.rho}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least two players, got {self.n}")
        if self.n > 2 and (self.tau != 0 or self.rho != 0):
            raise ValueError("frictions and correlation are only defined for two players")

    def to_dict(self) -> dict:
        return {"P": self.P, "tau": self.tau, "rho": self.rho, "n": self.n,
                "tie_rule": self.tie_rule.value}


def sigmoid_scaled(x, tau):
    """Logistic ``1 / (1 + exp(-x / tau))``; Heaviside step (1/2 at 0) when tau = 0."""
    x = np.asarray(x, dtype=float)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        out = np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))
    else:
        out = special.expit(x / tau)
    return out[()] if out.ndim == 0 else out


def std_normal_cdf(x):
    out = special.ndtr(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def std_normal_quantile(p):
    """Inverse of the standard normal CDF on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ValueError("normal quantile is defined on (0, 1) only")
    out = special.ndtri(p)
    return out[()] if out.ndim == 0 else out


# Gauss-Legendre abscissae (negative half) and weights for 6, 12 and 20 points.
_GL_X = (
    np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
    np.array([-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
              -0.5873179542866171, -0.3678314989981802, -0.1252334085114692]),
    np.array([-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
              -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
              -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
              -0.07652652113349733]),
)
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
)
_TWO_PI = 2.0 * math.pi


def _bvn_upper_moderate(h, k, r, group):
    """P(X > h, Y > k) for |r| < 0.925 via the arcsine-substituted integral."""
    x, w = _GL_X[group], _GL_W[group]
    hk = (h * k)[..., None]
    hs = ((h * h + k * k) / 2)[..., None]
    asr = np.arcsin(r)[..., None]
    total = np.zeros(h.shape)
    for sign in (-1.0, 1.0):
        sn = np.sin(asr * (1 + sign * x) / 2)
        total = total + np.sum(w * np.exp((sn * hk - hs) / (1 - sn * sn)), axis=-1)
    return total * np.arcsin(r) / (2 * _TWO_PI) + special.ndtr(-h) * special.ndtr(-k)


def _bvn_upper_high(h, k, r):
    """P(X > h, Y > k) for 0.925 <= |r| < 1, expanding around the degenerate case."""
    x, w = _GL_X[2], _GL_W[2]
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    as_ = (1 - r) * (1 + r)
    a = np.sqrt(as_)
    bs = (h - k) ** 2
    c = (4 - hk) / 8
    d = (12 - hk) / 16
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        bvn = a * np.exp(-(bs / as_ + hk) / 2) * (
            1 - c * (bs - as_) * (1 - d * bs / 5) / 3 + c * d * as_ * as_ / 5)
        b = np.sqrt(bs)
        tail = np.exp(-hk / 2) * math.sqrt(_TWO_PI) * special.ndtr(-b / a) * b * (
            1 - c * bs * (1 - d * bs / 5) / 3)
        bvn = bvn - np.where(hk > -160, tail, 0.0)
        half = (a / 2)[..., None]
        hk_, bs_, c_, d_ = (v[..., None] for v in (hk, bs, c, d))
        for sign in (-1.0, 1.0):
            xs = (half * (sign * x + 1)) ** 2
            rs = np.sqrt(1 - xs)
            asr = -(bs_ / xs + hk_) / 2
            term = np.exp(asr) * (np.exp(-hk_ * xs / (2 * (1 + rs) ** 2)) / rs
                                  - (1 + c_ * xs * (1 + d_ * xs)))
            bvn = bvn + np.sum(half * w * np.where(asr > -100, term, 0.0), axis=-1)
    bvn = -bvn / _TWO_PI
    pos = bvn + special.ndtr(-np.maximum(h, k))
    lower = np.where(h < 0, special.ndtr(k) - special.ndtr(h),
                     special.ndtr(-h) - special.ndtr(-k))
    negval = np.where(h >= k, -bvn, lower - bvn)
    return np.where(neg, negval, pos)


def bivariate_normal_cdf(v1, v2, rho):
    """Standard bivariate normal CDF ``Phi_rho(v1, v2)``.

    Gauss-Legendre quadrature of the correlation integral with 6/12/20 nodes
    depending on |rho|, and a separate expansion for |rho| >= 0.925.
    rho = 0 and rho = +-1 use their exact product and min/max forms.
    """
    v1, v2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (v1, v2, rho)))
    if np.any(np.abs(rho) > 1):
        raise ValueError("correlation must lie in [-1, 1]")
    out = np.empty(v1.shape)
    c1, c2 = special.ndtr(v1), special.ndtr(v2)

    zero = rho == 0
    out[zero] = (c1 * c2)[zero]
    one = rho == 1
    out[one] = np.minimum(c1, c2)[one]
    minus = rho == -1
    out[minus] = np.maximum(0.0, c1 + c2 - 1)[minus]

    rest = ~(zero | one | minus)
    infinite = rest & (np.isinf(v1) | np.isinf(v2))
    if np.any(infinite):
        # one infinite limit reduces to a marginal (or 0)
        val = np.where((v1 == -np.inf) | (v2 == -np.inf), 0.0,
                       np.where(v1 == np.inf, c2, c1))
        out[infinite] = val[infinite]
    rest &= ~infinite

    if np.any(rest):
        h, k, r = -v1[rest], -v2[rest], rho[rest]
        ar = np.abs(r)
        res = np.empty(h.shape)
        for group, sel in enumerate((ar < 0.3, (ar >= 0.3) & (ar < 0.75), (ar >= 0.75) & (ar < 0.925))):
            if np.any(sel):
                res[sel] = _bvn_upper_moderate(h[sel], k[sel], r[sel], group)
        high = ar >= 0.925
        if np.any(high):
            res[high] = _bvn_upper_high(h[high], k[high], r[high])
        out[rest] = np.clip(res, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def joint_failure_prob(r1, r2, rho):
    """Probability that both players fail, ``Phi_rho(Phi^-1(r1), Phi^-1(r2))``.

    Independent, comonotone and countermonotone cases are closed form;
    actions at 0 or 1 never reach the normal quantile. The arguments are
    put in a canonical order so the result is exactly symmetric.
    """
    a, b = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    r1, r2 = np.minimum(a, b), np.maximum(a, b)
    if rho == 0:
        out = r1 * r2
    elif rho == 1:
        out = np.minimum(r1, r2)
    elif rho == -1:
        out = np.maximum(0.0, r1 + r2 - 1)
    else:
        out = np.where(r1 >= 1, r2, np.where(r2 >= 1, r1, 0.0)).astype(float)
        interior = (r1 > 0) & (r1 < 1) & (r2 > 0) & (r2 < 1)
        if np.any(interior):
            out[interior] = bivariate_normal_cdf(
                special.ndtri(r1[interior]), special.ndtri(r2[interior]), rho)
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def pearson_uniform_corr(rho_z):
    """Correlation between the uniform failure draws induced by latent correlation ``rho_z``."""
    out = 6.0 / np.pi * np.arcsin(np.asarray(rho_z, dtype=float) / 2)
    return out[()] if np.ndim(out) == 0 else out


def win_bracket(diff, tau, tie_rule):
    """Probability that the first of two survivors collects the reward."""
    tie_rule = TieRule(tie_rule)
    diff = np.asarray(diff, dtype=float)
    if tau > 0:
        with np.errstate(over="ignore"):
            return special.expit(diff / tau)
    tie = 0.5 if tie_rule is TieRule.SHARED else 0.0
    return np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, tie))


def _first_player(r1, r2, rt, spec):
    both_survive = 1 - (r1 + r2) + rt
    return (r2 - rt) - r1 * spec.P + both_survive * win_bracket(r1 - r2, spec.tau, spec.tie_rule)


def utility1(r1, r2, spec: GameSpec):
    """Player 1's expected utility only (half the work of :func:`utility2`)."""
    if spec.n != 2:
        raise ValueError("utility1 needs a two-player game")
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    u1 = _first_player(r1, r2, joint_failure_prob(r1, r2, spec.rho), spec)
    return float(u1) if u1.ndim == 0 else u1


def utility2(r1, r2, spec: GameSpec):
    """Expected utilities ``(u1, u2)`` of the two-player game.

    u1 = (r2 - rt) R - r1 P + (1 - r1 - r2 + rt) sigma_tau(r1 - r2) R, with
    ``rt`` the joint failure probability; u2 is u1 with the arguments swapped.
    """
    if spec.n != 2:
        raise ValueError("utility2 needs a two-player game")
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    rt = joint_failure_prob(r1, r2, spec.rho)
    u1 = _first_player(r1, r2, rt, spec)
    u2 = _first_player(r2, r1, rt, spec)
    if u1.ndim == 0:
        return float(u1), float(u2)
    return u1, u2


def utility_n(risks, spec: GameSpec) -> list[float]:
    """Expected utilities of a pure profile in the frictionless, independent n-player game.

    Player i wins when it survives and every player above it fails; players
    tied with i share the reward equally among tied survivors (``SHARED``) or
    void it if any tied rival survives (``NO_REWARD``).
    """
    risks = [float(r) for r in risks]
    if len(risks) != spec.n:
        raise ValueError(f"expected {spec.n} risks, got {len(risks)}")
    if spec.tau != 0 or spec.rho != 0:
        raise ValueError("utility_n covers the frictionless independent game only")
    out = []
    for i, ri in enumerate(risks):
        higher_fail = 1.0
        tied = 0
        for j, rj in enumerate(risks):
            if j == i:
                continue
            if rj > ri:
                higher_fail *= rj
            elif rj == ri:
                tied += 1
        survive = 1.0 - ri
        if tied == 0:
            share = 1.0
        elif spec.tie_rule is TieRule.NO_REWARD:
            share = ri ** tied
        elif survive == 0:
            share = 0.0
        else:
            # E[1 / (1 + M)] for M ~ Binomial(tied, survive)
            share = (1.0 - ri ** (tied + 1)) / ((tied + 1) * survive)
        out.append(-ri * spec.P + spec.R * survive * higher_fail * share)
    return out
