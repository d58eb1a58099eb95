"""Monte Carlo playouts of the game, used as ground truth for the formulas."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import GameSpec, TieRule

__all__ = [
    "PlayoutEstimate",
    "sample_correlated_failures",
    "mc_utility2",
    "mc_strategy_playout",
]

BATCH = 1 << 20


@dataclass(frozen=True)
class PlayoutEstimate:
    mean: float
    std_error: float
    samples: int

    def agrees(self, value: float, n_sigma: float = 4.0) -> bool:
        if self.std_error == 0:
            return abs(self.mean - value) <= 1e-12
        return abs(self.mean - value) <= n_sigma * self.std_error


class _Moments:
    """Running count, sum and sum of squares merged across batches."""

    def __init__(self):
        self.n, self.s, self.ss = 0, 0.0, 0.0

    def add(self, x):
        self.n += len(x)
        self.s += float(x.sum())
        self.ss += float(np.dot(x, x))

    def estimate(self) -> PlayoutEstimate:
        mean = self.s / self.n
        var = max(self.ss / self.n - mean * mean, 0.0)
        if self.n > 1:
            var *= self.n / (self.n - 1)
        return PlayoutEstimate(mean, (var / self.n) ** 0.5, self.n)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _latent_pairs(rho, count, rng):
    g1 = rng.standard_normal(count)
    if rho == 1:
        return g1, g1.copy()
    if rho == -1:
        return g1, -g1
    g2 = rng.standard_normal(count)
    return g1, rho * g1 + np.sqrt(1 - rho * rho) * g2


def sample_correlated_failures(rho: float, count: int, seed=None):
    """Uniform failure draws with latent normal correlation ``rho``.

    Returns an array of shape ``(count, 2)``.
    """
    if not -1 <= rho <= 1:
        raise ValueError("correlation must lie in [-1, 1]")
    z1, z2 = _latent_pairs(rho, count, _rng(seed))
    return np.column_stack([special.ndtr(z1), special.ndtr(z2)])


def _play(r1, r2, f1, f2, spec: GameSpec, rng):
    fail1 = f1 < r1
    fail2 = f2 < r2
    both = ~fail1 & ~fail2
    if spec.tau > 0:
        p1_wins = rng.random(len(f1)) < special.expit((r1 - r2) / spec.tau)
        win1 = np.where(p1_wins, 1.0, 0.0)
        win2 = 1.0 - win1
    else:
        tie = 0.5 if spec.tie_rule is TieRule.SHARED else 0.0
        win1 = np.where(r1 > r2, 1.0, np.where(r1 < r2, 0.0, tie))
        win2 = np.where(r2 > r1, 1.0, np.where(r2 < r1, 0.0, tie))
    u1 = np.where(fail1, -spec.P, np.where(fail2, spec.R, both * win1 * spec.R))
    u2 = np.where(fail2, -spec.P, np.where(fail1, spec.R, both * win2 * spec.R))
    return u1, u2


def mc_utility2(r1: float, r2: float, spec: GameSpec, samples: int, seed=None):
    """Playout estimates of both players' expected utility at the pure profile (r1, r2).

    Under friction the surviving pair's reward goes to player 1 with
    probability sigma_tau(r1 - r2) and to player 2 otherwise.
    """
    if spec.n != 2:
        raise ValueError("playouts are two-player only")
    rng = _rng(seed)
    m1, m2 = _Moments(), _Moments()
    done = 0
    while done < samples:
        count = min(BATCH, samples - done)
        f1, f2 = sample_correlated_failures(spec.rho, count, rng).T
        u1, u2 = _play(r1, r2, f1, f2, spec, rng)
        m1.add(u1)
        m2.add(u2)
        done += count
    return m1.estimate(), m2.estimate()


def mc_strategy_playout(strategies, spec: GameSpec, samples: int, seed=None):
    """Play independent draws from two atomic strategies.

    Returns ``(utility_p1, utility_p2, risk_p1, risk_p2)`` as estimates.
    """
    if spec.n != 2:
        raise ValueError("playouts are two-player only")
    rng = _rng(seed)
    moments = [_Moments() for _ in range(4)]
    cdf1 = np.cumsum(strategies.probs_p1)
    cdf2 = np.cumsum(strategies.probs_p2)
    done = 0
    while done < samples:
        count = min(BATCH, samples - done)
        i = np.minimum(np.searchsorted(cdf1, rng.random(count) * cdf1[-1], side="right"),
                       len(cdf1) - 1)
        j = np.minimum(np.searchsorted(cdf2, rng.random(count) * cdf2[-1], side="right"),
                       len(cdf2) - 1)
        r1 = strategies.actions_p1[i]
        r2 = strategies.actions_p2[j]
        f1, f2 = sample_correlated_failures(spec.rho, count, rng).T
        u1, u2 = _play(r1, r2, f1, f2, spec, rng)
        for m, x in zip(moments, (u1, u2, r1, r2)):
            m.add(x)
        done += count
    return tuple(m.estimate() for m in moments)
