"""Equilibrium-quality metrics on grids and on the continuous action space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameSpec, TieRule, utility1

__all__ = [
    "AtomicStrategyPair",
    "DeviationTable",
    "nash_conv",
    "deviation_gains",
    "quasi_nash_conv",
    "sobol_1d",
]


@dataclass(frozen=True)
class AtomicStrategyPair:
    """Finitely supported mixed strategies: per player, action values and their probabilities."""

    actions_p1: np.ndarray
    probs_p1: np.ndarray
    actions_p2: np.ndarray
    probs_p2: np.ndarray

    def __post_init__(self):
        for acts, probs in ((self.actions_p1, self.probs_p1), (self.actions_p2, self.probs_p2)):
            if acts.shape != probs.shape:
                raise ValueError("actions and probabilities must align")
            if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise ValueError("probabilities must be nonnegative and sum to 1")
            if np.any((acts < 0) | (acts > 1)):
                raise ValueError("actions must lie in [0, 1]")

    @classmethod
    def from_arrays(cls, a1, p1, a2, p2, prune: bool = True) -> "AtomicStrategyPair":
        a1, p1, a2, p2 = (np.asarray(v, dtype=float) for v in (a1, p1, a2, p2))
        if prune:
            a1, p1 = a1[p1 > 0], p1[p1 > 0]
            a2, p2 = a2[p2 > 0], p2[p2 > 0]
        return cls(a1, p1 / p1.sum(), a2, p2 / p2.sum())

    @classmethod
    def point_mass(cls, x1: float, x2: float) -> "AtomicStrategyPair":
        return cls(np.array([x1]), np.array([1.0]), np.array([x2]), np.array([1.0]))

    def mean_risk(self) -> tuple[float, float]:
        return float(self.actions_p1 @ self.probs_p1), float(self.actions_p2 @ self.probs_p2)


def nash_conv(game, s1, s2) -> float:
    """Summed gain of the best pure deviation for both players on the grid."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if s1.shape != (game.U1.shape[0],) or s2.shape != (game.U1.shape[1],):
        raise ValueError("strategy sizes do not match the grid")
    row_values = game.U1 @ s2
    col_values = s1 @ game.U2
    return float(row_values.max() - s1 @ row_values + col_values.max() - col_values @ s2)


def sobol_1d(m: int) -> np.ndarray:
    """First ``m`` points (index 1 onwards) of the one-dimensional Sobol sequence.

    With direction numbers ``2**-j`` the sequence is the base-2 radical
    inverse of the Gray code of the index: 0.5, 0.75, 0.25, 0.375, ...
    """
    if m < 1:
        raise ValueError("need at least one point")
    idx = np.arange(1, m + 1, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    out = np.zeros(m)
    scale = 0.5
    while np.any(gray):
        out += scale * (gray & np.uint64(1))
        gray >>= np.uint64(1)
        scale /= 2
    return out


def _values_independent(spec, xs, others, other_probs):
    """Frictionless, independent case via prefix sums over the sorted atoms.

    u1(x, b) = b (1 - x) - x P + (1 - x)(1 - b) [x > b], plus the tie share at b = x.
    """
    order = np.argsort(others, kind="stable")
    b, p = others[order], other_probs[order]
    survive = np.concatenate([[0.0], np.cumsum(p * (1 - b))])
    below = survive[np.searchsorted(b, xs, side="left")]
    upto = survive[np.searchsorted(b, xs, side="right")]
    tie = 0.5 if spec.tie_rule is TieRule.SHARED else 0.0
    mean_b = float(p @ b)
    return (1 - xs) * (mean_b + below + tie * (upto - below)) - xs * spec.P


def _values(spec, xs, others, other_probs, block=1 << 18):
    # expected utility of each pure x against the opponent's atoms; u2(b, x) = u1(x, b)
    if spec.tau == 0 and spec.rho == 0:
        return _values_independent(spec, xs, others, other_probs)
    rows = max(1, block // max(len(others), 1))
    out = np.empty(len(xs))
    for start in range(0, len(xs), rows):
        x = xs[start:start + rows, None]
        out[start:start + rows] = utility1(x, others[None, :], spec) @ other_probs
    return out


def _player_gaps(spec, dev_points, actions, others, other_probs, own_probs):
    best = float(_values(spec, dev_points, others, other_probs).max())
    current = _values(spec, actions, others, other_probs)
    return best - float(own_probs @ current)


def deviation_gains(spec: GameSpec, strategies: AtomicStrategyPair, points) -> tuple[float, float]:
    """Per-player gain of the best deviation in ``points`` (may be negative).

    ``points`` is one array shared by both players or a pair of arrays.
    """
    if spec.n != 2:
        raise ValueError("deviation metrics are two-player only")
    if isinstance(points, tuple):
        pts1, pts2 = (np.asarray(p, dtype=float) for p in points)
    else:
        pts1 = pts2 = np.asarray(points, dtype=float)
    s = strategies
    g1 = _player_gaps(spec, pts1, s.actions_p1, s.actions_p2, s.probs_p2, s.probs_p1)
    g2 = _player_gaps(spec, pts2, s.actions_p2, s.actions_p1, s.probs_p1, s.probs_p2)
    return g1, g2


def quasi_nash_conv(spec: GameSpec, strategies: AtomicStrategyPair, m: int, points=None) -> float:
    """Sum over players of the positive gain of the best quasi-random deviation.

    Deviations are the first ``m`` Sobol points unless ``points`` is given;
    values against the opponent's atoms are exact.
    """
    if points is None:
        points = sobol_1d(m)
    g1, g2 = deviation_gains(spec, strategies, points)
    return max(g1, 0.0) + max(g2, 0.0)


class DeviationTable:
    """QuasiNashConv for many strategy pairs on one grid game.

    The utilities of every deviation point against every grid action are
    tabulated once, so each evaluation costs two matrix-vector products.
    """

    def __init__(self, game, m: int, points=None):
        if game.spec is None or game.spec.n != 2:
            raise ValueError("need a two-player grid game with its spec")
        pts = sobol_1d(m) if points is None else np.asarray(points, dtype=float)
        spec, grid = game.spec, game.grid
        self.game = game
        self.D1 = utility1(pts[:, None], grid.actions_p2[None, :], spec)
        self.D2 = utility1(pts[:, None], grid.actions_p1[None, :], spec)

    def gains(self, s1, s2) -> tuple[float, float]:
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        g1 = float((self.D1 @ s2).max() - s1 @ self.game.U1 @ s2)
        g2 = float((self.D2 @ s1).max() - s1 @ self.game.U2 @ s2)
        return g1, g2

    def __call__(self, s1, s2) -> float:
        g1, g2 = self.gains(s1, s2)
        return max(g1, 0.0) + max(g2, 0.0)
