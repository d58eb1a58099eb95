"""Regret-based learning dynamics on a :class:`~riskgame.discrete.DiscreteGame`.

Three solvers share one result type:

* sampled regret matching (one iteration = ``a`` sampled plays),
* a deterministic regret-matching variant on expected payoffs ("CFR"),
* stochastic fictitious play with softmax responses.
"""

from __future__ import annotations

import csv
import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .metrics import nash_conv

__all__ = [
    "Algorithm",
    "SolverConfig",
    "SolveResult",
    "regret_matching",
    "cfr",
    "stochastic_fictitious_play",
    "solve",
    "regret_strategy",
]


class Algorithm(str, enum.Enum):
    REGRET_MATCHING = "rm"
    CFR = "cfr"
    SFP = "sfp"


@dataclass(frozen=True)
class SolverConfig:
    algorithm: Algorithm = Algorithm.REGRET_MATCHING
    iterations: int = 2000
    seed: int = 0
    softmax_temperature: float = 0.05
    trace_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not self.softmax_temperature > 0:
            raise ValueError("softmax temperature must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm.value, "iterations": self.iterations,
                "seed": self.seed, "softmax_temperature": self.softmax_temperature,
                "trace_every": self.trace_every}


@dataclass
class SolveResult:
    avg_strategy_p1: np.ndarray
    avg_strategy_p2: np.ndarray
    empirical_joint: np.ndarray | None = None
    nashconv_trace: list = field(default_factory=list)
    regret_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    config: SolverConfig | None = None
    # (iteration, avg_p1, avg_p2) at each trace point, for metrics computed later
    snapshots: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict() if self.config else None,
            "avg_strategy_p1": self.avg_strategy_p1.tolist(),
            "avg_strategy_p2": self.avg_strategy_p2.tolist(),
            "nashconv_trace": [list(row) for row in self.nashconv_trace],
            "regret_trace": [list(row) for row in self.regret_trace],
            "wall_time": self.wall_time,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def strategies_csv(self, path, actions_p1, actions_p2):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["player", "action", "probability"])
            for player, acts, probs in ((1, actions_p1, self.avg_strategy_p1),
                                        (2, actions_p2, self.avg_strategy_p2)):
                for x, p in zip(acts, probs):
                    writer.writerow([player, repr(float(x)), repr(float(p))])


def regret_strategy(regrets: np.ndarray) -> np.ndarray:
    """Positive-part regrets normalised to a distribution; uniform if none is positive."""
    pos = np.maximum(regrets, 0.0)
    total = pos.sum()
    if total > 0:
        return pos / total
    return np.full(len(regrets), 1.0 / len(regrets))


@numba.njit(cache=True)
def _sample_from_regrets(reg, u):
    n = reg.shape[0]
    total = 0.0
    for s in range(n):
        if reg[s] > 0.0:
            total += reg[s]
    if total <= 0.0:
        idx = int(u * n)
        return idx if idx < n else n - 1
    target = u * total
    acc = 0.0
    last = 0
    for s in range(n):
        if reg[s] > 0.0:
            acc += reg[s]
            last = s
            if acc > target:
                return s
    return last


@numba.njit(cache=True)
def _rm_steps(U1T, U2, reg1, reg2, counts1, counts2, joint, uniforms):
    """Sampled regret matching; regrets use the full counterfactual row/column."""
    a1 = reg1.shape[0]
    a2 = reg2.shape[0]
    for t in range(uniforms.shape[0]):
        i = _sample_from_regrets(reg1, uniforms[t, 0])
        j = _sample_from_regrets(reg2, uniforms[t, 1])
        base1 = U1T[j, i]
        base2 = U2[i, j]
        col = U1T[j]
        row = U2[i]
        for s in range(a1):
            reg1[s] += col[s] - base1
        for s in range(a2):
            reg2[s] += row[s] - base2
        counts1[i] += 1.0
        counts2[j] += 1.0
        joint[i, j] += 1.0


def _trace_points(cfg: SolverConfig):
    if cfg.trace_every <= 0:
        return {cfg.iterations}
    pts = set(range(cfg.trace_every, cfg.iterations + 1, cfg.trace_every))
    pts.add(cfg.iterations)
    return pts


def regret_matching(game, cfg: SolverConfig) -> SolveResult:
    """Sampled regret matching; averages are the empirical frequencies of play."""
    start = time.perf_counter()
    a1, a2 = game.U1.shape
    U1T = np.ascontiguousarray(game.U1.T)
    U2 = np.ascontiguousarray(game.U2)
    reg1, reg2 = np.zeros(a1), np.zeros(a2)
    counts1, counts2 = np.zeros(a1), np.zeros(a2)
    joint = np.zeros((a1, a2))
    rng = np.random.default_rng(cfg.seed)
    trace, regret_trace, snapshots = [], [], []
    points = _trace_points(cfg)
    # sampling is done in blocks of iterations to bound memory
    block = max(1, min(cfg.iterations, 2 ** 20 // a1))
    done = 0
    while done < cfg.iterations:
        todo = min(block, cfg.iterations - done)
        nxt = min((p for p in points if p > done), default=cfg.iterations)
        todo = min(todo, nxt - done)
        _rm_steps(U1T, U2, reg1, reg2, counts1, counts2, joint, rng.random((todo * a1, 2)))
        done += todo
        if done in points:
            steps = counts1.sum()
            snapshots.append((done, counts1 / steps, counts2 / steps))
            trace.append((done, nash_conv(game, *snapshots[-1][1:])))
            regret_trace.append((done, max(reg1.max(), 0.0) / steps, max(reg2.max(), 0.0) / steps))
    steps = counts1.sum()
    return SolveResult(counts1 / steps, counts2 / steps, joint / steps, trace, regret_trace,
                       time.perf_counter() - start, cfg, snapshots)


def cfr(game, cfg: SolverConfig) -> SolveResult:
    """Deterministic regret matching on exact expected payoffs, uniform averaging."""
    start = time.perf_counter()
    U1, U2 = game.U1, game.U2
    a1, a2 = U1.shape
    reg1, reg2 = np.zeros(a1), np.zeros(a2)
    sum1, sum2 = np.zeros(a1), np.zeros(a2)
    trace, regret_trace, snapshots = [], [], []
    points = _trace_points(cfg)
    for t in range(1, cfg.iterations + 1):
        s1, s2 = regret_strategy(reg1), regret_strategy(reg2)
        v1 = U1 @ s2
        v2 = s1 @ U2
        reg1 += v1 - s1 @ v1
        reg2 += v2 - v2 @ s2
        sum1 += s1
        sum2 += s2
        if t in points:
            snapshots.append((t, sum1 / t, sum2 / t))
            trace.append((t, nash_conv(game, sum1 / t, sum2 / t)))
            regret_trace.append((t, max(reg1.max(), 0.0) / t, max(reg2.max(), 0.0) / t))
    n = cfg.iterations
    return SolveResult(sum1 / n, sum2 / n, None, trace, regret_trace,
                       time.perf_counter() - start, cfg, snapshots)


def _softmax(values, temperature):
    z = (values - values.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def stochastic_fictitious_play(game, cfg: SolverConfig) -> SolveResult:
    """Smoothed best responses to the opponent's empirical frequency of realised play."""
    start = time.perf_counter()
    U1, U2 = game.U1, game.U2
    a1, a2 = U1.shape
    rng = np.random.default_rng(cfg.seed)
    counts1, counts2 = np.zeros(a1), np.zeros(a2)
    sum1, sum2 = np.zeros(a1), np.zeros(a2)
    trace, regret_trace, snapshots = [], [], []
    points = _trace_points(cfg)
    temp = cfg.softmax_temperature
    for t in range(1, cfg.iterations + 1):
        freq1 = counts1 / counts1.sum() if t > 1 else np.full(a1, 1.0 / a1)
        freq2 = counts2 / counts2.sum() if t > 1 else np.full(a2, 1.0 / a2)
        s1 = _softmax(U1 @ freq2, temp)
        s2 = _softmax(freq1 @ U2, temp)
        u = rng.random(2)
        counts1[min(np.searchsorted(np.cumsum(s1), u[0], side="right"), a1 - 1)] += 1
        counts2[min(np.searchsorted(np.cumsum(s2), u[1], side="right"), a2 - 1)] += 1
        sum1 += s1
        sum2 += s2
        if t in points:
            snapshots.append((t, sum1 / t, sum2 / t))
            trace.append((t, nash_conv(game, sum1 / t, sum2 / t)))
    n = cfg.iterations
    return SolveResult(sum1 / n, sum2 / n, None, trace, regret_trace,
                       time.perf_counter() - start, cfg, snapshots)


_SOLVERS = {
    Algorithm.REGRET_MATCHING: regret_matching,
    Algorithm.CFR: cfr,
    Algorithm.SFP: stochastic_fictitious_play,
}


def solve(game, cfg: SolverConfig) -> SolveResult:
    return _SOLVERS[cfg.algorithm](game, cfg)
