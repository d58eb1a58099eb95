import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskgame.corr_eq import ce_violation
from riskgame.discrete import build_grid, matrix_game, payoff_matrices
from riskgame.metrics import nash_conv
from riskgame.model import GameSpec
from riskgame.solvers import (
    Algorithm,
    SolverConfig,
    cfr,
    regret_matching,
    regret_strategy,
    solve,
    stochastic_fictitious_play,
)

PENNIES = matrix_game([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
DOMINANT = matrix_game([[1, 1], [0, 0]], [[0, 1], [0, 1]])


def small_cfr_game(a=24, tau=0.0, rho=0.0):
    return payoff_matrices(build_grid(a, True), GameSpec(P=1, tau=tau, rho=rho))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(iterations=0)
        with pytest.raises(ValueError):
            SolverConfig(softmax_temperature=0)
        with pytest.raises(ValueError):
            SolverConfig(seed=-1)
        assert SolverConfig(algorithm="cfr").algorithm is Algorithm.CFR

    def test_round_trip(self):
        cfg = SolverConfig(algorithm="sfp", iterations=7, seed=3, trace_every=2)
        assert SolverConfig(**cfg.to_dict()) == cfg


class TestRegretStrategy:
    def test_uniform_without_positive_regret(self):
        assert regret_strategy(np.array([-1.0, 0.0, -2.0])).tolist() == [1 / 3] * 3

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
    def test_valid_distribution(self, regrets):
        s = regret_strategy(np.array(regrets))
        assert np.all(s >= 0) and abs(s.sum() - 1) <= 1e-12


class TestRegretMatching:
    def test_matching_pennies(self):
        res = regret_matching(PENNIES, SolverConfig(iterations=10 ** 5, seed=1))
        assert np.allclose(res.avg_strategy_p1, 0.5, atol=0.02)
        assert np.allclose(res.avg_strategy_p2, 0.5, atol=0.02)

    def test_dominant_row(self):
        res = regret_matching(DOMINANT, SolverConfig(iterations=5000, seed=2))
        assert res.avg_strategy_p1[0] >= 0.99

    def test_joint_marginals(self):
        res = regret_matching(small_cfr_game(), SolverConfig(iterations=300, seed=4))
        assert res.empirical_joint.sum() == pytest.approx(1, abs=1e-12)
        assert np.allclose(res.empirical_joint.sum(axis=1), res.avg_strategy_p1, atol=1e-9)
        assert np.allclose(res.empirical_joint.sum(axis=0), res.avg_strategy_p2, atol=1e-9)

    def test_seed_determinism(self):
        game = small_cfr_game(tau=0.05, rho=0.4)
        a = regret_matching(game, SolverConfig(iterations=200, seed=9, trace_every=50))
        b = regret_matching(game, SolverConfig(iterations=200, seed=9, trace_every=50))
        c = regret_matching(game, SolverConfig(iterations=200, seed=10, trace_every=50))
        assert np.array_equal(a.empirical_joint, b.empirical_joint)
        assert a.nashconv_trace == b.nashconv_trace
        assert not np.array_equal(a.empirical_joint, c.empirical_joint)

    def test_trace_cadence(self):
        res = regret_matching(small_cfr_game(), SolverConfig(iterations=100, seed=0, trace_every=30))
        assert [t for t, _ in res.nashconv_trace] == [30, 60, 90, 100]
        assert [row[0] for row in res.regret_trace] == [30, 60, 90, 100]

    def test_trace_matches_recomputed_nashconv(self):
        game = small_cfr_game()
        res = regret_matching(game, SolverConfig(iterations=120, seed=5))
        assert res.nashconv_trace[-1][1] == pytest.approx(
            nash_conv(game, res.avg_strategy_p1, res.avg_strategy_p2), abs=1e-14)

    def test_average_regret_shrinks(self):
        # single sample paths are noisy; average four seeds at doubling iteration counts
        game = small_cfr_game(32)
        checkpoints = (250, 500, 1000, 2000, 4000, 8000)
        seq = np.zeros(len(checkpoints))
        for seed in range(4):
            res = regret_matching(game, SolverConfig(iterations=8000, seed=seed, trace_every=250))
            r = {t: max(r1, r2) for t, r1, r2 in res.regret_trace}
            seq += [r[t] for t in checkpoints]
        assert all(b <= a * 1.1 for a, b in zip(seq, seq[1:]))

    def test_joint_play_approaches_ce_set(self):
        game = small_cfr_game(48)
        res = regret_matching(game, SolverConfig(iterations=2000, seed=0))
        assert ce_violation(game, res.empirical_joint) <= 0.02


class TestCFR:
    def test_matching_pennies(self):
        res = cfr(PENNIES, SolverConfig(algorithm="cfr", iterations=10 ** 4))
        assert np.allclose(res.avg_strategy_p1, 0.5, atol=1e-3)

    def test_dominant_row(self):
        res = cfr(DOMINANT, SolverConfig(algorithm="cfr", iterations=2000))
        assert res.avg_strategy_p1[0] >= 0.99

    def test_bitwise_deterministic_and_seed_free(self):
        game = small_cfr_game(tau=0.1)
        a = cfr(game, SolverConfig(algorithm="cfr", iterations=300, seed=1))
        b = cfr(game, SolverConfig(algorithm="cfr", iterations=300, seed=2))
        assert np.array_equal(a.avg_strategy_p1, b.avg_strategy_p1)
        assert np.array_equal(a.avg_strategy_p2, b.avg_strategy_p2)

    def test_strategies_valid(self):
        res = cfr(small_cfr_game(), SolverConfig(algorithm="cfr", iterations=50))
        for s in (res.avg_strategy_p1, res.avg_strategy_p2):
            assert np.all(s >= 0) and abs(s.sum() - 1) <= 1e-12


class TestSFP:
    def test_dominant_row(self):
        res = stochastic_fictitious_play(
            DOMINANT, SolverConfig(algorithm="sfp", iterations=2000, softmax_temperature=0.01))
        assert res.avg_strategy_p1[0] >= 0.99

    def test_matching_pennies(self):
        res = stochastic_fictitious_play(
            PENNIES, SolverConfig(algorithm="sfp", iterations=10 ** 5, softmax_temperature=0.1, seed=3))
        assert np.allclose(res.avg_strategy_p1, 0.5, atol=0.05)
        assert np.allclose(res.avg_strategy_p2, 0.5, atol=0.05)

    def test_seed_determinism(self):
        cfg = SolverConfig(algorithm="sfp", iterations=300, seed=4)
        a = stochastic_fictitious_play(small_cfr_game(), cfg)
        b = stochastic_fictitious_play(small_cfr_game(), cfg)
        assert np.array_equal(a.avg_strategy_p1, b.avg_strategy_p1)


@pytest.mark.parametrize("algo", list(Algorithm))
def test_dispatch_and_serialisation(algo, tmp_path):
    game = small_cfr_game(8)
    res = solve(game, SolverConfig(algorithm=algo, iterations=20, trace_every=10))
    assert res.config.algorithm is algo
    res.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["config"]["algorithm"] == algo.value
    assert len(data["avg_strategy_p1"]) == 8
    res.strategies_csv(tmp_path / "s.csv", game.grid.actions_p1, game.grid.actions_p2)
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 17


@pytest.mark.slow
def test_standard_setting_regret_bound():
    game = payoff_matrices(build_grid(500, True), GameSpec(P=1))
    res = regret_matching(game, SolverConfig(iterations=2000, seed=0))
    _, r1, r2 = res.regret_trace[-1]
    assert max(r1, r2) <= 0.02
    assert ce_violation(game, res.empirical_joint) <= 0.02
