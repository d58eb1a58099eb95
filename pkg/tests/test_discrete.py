import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import riskgame.model as model
from riskgame.analytic import solve_two_player
from riskgame.discrete import ActionGrid, build_grid, matrix_game, payoff_matrices
from riskgame.model import GameSpec
from riskgame.oracle import mc_utility2


class TestGrid:
    def test_plain(self):
        g = build_grid(2, False)
        assert g.actions_p1.tolist() == [0, 0.5] and g.actions_p2.tolist() == [0, 0.5]

    def test_shifted(self):
        g = build_grid(2, True)
        assert g.actions_p1.tolist() == [0, 0.5]
        assert g.actions_p2.tolist() == [0.25, 0.75]

    @given(st.integers(2, 300))
    def test_shift_disjoint_and_interleaved(self, a):
        g = build_grid(a, True)
        assert g.shape == (a, a)
        assert not set(g.actions_p1) & set(g.actions_p2)
        merged = np.empty(2 * a)
        merged[0::2], merged[1::2] = g.actions_p1, g.actions_p2
        assert np.all(np.diff(merged) > 0)
        assert g.actions_p1[0] == 0 and g.actions_p2[-1] < 1

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_grid(1, False)

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            ActionGrid(np.array([0.5, 0.1]), np.array([0.0, 1.0]))


class TestPayoffs:
    def test_two_by_two_values(self):
        game = payoff_matrices(build_grid(2, False), GameSpec(P=1))
        expected = np.array([[0.5, 0.5], [0.0, -0.125]])
        assert np.allclose(game.U1, expected, atol=1e-15)
        assert np.array_equal(game.U2, game.U1.T)

    def test_two_by_two_against_playouts(self):
        spec = GameSpec(P=1)
        game = payoff_matrices(build_grid(2, False), spec)
        acts = game.grid.actions_p1
        for i, a in enumerate(acts):
            for j, b in enumerate(acts):
                e1, e2 = mc_utility2(a, b, spec, 10 ** 6, seed=10 * i + j)
                assert e1.agrees(game.U1[i, j]) and e2.agrees(game.U2[i, j])

    @pytest.mark.parametrize("spec", [GameSpec(P=1), GameSpec(P=0.3, tau=0.1, rho=0.5),
                                      GameSpec(P=2, rho=-0.7, tie_rule="no_reward")])
    def test_swap_symmetry(self, spec):
        grid = build_grid(12, True)
        game = payoff_matrices(grid, spec)
        swapped = payoff_matrices(ActionGrid(grid.actions_p2, grid.actions_p1, True), spec)
        assert np.array_equal(game.U2, swapped.U1.T)

    @given(st.floats(0, 5), st.floats(0, 1), st.floats(-1, 1), st.booleans())
    @settings(max_examples=30, deadline=None)
    def test_entry_bounds(self, P, tau, rho, shift):
        game = payoff_matrices(build_grid(9, shift), GameSpec(P=P, tau=tau, rho=rho))
        for U in (game.U1, game.U2):
            assert U.min() >= -P - 1e-12 and U.max() <= 1 + 1e-12

    def test_shift_never_ties(self):
        # with no NoReward ties possible, both tie rules give identical matrices
        grid = build_grid(40, True)
        a = payoff_matrices(grid, GameSpec(P=1, tie_rule="shared"))
        b = payoff_matrices(grid, GameSpec(P=1, tie_rule="no_reward"))
        assert np.array_equal(a.U1, b.U1)

    def test_comonotone_skips_normal_cdf(self, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("normal CDF should not be evaluated at rho = 1")

        monkeypatch.setattr(model, "bivariate_normal_cdf", boom)
        monkeypatch.setattr(model, "std_normal_quantile", boom)
        game = payoff_matrices(build_grid(8, True), GameSpec(P=1, rho=1))
        r1, r2 = np.meshgrid(game.grid.actions_p1, game.grid.actions_p2, indexing="ij")
        rt = np.minimum(r1, r2)
        expected = (r2 - rt) - r1 + (1 - r1 - r2 + rt) * (r1 > r2)
        assert np.allclose(game.U1, expected, atol=1e-15)

    def test_chunking_is_invisible(self):
        grid = build_grid(33, True)
        spec = GameSpec(P=1, tau=0.05, rho=0.3)
        assert np.array_equal(payoff_matrices(grid, spec, chunk_rows=5).U1,
                              payoff_matrices(grid, spec).U1)

    def test_multiplayer_rejected(self):
        with pytest.raises(ValueError):
            payoff_matrices(build_grid(4, False), GameSpec(n=3))


def test_refinement_towards_equilibrium_value():
    eq = solve_two_player(1)
    gaps = []
    for a in (32, 64, 128, 256, 512):
        grid = build_grid(a, True)
        game = payoff_matrices(grid, GameSpec(P=1))
        edges = np.append(grid.actions_p2, 1.0)
        weights = np.diff(eq.cdf(edges))
        best = (game.U1 @ weights).max()
        gaps.append(abs(best - eq.u_star))
    assert gaps[-1] < 5e-3
    assert all(b <= a + 1e-3 for a, b in zip(gaps, gaps[1:]))


def test_csv_export(tmp_path):
    game = payoff_matrices(build_grid(3, True), GameSpec(P=1))
    path = tmp_path / "u1.csv"
    game.to_csv(path, player=1)
    rows = list(csv.reader(open(path)))
    assert len(rows) == 4 and len(rows[0]) == 4
    assert np.allclose(np.array(rows[1:], dtype=float)[:, 1:], game.U1)


def test_matrix_game_shape_check():
    with pytest.raises(ValueError):
        matrix_game(np.zeros((2, 2)), np.zeros((2, 3)))
    assert matrix_game([[1, 0]], [[0, 1]]).shape == (1, 2)
