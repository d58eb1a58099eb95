import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskgame.model import (
    GameSpec,
    TieRule,
    bivariate_normal_cdf,
    joint_failure_prob,
    pearson_uniform_corr,
    sigmoid_scaled,
    std_normal_cdf,
    std_normal_quantile,
    utility2,
    utility_n,
)

from .oracles import bvn_quadrature, enumerate_n_player

unit = st.floats(0.0, 1.0)
interior = st.floats(1e-6, 1 - 1e-6)
corr = st.floats(-1.0, 1.0)


def test_game_spec_validation():
    with pytest.raises(ValueError):
        GameSpec(P=-1)
    with pytest.raises(ValueError):
        GameSpec(rho=1.5)
    with pytest.raises(ValueError):
        GameSpec(n=1)
    with pytest.raises(ValueError):
        GameSpec(n=3, tau=0.1)
    with pytest.raises(ValueError):
        GameSpec(R=2.0)
    assert GameSpec(tie_rule="no_reward").tie_rule is TieRule.NO_REWARD


class TestSigmoid:
    def test_symmetry_point(self):
        assert sigmoid_scaled(0, 1) == 0.5

    def test_heaviside_limit(self):
        assert sigmoid_scaled(1, 0) == 1
        assert sigmoid_scaled(-1, 0) == 0
        assert sigmoid_scaled(0, 0) == 0.5

    def test_value(self):
        # mpmath, 30 digits
        assert sigmoid_scaled(1, 1) == pytest.approx(0.731058578630004879, abs=1e-15)


class TestNormal:
    def test_cdf_and_quantile_anchors(self):
        assert std_normal_cdf(0) == 0.5
        assert std_normal_quantile(0.5) == 0
        # mpmath.ncdf(1.959963985) = 0.97500000002688
        assert std_normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-10)

    def test_mutual_inverse(self):
        p = np.concatenate([np.geomspace(1e-10, 0.5, 200), 1 - np.geomspace(1e-10, 0.5, 200)])
        assert np.max(np.abs(std_normal_cdf(std_normal_quantile(p)) - p)) <= 1e-12

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_quantile_domain(self, p):
        with pytest.raises(ValueError):
            std_normal_quantile(p)


class TestBivariateNormal:
    def test_independence(self):
        assert bivariate_normal_cdf(0, 0, 0) == 0.25

    def test_antithetic(self):
        assert bivariate_normal_cdf(0, 0, -1) == 0

    def test_sheppard_identity(self):
        for r in (-0.9, -0.3, 0.5, 0.95):
            assert bivariate_normal_cdf(0, 0, r) == pytest.approx(0.25 + math.asin(r) / (2 * math.pi), abs=1e-14)
        assert bivariate_normal_cdf(0, 0, 0.5) == pytest.approx(1 / 3, abs=1e-10)

    def test_extreme_forms(self):
        assert bivariate_normal_cdf(0.3, -0.2, 1) == pytest.approx(std_normal_cdf(-0.2))
        assert bivariate_normal_cdf(0.3, 0.2, -1) == pytest.approx(std_normal_cdf(0.3) + std_normal_cdf(0.2) - 1)
        assert bivariate_normal_cdf(1.0, 0.5, 0) == pytest.approx(std_normal_cdf(1.0) * std_normal_cdf(0.5), abs=1e-16)

    def test_infinite_limits(self):
        assert bivariate_normal_cdf(-np.inf, 0.3, 0.4) == 0
        assert bivariate_normal_cdf(np.inf, 0.3, 0.4) == pytest.approx(std_normal_cdf(0.3))

    @pytest.mark.parametrize("rho", [-0.99, -0.93, -0.6, 0.1, 0.4, 0.8, 0.93, 0.9999])
    def test_against_quadrature(self, rho):
        for h, k in itertools.product([-2.5, -0.7, 0.0, 1.1, 3.0], repeat=2):
            assert bivariate_normal_cdf(h, k, rho) == pytest.approx(bvn_quadrature(h, k, rho), abs=1e-10)

    def test_broadcasting(self):
        out = bivariate_normal_cdf(np.zeros((3, 1)), np.zeros((1, 4)), 0.5)
        assert out.shape == (3, 4)
        assert np.allclose(out, 1 / 3)


class TestJointFailure:
    def test_closed_forms(self):
        assert joint_failure_prob(0.3, 0.2, 0) == pytest.approx(0.06)
        assert joint_failure_prob(0.3, 0.2, 1) == pytest.approx(0.2)
        assert joint_failure_prob(0.6, 0.7, -1) == pytest.approx(0.3)

    def test_boundaries_without_quantile(self):
        assert joint_failure_prob(0.0, 0.4, 0.5) == 0
        assert joint_failure_prob(1.0, 0.4, -0.5) == pytest.approx(0.4)
        assert joint_failure_prob(0.4, 1.0, 0.3) == pytest.approx(0.4)

    def test_monotone_on_grid(self):
        r = np.linspace(0, 1, 21)
        rhos = np.linspace(-1, 1, 21)
        cube = np.stack([joint_failure_prob(r[:, None], r[None, :], rho) for rho in rhos])
        assert np.all(np.diff(cube, axis=0) >= -1e-12)
        assert np.all(np.diff(cube, axis=1) >= -1e-12)
        assert np.all(np.diff(cube, axis=2) >= -1e-12)

    @given(interior, interior, corr)
    def test_frechet_bounds(self, r1, r2, rho):
        rt = joint_failure_prob(r1, r2, rho)
        assert max(0.0, r1 + r2 - 1) - 1e-12 <= rt <= min(r1, r2) + 1e-12


class TestPearson:
    def test_values(self):
        assert pearson_uniform_corr(0) == 0
        assert pearson_uniform_corr(1) == pytest.approx(1.0, abs=1e-15)
        # mpmath: 6/pi * asin(1/4)
        assert pearson_uniform_corr(0.5) == pytest.approx(0.4825837395309975, abs=1e-14)

    @given(corr)
    def test_odd(self, x):
        assert pearson_uniform_corr(-x) == -pearson_uniform_corr(x)

    def test_monotone(self):
        assert np.all(np.diff(pearson_uniform_corr(np.linspace(-1, 1, 201))) > 0)


class TestUtility2:
    def test_worked_example_value(self):
        u1, u2 = utility2(0.3, 0.2, GameSpec(P=1))
        assert u1 == pytest.approx(0.4)
        assert u2 == pytest.approx(0.04)

    def test_shared_origin(self):
        for P in (0.0, 1.0, 7.0):
            assert utility2(0, 0, GameSpec(P=P)) == (0.5, 0.5)

    def test_no_reward_tie(self):
        assert utility2(0.2, 0.2, GameSpec(P=1, tie_rule="no_reward"))[0] == pytest.approx(-0.04)

    def test_friction_tie_is_half(self):
        # with friction both tie rules give sigma(0) = 1/2
        a = utility2(0.2, 0.2, GameSpec(P=1, tau=0.3, tie_rule="no_reward"))
        b = utility2(0.2, 0.2, GameSpec(P=1, tau=0.3, tie_rule="shared"))
        assert a == pytest.approx(b)

    def test_needs_two_players(self):
        with pytest.raises(ValueError):
            utility2(0.1, 0.2, GameSpec(n=3))

    @given(unit, unit, st.floats(0, 5), st.floats(0, 1), corr, st.sampled_from(list(TieRule)))
    @settings(max_examples=200)
    def test_symmetry(self, r1, r2, P, tau, rho, tie):
        spec = GameSpec(P=P, tau=tau, rho=rho, tie_rule=tie)
        u1, u2 = utility2(r1, r2, spec)
        v1, v2 = utility2(r2, r1, spec)
        assert u1 == v2 and u2 == v1

    @given(unit, unit, st.floats(0, 5), corr, st.sampled_from(list(TieRule)))
    def test_reward_budget(self, r1, r2, P, rho, tie):
        u1, u2 = utility2(r1, r2, GameSpec(P=P, rho=rho, tie_rule=tie))
        assert u1 + u2 + P * (r1 + r2) <= 1 + 1e-12


class TestUtilityN:
    def test_three_players(self):
        u = utility_n([0.3, 0.2, 0.1], GameSpec(P=1, n=3))
        assert u[0] == pytest.approx(0.4)

    def test_reduces_to_two_player(self):
        spec = GameSpec(P=1)
        assert utility_n([0.3, 0.2], spec) == pytest.approx(list(utility2(0.3, 0.2, spec)))
        for tie in TieRule:
            s = GameSpec(P=0.7, tie_rule=tie)
            assert utility_n([0.25, 0.25], s) == pytest.approx(list(utility2(0.25, 0.25, s)))

    def test_all_zero_shared(self):
        for n in (2, 3, 5):
            assert utility_n([0.0] * n, GameSpec(n=n)) == pytest.approx([1 / n] * n)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            utility_n([0.1, 0.2], GameSpec(n=3))

    @pytest.mark.parametrize("tie", list(TieRule))
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_against_enumeration(self, n, tie):
        rng = np.random.default_rng(n)
        spec = GameSpec(P=0.8, n=n, tie_rule=tie)
        levels = [0.0, 0.15, 0.4, 0.7, 1.0]
        for _ in range(40):
            risks = list(rng.choice(levels, size=n))
            assert utility_n(risks, spec) == pytest.approx(enumerate_n_player(risks, spec), abs=1e-12)
