import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqstop.diffusion import constant_model
from eqstop.discounting import hyperbolic_measure
from eqstop.equilibrium import (
    EpsSearchConfig,
    check_equilibrium,
    epsilon_value_table,
    minimality_probe,
    optimality_probe,
    smallest_equilibrium,
    value_V,
    value_V_eps,
)
from eqstop.rewards import tent_reward, zero_reward
from eqstop.stability_lab import make_grid
from eqstop.stopping_sets import StoppingSet


@pytest.fixture(scope="module")
def coarse_grid():
    return make_grid(-3.0, 4.0, 1 / 16, pins=(0.0, 1.0))


class TestCheck:
    def test_whole_domain(self, bm, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        rep = check_equilibrium(bm, hyp1, f, StoppingSet.whole(bm.domain), 0.0, coarse_grid)
        assert rep.verdict and rep.worst_state is None

    def test_b_alone_under_limit_model(self, bm, hyp1, two_barrier, coarse_grid):
        p, f, _ = two_barrier
        assert check_equilibrium(bm, hyp1, f, StoppingSet.points(p.b), 0.0, coarse_grid).verdict

    @pytest.mark.parametrize("n", [2, 8, 64])
    def test_b_alone_fails_under_drift(self, hyp1, two_barrier, coarse_grid, n):
        p, f, _ = two_barrier
        rep = check_equilibrium(constant_model(-1.0 / n), hyp1, f, StoppingSet.points(p.b), 0.0, coarse_grid)
        assert not rep.verdict
        assert rep.worst_state == pytest.approx(p.a)

    @pytest.mark.parametrize("n", [2, 8, 64])
    def test_both_barriers_under_drift(self, hyp1, two_barrier, coarse_grid, n):
        p, f, _ = two_barrier
        rep = check_equilibrium(constant_model(-1.0 / n), hyp1, f, StoppingSet.points(p.a, p.b), 0.0, coarse_grid)
        assert rep.verdict

    def test_negative_epsilon(self, bm, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        with pytest.raises(ValueError):
            check_equilibrium(bm, hyp1, f, StoppingSet.points(1.0), -0.1, coarse_grid)

    def test_epsilon_slack(self, hyp1, two_barrier, coarse_grid):
        p, f, _ = two_barrier
        m = constant_model(-1.0 / 2)
        rep = check_equilibrium(m, hyp1, f, StoppingSet.points(p.b), 0.0, coarse_grid)
        assert check_equilibrium(m, hyp1, f, StoppingSet.points(p.b), rep.worst_gap + 1e-6, coarse_grid).verdict

    def test_record(self, bm, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        rec = check_equilibrium(bm, hyp1, f, StoppingSet.points(1.0), 0.0, coarse_grid).to_record()
        assert rec["verdict"] is True and rec["epsilon"] == 0.0


class TestSmallest:
    def test_limit_model(self, bm, hyp1, two_barrier, coarse_grid):
        p, f, _ = two_barrier
        assert smallest_equilibrium(bm, hyp1, f, coarse_grid).approx_equal(StoppingSet.points(p.b), 1e-9)

    @pytest.mark.parametrize("n", [2, 4, 16, 64])
    def test_drifted_models(self, hyp1, two_barrier, coarse_grid, n):
        p, f, _ = two_barrier
        S = smallest_equilibrium(constant_model(-1.0 / n), hyp1, f, coarse_grid)
        assert S.approx_equal(StoppingSet.points(p.a, p.b), 1e-9)

    def test_zero_reward(self, bm, hyp1, coarse_grid):
        assert smallest_equilibrium(bm, hyp1, zero_reward(), coarse_grid).is_empty

    def test_contains_argmax(self, bm, hyp1, coarse_grid):
        f = tent_reward(1.0, 0.5)
        S = smallest_equilibrium(bm, hyp1, f, coarse_grid)
        assert S.contains(np.array([0.5]))[0]

    def test_result_is_equilibrium_and_minimal(self, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        m = constant_model(-1.0 / 4)
        S = smallest_equilibrium(m, hyp1, f, coarse_grid)
        assert check_equilibrium(m, hyp1, f, S, 0.0, coarse_grid).verdict
        assert all(minimality_probe(m, hyp1, f, S, coarse_grid))

    def test_all_strategy_is_equilibrium(self, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        m = constant_model(-1.0 / 4)
        S, trace = smallest_equilibrium(m, hyp1, f, coarse_grid, strategy="all", return_trace=True)
        assert check_equilibrium(m, hyp1, f, S, 0.0, coarse_grid).verdict
        assert trace[-1]["n_violations"] == 0
        # the all-at-once rule never yields a smaller set than the peak rule
        peak = smallest_equilibrium(m, hyp1, f, coarse_grid)
        assert np.all(S.contains(coarse_grid) >= peak.contains(coarse_grid))

    def test_unknown_strategy(self, bm, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        with pytest.raises(ValueError):
            smallest_equilibrium(bm, hyp1, f, coarse_grid, strategy="greedy")

    def test_optimality(self, hyp1, two_barrier, coarse_grid):
        p, f, _ = two_barrier
        m = constant_model(-1.0 / 8)
        S = smallest_equilibrium(m, hyp1, f, coarse_grid)
        others = [StoppingSet.whole(m.domain), StoppingSet(((-math.inf, p.a), (p.b, math.inf))),
                  StoppingSet.points(p.a, 0.5, p.b)]
        assert optimality_probe(m, hyp1, f, S, others, coarse_grid) >= -1e-9


@settings(max_examples=15, deadline=None)
@given(centre=st.floats(-1.0, 2.0), height=st.floats(0.2, 2.0), beta=st.floats(0.3, 4.0),
       drift=st.floats(-0.5, 0.5))
def test_smallest_is_equilibrium_containing_argmax(centre, height, beta, drift):
    grid = make_grid(-2.0, 3.0, 1 / 8, pins=(round(centre, 3),))
    m = constant_model(drift)
    D = hyperbolic_measure(beta, 32)
    f = tent_reward(height, round(centre, 3))
    S = smallest_equilibrium(m, D, f, grid)
    assert check_equilibrium(m, D, f, S, 0.0, grid).verdict
    assert S.contains(np.array([round(centre, 3)]))[0]


class TestValues:
    def test_value_V(self, bm, hyp1, two_barrier, coarse_grid):
        p, f, k = two_barrier
        prof = value_V(bm, hyp1, f, coarse_grid)
        assert np.max(np.abs(prof.V_values - k.J_b(coarse_grid))) < 1e-10
        assert len(prof.to_rows()) == coarse_grid.size

    def test_eps_zero_recovers_V(self, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        m = constant_model(-1.0 / 8)
        xs = np.array([-2.0, -1.0, 0.5, 2.0])
        cfg = EpsSearchConfig(coarse_grid, stride=8)
        best, _ = epsilon_value_table(m, hyp1, f, [0.0], xs, cfg)
        V = value_V(m, hyp1, f, xs, S_star=smallest_equilibrium(m, hyp1, f, coarse_grid)).V_values
        assert np.max(np.abs(best[0] - V)) <= 1e-9

    def test_nested_in_epsilon(self, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        m = constant_model(-1.0 / 8)
        xs = np.array([-2.0, -1.0, 0.5, 2.0])
        best, _ = epsilon_value_table(m, hyp1, f, [0.01, 0.05, 0.1, 0.2], xs, EpsSearchConfig(coarse_grid))
        assert np.all(np.diff(best, axis=0) >= -1e-15)
        assert np.all(best <= f.sup + 1e-12)

    def test_eps_values_are_attained_by_eps_equilibria(self, hyp1, two_barrier, coarse_grid):
        _, f, _ = two_barrier
        m = constant_model(-1.0 / 8)
        v, S = value_V_eps(m, hyp1, f, 0.1, -1.0, EpsSearchConfig(coarse_grid))
        assert check_equilibrium(m, hyp1, f, S, 0.1, coarse_grid).verdict
        from eqstop.valuation import continuation_value
        assert continuation_value(m, hyp1, f, S, np.array([-1.0])).values[0] == pytest.approx(v, abs=1e-12)

    @pytest.mark.parametrize("eps", [0.0, -0.1])
    def test_value_V_eps_rejects_nonpositive(self, bm, hyp1, two_barrier, coarse_grid, eps):
        _, f, _ = two_barrier
        with pytest.raises(ValueError):
            value_V_eps(bm, hyp1, f, eps, 0.0, EpsSearchConfig(coarse_grid))
