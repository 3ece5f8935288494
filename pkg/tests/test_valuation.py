import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqstop.diffusion import constant_model, general_model, laplace_two_barrier
from eqstop.discounting import hyperbolic_measure
from eqstop.rewards import tent_reward
from eqstop.stopping_sets import StoppingSet
from eqstop.valuation import closed_form_J_ab, closed_form_J_b, continuation_value, solve_resolvent
from oracles import one_barrier_J, two_barrier_J


class TestResolvent:
    def test_matches_two_barrier_closed_form(self, bm):
        x = np.linspace(0.05, 1.95, 39)
        r = 0.8
        v = solve_resolvent(bm, r, (0.0, 2.0), (0.7, 0.7), query=x)
        pa, pb = laplace_two_barrier(bm, x, 0.0, 2.0, r)
        assert np.max(np.abs(v - 0.7 * (pa + pb))) < 1e-6

    def test_strong_discounting(self, bm):
        v = solve_resolvent(bm, 1e4, (0.0, 2.0), (1.0, 1.0), query=np.array([1.0]))
        assert v[0] < 1e-3

    def test_zero_data(self, bm):
        mesh, v = solve_resolvent(bm, 0.5, (0.0, 1.0), (0.0, 0.0))
        assert np.all(v == 0)

    def test_degenerate_interval(self, bm):
        v = solve_resolvent(bm, 1.0, (0.0, 1e-13), (1.0, 2.0), query=np.array([0.5e-13]))
        assert v[0] == pytest.approx(1.5)

    def test_half_line_far_field(self, bm):
        x = np.array([-3.0, -1.0, -0.1])
        v = solve_resolvent(bm, 0.3, (-math.inf, 0.0), (0.0, 1.0), query=x)
        assert np.max(np.abs(v - np.exp(-np.abs(x) * math.sqrt(0.6)))) < 1e-6

    def test_drifted_half_line(self):
        m = constant_model(-0.25)
        x = np.array([1.2, 2.0, 4.0])
        v = solve_resolvent(m, 0.4, (1.0, math.inf), (1.0, 0.0), query=x)
        k = math.sqrt(0.8 + 0.0625)
        assert np.max(np.abs(v - np.exp(0.25 * (x - 1.0) - k * (x - 1.0)))) < 1e-6

    def test_zero_rate_is_linear_interpolation(self, bm):
        x = np.linspace(0.1, 0.9, 9)
        v = solve_resolvent(bm, 0.0, (0.0, 1.0), (1.0, 3.0), query=x)
        assert np.max(np.abs(v - (1.0 + 2.0 * x))) < 1e-9

    def test_negative_rate_rejected(self, bm):
        with pytest.raises(ValueError):
            solve_resolvent(bm, -1.0, (0.0, 1.0), (1.0, 1.0))

    def test_second_order_convergence(self):
        m = general_model(lambda x: 0.3 * np.sin(x), lambda x: 1.0 + 0.2 * np.cos(x))
        q = np.array([0.5, 1.0, 1.5])
        vals = [solve_resolvent(m, 1.0, (0.0, 2.0), (1.0, 0.5), query=q, n_cells=n, richardson=False)
                for n in (64, 128, 256)]
        e1 = np.max(np.abs(vals[0] - vals[1]))
        e2 = np.max(np.abs(vals[1] - vals[2]))
        assert 3.5 < e1 / e2 < 4.5


class TestClosedForms:
    def test_J_b_against_oracle(self):
        for x in (-3.0, 0.0, 0.5, 2.5):
            assert abs(closed_form_J_b(x, 1.0, 1.0, 1.0) - one_barrier_J(x, 1.0, 1.0, 1.0)) < 1e-10

    def test_c_value(self):
        # J_b(0) for b = 1, d = 1, beta = 1
        assert abs(closed_form_J_b(0.0, 1.0, 1.0, 1.0) - one_barrier_J(0.0, 1.0, 1.0, 1.0)) < 1e-12

    def test_J_ab_boundaries(self):
        params = (0.0, 1.0, 0.4, 1.0, 1.0, 0.0)
        assert closed_form_J_ab(params, 0.0) == pytest.approx(0.4, abs=1e-12)
        assert closed_form_J_ab(params, 1.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("mu0", [0.0, -1.0 / 8, -1.0 / 64])
    def test_J_ab_pieces(self, mu0):
        params = (0.0, 1.0, 0.4, 1.0, 1.0, mu0)
        assert abs(closed_form_J_ab(params, -1.0) - one_barrier_J(-1.0, 0.0, 0.4, 1.0, mu0)) < 1e-10
        assert abs(closed_form_J_ab(params, 2.0) - one_barrier_J(2.0, 1.0, 1.0, 1.0, mu0)) < 1e-10
        for x in (0.1, 0.5, 0.93):
            assert abs(closed_form_J_ab(params, x) - two_barrier_J(x, 0.0, 1.0, 0.4, 1.0, 1.0, mu0)) < 1e-10

    def test_J_ab_validation(self):
        with pytest.raises(ValueError):
            closed_form_J_ab((1.0, 0.0, 0.4, 1.0, 1.0, 0.0), 0.5)


class TestContinuationValue:
    def test_on_set_equals_reward(self, bm, hyp1, two_barrier, grid41):
        p, f, k = two_barrier
        S = StoppingSet(((p.b, 2.0),))
        J = continuation_value(bm, hyp1, f, S, grid41).values
        inside = S.contains(grid41)
        assert np.max(np.abs(J[inside] - f(grid41[inside]))) <= 1e-10

    def test_empty_set(self, bm, hyp1, two_barrier, grid41):
        _, f, _ = two_barrier
        assert np.all(continuation_value(bm, hyp1, f, StoppingSet.empty(), grid41).values == 0)

    def test_J_b_matches_one_barrier_oracle(self, bm, hyp1, two_barrier, grid41):
        p, f, _ = two_barrier
        J = continuation_value(bm, hyp1, f, StoppingSet.points(p.b), grid41[::16]).values
        ref = [one_barrier_J(x, p.b, p.d, p.beta) for x in grid41[::16]]
        assert np.max(np.abs(J - ref)) < 1e-10

    def test_outside_domain(self, hyp1, two_barrier):
        _, f, _ = two_barrier
        m = constant_model(domain=(0.0, 1.0))
        with pytest.raises(ValueError):
            continuation_value(m, hyp1, f, StoppingSet.points(0.5), np.array([1.5]))

    def test_engines_agree(self, bm, hyp1, two_barrier):
        p, f, _ = two_barrier
        x = np.linspace(-3.0, 4.0, 141)
        for S in (StoppingSet.points(p.b), StoppingSet.points(p.a, p.b)):
            Jc = continuation_value(bm, hyp1, f, S, x, method="closed").values
            Jo = continuation_value(bm, hyp1, f, S, x, method="ode").values
            assert np.max(np.abs(Jc - Jo)) < 1e-6

    def test_closed_requires_constant(self, hyp1, two_barrier):
        _, f, _ = two_barrier
        m = general_model(lambda x: 0.0 * x, lambda x: 1.0 + 0.1 * np.tanh(x))
        with pytest.raises(NotImplementedError):
            continuation_value(m, hyp1, f, StoppingSet.points(1.0), np.array([0.0]), method="closed")

    def test_per_rate_values(self, bm, hyp1, two_barrier):
        p, f, _ = two_barrier
        res = continuation_value(bm, hyp1, f, StoppingSet.points(p.b), np.array([-1.0, 0.5]), per_rate=True)
        assert res.per_rate_values.shape == (64, 2)
        assert np.allclose(hyp1.weights @ res.per_rate_values, res.values, atol=1e-15)

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64])
    def test_sandwich(self, hyp1, two_barrier, grid41, n):
        p, f, k = two_barrier
        x = grid41[grid41 < p.b]
        Jn = continuation_value(constant_model(-1.0 / n), hyp1, f, StoppingSet.points(p.b), x).values
        Jb = k.J_b(x)
        assert np.all(Jb * np.exp(-2 * np.abs(p.b - x) / n) < Jn)
        assert np.all(Jn < Jb)

    def test_monotone_convergence(self, hyp1, two_barrier, grid41):
        p, f, k = two_barrier
        x = grid41[grid41 < p.b]
        prev = None
        for n in (2, 4, 8, 16, 32, 64):
            Jn = continuation_value(constant_model(-1.0 / n), hyp1, f, StoppingSet.points(p.b), x).values
            gap = np.max(np.abs(k.J_b(x) - Jn))
            if prev is not None:
                assert gap < prev
            prev = gap


model_st = st.sampled_from(["bm", "drift", "general"])


def _model(name):
    if name == "bm":
        return constant_model(0.0)
    if name == "drift":
        return constant_model(-0.3, 1.4)
    return general_model(lambda x: 0.2 * np.sin(x), lambda x: 1.0 + 0.3 * np.cos(x) ** 2)


@settings(max_examples=25, deadline=None)
@given(name=model_st, pts=st.lists(st.floats(-2, 2), min_size=1, max_size=3), beta=st.floats(0.2, 5),
       height=st.floats(0.1, 2.0), centre=st.floats(-1.5, 1.5))
def test_value_bounds_and_boundary_consistency(name, pts, beta, height, centre):
    m = _model(name)
    D = hyperbolic_measure(beta, 32)
    f = tent_reward(height, centre)
    S = StoppingSet.points(*sorted(set(np.round(pts, 3))))
    grid = np.unique(np.concatenate([np.linspace(-3, 3, 61), [c[0] for c in S]]))
    J = continuation_value(m, D, f, S, grid).values
    assert np.all(J >= -1e-12) and np.all(J <= f.sup + 1e-9)
    inside = S.contains(grid)
    assert np.max(np.abs(J[inside] - f(grid[inside])), initial=0.0) <= 1e-10
