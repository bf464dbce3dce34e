"""
空间速度螺旋时间导数测试
"""

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screwkin.core.chain import DerivativeStack, joint_screws_spatial, make_chain, spatial_twist
from screwkin.core.derivatives import (
    acceleration_closed_form,
    chainwise_derivatives,
    jerk_closed_form,
    jerk_closed_form_final,
    partial_screw,
    partial_screw_sequence,
    screw_time_derivatives,
    twist_derivatives_closed,
    twist_derivatives_recursive,
)
from screwkin.core.multiindex import MultiIndex
from screwkin.core.screw import UnitScrew, screw_bracket
from screwkin.errors import DerivativeOrderError

from conftest import SEEDS, central, random_chain, random_stack, shifted_stack


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_recursion_matches_finite_difference(seed, order):
    """D^l V 等于 D^{l−1} V 沿多项式轨迹的中心差分"""
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 5)
    state = random_stack(rng, 5, order + 2)

    def lower(t):
        stack = shifted_stack(state, t)
        return twist_derivatives_recursive(chain, stack, order - 1).twists[order - 1]

    fd = central(lower)
    exact = twist_derivatives_recursive(chain, state, order).twists[order]
    assert np.allclose(exact, fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("seed", SEEDS)
def test_screw_derivatives_match_finite_difference(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 4)
    state = random_stack(rng, 4, 4)
    dS = screw_time_derivatives(chain, state, 2)
    fd = central(lambda t: joint_screws_spatial(chain, shifted_stack(state, t).q))
    assert np.allclose(dS[1], fd, atol=1e-7)
    fd2 = central(lambda t: screw_time_derivatives(chain, shifted_stack(state, t), 1)[1])
    assert np.allclose(dS[2], fd2, atol=1e-6)


def test_first_twist_is_jacobian_times_velocity(rng):
    chain = random_chain(rng, 6)
    state = random_stack(rng, 6, 1)
    d = twist_derivatives_recursive(chain, state, 0)
    for i in range(1, 7):
        assert np.allclose(d.twist(i), spatial_twist(chain, state, i))


@pytest.mark.parametrize("seed", SEEDS)
def test_closed_recursion_matches_general(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 6)
    state = random_stack(rng, 6, 4)
    closed = twist_derivatives_closed(chain, state, 3)
    general = twist_derivatives_recursive(chain, state, 3)
    assert np.allclose(closed.twists, general.twists, atol=1e-10)
    assert np.allclose(closed.screws, general.screws[:4], atol=1e-10)


@pytest.mark.parametrize("seed", SEEDS)
def test_closed_forms_match_recursion(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 5)
    state = random_stack(rng, 5, 3)
    d = twist_derivatives_recursive(chain, state, 2)
    for i in (1, 3, 5):
        assert np.allclose(acceleration_closed_form(chain, state, i), d.twist(i, 1), atol=1e-10)
        assert np.allclose(jerk_closed_form(chain, state, i), d.twist(i, 2), atol=1e-9)
        assert np.allclose(jerk_closed_form_final(chain, state, i), d.twist(i, 2), atol=1e-9)


def test_closed_recursion_order_limit(rng):
    chain = random_chain(rng, 3)
    with pytest.raises(DerivativeOrderError):
        twist_derivatives_closed(chain, random_stack(rng, 3, 5), 4)


def test_insufficient_stack(rng):
    chain = random_chain(rng, 3)
    with pytest.raises(DerivativeOrderError):
        twist_derivatives_recursive(chain, random_stack(rng, 3, 2), 2)


def test_kernel_needs_velocity():
    with pytest.raises(DerivativeOrderError):
        chainwise_derivatives(np.zeros((2, 6)), np.zeros((1, 2)))


class TestPartialScrews:

    @pytest.mark.parametrize("seed", SEEDS)
    def test_first_partials(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        for j in range(1, 6):
            e = np.eye(5)[j - 1]
            fd = central(lambda t: joint_screws_spatial(chain, q + t * e))
            for i in range(1, 6):
                a = MultiIndex.unit(5, j)
                assert np.allclose(partial_screw(chain, q, i, a), fd[i - 1], atol=1e-7)

    @pytest.mark.parametrize("seed", SEEDS[:10])
    def test_mixed_second_partial(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        e1, e3 = np.eye(5)[0], np.eye(5)[2]
        h = 1e-4
        fd = (joint_screws_spatial(chain, q + h * e1 + h * e3)
              - joint_screws_spatial(chain, q + h * e1 - h * e3)
              - joint_screws_spatial(chain, q - h * e1 + h * e3)
              + joint_screws_spatial(chain, q - h * e1 - h * e3)) / (4 * h * h)
        a = MultiIndex.from_sequence(5, [1, 3])
        assert np.allclose(partial_screw(chain, q, 5, a), fd[4], atol=1e-6)

    def test_order_independent(self, rng):
        chain = random_chain(rng, 6)
        q = rng.uniform(-1, 1, 6)
        assert np.allclose(partial_screw_sequence(chain, q, 6, [3, 1, 2, 1]),
                           partial_screw_sequence(chain, q, 6, [1, 1, 2, 3]))

    def test_later_joints_vanish(self, fourbar):
        a = MultiIndex.unit(4, 4)
        assert np.all(partial_screw(fourbar.chain, np.zeros(4), 4, a) == 0.0)


@pytest.mark.slow
def test_recursion_scales_linearly():
    rng = np.random.default_rng(7)
    sizes = [8, 64, 512]
    times = []
    for n in sizes:
        chain = random_chain(rng, n, frames=False)
        state = random_stack(rng, n, 4)
        best = np.inf
        for _ in range(3):
            start = time.perf_counter()
            twist_derivatives_recursive(chain, state, 3)
            best = min(best, time.perf_counter() - start)
        times.append(best)
    coeffs = np.polyfit(sizes, times, 1)
    residual = np.max(np.abs(np.polyval(coeffs, sizes) - times))
    assert residual < 0.25 * times[-1]


class TestBracketStructure:

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6))
    def test_jerk_two_joints_by_hand(self, rates):
        """两关节在 q=0 处：V̈ = S₁q⃛₁ + S₂q⃛₂ + [S₁,S₂](2q̇₁q̈₂ + q̈₁q̇₂) + [S₁,[S₁,S₂]]q̇₁²q̇₂"""
        chain = make_chain([UnitScrew.revolute([0, 0, 1], [0, 0, 0]),
                            UnitScrew.helical([1, 0, 0], [0, 1, 0], 0.2)], "rh")
        q1, q2, q3 = np.reshape(rates, (3, 2))
        state = DerivativeStack(np.zeros(2), (q1, q2, q3))
        S1, S2 = joint_screws_spatial(chain, np.zeros(2))
        b = screw_bracket(S1, S2)
        expected = (S1 * q3[0] + S2 * q3[1] + b * (2 * q1[0] * q2[1] + q2[0] * q1[1])
                    + screw_bracket(S1, b) * q1[0] ** 2 * q1[1])
        assert np.allclose(jerk_closed_form(chain, state), expected, atol=1e-12)
        assert np.allclose(twist_derivatives_recursive(chain, state, 2).twist(2, 2), expected, atol=1e-12)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_acceleration_in_bracket_span(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 3)
        state = random_stack(rng, 3, 2)
        S = joint_screws_spatial(chain, state.q)
        d = twist_derivatives_recursive(chain, state, 1)
        for i in (2, 3):
            span = [S[j] for j in range(i)] + [screw_bracket(S[k], S[j]) for j in range(i) for k in range(j)]
            B = np.array(span).T
            coeffs = np.linalg.lstsq(B, d.twist(i, 1), rcond=None)[0]
            assert np.allclose(B @ coeffs, d.twist(i, 1), atol=1e-10)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_bracket_leibniz_rule(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 4)
        state = random_stack(rng, 4, 2)
        dS = screw_time_derivatives(chain, state, 1)
        fd = central(lambda t: screw_bracket(*joint_screws_spatial(chain, shifted_stack(state, t).q)[[1, 3]]))
        exact = screw_bracket(dS[1, 1], dS[0, 3]) + screw_bracket(dS[0, 1], dS[1, 3])
        assert np.allclose(exact, fd, atol=1e-6)
