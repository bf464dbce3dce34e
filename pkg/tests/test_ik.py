"""
高阶逆运动学测试
"""

import numpy as np
import pytest

from screwkin.core.chain import DerivativeStack, jacobian_spatial, joint_screws_spatial, make_chain
from screwkin.core.derivatives import twist_derivatives_recursive
from screwkin.core.screw import UnitScrew
from screwkin.errors import DerivativeOrderError, ModelError, SingularityError, ZeroScrewError
from screwkin.ik import (
    _screw_pinv,
    generalized_ik,
    generalized_ik_accel_geometric,
    ik_derivatives,
    ik_explicit_low_order,
)

from conftest import random_chain, random_stack


def well_conditioned(seed, n=6, order=4):
    """条件数小于 1e4 的随机方阵链与导数栈"""
    rng = np.random.default_rng(seed)
    while True:
        chain = random_chain(rng, n)
        state = random_stack(rng, n, order)
        if np.linalg.cond(jacobian_spatial(chain, state.q)) < 1e4:
            return chain, state


def end_effector(chain, state, k):
    return twist_derivatives_recursive(chain, state, k - 1).twists[:, -1]


class TestIKDerivatives:

    @pytest.mark.parametrize("seed", range(10))
    def test_roundtrip(self, seed):
        chain, state = well_conditioned(seed)
        V = end_effector(chain, state, 4)
        result = ik_derivatives(chain, state.q, V)
        assert result.order == 4
        assert np.allclose(result.q_derivs, state.as_array()[1:], rtol=1e-8, atol=1e-8)
        assert np.allclose(result.twists[:, -1], V, atol=1e-9)
        assert result.condition < 1e4

    @pytest.mark.parametrize("seed", range(10))
    def test_explicit_formulas_agree(self, seed):
        chain, state = well_conditioned(seed)
        V = end_effector(chain, state, 4)
        general = ik_derivatives(chain, state.q, V).q_derivs
        for k in range(1, 5):
            assert np.allclose(ik_explicit_low_order(chain, state.q, V[:k]), general[:k],
                               rtol=1e-8, atol=1e-8)

    def test_explicit_order_limit(self):
        chain, state = well_conditioned(0, order=5)
        with pytest.raises(DerivativeOrderError):
            ik_explicit_low_order(chain, state.q, end_effector(chain, state, 5))

    def test_arm_work_config(self, arm6r):
        q = arm6r.config("work")
        state = DerivativeStack(q, (np.full(6, 0.2), np.linspace(-0.3, 0.3, 6)))
        V = end_effector(arm6r.chain, state, 2)
        result = ik_derivatives(arm6r.chain, q, V)
        assert np.allclose(result.stack().as_array(), state.as_array(), atol=1e-8)
        data = result.to_dict()
        assert len(data["q_derivs"]) == 2

    def test_singular_arm(self, arm6r):
        with pytest.raises(SingularityError) as exc:
            ik_derivatives(arm6r.chain, np.zeros(6), np.ones((1, 6)))
        assert exc.value.exit_code == 3
        assert exc.value.sigma_min < 1e-10

    def test_non_square(self, rng):
        chain = random_chain(rng, 5)
        with pytest.raises(ModelError):
            ik_derivatives(chain, np.zeros(5), np.ones((1, 6)))

    def test_order_limit(self, rng):
        chain = random_chain(rng, 6)
        with pytest.raises(DerivativeOrderError):
            ik_derivatives(chain, np.zeros(6), np.ones((9, 6)))

    def test_bad_twist_width(self, rng):
        chain = random_chain(rng, 6)
        with pytest.raises(ModelError):
            ik_derivatives(chain, np.zeros(6), np.ones((2, 5)))


class TestTaskRows:

    @pytest.fixture
    def planar(self):
        joints = [UnitScrew.revolute([0, 0, 1], [x, 0, 0]) for x in (0.0, 1.0, 2.0)]
        return make_chain(joints, "planar3r")

    def test_planar_rows(self, planar):
        state = DerivativeStack([0.3, 0.6, -0.4], ([0.5, -0.2, 0.1], [0.3, 0.3, -0.6], [0.1, 0.0, 0.2]))
        V = end_effector(planar, state, 3)
        result = ik_derivatives(planar, state.q, V, rows=[3, 4, 5])
        assert np.allclose(result.q_derivs, state.as_array()[1:], atol=1e-10)
        explicit = ik_explicit_low_order(planar, state.q, V, rows=[3, 4, 5])
        assert np.allclose(explicit, result.q_derivs, atol=1e-10)

    @pytest.mark.parametrize("rows", [[3, 3, 4], [0, 1, 2], [3, 4, 7]])
    def test_invalid_rows(self, planar, rows):
        with pytest.raises(ModelError):
            ik_derivatives(planar, [0.3, 0.6, -0.4], np.ones((1, 6)), rows=rows)


class TestGeneralizedIK:

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_recovers_joint_derivatives(self, rng, n):
        chain = random_chain(rng, n)
        state = random_stack(rng, n, 4)
        twists = twist_derivatives_recursive(chain, state, 3).twists
        assert np.allclose(generalized_ik(chain, state.q, twists), state.as_array()[1:], atol=1e-9)

    def test_geometric_acceleration(self, rng):
        chain = random_chain(rng, 5)
        state = random_stack(rng, 5, 2)
        twists = twist_derivatives_recursive(chain, state, 1).twists
        assert np.allclose(generalized_ik_accel_geometric(chain, state.q, twists), state.d(2), atol=1e-10)

    def test_least_squares_for_inconsistent_data(self, rng):
        chain = random_chain(rng, 4)
        q = rng.uniform(-1, 1, 4)
        twists = rng.standard_normal((1, 4, 6))
        qd = generalized_ik(chain, q, twists)[0]
        S = joint_screws_spatial(chain, q)
        assert np.isclose(qd[0], S[0] @ twists[0, 0] / (S[0] @ S[0]))

    def test_shape_checked(self, rng):
        chain = random_chain(rng, 4)
        with pytest.raises(ModelError):
            generalized_ik(chain, np.zeros(4), np.zeros((2, 3, 6)))
        with pytest.raises(ModelError):
            generalized_ik_accel_geometric(chain, np.zeros(4), np.zeros((1, 4, 6)))

    def test_zero_screw(self):
        with pytest.raises(ZeroScrewError):
            _screw_pinv(np.zeros(6), 2)
