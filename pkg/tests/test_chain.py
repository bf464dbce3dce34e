"""
运动链测试
"""

import numpy as np
import pytest
from scipy.linalg import expm

from screwkin.core.chain import (
    Chain,
    DerivativeStack,
    body_poses,
    closure_residual,
    forward_poses,
    jacobian_spatial,
    joint_screws_spatial,
    kinematic_map,
    relative_pose,
    spatial_twist,
    spatial_twists_recursive,
)
from screwkin.core.screw import adjoint, exp_screw, hat, vee
from screwkin.errors import DerivativeOrderError, IndexRangeError, ModelError

from conftest import SEEDS, central, random_chain, random_stack


def test_fourbar_first_link(fourbar):
    f1 = kinematic_map(fourbar.chain, [np.pi / 2, 0, 0, 0], 1)
    assert np.allclose(f1.R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    assert np.allclose(f1.r, 0.0, atol=1e-15)


def test_fourbar_reference_is_identity(fourbar):
    assert kinematic_map(fourbar.chain, np.zeros(4)).allclose(
        forward_poses(fourbar.chain, np.zeros(4))[0])
    assert closure_residual(fourbar.chain, np.zeros(4)) == 0.0


def test_fourbar_second_screw(fourbar):
    q = [np.pi / 2, 0, 0, 0]
    S = joint_screws_spatial(fourbar.chain, q)
    Y = fourbar.chain.screws
    assert np.allclose(S[1], adjoint(exp_screw(fourbar.chain.joints[0], np.pi / 2)) @ Y[1])


@pytest.mark.parametrize("seed", SEEDS[:10])
def test_product_of_exponentials(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 5)
    q = rng.uniform(-1, 1, 5)
    M = np.eye(4)
    for Y, qj in zip(chain.screws, q):
        M = M @ expm(hat(Y) * qj)
    assert np.allclose(kinematic_map(chain, q).matrix, M, atol=1e-11)


@pytest.mark.parametrize("seed", SEEDS)
def test_jacobian_is_directional_derivative(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 6)
    q = rng.uniform(-1, 1, 6)
    x = rng.standard_normal(6)
    f0_inv = kinematic_map(chain, q).inverse().matrix
    df = central(lambda t: kinematic_map(chain, q + t * x).matrix)
    assert np.allclose(vee(df @ f0_inv, tol=1e-6), jacobian_spatial(chain, q) @ x, atol=1e-7)


def test_jacobian_of_link_zeroes_later_columns(rng):
    chain = random_chain(rng, 5)
    J = jacobian_spatial(chain, rng.uniform(-1, 1, 5), 3)
    assert np.all(J[:, 3:] == 0.0)


@pytest.mark.parametrize("seed", SEEDS[:10])
def test_twist_sum_and_recursion(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 6)
    state = random_stack(rng, 6, 1)
    V = spatial_twists_recursive(chain, state)
    for i in range(1, 7):
        assert np.allclose(V[i - 1], spatial_twist(chain, state, i))


def test_relative_and_body_poses(rng):
    chain = random_chain(rng, 4)
    q = rng.uniform(-1, 1, 4)
    Cs = body_poses(chain, q)
    assert (Cs[0] @ relative_pose(chain, q, 1, 3)).allclose(Cs[2], atol=1e-12)
    assert kinematic_map(chain, q, 2, body_frame=True).allclose(Cs[1])


class TestValidation:

    def test_empty_chain(self):
        with pytest.raises(ModelError):
            Chain(())

    def test_body_frame_count(self, rng):
        chain = random_chain(rng, 3)
        with pytest.raises(ModelError):
            Chain(chain.joints, chain.body_frames[:2])

    def test_link_index(self, fourbar):
        with pytest.raises(IndexRangeError):
            kinematic_map(fourbar.chain, np.zeros(4), 5)

    def test_q_length(self, fourbar):
        with pytest.raises(ModelError):
            fourbar.chain.check_q(np.zeros(3))

    def test_stack_lengths(self):
        with pytest.raises(ModelError):
            DerivativeStack(np.zeros(3), (np.zeros(2),))

    def test_stack_order(self):
        state = DerivativeStack.from_arrays(np.zeros(2), np.ones(2))
        with pytest.raises(DerivativeOrderError):
            state.d(2)
        with pytest.raises(DerivativeOrderError):
            state.require(3)


def test_subchain_and_scale(rng):
    chain = random_chain(rng, 5)
    sub = chain.subchain(3)
    q = rng.uniform(-1, 1, 5)
    assert sub.n == 3
    assert kinematic_map(sub, q[:3]).allclose(kinematic_map(chain, q, 3), atol=1e-14)
    assert chain.characteristic_length >= 0.0


def test_stack_scaling():
    state = DerivativeStack.from_arrays([0.0], [1.0], [1.0], [1.0])
    scaled = state.scaled(2.0)
    assert np.allclose(scaled.as_array()[:, 0], [0, 2, 4, 8])
    assert DerivativeStack.linear([0.0, 1.0], [1.0, 2.0], 3).order == 3
