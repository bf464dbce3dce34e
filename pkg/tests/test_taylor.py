"""
运动学映射高阶微分、Taylor 近似与 c-空间多项式方程组测试
"""

import numpy as np
import pytest

from screwkin.core.chain import kinematic_map
from screwkin.core.screw import Pose, exp_so3, hat
from screwkin.errors import ClosureViolationError, DerivativeOrderError
from screwkin.taylor import (
    PolySystem,
    cspace_poly_system,
    h2_explicit,
    homogeneous_coefficients,
    km_differentials,
    km_differentials_leibniz,
    km_taylor_eval,
    project_to_se3,
    sample_variety,
    screw_differential,
    screw_differential_explicit,
)

from conftest import FOURC_FAMILIES, SEEDS, central, random_chain


class TestKMDifferentials:

    @pytest.mark.parametrize("seed", SEEDS)
    def test_against_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        x = rng.standard_normal(5)
        d = km_differentials(chain, q, 4, x)
        fd1 = central(lambda t: kinematic_map(chain, q + t * x).matrix)
        assert np.allclose(d.df[1], fd1, atol=1e-7)
        for k in range(2, 5):
            fd = central(lambda t: km_differentials(chain, q + t * x, k - 1, x).df[k - 1])
            assert np.allclose(d.df[k], fd, rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("seed", SEEDS[:10])
    def test_inverse_differentials(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 4)
        q = rng.uniform(-1, 1, 4)
        x = rng.standard_normal(4)
        d = km_differentials(chain, q, 2, x)
        fd = central(lambda t: kinematic_map(chain, q + t * x).inverse().matrix)
        assert np.allclose(d.dfinv[1], fd, atol=1e-7)
        # d²(f f⁻¹) = 0
        total = d.df[2] @ d.dfinv[0] + 2 * d.df[1] @ d.dfinv[1] + d.df[0] @ d.dfinv[2]
        assert np.allclose(total, 0.0, atol=1e-10)

    @pytest.mark.parametrize("seed", SEEDS[:10])
    def test_leibniz_recursion_agrees(self, seed):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng, 6)
        q = rng.uniform(-1, 1, 6)
        x = rng.standard_normal(6)
        assert np.allclose(km_differentials(chain, q, 5, x).df,
                           km_differentials_leibniz(chain, q, 5, x), atol=1e-9)

    def test_h2_explicit(self, rng):
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        x = rng.standard_normal(5)
        assert np.allclose(h2_explicit(chain, q, x), km_differentials(chain, q, 2, x).h[2], atol=1e-12)

    def test_order_limit(self, fourbar):
        with pytest.raises(DerivativeOrderError):
            km_differentials(fourbar.chain, np.zeros(4), 9, np.ones(4))

    def test_4c_first_differential(self, fourc):
        x = np.arange(1.0, 9.0)
        d = km_differentials(fourc.chain, np.zeros(8), 1, x)
        H1 = [x[0] + x[4], x[2] + x[6], 0, x[1] + x[5], x[3] + x[7], 0]
        assert np.allclose(d.df[1], hat(H1))

    def test_4c_second_differential(self, fourc):
        x = np.array([0.3, -0.2, 0.5, 0.1, 0.7, 0.4, -0.6, 0.2])
        d = km_differentials(fourc.chain, np.zeros(8), 2, x)
        h = 1e-4
        fd = (kinematic_map(fourc.chain, h * x).matrix - 2 * np.eye(4)
              + kinematic_map(fourc.chain, -h * x).matrix) / h ** 2
        assert np.allclose(d.df[2], fd, atol=1e-6)
        # h^(2) 的第三个分量为 x1(x3+x7) + x5(x7−x3)
        H2 = [x[0] * (x[2] + x[6]) + x[4] * (x[6] - x[2])]
        assert np.isclose(d.h[2][1, 0], H2[0])


class TestScrewDifferentials:

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_explicit_sum_matches_recursion(self, rng, k):
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        x = rng.standard_normal(5)
        for i in range(1, 6):
            assert np.allclose(screw_differential_explicit(chain, q, i, k, x),
                               screw_differential(chain, q, i, k, x), atol=1e-10)

    def test_first_screw_is_constant(self, rng):
        chain = random_chain(rng, 3)
        assert np.all(screw_differential(chain, np.zeros(3), 1, 2, np.ones(3)) == 0.0)


class TestTaylorEval:

    def test_error_decreases_with_order(self, rng):
        chain = random_chain(rng, 5)
        q = rng.uniform(-1, 1, 5)
        x = 0.01 * rng.standard_normal(5)
        exact = kinematic_map(chain, q + x).matrix
        errors = [np.max(np.abs(km_taylor_eval(chain, q, K, x) - exact)) for K in range(1, 5)]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-7

    def test_projection_returns_rigid_motion(self, rng):
        C = Pose(exp_so3(rng.standard_normal(3)), rng.standard_normal(3))
        M = C.matrix + 1e-3 * rng.standard_normal((4, 4))
        P = project_to_se3(M)
        R = P[:3, :3]
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0)
        assert np.allclose(P[3], [0, 0, 0, 1])
        assert np.allclose(project_to_se3(C.matrix), C.matrix, atol=1e-12)


class TestPolySystem:

    def test_add_drops_zero_terms(self):
        system = PolySystem(["x1", "x2"])
        assert not system.add({(1, 0): 1e-14}, "zero")
        assert system.add({(1, 0): 1.0, (0, 1): 1e-14}, "x1")
        assert system.equations == [{(1, 0): 1.0}]

    def test_to_text(self):
        system = PolySystem(["x1", "x2"])
        system.add({(0, 2): -2.0, (1, 0): 1.0})
        assert system.to_text() == "1*x1 - 2*x2^2\n"

    def test_jacobian(self):
        system = PolySystem(["x1", "x2", "x3"])
        system.add({(2, 1, 0): 3.0, (0, 0, 3): -1.0})
        system.add({(1, 1, 1): 2.0})
        x = np.array([0.4, -1.3, 0.8])
        fd = np.column_stack([central(lambda t, e=e: system.evaluate(x + t * e)) for e in np.eye(3)])
        assert np.allclose(system.jacobian(x), fd, atol=1e-8)

    def test_homogeneous_coefficients(self):
        def p(x):
            return 3 * x[0] ** 2 * x[1] - x[2] ** 3 + 2 * x[0] * x[1] * x[2]

        coeffs = homogeneous_coefficients(p, 3, 3)
        assert np.isclose(coeffs[(2, 1, 0)], 3.0)
        assert np.isclose(coeffs[(0, 0, 3)], -1.0)
        assert np.isclose(coeffs[(1, 1, 1)], 2.0)
        others = [v for a, v in coeffs.items() if a not in {(2, 1, 0), (0, 0, 3), (1, 1, 1)}]
        assert np.allclose(others, 0.0)


class TestCSpaceSystem:

    def test_first_order_is_kernel(self, fourc):
        system = cspace_poly_system(fourc.chain, np.zeros(8), 1)
        assert len(system.equations) == 6
        assert all(sum(m) == 1 for eq in system.equations for m in eq)
        assert np.linalg.matrix_rank(system.jacobian(np.zeros(8))) == 4
        assert np.allclose(system.evaluate([1, 2, 3, 4, -1, -2, -3, -4]), 0.0)

    @pytest.mark.parametrize("family", range(3))
    def test_second_order_vanishes_on_motion_families(self, fourc, family):
        system = cspace_poly_system(fourc.chain, np.zeros(8), 2)
        for a, b in [(0.3, -0.7), (1.1, 0.4)]:
            assert np.allclose(system.evaluate(FOURC_FAMILIES[family](a, b)), 0.0, atol=1e-9)

    def test_second_order_rejects_mixed_rotation(self, fourc):
        system = cspace_poly_system(fourc.chain, np.zeros(8), 2)
        x = np.array([1, 0, 1, 0, -1, 0, -1, 0], dtype=float)
        assert np.max(np.abs(system.evaluate(x))) > 0.5

    def test_requires_closure(self, fourbar):
        with pytest.raises(ClosureViolationError):
            cspace_poly_system(fourbar.chain, [0.1, 0, 0, 0], 1)

    def test_variety_dimension(self, fourc):
        system = cspace_poly_system(fourc.chain, np.zeros(8), 1)
        probe = sample_variety(system, seeds=5)
        assert probe.dimension == 4
        assert all(r < 1e-10 for r in probe.residuals)
