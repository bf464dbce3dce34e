"""
螺旋代数测试
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from screwkin.config import Config, set_config
from screwkin.core.screw import (
    Pose,
    UnitScrew,
    ad_matrix,
    adjoint,
    adjoint_inv,
    adjoint_inv_rate,
    adjoint_rate,
    adjoint_rotation,
    adjoint_translation,
    exp_screw,
    exp_so3,
    exp_so3_forms,
    exp_twist,
    hat,
    rel_pose,
    screw_bracket,
    skew,
    vee,
)
from screwkin.errors import ModelError

from conftest import central, random_joint, random_pose

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
screws = st.lists(finite, min_size=6, max_size=6).map(np.array)


class TestBracket:
    """螺旋积"""

    def test_4c_axes(self):
        Y1 = np.array([1.0, 0, 0, 0, 0, 0])
        Y3 = np.array([0.0, 1, 0, 0, 0, 0])
        assert np.allclose(screw_bracket(Y1, Y3), [0, 0, 1, 0, 0, 0])

    @given(screws, screws)
    def test_matches_matrix_commutator(self, X, Y):
        M = hat(X) @ hat(Y) - hat(Y) @ hat(X)
        assert np.allclose(hat(screw_bracket(X, Y)), M, atol=1e-10)

    @given(screws, screws)
    def test_antisymmetric(self, X, Y):
        assert np.allclose(screw_bracket(X, Y), -screw_bracket(Y, X), atol=1e-12)

    @given(screws, screws, screws)
    def test_jacobi_identity(self, X, Y, Z):
        total = (screw_bracket(X, screw_bracket(Y, Z)) + screw_bracket(Y, screw_bracket(Z, X))
                 + screw_bracket(Z, screw_bracket(X, Y)))
        assert np.allclose(total, 0.0, atol=1e-10)

    @given(screws, screws, screws, finite)
    def test_bilinear(self, X, Y, Z, a):
        lhs = screw_bracket(a * X + Y, Z)
        assert np.allclose(lhs, a * screw_bracket(X, Z) + screw_bracket(Y, Z), atol=1e-10)

    @given(screws, screws)
    def test_ad_matrix(self, X, Y):
        assert np.allclose(ad_matrix(X) @ Y, screw_bracket(X, Y), atol=1e-12)


class TestHatVee:

    @given(screws)
    def test_roundtrip(self, X):
        assert np.allclose(vee(hat(X)), X)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ModelError):
            vee(np.eye(3))

    def test_rejects_non_skew(self):
        M = hat(np.arange(6.0))
        M[0, 1] += 1.0
        with pytest.raises(ModelError):
            vee(M)

    def test_rejects_bottom_row(self):
        M = hat(np.arange(6.0))
        M[3, 3] = 1.0
        with pytest.raises(ModelError):
            vee(M)


class TestExponential:

    @pytest.mark.parametrize("seed", range(10))
    def test_exp_screw_matches_expm(self, seed):
        rng = np.random.default_rng(seed)
        s = random_joint(rng)
        phi = float(rng.uniform(-2, 2))
        assert np.allclose(exp_screw(s, phi).matrix, expm(hat(s.to_screwvec()) * phi), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_exp_twist_matches_expm(self, seed):
        X = np.random.default_rng(seed).standard_normal(6)
        assert np.allclose(exp_twist(X).matrix, expm(hat(X)), atol=1e-12)

    def test_pure_translation_twist(self):
        X = np.array([0, 0, 0, 1.0, 2.0, 3.0])
        assert np.allclose(exp_twist(X, 2.0).r, [2, 4, 6])

    def test_rodrigues_forms_agree(self):
        x = np.array([0.3, -1.2, 0.7])
        f1, f2, f3 = exp_so3_forms(x)
        assert np.allclose(f1, f2, atol=1e-14)
        assert np.allclose(f1, f3, atol=1e-14)
        assert np.allclose(f1, exp_so3(x), atol=1e-14)

    def test_rodrigues_forms_reject_zero(self):
        with pytest.raises(ModelError):
            exp_so3_forms(np.zeros(3))

    @pytest.mark.parametrize("phi", [1e-3, 2e-4, 9e-5, 1e-8])
    def test_small_angle_series(self, phi):
        x = phi * np.array([0.6, 0.0, 0.8])
        assert np.allclose(exp_so3(x), expm(skew(x)), atol=1e-14)

    def test_revolute_rotz(self):
        s = UnitScrew.revolute([0, 0, 1], [0, 0, 0])
        R = exp_screw(s, np.pi / 2).R
        assert np.allclose(R, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


class TestUnitScrew:

    def test_prismatic_screw(self):
        assert np.allclose(UnitScrew.prismatic([0, 1, 0]).to_screwvec(), [0, 0, 0, 0, 1, 0])

    def test_helical_screw(self):
        s = UnitScrew.helical([0, 0, 1], [1, 0, 0], 0.2)
        assert np.allclose(s.to_screwvec(), [0, 0, 1, 0, -1, 0.2])

    def test_rejects_non_unit_axis(self):
        with pytest.raises(ModelError):
            UnitScrew.revolute([0, 0, 2])

    def test_pitch_only_for_helical(self):
        with pytest.raises(ModelError):
            UnitScrew([0, 0, 1], [0, 0, 0], h=0.1)


class TestAdjoint:

    @pytest.mark.parametrize("seed", range(10))
    def test_conjugation(self, seed):
        rng = np.random.default_rng(seed)
        C = random_pose(rng)
        X = rng.standard_normal(6)
        lhs = C.matrix @ hat(X) @ C.inverse().matrix
        assert np.allclose(hat(adjoint(C) @ X), lhs, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_bracket_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        C = random_pose(rng)
        X, Y = rng.standard_normal(6), rng.standard_normal(6)
        Ad = adjoint(C)
        assert np.allclose(Ad @ screw_bracket(X, Y), screw_bracket(Ad @ X, Ad @ Y), atol=1e-10)

    def test_inverse_and_blocks(self):
        rng = np.random.default_rng(3)
        C = random_pose(rng)
        assert np.allclose(adjoint(C) @ adjoint_inv(C), np.eye(6), atol=1e-12)
        assert np.allclose(adjoint_translation(C.r) @ adjoint_rotation(C.R), adjoint(C), atol=1e-12)

    def test_rates(self):
        rng = np.random.default_rng(4)
        C0 = random_pose(rng)
        Vs = rng.standard_normal(6)

        def pose_at(t):
            return exp_twist(Vs, t) @ C0

        d_ad = central(lambda t: adjoint(pose_at(t)))
        d_adinv = central(lambda t: adjoint_inv(pose_at(t)))
        assert np.allclose(adjoint_rate(C0, Vs), d_ad, atol=1e-8)
        assert np.allclose(adjoint_inv_rate(C0, Vs), d_adinv, atol=1e-8)


class TestPose:

    def test_validate_rejects_non_orthogonal(self):
        with pytest.raises(ModelError):
            Pose(np.diag([1.0, 1.0, 1.1]), np.zeros(3)).validate()

    def test_from_matrix_shape(self):
        with pytest.raises(ModelError):
            Pose.from_matrix(np.eye(3))

    def test_apply_and_matrix(self):
        rng = np.random.default_rng(6)
        C = random_pose(rng)
        p = rng.standard_normal(3)
        assert np.allclose(C.apply(p), (C.matrix @ np.append(p, 1.0))[:3])
        shifted = Pose.translation([1.0, 2.0, 3.0]) @ C
        assert np.allclose(shifted.apply(p), C.apply(p) + [1.0, 2.0, 3.0])

    def test_rel_pose(self):
        rng = np.random.default_rng(5)
        C1, C2 = random_pose(rng), random_pose(rng)
        assert (C1 @ rel_pose(C1, C2)).allclose(C2, atol=1e-12)

    @settings(max_examples=30)
    @given(st.lists(finite, min_size=3, max_size=3))
    def test_exp_so3_orthonormal(self, x):
        R = exp_so3(np.array(x))
        assert Pose(R, np.zeros(3)).is_valid(1e-9)


class TestConfiguredTolerances:

    def test_small_angle_switches_series(self):
        x = np.array([0.0, 0.0, 1.0])
        closed = exp_so3(x)
        set_config(Config().with_tolerances(small_angle=10.0))
        series = exp_so3(x)
        assert not np.array_equal(closed, series)
        assert np.allclose(series, closed, atol=1e-5)

    def test_tol_orth_governs_pose_check(self):
        pose = Pose(np.diag([1.0, 1.0, 1.0 + 1e-6]), np.zeros(3))
        assert not pose.is_valid()
        set_config(Config().with_tolerances(tol_orth=1e-3))
        assert pose.is_valid()
        assert pose.validate() is pose

    def test_tol_orth_governs_vee(self):
        M = hat(np.array([0.1, 0.2, 0.3, 1.0, 2.0, 3.0]))
        M[0, 1] += 1e-6
        with pytest.raises(ModelError):
            vee(M)
        set_config(Config().with_tolerances(tol_orth=1e-3))
        assert np.allclose(vee(M), [0.1, 0.2, 0.3, 1.0, 2.0, 3.0], atol=1e-5)
