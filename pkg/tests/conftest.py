"""
共享夹具：随包模型、随机运动链、多项式轨迹上的导数栈
"""

from math import factorial

import numpy as np
import pytest

from screwkin.config import Config, set_config
from screwkin.core.chain import DerivativeStack, make_chain
from screwkin.core.screw import Pose, UnitScrew, exp_so3
from screwkin.models import load_model

SEEDS = list(range(20))

# 4C 的三族精确运动（展开变量顺序 Rx Px Ry Py Rx Px Ry Py）
FOURC_FAMILIES = [
    lambda a, b: np.array([0, a, 0, b, 0, -a, 0, -b], dtype=float),
    lambda a, b: np.array([a, b, 0, 0, -a, -b, 0, 0], dtype=float),
    lambda a, b: np.array([0, 0, a, b, 0, 0, -a, -b], dtype=float),
]


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    """测试不受用户配置文件与环境变量影响"""
    monkeypatch.delenv("SCREWKIN_TOL", raising=False)
    set_config(Config())
    yield
    set_config(None)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_joint(rng, kind=None):
    kind = kind or rng.choice(["revolute", "revolute", "prismatic", "helical"])
    e = unit(rng.standard_normal(3))
    p = 0.5 * rng.standard_normal(3)
    if kind == "revolute":
        return UnitScrew.revolute(e, p)
    if kind == "prismatic":
        return UnitScrew.prismatic(e, p)
    return UnitScrew.helical(e, p, float(rng.uniform(-0.3, 0.3)))


def random_pose(rng):
    return Pose(exp_so3(rng.standard_normal(3)), 0.5 * rng.standard_normal(3))


def random_chain(rng, n, kinds=None, frames=True, name="random"):
    """随机空间链；kinds 为 None 时混合转动、移动、螺旋副"""
    joints = [random_joint(rng, None if kinds is None else kinds[j % len(kinds)]) for j in range(n)]
    body = [random_pose(rng) for _ in range(n)] if frames else None
    return make_chain(joints, name, body)


def random_stack(rng, n, order, scale=0.7):
    q = rng.uniform(-1.0, 1.0, n)
    return DerivativeStack(q, tuple(scale * rng.standard_normal(n) for _ in range(order)))


def shifted_stack(stack: DerivativeStack, t: float) -> DerivativeStack:
    """
    把导数栈看作多项式轨迹 q(t) = Σ q^(l) tˡ/l! 的 Taylor 系数，返回 t 时刻的导数栈
    """
    rows = stack.as_array()
    K = rows.shape[0] - 1
    out = []
    for m in range(K + 1):
        out.append(sum(rows[l] * t ** (l - m) / factorial(l - m) for l in range(m, K + 1)))
    return DerivativeStack(out[0], tuple(out[1:]))


def central(f, h=1e-5):
    """f 在 0 处的中心差分导数"""
    return (np.asarray(f(h)) - np.asarray(f(-h))) / (2.0 * h)


def central2(f, h=1e-4):
    return (np.asarray(f(h)) - 2.0 * np.asarray(f(0.0)) + np.asarray(f(-h))) / (h * h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fourbar():
    return load_model("fourbar")


@pytest.fixture(scope="session")
def fourc():
    return load_model("4c")


@pytest.fixture(scope="session")
def arm6r():
    return load_model("arm6r")
