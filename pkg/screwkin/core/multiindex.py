"""
多重指数工具
重复偏导数的记账与星与条枚举
"""

from math import comb, factorial, prod
from functools import lru_cache
from typing import Iterator, Sequence, Tuple
from dataclasses import dataclass

import numpy as np

from ..errors import ModelError


@dataclass(frozen=True)
class MultiIndex:
    """n 元非负整数组 a，a_j 为对第 j 个变量求导的次数"""
    a: Tuple[int, ...]

    def __post_init__(self):
        a = tuple(int(v) for v in self.a)
        if any(v < 0 for v in a):
            raise ModelError(f"多重指数不能为负: {a}")
        object.__setattr__(self, "a", a)

    @classmethod
    def unit(cls, n: int, j: int, count: int = 1) -> "MultiIndex":
        """第 j 个（1 起）分量为 count 的指数"""
        a = [0] * n
        a[j - 1] = count
        return cls(tuple(a))

    @classmethod
    def from_sequence(cls, n: int, seq: Sequence[int]) -> "MultiIndex":
        """由求导变量序列（1 起，顺序任意）得到多重指数"""
        a = [0] * n
        for j in seq:
            a[j - 1] += 1
        return cls(tuple(a))

    def __len__(self) -> int:
        return len(self.a)

    @property
    def order(self) -> int:
        return sum(self.a)

    @property
    def factorial(self) -> int:
        """a! = Π a_j!"""
        return prod(factorial(v) for v in self.a)

    @property
    def sequence(self) -> Tuple[int, ...]:
        """升序排列的求导变量 β（1 起）"""
        return tuple(j + 1 for j, v in enumerate(self.a) for _ in range(v))

    def multinomial(self) -> int:
        """|a|! / a!"""
        return factorial(self.order) // self.factorial

    def monomial(self, x: np.ndarray) -> float:
        """xᵃ"""
        return float(np.prod(np.asarray(x, dtype=float) ** np.array(self.a)))


@lru_cache(maxsize=None)
def binomial(n: int, k: int) -> int:
    return comb(n, k)


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """
    和为 total 的 parts 元非负整数组（星与条），数量为 C(total+parts−1, parts−1)
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest

