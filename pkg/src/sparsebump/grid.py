"""Dyadic tree geometry over the unit cube [0,1)^d.

Cubes are half-open products prod_i [j_i 2^-k, (j_i+1) 2^-k), so the 2^{dN}
leaves at level N partition the root exactly and all measure bookkeeping is
exact in binary floating point.  Supported dimensions are 1 and 2.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterator

MAX_LEAF_LEVEL = {1: 24, 2: 12}


@dataclass(frozen=True)
class GridConfig:
    """Ambient dyadic grid: dimension d and leaf level N."""

    dimension: int
    leaf_level: int

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        n_max = MAX_LEAF_LEVEL[self.dimension]
        if not 1 <= self.leaf_level <= n_max:
            raise ValueError(
                f"leaf_level must be in [1, {n_max}] for d={self.dimension}, "
                f"got {self.leaf_level}"
            )

    @property
    def n_leaves(self) -> int:
        return 2 ** (self.dimension * self.leaf_level)

    @property
    def leaf_volume(self) -> float:
        return 2.0 ** (-self.dimension * self.leaf_level)

    @property
    def n_cubes(self) -> int:
        d, n = self.dimension, self.leaf_level
        return sum(2 ** (d * k) for k in range(n + 1))

    def leaf_shape(self) -> tuple[int, ...]:
        return (2**self.leaf_level,) * self.dimension

    def level_shape(self, level: int) -> tuple[int, ...]:
        return (2**level,) * self.dimension


@dataclass(frozen=True)
class DyadicCube:
    """A dyadic subcube of [0,1)^d, identified by level k and index j.

    The cube is prod_i [j_i 2^-k, (j_i+1) 2^-k); its volume is exactly
    2^{-dk}.  Any two dyadic cubes are either nested or disjoint.
    """

    level: int
    index: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        if isinstance(self.index, int):
            object.__setattr__(self, "index", (self.index,))
        if len(self.index) not in (1, 2):
            raise ValueError("index must be a 1- or 2-tuple")
        for j in self.index:
            if not 0 <= j < 2**self.level:
                raise ValueError(f"index {self.index} out of range at level {self.level}")

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.dimension * self.level)

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("root cube has no parent")
        return DyadicCube(self.level - 1, tuple(j >> 1 for j in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        """The ancestor of this cube at the given coarser level."""
        if not 0 <= level <= self.level:
            raise ValueError(f"ancestor level {level} not in [0, {self.level}]")
        shift = self.level - level
        return DyadicCube(level, tuple(j >> shift for j in self.index))

    @property
    def text(self) -> str:
        """Report form: "k:j" for d=1, "k:(j1,j2)" for d=2."""
        if self.dimension == 1:
            return f"{self.level}:{self.index[0]}"
        return f"{self.level}:({self.index[0]},{self.index[1]})"

    def __str__(self) -> str:
        return self.text


_CUBE_1D = re.compile(r"^(\d+):(\d+)$")
_CUBE_2D = re.compile(r"^(\d+):\((\d+),(\d+)\)$")


def parse_cube(text: str) -> DyadicCube:
    """Inverse of DyadicCube.text."""
    m = _CUBE_1D.match(text.strip())
    if m:
        return DyadicCube(int(m.group(1)), (int(m.group(2)),))
    m = _CUBE_2D.match(text.strip())
    if m:
        return DyadicCube(int(m.group(1)), (int(m.group(2)), int(m.group(3))))
    raise ValueError(f"cannot parse cube text {text!r}")


def children(cube: DyadicCube, grid: GridConfig) -> list[DyadicCube]:
    """The 2^d dyadic children partitioning the cube.

    Raises for a leaf cube (level = N): no children exist on the grid.
    """
    if cube.level >= grid.leaf_level:
        raise ValueError(f"no children: {cube.text} is a leaf cube")
    halves = [(2 * j, 2 * j + 1) for j in cube.index]
    return [
        DyadicCube(cube.level + 1, combo)
        for combo in itertools.product(*halves)
    ]


def contains(outer: DyadicCube, inner: DyadicCube) -> bool:
    """True iff inner is a subset of outer (reflexive)."""
    if inner.dimension != outer.dimension:
        raise ValueError("cubes of different dimension")
    shift = inner.level - outer.level
    if shift < 0:
        return False
    return all(ji >> shift == jo for ji, jo in zip(inner.index, outer.index))


def enumerate_cubes(grid: GridConfig) -> Iterator[DyadicCube]:
    """Every cube of levels 0..N exactly once, in (level, index) order."""
    for k in range(grid.leaf_level + 1):
        for combo in itertools.product(range(2**k), repeat=grid.dimension):
            yield DyadicCube(k, combo)


def leaf_slice(cube: DyadicCube, grid: GridConfig):
    """Numpy index selecting the cube's leaves from a leaf-shaped array."""
    f = 2 ** (grid.leaf_level - cube.level)
    slices = tuple(slice(j * f, (j + 1) * f) for j in cube.index)
    return slices[0] if grid.dimension == 1 else slices


def leaf_count(cube: DyadicCube, grid: GridConfig) -> int:
    return 2 ** (grid.dimension * (grid.leaf_level - cube.level))


def root_cube(grid: GridConfig) -> DyadicCube:
    return DyadicCube(0, (0,) * grid.dimension)
