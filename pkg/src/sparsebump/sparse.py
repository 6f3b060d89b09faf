"""Lambda-sparse families of dyadic cubes.

A family is lambda-sparse when, inside every member Q0, the maximal proper
members occupy at most a lambda-fraction of |Q0|.  The exceptional set E_Q
is the part of Q not covered by proper family members; the E_Q are pairwise
disjoint and |E_Q| >= (1-lambda)|Q|.  The Carleson estimate certified here
is the explicit-constant form

    sum_{Q in S, Q ⊆ Q0} sigma(Q)  <=  rho(Q0; sigma) sigma(Q0) / (1-lambda).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import (
    DyadicCube,
    GridConfig,
    children,
    contains,
    enumerate_cubes,
    leaf_slice,
    parse_cube,
    root_cube,
)
from .maximal import rho
from .weights import Weight, average, mass


def _nearest_ancestor_in(cube: DyadicCube, members: set[DyadicCube]) -> DyadicCube | None:
    """Deepest proper ancestor of `cube` among `members` (dyadic chain walk)."""
    c = cube
    while c.level > 0:
        c = c.parent()
        if c in members:
            return c
    return None


def verify_sparse(cubes, lam: float) -> dict:
    """Check lambda-sparseness: per member, sum the volumes of its maximal
    proper sub-members and compare with lam * volume.

    Returns {ok, worst_ratio, witness}; witness is the cube attaining the
    worst ratio (None when every member has no proper sub-members).
    """
    members = set(cubes)
    if not members:
        raise ValueError("empty cube collection")
    child_volume: dict[DyadicCube, float] = {q: 0.0 for q in members}
    for q in members:
        anc = _nearest_ancestor_in(q, members)
        if anc is not None:
            child_volume[anc] += q.volume
    worst_ratio = 0.0
    witness = None
    for q in sorted(members, key=lambda c: (c.level, c.index)):
        ratio = child_volume[q] / q.volume
        if ratio > worst_ratio:
            worst_ratio = ratio
            witness = q
    return {"ok": worst_ratio <= lam, "worst_ratio": worst_ratio, "witness": witness}


@dataclass(frozen=True)
class SparseFamily:
    """A lambda-sparse collection of dyadic cubes inside one declared root.

    The root must itself belong to the family and contain every member
    (equivalently: the family has a unique maximal cube).
    """

    grid: GridConfig
    cubes: frozenset[DyadicCube]
    lam: float
    root: DyadicCube = field(init=False)

    def __post_init__(self) -> None:
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must be in (0,1), got {self.lam}")
        cubes = frozenset(self.cubes)
        if not cubes:
            raise ValueError("family must be nonempty")
        object.__setattr__(self, "cubes", cubes)
        maximal = [q for q in cubes if _nearest_ancestor_in(q, cubes) is None]
        if len(maximal) != 1:
            raise ValueError("family must have a unique maximal cube (the root)")
        object.__setattr__(self, "root", maximal[0])
        for q in cubes:
            if q.level > self.grid.leaf_level:
                raise ValueError(f"cube {q.text} below leaf level")
        check = verify_sparse(cubes, self.lam)
        if not check["ok"]:
            raise ValueError(
                f"collection is not {self.lam}-sparse: worst ratio "
                f"{check['worst_ratio']} at {check['witness'].text}"
            )

    def __len__(self) -> int:
        return len(self.cubes)

    def __contains__(self, cube: DyadicCube) -> bool:
        return cube in self.cubes

    def sorted_cubes(self) -> list[DyadicCube]:
        return sorted(self.cubes, key=lambda c: (c.level, c.index))

    def members_inside(self, cube: DyadicCube) -> list[DyadicCube]:
        return [q for q in self.sorted_cubes() if contains(cube, q)]

    @cached_property
    def _owner(self) -> np.ndarray:
        """Per leaf, the position (in sorted order) of the minimal family
        cube containing it; -1 outside the root."""
        owner = np.full(self.grid.leaf_shape(), -1, dtype=np.int64)
        order = self.sorted_cubes()
        # assign deepest-first so the minimal containing cube wins
        for pos, q in sorted(enumerate(order), key=lambda t: -t[1].level):
            sel = leaf_slice(q, self.grid)
            block = owner[sel]
            owner[sel] = np.where(block == -1, pos, block)
        owner.setflags(write=False)
        return owner

    @cached_property
    def exceptional(self) -> dict[DyadicCube, np.ndarray]:
        """E_Q as flat leaf-index arrays, keyed by family cube.

        A leaf lies in E_Q exactly when Q is the minimal family cube
        containing it, so the E_Q are pairwise disjoint by construction.
        """
        order = self.sorted_cubes()
        flat = self._owner.ravel()
        out = {}
        for pos, q in enumerate(order):
            out[q] = np.flatnonzero(flat == pos)
        return out

    def exceptional_mass(self, weight: Weight) -> dict[DyadicCube, float]:
        """Masses weight(E_Q) for every family cube."""
        leaf_mass = weight.mass_levels[self.grid.leaf_level].ravel()
        return {q: float(leaf_mass[idx].sum()) for q, idx in self.exceptional.items()}

    def exceptional_volume(self, cube: DyadicCube) -> float:
        return len(self.exceptional[cube]) * self.grid.leaf_volume


def exceptional_sets(family: SparseFamily) -> dict[DyadicCube, np.ndarray]:
    """E_Q = Q minus the union of proper family members inside Q."""
    return family.exceptional


def stopping_family(sigma: Weight, big_lambda: float, root: DyadicCube) -> SparseFamily:
    """Corona construction: starting from `root`, the stopping children of a
    selected Q are the maximal Q' ⊊ Q with <sigma>_{Q'} > big_lambda * <sigma>_Q.

    Chebyshev gives lambda-sparseness with lambda = 1/big_lambda; the result
    is verified on output by the SparseFamily constructor.
    """
    if big_lambda <= 1:
        raise ValueError(f"stopping ratio must exceed 1, got {big_lambda}")
    grid = sigma.grid
    if mass(sigma, root) <= 0:
        raise ValueError(f"degenerate weight on cube {root.text}")
    selected = [root]
    stack = [root]
    while stack:
        q = stack.pop()
        threshold = big_lambda * average(sigma, q)
        walk = [c for c in children(q, grid)] if q.level < grid.leaf_level else []
        while walk:
            c = walk.pop()
            if average(sigma, c) > threshold:
                selected.append(c)
                stack.append(c)
            elif c.level < grid.leaf_level:
                walk.extend(children(c, grid))
    return SparseFamily(grid, frozenset(selected), 1.0 / big_lambda)


def random_sparse(grid: GridConfig, lam: float, seed: int, target_size: int) -> SparseFamily:
    """Greedy randomized family: visit non-root cubes in a seeded random
    order and accept each iff lambda-sparseness is preserved; rejected
    candidates are discarded permanently.  Stops at target_size or when the
    candidate pool is exhausted."""
    if not 0 < lam < 1:
        raise ValueError(f"lambda must be in (0,1), got {lam}")
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    root = root_cube(grid)
    accepted = {root}
    # incremental state: maximal proper sub-members per member + their volume sum
    kids: dict[DyadicCube, set[DyadicCube]] = {root: set()}
    kid_volume: dict[DyadicCube, float] = {root: 0.0}
    if target_size > 1:
        pool = [q for q in enumerate_cubes(grid) if q.level > 0]
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(pool))
        for idx in order:
            cand = pool[idx]
            if cand in accepted:
                continue
            anc = _nearest_ancestor_in(cand, accepted)
            absorbed = {q for q in kids[anc] if contains(cand, q)}
            absorbed_volume = sum(q.volume for q in absorbed)
            new_anc_volume = kid_volume[anc] - absorbed_volume + cand.volume
            if new_anc_volume > lam * anc.volume or absorbed_volume > lam * cand.volume:
                continue
            accepted.add(cand)
            kids[anc] -= absorbed
            kids[anc].add(cand)
            kid_volume[anc] = new_anc_volume
            kids[cand] = absorbed
            kid_volume[cand] = absorbed_volume
            if len(accepted) >= target_size:
                break
    return SparseFamily(grid, frozenset(accepted), lam)


def carleson_check(family: SparseFamily, sigma: Weight, q0: DyadicCube) -> dict:
    """Explicit-constant Carleson estimate at Q0 in S:

        lhs = sum of sigma(Q) over family members Q ⊆ Q0,
        rhs = rho(Q0; sigma) * sigma(Q0) / (1 - lambda),

    with the contract lhs <= rhs (ratio <= 1) on every valid instance.
    """
    if q0 not in family:
        raise ValueError(f"cube {q0.text} is not in the family")
    if mass(sigma, q0) <= 0:
        raise ValueError(f"degenerate weight on cube {q0.text}")
    lhs = sum(mass(sigma, q) for q in family.members_inside(q0))
    rhs = rho(sigma, q0) * mass(sigma, q0) / (1.0 - family.lam)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs}


# --- serialization ----------------------------------------------------------

def family_to_json(family: SparseFamily) -> str:
    return json.dumps(
        {
            "dimension": family.grid.dimension,
            "leaf_level": family.grid.leaf_level,
            "lambda": family.lam,
            "root": family.root.text,
            "cubes": [q.text for q in family.sorted_cubes()],
        },
        sort_keys=True,
    )


def family_from_json(text: str) -> SparseFamily:
    record = json.loads(text)
    grid = GridConfig(record["dimension"], record["leaf_level"])
    cubes = frozenset(parse_cube(t) for t in record["cubes"])
    family = SparseFamily(grid, cubes, record["lambda"])
    declared_root = parse_cube(record["root"])
    if family.root != declared_root:
        raise ValueError("declared root does not match the family's maximal cube")
    return family
