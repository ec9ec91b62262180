"""Finite dyadic tree geometry, weights, and sparse families.

Everything lives on the unit interval [0, 1).  A tree of depth L has
2**L leaves; the cube (level, index) is [index * 2**-level,
(index + 1) * 2**-level).  Weights are strictly positive leaf densities;
all cube averages and masses derive from per-level mass pyramids built
by pairwise summation, so parent masses are exactly the sum of child
masses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DENSITY_FLOOR = 1e-12


class DomainError(ValueError):
    """Input outside an operation's stated domain."""


class NumericError(RuntimeError):
    """An iterative routine failed to converge or overflowed."""


@dataclass(frozen=True)
class TreeGeometry:
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise DomainError(f"depth must be >= 0, got {self.depth}")

    @property
    def n_leaves(self) -> int:
        return 1 << self.depth

    def cubes(self):
        """All cubes, top-down, left-to-right."""
        for level in range(self.depth + 1):
            for index in range(1 << level):
                yield CubeId(level, index)

    def contains(self, cube: "CubeId") -> bool:
        return 0 <= cube.level <= self.depth and 0 <= cube.index < (1 << cube.level)


@dataclass(frozen=True, order=True)
class CubeId:
    level: int
    index: int

    @property
    def measure(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def children(self):
        return (CubeId(self.level + 1, 2 * self.index),
                CubeId(self.level + 1, 2 * self.index + 1))

    @property
    def parent(self) -> "CubeId":
        if self.level == 0:
            raise DomainError("root has no parent")
        return CubeId(self.level - 1, self.index // 2)

    def contains_cube(self, other: "CubeId") -> bool:
        """True iff other is a (weak) dyadic subcube of self."""
        shift = other.level - self.level
        return shift >= 0 and (other.index >> shift) == self.index

    def leaf_slice(self, depth: int) -> slice:
        """Slice of the depth-`depth` leaf array covered by this cube."""
        width = 1 << (depth - self.level)
        return slice(self.index * width, (self.index + 1) * width)


def _mass_pyramid(leaves: np.ndarray, depth: int) -> list[np.ndarray]:
    """Per-level cube masses; pyramid[l][j] = integral over cube (l, j)."""
    pyramid = [None] * (depth + 1)
    pyramid[depth] = leaves * 2.0 ** (-depth)
    for level in range(depth - 1, -1, -1):
        below = pyramid[level + 1]
        pyramid[level] = below[0::2] + below[1::2]
    return pyramid


class WeightPair:
    """A couple of strictly positive leaf densities plus an exponent.

    Immutable by convention: no method mutates the arrays after
    construction, and the mass pyramids are precomputed eagerly.
    """

    def __init__(self, geometry: TreeGeometry, w_leaves, sigma_leaves, p: float):
        w = np.asarray(w_leaves, dtype=float)
        s = np.asarray(sigma_leaves, dtype=float)
        n = geometry.n_leaves
        if w.shape != (n,) or s.shape != (n,):
            raise DomainError(f"leaf vectors must have length {n}")
        if not (np.all(w > 0) and np.all(s > 0)):
            raise DomainError("leaf densities must be strictly positive")
        if not (np.isfinite(w).all() and np.isfinite(s).all()):
            raise DomainError("leaf densities must be finite")
        if not (1.0 < p < np.inf):
            raise DomainError(f"p must lie in (1, inf), got {p}")
        self.geometry = geometry
        self.w_leaves = w
        self.sigma_leaves = s
        self.p = float(p)
        self.w_masses = _mass_pyramid(w, geometry.depth)
        self.sigma_masses = _mass_pyramid(s, geometry.depth)

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1.0)

    def swapped(self) -> "WeightPair":
        """The dual pair (sigma, w) with the conjugate exponent."""
        return WeightPair(self.geometry, self.sigma_leaves, self.w_leaves, self.p_dual)

    # -- per-cube quantities ------------------------------------------------

    def _check(self, cube: CubeId):
        if not self.geometry.contains(cube):
            raise DomainError(f"cube {cube} outside depth-{self.geometry.depth} tree")

    def w_mass(self, cube: CubeId) -> float:
        self._check(cube)
        return float(self.w_masses[cube.level][cube.index])

    def sigma_mass(self, cube: CubeId) -> float:
        self._check(cube)
        return float(self.sigma_masses[cube.level][cube.index])

    def w_avg(self, cube: CubeId) -> float:
        return self.w_mass(cube) * 2.0 ** cube.level

    def sigma_avg(self, cube: CubeId) -> float:
        return self.sigma_mass(cube) * 2.0 ** cube.level

    def w_avg_level(self, level: int) -> np.ndarray:
        return self.w_masses[level] * 2.0 ** level

    def sigma_avg_level(self, level: int) -> np.ndarray:
        return self.sigma_masses[level] * 2.0 ** level


def average(weights, cube: CubeId, geometry: TreeGeometry) -> float:
    """Mean of the leaf densities under `cube` (uniform leaf measure)."""
    leaves = np.asarray(weights, dtype=float)
    if leaves.shape != (geometry.n_leaves,):
        raise DomainError("weights length must equal the leaf count")
    if not geometry.contains(cube):
        raise DomainError(f"cube {cube} outside depth-{geometry.depth} tree")
    return float(np.mean(leaves[cube.leaf_slice(geometry.depth)]))


def mass(weights, cube: CubeId, geometry: TreeGeometry) -> float:
    return average(weights, cube, geometry) * cube.measure


@dataclass(frozen=True)
class SparseFamily:
    cubes: frozenset
    eta: float
    packing: float = field(compare=False)

    @staticmethod
    def build(cubes, eta: float, geometry: TreeGeometry) -> "SparseFamily":
        cubes = frozenset(cubes)
        if not cubes:
            raise DomainError("sparse family must be nonempty")
        for c in cubes:
            if not geometry.contains(c):
                raise DomainError(f"cube {c} outside depth-{geometry.depth} tree")
        return SparseFamily(cubes, float(eta), packing_constant(cubes, geometry))

    def sorted_cubes(self) -> list[CubeId]:
        return sorted(self.cubes)

    def descendants_in(self, R: CubeId) -> list[CubeId]:
        return sorted(q for q in self.cubes if R.contains_cube(q))


def packing_constant(cubes, geometry: TreeGeometry) -> float:
    """Carleson packing constant: max over family cubes Q of
    sum of |Q'| over family cubes Q' contained in Q, divided by |Q|."""
    cubes = set(cubes)
    if not cubes:
        raise DomainError("packing constant of an empty family")
    depth = geometry.depth
    # acc[l][j] = total measure of family cubes inside cube (l, j)
    acc = [np.zeros(1 << level) for level in range(depth + 1)]
    for c in cubes:
        acc[c.level][c.index] += c.measure
    for level in range(depth - 1, -1, -1):
        acc[level] += acc[level + 1][0::2] + acc[level + 1][1::2]
    best = 0.0
    for c in cubes:
        best = max(best, acc[c.level][c.index] / c.measure)
    return float(best)


def verify_sparse(family: SparseFamily, eta: float, geometry: TreeGeometry) -> bool:
    """Operative definition of eta-sparseness: packing <= 1/eta."""
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    return packing_constant(family.cubes, geometry) <= 1.0 / eta + 1e-12


STRATEGIES = ("tower", "random_greedy", "all_above_level", "stopping_time")


def generate_sparse(geometry: TreeGeometry, strategy: str, eta: float, seed: int,
                    sigma_leaves=None) -> SparseFamily:
    """Deterministic sparse-family generator.

    strategy is one of "tower", "random_greedy", "all_above_level",
    "all_above_level:<m>", "stopping_time".  stopping_time derives its
    threshold a from eta via eta = 1 - 1/a and needs sigma_leaves.
    """
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    cap = 1.0 / eta
    depth = geometry.depth

    name, _, arg = strategy.partition(":")
    if name == "tower":
        cubes, total = [], 0.0
        for level in range(depth + 1):
            total += 2.0 ** (-level)
            if total > cap + 1e-12:
                break
            cubes.append(CubeId(level, 0))
        return SparseFamily.build(cubes, eta, geometry)

    if name == "all_above_level":
        m = int(arg) if arg else min(depth, int(np.floor(cap + 1e-12)) - 1)
        m = max(0, min(m, depth))
        if m + 1 > cap + 1e-12:
            raise DomainError(
                f"all_above_level {m} has packing {m + 1} > 1/eta = {cap}")
        cubes = [CubeId(l, j) for l in range(m + 1) for j in range(1 << l)]
        return SparseFamily.build(cubes, eta, geometry)

    if name == "random_greedy":
        rng = np.random.default_rng(np.uint64(seed))
        # subtree[l][j]: measure of admitted family cubes inside cube (l, j)
        subtree = [np.zeros(1 << level) for level in range(depth + 1)]
        admitted = set()
        for level in range(depth + 1):
            order = rng.permutation(1 << level)
            for j in order:
                cand = CubeId(level, int(j))
                m_c = cand.measure
                if subtree[level][j] + m_c > cap * m_c + 1e-15:
                    continue
                ok = True
                for anc_level in range(level):
                    anc_j = int(j) >> (level - anc_level)
                    if CubeId(anc_level, anc_j) in admitted:
                        if subtree[anc_level][anc_j] + m_c > cap * 2.0 ** (-anc_level) + 1e-15:
                            ok = False
                            break
                if not ok:
                    continue
                admitted.add(cand)
                for anc_level in range(level + 1):
                    subtree[anc_level][int(j) >> (level - anc_level)] += m_c
        if not admitted:
            admitted.add(CubeId(0, 0))
        return SparseFamily.build(admitted, eta, geometry)

    if name == "stopping_time":
        if sigma_leaves is None:
            raise DomainError("stopping_time strategy needs sigma_leaves")
        if eta >= 1.0:
            raise DomainError("stopping_time needs eta < 1 (a = 1/(1-eta) > 1)")
        a = 1.0 / (1.0 - eta)
        return stopping_time_family(sigma_leaves, a, geometry)

    raise DomainError(f"unknown strategy {strategy!r}")


def stopping_time_family(sigma_leaves, a: float, geometry: TreeGeometry) -> SparseFamily:
    """Principal cubes of sigma: starting from the root, select maximal
    descendants whose average exceeds a times the current stopping cube's
    average, recursively.  The result is (1 - 1/a)-sparse by construction."""
    if not a > 1.0:
        raise DomainError(f"stopping threshold a must exceed 1, got {a}")
    s = np.asarray(sigma_leaves, dtype=float)
    masses = _mass_pyramid(s, geometry.depth)
    avgs = [masses[l] * 2.0 ** l for l in range(geometry.depth + 1)]
    selected = []
    stack = [CubeId(0, 0)]
    while stack:
        stop = stack.pop()
        selected.append(stop)
        threshold = a * avgs[stop.level][stop.index]
        # maximal strict descendants with average above the threshold
        frontier = list(stop.children) if stop.level < geometry.depth else []
        while frontier:
            c = frontier.pop()
            if avgs[c.level][c.index] > threshold:
                stack.append(c)
            elif c.level < geometry.depth:
                frontier.extend(c.children)
    return SparseFamily.build(selected, 1.0 - 1.0 / a, geometry)


# -- instance (de)serialization --------------------------------------------


@dataclass
class Instance:
    pair: WeightPair
    family: SparseFamily
    sparse_config: dict
    clamped: int = 0

    def to_json_dict(self) -> dict:
        return {
            "depth": self.pair.geometry.depth,
            "p": self.pair.p,
            "w_leaves": self.pair.w_leaves.tolist(),
            "sigma_leaves": self.pair.sigma_leaves.tolist(),
            "sparse": self.sparse_config,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _clamp(vec: np.ndarray) -> tuple[np.ndarray, int]:
    low = vec < DENSITY_FLOOR
    if np.any(vec < 0):
        raise DomainError("leaf densities must be nonnegative")
    n = int(low.sum())
    if n:
        vec = np.where(low, DENSITY_FLOOR, vec)
    return vec, n


def instance_from_dict(data: dict) -> Instance:
    geometry = TreeGeometry(int(data["depth"]))
    w, cw = _clamp(np.asarray(data["w_leaves"], dtype=float))
    s, cs = _clamp(np.asarray(data["sigma_leaves"], dtype=float))
    pair = WeightPair(geometry, w, s, float(data["p"]))
    sparse = data["sparse"]
    if "cubes" in sparse:
        cubes = [CubeId(int(l), int(j)) for l, j in sparse["cubes"]]
        family = SparseFamily.build(cubes, float(sparse.get("eta", 1.0)), geometry)
    else:
        family = generate_sparse(geometry, sparse["strategy"], float(sparse["eta"]),
                                 int(sparse.get("seed", 0)), sigma_leaves=s)
    return Instance(pair, family, sparse, clamped=cw + cs)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
