"""Multiway partition instances, integral partitions and symmetry groups."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SubmodularOracle, oracle_from_dict
from .errors import CapacityError, DomainError


@dataclass
class MultiwayInstance:
    """Partition ``V`` into ``k`` blocks, block ``i`` holding terminal ``terminals[i]``,
    minimizing ``sum_i f(A_i)``."""

    oracle: SubmodularOracle
    terminals: list[int]

    def __post_init__(self):
        self.terminals = [int(t) for t in self.terminals]
        if len(self.terminals) < 2:
            raise DomainError("need at least two terminals")
        if len(set(self.terminals)) != len(self.terminals):
            raise DomainError("terminals must be distinct")
        if min(self.terminals) < 0 or max(self.terminals) >= self.oracle.n:
            raise DomainError("terminal outside the ground set")

    @property
    def k(self) -> int:
        return len(self.terminals)

    @property
    def n(self) -> int:
        return self.oracle.n

    def free_vertices(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.terminals] = False
        return np.flatnonzero(mask)

    def cost(self, labels) -> float:
        return Partition(np.asarray(labels), self.k).cost(self.oracle)

    def to_dict(self) -> dict:
        return {"oracle": self.oracle.to_dict(), "terminals": list(self.terminals)}

    @classmethod
    def from_dict(cls, d: dict) -> "MultiwayInstance":
        return cls(oracle_from_dict(d["oracle"]), d["terminals"])


@dataclass
class Partition:
    """``labels[v]`` is the block (terminal index) of vertex ``v``."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise DomainError("labels must lie in range(k)")

    def blocks(self) -> list[list[int]]:
        return [np.flatnonzero(self.labels == i).tolist() for i in range(self.k)]

    def cost(self, oracle: SubmodularOracle) -> float:
        # fsum keeps integral totals such as 3 * (4/3) exact
        return math.fsum(oracle.value_batch(self.labels[None, :] == np.arange(self.k)[:, None]))

    def respects(self, terminals) -> bool:
        return all(self.labels[t] == i for i, t in enumerate(terminals))

    def to_dict(self) -> dict:
        return {"labels": self.labels.tolist(), "k": self.k}


def validate_assignment(x, terminals, tol: float = 1e-9) -> np.ndarray:
    """Check that ``x`` (``n x k``) is a feasible fractional assignment."""
    x = np.asarray(x, dtype=float)
    k = len(terminals)
    if x.ndim != 2 or x.shape[1] != k:
        raise DomainError(f"assignment must have shape (n, {k})")
    if not np.all(np.isfinite(x)):
        raise DomainError("assignment has non-finite entries")
    if x.min() < -tol:
        raise DomainError("assignment has negative entries")
    if np.abs(x.sum(axis=1) - 1).max() > tol:
        raise DomainError("assignment rows must sum to one")
    for i, t in enumerate(terminals):
        if abs(x[t, i] - 1) > tol:
            raise DomainError(f"terminal {t} must be pinned to label {i}")
    return x


def integral_assignment(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    x = np.zeros((labels.size, k))
    x[np.arange(labels.size), labels] = 1.0
    return x


@dataclass
class SymmetrySpec:
    """A permutation group on the ground set, given by generators."""

    generators: list = field(default_factory=list)
    n: int | None = None

    def __post_init__(self):
        gens = [np.asarray(g, dtype=np.int64) for g in self.generators]
        if self.n is None:
            if not gens:
                raise DomainError("ground set size is required when there are no generators")
            self.n = gens[0].size
        for g in gens:
            if g.shape != (self.n,) or not np.array_equal(np.sort(g), np.arange(self.n)):
                raise DomainError("every generator must be a bijection of the ground set")
        self.generators = gens

    def orbits(self) -> list[list[int]]:
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for g in self.generators:
            for v in range(self.n):
                a, b = find(v), find(int(g[v]))
                if a != b:
                    parent[max(a, b)] = min(a, b)
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values())

    def orbit_index(self) -> np.ndarray:
        idx = np.empty(self.n, dtype=np.int64)
        for o, members in enumerate(self.orbits()):
            idx[members] = o
        return idx

    def group_elements(self, cap: int = 50000) -> list[np.ndarray]:
        """All group elements by closure under the generators."""
        ident = np.arange(self.n)
        seen = {ident.tobytes(): ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for p in frontier:
                for g in self.generators:
                    q = g[p]
                    key = q.tobytes()
                    if key not in seen:
                        seen[key] = q
                        nxt.append(q)
                        if len(seen) > cap:
                            raise CapacityError(f"symmetry group exceeds {cap} elements")
            frontier = nxt
        return list(seen.values())

    def apply(self, g, members: np.ndarray) -> np.ndarray:
        """Image of membership rows under permutation ``g`` (v -> g[v])."""
        members = np.atleast_2d(members)
        out = np.zeros_like(members)
        out[:, g] = members
        return out

    def check_invariance(self, inst: MultiwayInstance, samples: int = 1000, seed: int = 0, tol: float = 1e-9):
        """Sampled audit that each generator fixes terminals and preserves ``f``.

        Returns the largest cost discrepancy found.
        """
        if self.n != inst.n:
            raise DomainError("symmetry acts on a different ground set")
        for g in self.generators:
            for t in inst.terminals:
                if g[t] != t:
                    raise DomainError(f"generator moves terminal {t}")
        rng = np.random.Generator(np.random.Philox(seed))
        dens = rng.random((samples, 1))
        sets = rng.random((samples, self.n)) < dens
        base = inst.oracle.value_batch(sets)
        worst = 0.0
        for g in self.generators:
            worst = max(worst, float(np.abs(inst.oracle.value_batch(self.apply(g, sets)) - base).max()))
        if worst > tol:
            raise DomainError(f"instance is not invariant under the symmetry (discrepancy {worst:.3g})")
        return worst

    def to_dict(self) -> dict:
        return {"n": self.n, "generators": [g.tolist() for g in self.generators]}

    @classmethod
    def from_dict(cls, d: dict) -> "SymmetrySpec":
        return cls(d["generators"], d["n"])
