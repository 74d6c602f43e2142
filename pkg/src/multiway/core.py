"""Ground sets, submodular value oracles and their continuous extensions.

Every oracle answers batched queries: ``value_batch`` takes a boolean
membership matrix of shape ``(m, n)`` and returns ``m`` values.  All oracles
are normalized so that ``f(empty) == 0`` (the raw empty-set value is
subtracted from every query).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DomainError, NumericError, SubmodularityError

MULTILINEAR_EXACT_MAX_N = 22
_BATCH_ROWS = 1 << 16


@dataclass(frozen=True)
class GroundSet:
    n: int
    labels: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"ground set needs n >= 1, got {self.n}")
        if self.labels is not None:
            labels = tuple(tuple(x) if isinstance(x, list) else x for x in self.labels)
            if len(labels) != self.n:
                raise DomainError("one label per element is required")
            if len(set(labels)) != self.n:
                raise DomainError("element labels must be distinct")
            object.__setattr__(self, "labels", labels)

    def index(self, label) -> int:
        if self.labels is None:
            raise DomainError("ground set has no labels")
        return self.labels.index(tuple(label) if isinstance(label, list) else label)


def as_members(s, n: int) -> np.ndarray:
    """Boolean indicator of ``s``.

    ``s`` may be an ``int`` bitmask (for ``n <= 64``), a boolean vector of
    length ``n``, or an iterable of element indices.
    """
    if isinstance(s, (int, np.integer)) and not isinstance(s, bool):
        s = int(s)
        if n > 64:
            raise DomainError("bitmask sets are only supported for n <= 64")
        if s < 0 or s >> n:
            raise DomainError(f"bitmask {s:#x} has bits outside the ground set")
        return (s >> np.arange(n)) & 1 == 1
    arr = np.asarray(s)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise DomainError(f"membership vector must have shape ({n},)")
        return arr.copy()
    idx = np.asarray(list(s), dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DomainError(f"element index out of range for ground set of size {n}")
    out = np.zeros(n, dtype=bool)
    out[idx] = True
    return out


def members_to_mask(members: np.ndarray) -> np.ndarray:
    """Integer bitmask per row of a membership matrix (n <= 62)."""
    members = np.atleast_2d(members)
    weights = np.left_shift(np.int64(1), np.arange(members.shape[1], dtype=np.int64))
    return members.astype(np.int64) @ weights


def all_subsets(n: int) -> np.ndarray:
    """Membership matrix of all ``2**n`` subsets, row ``s`` is bitmask ``s``."""
    masks = np.arange(1 << n, dtype=np.int64)
    return (masks[:, None] >> np.arange(n)) & 1 == 1


class SubmodularOracle:
    """Base class for value oracles over ``{0, ..., n-1}``.

    Subclasses implement ``_raw_batch``; everything else is shared.
    """

    kind = "abstract"

    def __init__(self, ground: GroundSet):
        self.ground = ground

    @property
    def n(self) -> int:
        return self.ground.n

    def _raw_batch(self, members: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def _empty_value(self) -> float:
        return float(self._raw_batch(np.zeros((1, self.n), dtype=bool))[0])

    def value_batch(self, members: np.ndarray) -> np.ndarray:
        members = np.asarray(members, dtype=bool)
        if members.ndim != 2 or members.shape[1] != self.n:
            raise DomainError(f"membership matrix must have shape (m, {self.n})")
        if members.shape[0] == 0:
            return np.zeros(0)
        out = np.empty(members.shape[0])
        for lo in range(0, members.shape[0], _BATCH_ROWS):
            out[lo:lo + _BATCH_ROWS] = self._raw_batch(members[lo:lo + _BATCH_ROWS])
        out -= self._empty_value
        if not np.all(np.isfinite(out)):
            raise NumericError(f"{self.kind} oracle returned a non-finite value")
        return out

    def __call__(self, s) -> float:
        return float(self.value_batch(as_members(s, self.n)[None, :])[0])

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "params": self.params()}
        if self.ground.labels is not None:
            out["labels"] = [list(x) if isinstance(x, tuple) else x for x in self.ground.labels]
        return out

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class ExplicitTable(SubmodularOracle):
    """A set function stored as a table indexed by bitmask."""

    kind = "table"

    def __init__(self, values: Sequence[float], labels=None):
        values = np.asarray(values, dtype=float)
        n = int(round(np.log2(values.size))) if values.size else 0
        if values.ndim != 1 or values.size != 1 << n:
            raise DomainError("table length must be a power of two")
        if n > 24:
            raise CapacityError("explicit tables are limited to n <= 24")
        super().__init__(GroundSet(n, labels))
        self.values = values - values[0]
        if np.any(self.values < -1e-12):
            raise DomainError("set function must be nonnegative after normalization")

    def _raw_batch(self, members):
        return self.values[members_to_mask(members)]

    def params(self):
        return {"values": self.values.tolist()}


def _named_profile(name: str, r: int) -> np.ndarray:
    t = np.arange(r + 1, dtype=float)
    if name == "mc":
        # one unit per cut edge once summed over all blocks
        prof = t / r
        prof[r] = 0.0
    elif name == "partition":
        prof = ((t > 0) & (t < r)).astype(float)
    else:
        raise DomainError(f"unknown profile {name!r}")
    return prof


class HypergraphCutCount(SubmodularOracle):
    """``f(S) = sum_e w_e * phi_e(|S & e|)`` for concave profiles ``phi_e``.

    A profile is either a name (``"mc"``: ``t/|e|`` below ``|e|`` and 0 at
    ``|e|``, so each cut hyperedge costs one unit overall; ``"partition"``:
    one unit for every block that touches a cut hyperedge) or an explicit
    list ``[phi(0), ..., phi(|e|)]``.
    """

    kind = "hypergraph"

    def __init__(self, n: int, edges, weights=None, profiles="mc", labels=None):
        super().__init__(GroundSet(n, labels))
        self.edges = [tuple(int(v) for v in e) for e in edges]
        m = len(self.edges)
        self.weights = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (m,):
            raise DomainError("one weight per hyperedge is required")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise DomainError("hyperedge weights must be finite and nonnegative")
        if isinstance(profiles, str):
            profiles = [profiles] * m
        if len(profiles) != m:
            raise DomainError("one profile per hyperedge is required")
        self.profile_spec = list(profiles)
        self.profiles = []
        for e, p in zip(self.edges, profiles):
            if len(e) == 0 or len(set(e)) != len(e):
                raise DomainError(f"hyperedge {e} must be nonempty with distinct vertices")
            if min(e) < 0 or max(e) >= n:
                raise DomainError(f"hyperedge {e} references a missing vertex")
            prof = _named_profile(p, len(e)) if isinstance(p, str) else np.asarray(p, dtype=float)
            if prof.shape != (len(e) + 1,):
                raise DomainError(f"profile for {e} needs {len(e) + 1} entries")
            self.profiles.append(prof)
        width = max((len(e) for e in self.edges), default=0) + 1
        self._table = np.zeros((m, width))
        for i, prof in enumerate(self.profiles):
            self._table[i, : prof.size] = prof
        self._incidence = np.zeros((n, m), dtype=np.float32)
        for i, e in enumerate(self.edges):
            self._incidence[list(e), i] = 1

    def _counts(self, members):
        # float32 products are exact for counts below 2**24
        return members.astype(np.float32) @ self._incidence

    def _raw_batch(self, members):
        counts = self._counts(members).astype(np.int64)
        vals = np.take_along_axis(self._table[None, :, :], counts[:, :, None], axis=2)[:, :, 0]
        return vals @ self.weights

    def local_terms(self):
        """Yield ``(vertices, local oracle, weight)`` per hyperedge."""
        for e, prof, w in zip(self.edges, self.profiles, self.weights):
            r = len(e)
            yield e, HypergraphCutCount(r, [tuple(range(r))], [1.0], [prof.tolist()]), float(w)

    def params(self):
        return {
            "edges": [list(e) for e in self.edges],
            "weights": self.weights.tolist(),
            "profiles": [p if isinstance(p, str) else list(map(float, p)) for p in self.profile_spec],
        }


class GridPartition(HypergraphCutCount):
    """Row/column hypergraph on the ``k x k`` grid with ``phi(t) = t/k`` (0 at ``k``).

    Element ``(i, j)`` has index ``i * k + j``.
    """

    kind = "grid"

    def __init__(self, k: int):
        if k < 2:
            raise DomainError("grid instance needs k >= 2")
        self.k = k
        rows = [tuple(i * k + j for j in range(k)) for i in range(k)]
        cols = [tuple(i * k + j for i in range(k)) for j in range(k)]
        labels = [(i, j) for i in range(k) for j in range(k)]
        super().__init__(k * k, rows + cols, None, "mc", labels)

    def _raw_batch(self, members):
        counts = np.rint(self._counts(members)).astype(np.int64)
        k = self.k
        # integer numerator, one division: integral costs come out exact
        return np.where(counts < k, counts, 0).sum(axis=1) / k

    def params(self):
        return {"k": self.k}


def default_gamma(k: int) -> int:
    """``2 * floor(2k - sqrt(3k^2 - 2k))``, computed without float rounding."""
    # floor(2k - sqrt(d)) = 2k - ceil(sqrt(d))
    d = 3 * k * k - 2 * k
    r = int(np.floor(np.sqrt(d)))
    while r * r > d:
        r -= 1
    while (r + 1) * (r + 1) <= d:
        r += 1
    ceil_sqrt = r if r * r == d else r + 1
    return 2 * (2 * k - ceil_sqrt)


class SymmetricGamma(SubmodularOracle):
    """Symmetric grid instance with a terminal-aware piecewise-linear profile.

    ``phi(t) = t`` for ``t <= k - gamma/2`` and ``2k - t - gamma`` above.  Row
    ``i`` (and column ``i``) contributes ``phi(|S & R_i|)`` when the terminal
    ``(i, i)`` is outside ``S`` and ``phi(k - |S & R_i|)`` otherwise.
    """

    kind = "symmetric-gamma"

    def __init__(self, k: int, gamma: int | None = None):
        if k < 3:
            raise DomainError("symmetric gamma instance needs k >= 3")
        gamma = default_gamma(k) if gamma is None else int(gamma)
        if gamma % 2 or not 0 <= gamma <= k:
            raise DomainError(f"gamma must be an even integer in [0, {k}], got {gamma}")
        self.k = k
        self.gamma = gamma
        super().__init__(GroundSet(k * k, [(i, j) for i in range(k) for j in range(k)]))
        t = np.arange(k + 1, dtype=float)
        self.phi = np.where(t <= k - gamma / 2, t, 2 * k - t - gamma)
        # columns 0..k-1 are rows, k..2k-1 are columns of the grid
        self._incidence = np.zeros((k * k, 2 * k), dtype=np.float32)
        for i in range(k):
            for j in range(k):
                self._incidence[i * k + j, i] = 1
                self._incidence[i * k + j, k + j] = 1
        self._diag = np.arange(k) * (k + 1)

    def _raw_batch(self, members):
        k = self.k
        counts = (members.astype(np.float32) @ self._incidence).astype(np.int64)
        diag = members[:, self._diag]
        flipped = np.where(np.concatenate([diag, diag], axis=1), k - counts, counts)
        return self.phi[flipped].sum(axis=1)

    def local_terms(self):
        """One term per row and per column, as an explicit table."""
        k = self.k
        masks = np.arange(1 << k)
        size = np.array([bin(m).count("1") for m in masks])
        for line in range(2 * k):
            i = line % k
            verts = tuple(i * k + j for j in range(k)) if line < k else tuple(j * k + i for j in range(k))
            # the terminal (i, i) sits at local position i in both cases
            has_t = (masks >> i) & 1 == 1
            yield verts, ExplicitTable(np.where(has_t, self.phi[k - size], self.phi[size])), 1.0

    def params(self):
        return {"k": self.k, "gamma": self.gamma}


class WeightedCoverage(SubmodularOracle):
    """``f(S)`` = total weight of items covered by the elements of ``S``."""

    kind = "coverage"

    def __init__(self, sets: Sequence[Iterable[int]], weights: Sequence[float], labels=None):
        self.sets = [sorted(set(int(u) for u in s)) for s in sets]
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise DomainError("item weights must be finite and nonnegative")
        super().__init__(GroundSet(len(self.sets), labels))
        self._cover = np.zeros((self.n, self.weights.size))
        for v, s in enumerate(self.sets):
            if s and (s[0] < 0 or s[-1] >= self.weights.size):
                raise DomainError(f"element {v} covers an unknown item")
            self._cover[v, s] = 1.0

    def _raw_batch(self, members):
        covered = (members.astype(float) @ self._cover) > 0
        return covered @ self.weights

    def local_terms(self):
        """One term per item with positive weight: covered or not by its elements."""
        for u, w in enumerate(self.weights):
            verts = tuple(int(v) for v in np.flatnonzero(self._cover[:, u]))
            if w > 0 and verts:
                r = len(verts)
                yield verts, HypergraphCutCount(r, [tuple(range(r))], [1.0], [[0.0] + [1.0] * r]), float(w)

    def params(self):
        return {"sets": self.sets, "weights": self.weights.tolist()}


ORACLE_KINDS = {
    cls.kind: cls for cls in (ExplicitTable, HypergraphCutCount, GridPartition, SymmetricGamma, WeightedCoverage)
}


def oracle_from_dict(d: dict) -> SubmodularOracle:
    kind = d["kind"]
    p = d.get("params", {})
    labels = d.get("labels")
    if kind == "table":
        return ExplicitTable(p["values"], labels)
    if kind == "hypergraph":
        return HypergraphCutCount(d["n"], p["edges"], p.get("weights"), p.get("profiles", "mc"), labels)
    if kind == "grid":
        return GridPartition(p["k"])
    if kind == "symmetric-gamma":
        return SymmetricGamma(p["k"], p.get("gamma"))
    if kind == "coverage":
        return WeightedCoverage(p["sets"], p["weights"], labels)
    raise DomainError(f"unknown oracle kind {kind!r}")


def evaluate(oracle: SubmodularOracle, s) -> float:
    """``f(s)``; ``s`` is an index iterable, a bitmask or a boolean vector."""
    return oracle(s)


def _check_point(x, n) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DomainError(f"point must have shape ({n},)")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise DomainError("every coordinate must lie in [0, 1]")
    return x


def greedy_order(x: np.ndarray) -> np.ndarray:
    """Indices sorting ``x`` descending; ties broken by element index."""
    return np.lexsort((np.arange(x.size), -x))


def lovasz_extension(oracle: SubmodularOracle, x) -> float:
    """Lovasz extension by the sorted telescoping sum (exact)."""
    x = _check_point(x, oracle.n)
    order = greedy_order(x)
    prefixes = np.zeros((oracle.n, oracle.n), dtype=bool)
    for j in range(oracle.n):
        prefixes[j:, order[j]] = True
    vals = oracle.value_batch(prefixes)
    xs = np.append(x[order], 0.0)
    return float(np.dot(xs[:-1] - xs[1:], vals))


def threshold_integral(oracle: SubmodularOracle, x, lo: float = 0.0, hi: float = 1.0) -> float:
    """``int_lo^hi f({j : x_j > theta}) dtheta`` by breakpoint integration.

    An independent route to the Lovasz extension (``lo=0, hi=1``).
    """
    x = _check_point(x, oracle.n)
    pts = np.unique(np.concatenate([x, [lo, hi]]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    if pts.size < 2:
        return 0.0
    mids = (pts[:-1] + pts[1:]) / 2
    vals = oracle.value_batch(x[None, :] > mids[:, None])
    return float(np.dot(np.diff(pts), vals))


def multilinear_extension(oracle: SubmodularOracle, x, mode: str = "exact", m: int = 10000, seed: int = 0):
    """Multilinear extension ``E[f(x_hat)]`` under independent rounding.

    ``mode="exact"`` enumerates all ``2**n`` subsets (``n <= 22``);
    ``mode="sample"`` returns the mean of ``m`` Philox-seeded samples.
    """
    x = _check_point(x, oracle.n)
    n = oracle.n
    if mode == "exact":
        if n > MULTILINEAR_EXACT_MAX_N:
            raise CapacityError(f"exact multilinear extension limited to n <= {MULTILINEAR_EXACT_MAX_N}")
        total = 0.0
        chunk = 1 << min(n, 16)
        for lo in range(0, 1 << n, chunk):
            masks = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
            mem = (masks[:, None] >> np.arange(n)) & 1 == 1
            prob = np.where(mem, x, 1.0 - x).prod(axis=1)
            total += float(np.dot(prob, oracle.value_batch(mem)))
        return total
    if mode == "sample":
        rng = np.random.Generator(np.random.Philox(seed))
        mem = rng.random((m, n)) < x
        return float(oracle.value_batch(mem).mean())
    raise DomainError(f"unknown mode {mode!r}")


def find_submodularity_violation(oracle: SubmodularOracle, pairs=None, tol: float = 1e-9):
    """Return ``(A, B, excess)`` for the worst violating pair, or ``None``.

    ``pairs`` is a pair of membership matrices; when omitted every pair of
    subsets is checked (``n <= 12``) via the equivalent local condition
    ``f(S+i) + f(S+j) >= f(S+i+j) + f(S)``.
    """
    if pairs is None:
        n = oracle.n
        if n > 12:
            raise CapacityError("exhaustive submodularity check limited to n <= 12")
        vals = oracle.value_batch(all_subsets(n))
        masks = np.arange(1 << n)
        worst = None
        for i, j in combinations(range(n), 2):
            bi, bj = 1 << i, 1 << j
            base = masks[(masks & bi == 0) & (masks & bj == 0)]
            excess = vals[base | bi | bj] + vals[base] - vals[base | bi] - vals[base | bj]
            t = int(np.argmax(excess))
            if excess[t] > tol and (worst is None or excess[t] > worst[2]):
                worst = (int(base[t] | bi), int(base[t] | bj), float(excess[t]))
        if worst is None:
            return None
        a, b, ex = worst
        return sorted(np.flatnonzero(as_members(a, n)).tolist()), sorted(np.flatnonzero(as_members(b, n)).tolist()), ex
    A, B = (np.atleast_2d(np.asarray(p, dtype=bool)) for p in pairs)
    excess = (oracle.value_batch(A | B) + oracle.value_batch(A & B)
              - oracle.value_batch(A) - oracle.value_batch(B))
    t = int(np.argmax(excess))
    if excess[t] > tol:
        return np.flatnonzero(A[t]).tolist(), np.flatnonzero(B[t]).tolist(), float(excess[t])
    return None


def check_submodular(oracle: SubmodularOracle, samples: int = 10000, seed: int = 0, tol: float = 1e-9):
    """Exhaustive check for ``n <= 12``, random pairs above.

    Raises :class:`SubmodularityError` naming the violating sets.
    """
    if oracle.n <= 12:
        bad = find_submodularity_violation(oracle, tol=tol)
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        dens = rng.random((samples, 2, 1))
        A = rng.random((samples, oracle.n)) < dens[:, 0]
        B = rng.random((samples, oracle.n)) < dens[:, 1]
        bad = find_submodularity_violation(oracle, (A, B), tol=tol)
    if bad is not None:
        a, b, ex = bad
        raise SubmodularityError(f"submodularity violated by A={a}, B={b} (excess {ex:.3g})", (a, b), ex)
