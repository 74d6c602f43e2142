"""Generators for the named gap instances and the gap-transfer transformers."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import permutations, product
from math import factorial

import numpy as np

from .core import GridPartition, HypergraphCutCount, SymmetricGamma, WeightedCoverage
from .errors import CapacityError, DomainError
from .instance import MultiwayInstance, SymmetrySpec
from .mincsp import CspEdge, MinCspInstance, brute_force_csp, check_certificate, multiway_to_mincsp, nae_table

HMP_EPSILON = 0.001
SYMMETRIZE_MAX_M = 8
SYMMETRIZE_MAX_ARITY = 4


@dataclass
class GapReport:
    integral_opt: float
    relaxation_opt: float
    notes: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.integral_opt / self.relaxation_opt if self.relaxation_opt > 0 else float("inf")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        return d


def grid_index(k: int, i: int, j: int) -> int:
    return i * k + j


def transpose_generator(k: int) -> np.ndarray:
    return np.array([j * k + i for i in range(k) for j in range(k)], dtype=np.int64)


def gen_grid(k: int):
    """Grid instance with terminals ``(i, i)`` and the transposition symmetry."""
    inst = MultiwayInstance(GridPartition(k), [grid_index(k, i, i) for i in range(k)])
    return inst, SymmetrySpec([transpose_generator(k)], k * k)


def gen_symmetric_gamma(k: int, gamma: int | None = None):
    inst = MultiwayInstance(SymmetricGamma(k, gamma), [grid_index(k, i, i) for i in range(k)])
    return inst, SymmetrySpec([transpose_generator(k)], k * k)


def row_assignment(k: int) -> np.ndarray:
    """Labels sending row ``R_i`` to terminal ``i``."""
    return np.repeat(np.arange(k), k)


def hk_vertices(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i, k)]


def hk_edge(k: int, i: int) -> list[tuple[int, int]]:
    """Pairs containing ``i``: ``(m, i)`` for ``m < i``, then ``(i, i)``, then ``(i, j)`` for ``j > i``."""
    return [(m, i) for m in range(i)] + [(i, i)] + [(i, j) for j in range(i + 1, k)]


def gen_hk(k: int) -> MinCspInstance:
    """NAE instance on pairs ``i <= j`` with one ``k``-ary edge per label.

    Position ``p`` of edge ``e_i`` holds the pair made of ``i`` and ``p``, so
    the assignment ``alpha_p = p`` labels every pair by one of its members.
    """
    if k < 2:
        raise DomainError("H_k needs k >= 2")
    verts = hk_vertices(k)
    index = {v: t for t, v in enumerate(verts)}
    table = nae_table(k, k)
    edges = [CspEdge(tuple(index[v] for v in hk_edge(k, i)), table, 1.0) for i in range(k)]
    pins = {index[(i, i)]: i for i in range(k)}
    return MinCspInstance(k, len(verts), edges, pins=pins, labels=verts)


def hk_half_certificate(k: int):
    """Each edge: half on all-``i``, half on ``alpha_p = p``; value ``k/2``."""
    verts = hk_vertices(k)
    vertex = np.zeros((len(verts), k))
    for t, (i, j) in enumerate(verts):
        vertex[t, i] += 0.5
        vertex[t, j] += 0.5
    edges = []
    for i in range(k):
        d = np.zeros((k,) * k)
        d[(i,) * k] += 0.5
        d[tuple(range(k))] += 0.5
        edges.append(d)
    return vertex, edges


def hk_min_labeling(k: int) -> np.ndarray:
    """Label each pair ``(i, j)`` by ``i``; cost ``k - 1``."""
    return np.array([i for i, _ in hk_vertices(k)], dtype=np.int64)


def gen_hmp_cycle(eps: float = HMP_EPSILON):
    """Five terminals, five triangles ``{t_i, t_{i+1}, a_{i,i+1}}`` and one
    ``eps``-weighted 5-edge on the ``a`` vertices; each cut hyperedge costs
    one unit per block it touches.

    Vertices ``0..4`` are ``t_1..t_5`` and ``5..9`` are ``a_12..a_51``.
    Returns ``(MultiwayInstance, MinCspInstance)``.
    """
    edges = [(i, (i + 1) % 5, 5 + i) for i in range(5)] + [tuple(range(5, 10))]
    labels = [f"t{i + 1}" for i in range(5)] + [f"a{i + 1}{(i + 1) % 5 + 1}" for i in range(5)]
    oracle = HypergraphCutCount(10, edges, [1.0] * 5 + [eps], "partition", labels)
    inst = MultiwayInstance(oracle, list(range(5)))
    return inst, multiway_to_mincsp(inst)


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_concave_profile(r: int, rng: np.random.Generator) -> list[float]:
    """``phi(0) = 0``, nonincreasing increments, ``phi(r) >= 0``."""
    inc = -np.sort(-rng.uniform(-1.0, 1.0, r))
    phi = np.concatenate([[0.0], np.cumsum(inc)])
    if phi[-1] < 0:
        # adding a linear term keeps concavity and lifts the endpoint to 0
        phi -= np.arange(r + 1) / r * phi[-1]
    return np.round(phi, 12).tolist()


RANDOM_KINDS = ("graph-mc", "hypergraph-mc", "hypergraph-concave", "coverage")


def gen_random_family(kind: str, n: int, k: int, m: int, seed: int = 0) -> MultiwayInstance:
    """Reproducible random instance; terminals are vertices ``0..k-1``.

    ``graph-mc``: ``m`` distinct weighted edges.  ``hypergraph-mc``: ``m``
    hyperedges of size 2-4 with the one-unit-per-cut profile.
    ``hypergraph-concave``: same with random concave profiles.
    ``coverage``: ``n`` elements each covering 1-3 of ``m`` weighted items.
    """
    if kind not in RANDOM_KINDS:
        raise DomainError(f"unknown random kind {kind!r}; choose from {RANDOM_KINDS}")
    if not 2 <= k <= n:
        raise DomainError("need 2 <= k <= n")
    rng = _philox(seed)
    if kind == "graph-mc":
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        if m > len(pairs):
            raise DomainError(f"a simple graph on {n} vertices has at most {len(pairs)} edges")
        pick = np.sort(rng.choice(len(pairs), m, replace=False))
        weights = np.round(rng.uniform(0.1, 1.0, m), 6)
        oracle = HypergraphCutCount(n, [pairs[p] for p in pick], weights, "mc")
    elif kind in ("hypergraph-mc", "hypergraph-concave"):
        edges, profiles = [], []
        for _ in range(m):
            r = int(rng.integers(2, min(4, n) + 1))
            edges.append(tuple(sorted(rng.choice(n, r, replace=False).tolist())))
            profiles.append("mc" if kind == "hypergraph-mc" else random_concave_profile(r, rng))
        weights = np.round(rng.uniform(0.1, 1.0, m), 6)
        oracle = HypergraphCutCount(n, edges, weights, profiles)
    else:
        sets = [sorted(rng.choice(m, int(rng.integers(1, min(3, m) + 1)), replace=False).tolist()) for _ in range(n)]
        weights = np.round(rng.uniform(0.1, 1.0, m), 6)
        oracle = WeightedCoverage(sets, weights)
    return MultiwayInstance(oracle, list(range(k)))


def _multiset_permutations(items) -> list[tuple]:
    return sorted(set(permutations(items)))


def _as_counts(values, M: int, what: str) -> np.ndarray:
    scaled = np.asarray(values, dtype=float) * M
    counts = np.rint(scaled)
    if np.abs(scaled - counts).max(initial=0.0) > 1e-9:
        raise DomainError(f"{what} is not a multiple of 1/{M}")
    return counts.astype(np.int64)


def symmetrize_gap_instance(inst: MinCspInstance, vertex, edges, M: int, normalize: bool = False):
    """String symmetrization of a rational Basic LP solution.

    Vertex ``(v, y)`` exists for every string ``y`` in ``[q]^M`` whose label
    counts are ``M * x_v``; one copy of edge ``e`` exists for every tuple of
    strings whose columns have counts ``M * x_e``.  Copies of ``e`` share the
    weight ``w_e`` equally (``normalize`` rescales all weights to sum 1).
    The symmetry group permutes the ``M`` coordinates.

    Returns ``(MinCspInstance, SymmetrySpec, info)``; ``info`` holds the
    cost of every coordinate assignment ``(v, y) -> y_i`` and their mean.
    """
    if not 1 <= M <= SYMMETRIZE_MAX_M:
        raise CapacityError(f"M must lie in [1, {SYMMETRIZE_MAX_M}]")
    if any(len(e.vertices) > SYMMETRIZE_MAX_ARITY for e in inst.edges):
        raise CapacityError(f"edges of arity above {SYMMETRIZE_MAX_ARITY} are not symmetrized")
    report = check_certificate(inst, vertex, edges)
    if not report.feasible:
        raise DomainError(f"certificate is infeasible (residual {report.max_residual:.3g})")
    vertex = np.asarray(vertex, dtype=float)
    q = inst.q
    strings, index, owner = [], {}, []
    for v in range(inst.n):
        counts = _as_counts(vertex[v], M, f"x_{v}")
        items = [a for a in range(q) for _ in range(counts[a])]
        for y in _multiset_permutations(items):
            index[(v, y)] = len(strings)
            strings.append(y)
            owner.append(v)
    new_edges = []
    for ei, (e, d) in enumerate(zip(inst.edges, edges)):
        d = np.asarray(d, dtype=float)
        counts = _as_counts(d.ravel(), M, f"x_e{ei}")
        alphas = np.array(list(np.ndindex(d.shape)), dtype=np.int64)
        columns = [tuple(alphas[a]) for a in range(alphas.shape[0]) for _ in range(counts[a])]
        copies = _multiset_permutations(columns)
        w = e.weight / len(copies)
        for cols in copies:
            ys = [tuple(c[j] for c in cols) for j in range(len(e.vertices))]
            new_edges.append(CspEdge(tuple(index[(v, y)] for v, y in zip(e.vertices, ys)), e.table, w))
    if normalize:
        total = sum(e.weight for e in new_edges)
        for e in new_edges:
            e.weight /= total
    owner = np.array(owner)
    cands = [inst.candidates[v] for v in owner]
    pins = {t: inst.pins[v] for t, v in enumerate(owner) if v in inst.pins}
    out = MinCspInstance(q, len(strings), new_edges, cands, pins, labels=[(int(v), y) for v, y in zip(owner, strings)])

    gens = []
    if M > 1:
        for perm in ([1, 0] + list(range(2, M)), list(range(1, M)) + [0]):
            g = np.array([index[(owner[t], tuple(strings[t][p] for p in perm))] for t in range(len(strings))])
            gens.append(g)
    sym = SymmetrySpec(gens, len(strings))
    S = np.array(strings, dtype=np.int64).reshape(len(strings), M)
    coord_costs = [out.cost(S[:, i]) for i in range(M)]
    info = {"coordinate_costs": coord_costs, "coordinate_mean": float(np.mean(coord_costs)),
            "lp_objective": report.objective, "orbits": [np.flatnonzero(owner == v).tolist() for v in range(inst.n)]}
    return out, sym, info


def csp_invariance_defect(inst: MinCspInstance, sym: SymmetrySpec) -> list[str]:
    """Reasons why ``inst`` is not invariant under ``sym`` (empty if it is)."""

    def key(verts, table, w):
        order = np.argsort(verts)
        t = np.transpose(table, order)
        return tuple(int(verts[o]) for o in order), np.round(t, 12).tobytes(), round(w, 12)

    base = sorted(key(np.array(e.vertices), e.table, e.weight) for e in inst.edges)
    problems = []
    for gi, g in enumerate(sym.generators):
        moved = sorted(key(g[np.array(e.vertices)], e.table, e.weight) for e in inst.edges)
        if moved != base:
            problems.append(f"generator {gi} does not map edges onto edges")
        for v in range(inst.n):
            if inst.candidates[v] != inst.candidates[g[v]] or inst.pins.get(v) != inst.pins.get(int(g[v])):
                problems.append(f"generator {gi} moves vertex {v} to one with other candidates or pin")
                break
    return problems


def fold_symmetric_instance(inst: MinCspInstance, sym: SymmetrySpec, cluster_size: int, x=None):
    """Replace each orbit by ``cluster_size`` identical vertices.

    Every edge is copied over all tuples of distinct cluster members, the
    copies sharing its weight equally.  With a fractional assignment ``x``
    of ``inst`` the result also carries a Basic LP certificate: orbit-averaged
    marginals, and on each copy the average over the group of the product
    distribution of ``x`` on the permuted edge.  Its value equals the
    multilinear value of ``x`` when ``inst`` is invariant.

    Returns ``(MinCspInstance, info)``.
    """
    problems = csp_invariance_defect(inst, sym)
    if problems:
        raise DomainError("instance is not invariant under the symmetry: " + "; ".join(problems))
    orbits = sym.orbits()
    orbit_of = sym.orbit_index()
    c = int(cluster_size)
    need = max((max(np.bincount(orbit_of[list(e.vertices)])) for e in inst.edges), default=1)
    if c < need:
        raise DomainError(f"cluster size must be at least {need} (largest orbit multiplicity in an edge)")
    members = [list(range(o * c, (o + 1) * c)) for o in range(len(orbits))]
    new_edges, parent = [], []
    for ei, e in enumerate(inst.edges):
        choices = [members[orbit_of[v]] for v in e.vertices]
        copies = [t for t in product(*choices) if len(set(t)) == len(t)]
        for t in copies:
            new_edges.append(CspEdge(t, e.table, e.weight / len(copies)))
            parent.append(ei)
    cands = [inst.candidates[orb[0]] for orb in orbits for _ in range(c)]
    pins = {}
    for o, orb in enumerate(orbits):
        if orb[0] in inst.pins:
            pins.update({m: inst.pins[orb[0]] for m in members[o]})
    out = MinCspInstance(inst.q, len(orbits) * c, new_edges, cands, pins,
                         labels=[(o, i) for o in range(len(orbits)) for i in range(c)])
    info = {"orbits": orbits, "clusters": members, "parent_edge": parent}
    if x is not None:
        x = np.asarray(x, dtype=float)
        group = sym.group_elements()
        avg = np.array([x[orb].mean(axis=0) for orb in orbits])
        vertex = np.repeat(avg, c, axis=0)
        per_parent = []
        for e in inst.edges:
            d = np.zeros((inst.q,) * len(e.vertices))
            for g in group:
                prod_ = np.ones(())
                for v in e.vertices:
                    prod_ = np.multiply.outer(prod_, x[g[v]])
                d += prod_
            per_parent.append(d / len(group))
        cert_edges = [per_parent[p] for p in parent]
        info["certificate"] = (vertex, cert_edges)
    return out, info


def brute_symmetric_csp(inst: MinCspInstance, sym: SymmetrySpec):
    """Integral optimum over labelings constant on the orbits of ``sym``."""
    return brute_force_csp(inst, groups=sym.orbits())


def symmetrize_size(vertex, M: int) -> int:
    """Number of strings a vertex row produces (for guardrails and reports)."""
    counts = _as_counts(vertex, M, "x_v")
    out = factorial(M)
    for cnt in counts:
        out //= factorial(int(cnt))
    return out
