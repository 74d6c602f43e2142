"""Min-CSP instances, the Basic LP and the bridge from multiway partition.

A Min-CSP has labels ``0..q-1``, a candidate list per vertex, optional
pinned vertices, and weighted edges.  Each edge carries a cost table
``Psi_e`` of shape ``(q,) * |e|`` with entries in ``[0, 1]``; ``inf`` marks a
forbidden assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .brute import BRUTE_FORCE_BUDGET, lexicographic_min
from .core import SubmodularOracle, find_submodularity_violation
from .errors import DomainError, InfeasibleError, SubmodularityError
from .instance import MultiwayInstance
from .simplex import FEAS_TOL, solve as simplex_solve


@dataclass
class CspEdge:
    vertices: tuple
    table: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        self.vertices = tuple(int(v) for v in self.vertices)
        self.table = np.asarray(self.table, dtype=float)
        self.weight = float(self.weight)


class MinCspInstance:
    """Weighted Min-CSP with candidate lists and pinned vertices."""

    def __init__(self, q: int, n: int, edges, candidates=None, pins=None, labels=None):
        if q < 1 or n < 1:
            raise DomainError("need q >= 1 labels and n >= 1 vertices")
        self.q, self.n = int(q), int(n)
        self.edges = [e if isinstance(e, CspEdge) else CspEdge(*e) for e in edges]
        full = list(range(self.q))
        self.candidates = [sorted(set(int(a) for a in c)) for c in candidates] if candidates is not None \
            else [full[:] for _ in range(self.n)]
        self.pins = {int(v): int(a) for v, a in (pins or {}).items()}
        self.labels = labels
        if len(self.candidates) != self.n:
            raise DomainError("one candidate list per vertex is required")
        for c in self.candidates:
            if any(a < 0 or a >= self.q for a in c):
                raise DomainError("candidate labels must lie in range(q)")
        for v, a in self.pins.items():
            if not 0 <= v < self.n:
                raise DomainError(f"pinned vertex {v} does not exist")
            if a not in self.candidates[v]:
                raise DomainError(f"pinned label {a} of vertex {v} is not a candidate")
        for e in self.edges:
            r = len(e.vertices)
            if r < 1 or len(set(e.vertices)) != r:
                raise DomainError(f"edge {e.vertices} must be nonempty with distinct vertices")
            if min(e.vertices) < 0 or max(e.vertices) >= self.n:
                raise DomainError(f"edge {e.vertices} references a missing vertex")
            if e.table.shape != (self.q,) * r:
                raise DomainError(f"cost table of {e.vertices} must have shape {(self.q,) * r}")
            finite = e.table[np.isfinite(e.table)]
            if np.isnan(e.table).any() or np.any(e.table == -np.inf) or np.any(finite < 0) or np.any(finite > 1):
                raise DomainError("cost entries must lie in [0, 1] or be +inf (forbidden)")
            if not (np.isfinite(e.weight) and e.weight > 0):
                raise DomainError("edge weights must be positive and finite")

    def effective_candidates(self) -> list[list[int]]:
        return [[self.pins[v]] if v in self.pins else list(c) for v, c in enumerate(self.candidates)]

    def cost_batch(self, labels: np.ndarray) -> np.ndarray:
        """Costs of a ``(m, n)`` label matrix (``inf`` for forbidden ones)."""
        labels = np.atleast_2d(labels)
        total = np.zeros(labels.shape[0])
        for e in self.edges:
            idx = labels[:, e.vertices[0]].astype(np.int64)
            for v in e.vertices[1:]:
                idx *= self.q
                idx += labels[:, v]
            total += e.weight * e.table.ravel()[idx]
        return total

    def cost(self, labeling) -> float:
        lab = np.asarray(labeling, dtype=np.int64)
        for v, c in enumerate(self.effective_candidates()):
            if lab[v] not in c:
                return float("inf")
        return float(self.cost_batch(lab[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "n": self.n,
            "candidates": self.candidates,
            "pins": [[v, a] for v, a in sorted(self.pins.items())],
            "edges": [{"vertices": list(e.vertices), "weight": e.weight,
                       "table": [None if not np.isfinite(t) else float(t) for t in e.table.ravel()]}
                      for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MinCspInstance":
        q = int(d["q"])
        edges = []
        for e in d["edges"]:
            r = len(e["vertices"])
            table = np.array([np.inf if t is None else t for t in e["table"]], dtype=float).reshape((q,) * r)
            edges.append(CspEdge(e["vertices"], table, e.get("weight", 1.0)))
        return cls(q, d["n"], edges, d.get("candidates"), {v: a for v, a in d.get("pins", [])})


def nae_table(q: int, r: int) -> np.ndarray:
    """0 when all ``r`` labels agree, 1 otherwise."""
    t = np.ones((q,) * r)
    for a in range(q):
        t[(a,) * r] = 0.0
    return t


@dataclass
class LpProblem:
    """``min c.x`` s.t. ``A_eq x = b_eq``, ``x >= 0`` with named rows and columns."""

    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    var_names: list
    row_names: list
    vertex_cols: dict
    edge_alphas: list
    edge_cols: list

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.b_eq.size

    def to_lp_format(self) -> str:
        """CPLEX-style LP text for cross-checks with external solvers."""

        def expr(coefs):
            parts = []
            for j, a in coefs:
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.17g} {self.var_names[j]}")
            text = " ".join(parts) or "0 " + self.var_names[0]
            return text[2:] if text.startswith("+ ") else text

        lines = ["\\ Basic LP", "Minimize", " obj: " + expr([(j, a) for j, a in enumerate(self.c) if a != 0]),
                 "Subject To"]
        for r, name in enumerate(self.row_names):
            nz = np.flatnonzero(self.A_eq[r])
            lines.append(f" {name}: {expr([(j, self.A_eq[r, j]) for j in nz])} = {self.b_eq[r]:.17g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def build_basic_lp(inst: MinCspInstance) -> LpProblem:
    """Variables ``x_{v,i}`` (``i`` a candidate) and ``x_{e,alpha}`` (finite cost);
    rows: one-hot sums, marginal consistency per (edge, position, label), pins."""
    cands = [list(c) for c in inst.candidates]
    for v, a in inst.pins.items():
        cands[v] = [a]
    for v, c in enumerate(cands):
        if not c:
            raise InfeasibleError(f"vertex {v} has an empty candidate list", {"vertex": v})
    names, vertex_cols = [], {}
    for v, c in enumerate(cands):
        for i in c:
            vertex_cols[(v, i)] = len(names)
            names.append(f"x_v{v}_l{i}")
    edge_alphas, edge_cols, costs = [], [], []
    for ei, e in enumerate(inst.edges):
        alphas = np.array(list(product(*[cands[v] for v in e.vertices])), dtype=np.int64).reshape(-1, len(e.vertices))
        vals = e.table[tuple(alphas.T)] if alphas.size else np.zeros(0)
        ok = np.isfinite(vals)
        if not ok.any():
            raise InfeasibleError(f"edge {ei} {e.vertices} has no allowed assignment", {"edge": ei})
        alphas, vals = alphas[ok], vals[ok]
        cols = np.arange(len(names), len(names) + alphas.shape[0])
        names.extend(f"x_e{ei}_a{'_'.join(map(str, a))}" for a in alphas)
        edge_alphas.append(alphas)
        edge_cols.append(cols)
        costs.append(e.weight * vals)
    nvar = len(names)
    c = np.zeros(nvar)
    for cols, cost in zip(edge_cols, costs):
        c[cols] = cost
    rows, rhs, row_names = [], [], []
    for v, cl in enumerate(cands):
        r = np.zeros(nvar)
        r[[vertex_cols[(v, i)] for i in cl]] = 1.0
        rows.append(r), rhs.append(1.0), row_names.append(f"sum_v{v}")
    for ei, e in enumerate(inst.edges):
        for j, v in enumerate(e.vertices):
            for i in cands[v]:
                r = np.zeros(nvar)
                r[edge_cols[ei][edge_alphas[ei][:, j] == i]] = 1.0
                r[vertex_cols[(v, i)]] = -1.0
                rows.append(r), rhs.append(0.0), row_names.append(f"cons_e{ei}_p{j}_l{i}")
    for v, a in sorted(inst.pins.items()):
        r = np.zeros(nvar)
        r[vertex_cols[(v, a)]] = 1.0
        rows.append(r), rhs.append(1.0), row_names.append(f"pin_v{v}")
    return LpProblem(c, np.array(rows), np.array(rhs), names, row_names, vertex_cols, edge_alphas, edge_cols)


@dataclass
class BasicLpSolution:
    vertex: np.ndarray
    edges: list
    objective: float
    max_residual: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"objective": self.objective, "max_residual": self.max_residual,
                "vertex": self.vertex.tolist(), "edges": [d.tolist() for d in self.edges]}


def solve_lp(p: LpProblem, inst: MinCspInstance | None = None, rule: str = "dantzig") -> BasicLpSolution:
    """Solve a Basic LP with the in-repo simplex.

    Edge distributions come back as dense arrays of shape ``(q,) * |e|``
    (``inst`` supplies ``q``; otherwise it is inferred from the names).
    """
    res = simplex_solve(p.c, p.A_eq, p.b_eq, rule=rule)
    x = res.x
    resid = float(np.abs(p.A_eq @ x - p.b_eq).max()) if p.num_rows else 0.0
    resid = max(resid, float(max(0.0, -x.min())) if x.size else 0.0)
    q = inst.q if inst is not None else 1 + max(i for _, i in p.vertex_cols)
    n = inst.n if inst is not None else 1 + max(v for v, _ in p.vertex_cols)
    vertex = np.zeros((n, q))
    for (v, i), j in p.vertex_cols.items():
        vertex[v, i] = x[j]
    edges = []
    for alphas, cols in zip(p.edge_alphas, p.edge_cols):
        d = np.zeros((q,) * alphas.shape[1])
        d[tuple(alphas.T)] = x[cols]
        edges.append(d)
    return BasicLpSolution(vertex, edges, float(p.c @ x), resid, res.iterations)


@dataclass
class CertificateReport:
    objective: float
    max_residual: float
    feasible: bool
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"objective": self.objective, "max_residual": self.max_residual,
                "feasible": self.feasible, "violations": self.violations}


def check_certificate(inst: MinCspInstance, vertex, edges, tol: float = FEAS_TOL) -> CertificateReport:
    """Verify a hand-made Basic LP solution without calling any solver.

    ``vertex`` is ``(n, q)``; ``edges[e]`` is a dense ``(q,) * |e|`` array or
    a dict ``{alpha: mass}``.
    """
    vertex = np.asarray(vertex, dtype=float)
    if vertex.shape != (inst.n, inst.q) or len(edges) != len(inst.edges):
        raise DomainError("certificate dimensions do not match the instance")
    viol = []

    def note(what, amount):
        if amount > tol:
            viol.append({"constraint": what, "residual": float(amount)})
        return amount

    worst = 0.0
    cands = inst.effective_candidates()
    for v in range(inst.n):
        worst = max(worst, note(f"sum_v{v}", abs(vertex[v].sum() - 1)))
        outside = np.delete(vertex[v], cands[v])
        worst = max(worst, note(f"candidates_v{v}", np.abs(outside).sum() if outside.size else 0.0))
        worst = max(worst, note(f"nonneg_v{v}", max(0.0, -vertex[v].min())))
    objective = 0.0
    for ei, (e, d) in enumerate(zip(inst.edges, edges)):
        r = len(e.vertices)
        if isinstance(d, dict):
            dense = np.zeros((inst.q,) * r)
            for a, m in d.items():
                dense[tuple(a)] += m
            d = dense
        d = np.asarray(d, dtype=float)
        if d.shape != (inst.q,) * r:
            raise DomainError(f"edge {ei} distribution has the wrong shape")
        worst = max(worst, note(f"nonneg_e{ei}", max(0.0, -d.min())))
        forbidden = ~np.isfinite(e.table)
        worst = max(worst, note(f"forbidden_e{ei}", np.abs(d[forbidden]).sum()))
        for j, v in enumerate(e.vertices):
            marg = d.sum(axis=tuple(a for a in range(r) if a != j))
            worst = max(worst, note(f"cons_e{ei}_p{j}", np.abs(marg - vertex[v]).max()))
        objective += e.weight * float(np.sum(np.where(forbidden, 0.0, e.table) * d))
    return CertificateReport(objective, float(worst), not viol, viol)


def brute_force_csp(inst: MinCspInstance, groups=None, budget: int = BRUTE_FORCE_BUDGET, threads: int = 1):
    """Exact integral optimum, lexicographic tie-break over free vertices.

    ``groups`` optionally lists vertex sets that must share a label (orbit
    enumeration).  Returns ``(labels, cost)``.
    """
    cands = inst.effective_candidates()
    groups = [[v] for v in range(inst.n)] if groups is None else [list(g) for g in groups]
    seen = sorted(v for g in groups for v in g)
    if seen != list(range(inst.n)):
        raise DomainError("groups must partition the vertex set")
    choices, fixed, free_groups = [], {}, []
    for g in groups:
        common = sorted(set.intersection(*(set(cands[v]) for v in g)))
        if not common:
            raise InfeasibleError(f"vertices {g} share no candidate label", {"group": g})
        if len(common) == 1:
            fixed.update({v: common[0] for v in g})
        else:
            free_groups.append(g)
            choices.append(np.array(common, dtype=np.int64))
    owner = np.full(inst.n, -1, dtype=np.int64)
    for p, g in enumerate(free_groups):
        owner[g] = p
    base = np.zeros(inst.n, dtype=np.int64)
    for v, a in fixed.items():
        base[v] = a
    free_idx = np.flatnonzero(owner >= 0)
    width = max((c.size for c in choices), default=1)
    lookup = np.zeros((max(len(choices), 1), width), dtype=np.int64)
    for p, c in enumerate(choices):
        lookup[p, : c.size] = c

    identity = all(np.array_equal(c, np.arange(c.size)) for c in choices)

    def expand(digits):
        labels = np.empty((digits.shape[0], inst.n), dtype=np.int16)
        labels[:] = base
        if free_idx.size:
            p = owner[free_idx]
            labels[:, free_idx] = digits[:, p] if identity else lookup[p, digits[:, p]]
        return labels

    def cost(digits):
        return inst.cost_batch(expand(digits))

    digits, value = lexicographic_min([c.size for c in choices], cost, budget, threads)
    if not np.isfinite(value):
        raise InfeasibleError("every labeling violates a hard constraint")
    return expand(np.asarray(digits)[None, :])[0], float(value)


def csp_multilinear_value(inst: MinCspInstance, x) -> float:
    """Expected cost when each vertex draws label ``i`` with probability ``x[v, i]``."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for e in inst.edges:
        prob = np.ones(())
        for v in e.vertices:
            prob = np.multiply.outer(prob, x[v])
        mass_forbidden = prob[~np.isfinite(e.table)].sum()
        if mass_forbidden > 0:
            return float("inf")
        total += e.weight * float(np.sum(np.where(np.isfinite(e.table), e.table, 0.0) * prob))
    return total


def local_table(oracle: SubmodularOracle, k: int) -> np.ndarray:
    """``Psi(alpha) = sum_i f({j : alpha_j = i})`` over ``alpha`` in ``[k]^r``."""
    r = oracle.n
    alphas = np.array(list(product(range(k), repeat=r)), dtype=np.int64).reshape(-1, r)
    total = np.zeros(alphas.shape[0])
    for i in range(k):
        total += oracle.value_batch(alphas == i)
    return total.reshape((k,) * r)


def submp_to_mincsp(terms, k: int, n: int, terminals, check: bool = True) -> MinCspInstance:
    """Min-CSP whose integral costs equal ``sum_i f(A_i)`` for ``f = sum_e w_e f_e``.

    ``terms`` yields ``(vertices, local oracle, weight)``.  Each table is
    scaled into ``[0, 1]`` with the scale moved into the edge weight; terms
    that are identically zero are dropped.
    """
    edges = []
    for verts, local, w in terms:
        if check and local.n <= 12:
            bad = find_submodularity_violation(local)
            if bad is not None:
                raise SubmodularityError(f"local function on {tuple(verts)} is not submodular: "
                                         f"A={bad[0]}, B={bad[1]}", bad[:2], bad[2])
        table = local_table(local, k)
        scale = float(table.max())
        if w <= 0 or scale <= 0:
            continue
        edges.append(CspEdge(tuple(verts), table / scale, w * scale))
    return MinCspInstance(k, n, edges, pins={int(t): i for i, t in enumerate(terminals)})


def multiway_to_mincsp(inst: MultiwayInstance, check: bool = True) -> MinCspInstance:
    """Bridge for oracles that expose ``local_terms`` (hypergraph, grid, coverage)."""
    if not hasattr(inst.oracle, "local_terms"):
        raise DomainError(f"{inst.oracle.kind} oracle has no local decomposition")
    return submp_to_mincsp(inst.oracle.local_terms(), inst.k, inst.n, inst.terminals, check)


@dataclass
class LovaszLpResult:
    value: float
    x: np.ndarray


def lovasz_closure_lp(inst: MultiwayInstance, rule: str = "dantzig") -> LovaszLpResult:
    """Exact optimum of the Lovasz relaxation for a locally decomposed oracle.

    Each ``fhat_e`` is written as its convex closure: a distribution
    ``z_{e,i,S}`` over subsets ``S`` of the edge with marginals ``x[v, i]``,
    paying ``f_e(S)``.  For submodular ``f_e`` this equals the Lovasz
    extension, so the LP value is the relaxation optimum.
    """
    if not hasattr(inst.oracle, "local_terms"):
        raise DomainError(f"{inst.oracle.kind} oracle has no local decomposition")
    n, k = inst.n, inst.k
    terms = list(inst.oracle.local_terms())
    blocks = []
    nvar = n * k
    for verts, local, w in terms:
        r = len(verts)
        subsets = ((np.arange(1 << r)[:, None] >> np.arange(r)) & 1).astype(bool)
        vals = local.value_batch(subsets)
        blocks.append((verts, subsets, w * vals, nvar))
        nvar += k * subsets.shape[0]
    c = np.zeros(nvar)
    rows, rhs = [], []
    for v in range(n):
        r_ = np.zeros(nvar)
        r_[v * k:(v + 1) * k] = 1.0
        rows.append(r_), rhs.append(1.0)
    for i, t in enumerate(inst.terminals):
        r_ = np.zeros(nvar)
        r_[t * k + i] = 1.0
        rows.append(r_), rhs.append(1.0)
    for verts, subsets, cost, start in blocks:
        m = subsets.shape[0]
        for i in range(k):
            cols = start + i * m + np.arange(m)
            c[cols] = cost
            r_ = np.zeros(nvar)
            r_[cols] = 1.0
            rows.append(r_), rhs.append(1.0)
            for p, v in enumerate(verts):
                r_ = np.zeros(nvar)
                r_[cols[subsets[:, p]]] = 1.0
                r_[v * k + i] = -1.0
                rows.append(r_), rhs.append(0.0)
    res = simplex_solve(c, np.array(rows), np.array(rhs), rule=rule)
    return LovaszLpResult(res.objective, res.x[: n * k].reshape(n, k))


def compare_relaxations(inst: MultiwayInstance, cross_check: bool = False, solver_cfg=None) -> dict:
    """Lovasz relaxation optimum versus Basic LP optimum of the bridged CSP.

    ``delta = basic_lp_value - lovasz_value``.  With ``cross_check`` the
    subgradient solver's value is reported as well.
    """
    lov = lovasz_closure_lp(inst)
    csp = multiway_to_mincsp(inst)
    sol = solve_lp(build_basic_lp(csp), csp)
    out = {
        "lovasz_value": lov.value,
        "basic_lp_value": sol.objective,
        "delta": sol.objective - lov.value,
        "basic_lp_residual": sol.max_residual,
        "lovasz_method": "lovasz_closure_lp",
        "basic_lp_method": "solve_lp",
    }
    out["separated"] = bool(out["delta"] > 1e-4)
    if cross_check:
        from .relaxation import solve_submp_rel

        _, rep = solve_submp_rel(inst, solver_cfg)
        out["subgradient_value"] = rep.value
    return out
