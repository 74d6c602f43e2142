"""Projected subgradient solver for the Lovasz relaxation of multiway partition.

The relaxation minimizes ``sum_l fhat(x[:, l])`` over ``n x k`` matrices whose
rows lie on the probability simplex, with terminal ``t_l`` pinned to label
``l``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SubmodularOracle, greedy_order, lovasz_extension
from .errors import DomainError, NumericError
from .instance import MultiwayInstance, validate_assignment
from .simplex import solve as simplex_solve


@dataclass
class SolverConfig:
    max_iters: int = 20000
    step_c: float | None = None
    tol: float = 1e-6
    patience: int = 500
    restarts: int = 8
    seed: int = 0
    history: bool = False
    polish: bool = True
    polish_rounds: int = 20


@dataclass
class SolveReport:
    value: float
    iterations: int
    gap_estimate: float
    step_c: float
    restarts_used: int
    best_iterate_history: list = field(default_factory=list)
    subgradient_value: float | None = None
    polish_rounds: int = 0

    def to_dict(self):
        return asdict(self)


def subgradient_at(oracle: SubmodularOracle, x) -> np.ndarray:
    """Greedy subgradient of the Lovasz extension at ``x``.

    ``g[order[j]] = f(first j+1 elements) - f(first j elements)`` under the
    descending sort of ``x`` (ties by element index).
    """
    x = np.asarray(x, dtype=float)
    return _column_subgradients(oracle, x[:, None])[1][:, 0]


def _column_subgradients(oracle: SubmodularOracle, X: np.ndarray):
    """Lovasz values and greedy subgradients of every column of ``X``."""
    n, k = X.shape
    orders = [greedy_order(X[:, l]) for l in range(k)]
    prefixes = np.zeros((k, n + 1, n), dtype=bool)
    tri = np.tril(np.ones((n + 1, n), dtype=bool), -1)
    for l, order in enumerate(orders):
        prefixes[l][:, order] = tri
    vals = oracle.value_batch(prefixes.reshape(k * (n + 1), n)).reshape(k, n + 1)
    G = np.empty((n, k))
    for l, order in enumerate(orders):
        G[order, l] = np.diff(vals[l])
    values = np.einsum("nk,nk->k", G, X)
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite Lovasz value")
    return values, G


def project_simplex_rows(Y: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``Y`` onto the probability simplex."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    m, k = Y.shape
    U = -np.sort(-Y, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = U - css / ind > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(m), rho] / (rho + 1)
    return np.maximum(Y - tau[:, None], 0.0)


def project_feasible(x_raw, terminals) -> np.ndarray:
    """Row-wise simplex projection with terminal rows pinned to unit vectors."""
    x_raw = np.asarray(x_raw, dtype=float)
    if not np.all(np.isfinite(x_raw)):
        raise DomainError("projection needs finite entries")
    x = project_simplex_rows(x_raw)
    for i, t in enumerate(terminals):
        x[t] = 0.0
        x[t, i] = 1.0
    return x


def relaxation_value(oracle: SubmodularOracle, x) -> float:
    """``sum_l fhat(x[:, l])`` evaluated column by column."""
    x = np.asarray(x, dtype=float)
    return float(sum(lovasz_extension(oracle, np.clip(x[:, l], 0.0, 1.0)) for l in range(x.shape[1])))


def initial_point(inst: MultiwayInstance) -> np.ndarray:
    x = np.full((inst.n, inst.k), 1.0 / inst.k)
    return project_feasible(x, inst.terminals)


def order_polish(inst: MultiwayInstance, x, max_rounds: int = 20):
    """Exact descent on the order cone of ``x``.

    While every column keeps its greedy order the objective is linear, with
    the greedy subgradients as coefficients, so minimizing it over that cone
    intersected with the feasible set is a small LP.  Repeats from the new
    point until the value stops dropping.  Returns ``(x, value, rounds)``.
    """
    oracle, terms = inst.oracle, inst.terminals
    n, k = inst.n, inst.k
    free = inst.free_vertices()
    pos = np.full(n, -1, dtype=np.int64)
    pos[free] = np.arange(free.size)
    nvar = free.size * k
    values, G = _column_subgradients(oracle, x)
    value = float(values.sum())
    rounds = 0
    if free.size == 0:
        return x, value, rounds
    A_eq = np.zeros((free.size, nvar))
    for r in range(free.size):
        A_eq[r, r * k:(r + 1) * k] = 1.0
    b_eq = np.ones(free.size)
    fixed = np.zeros((n, k))
    for i, t in enumerate(terms):
        fixed[t, i] = 1.0
    for rounds in range(1, max_rounds + 1):
        c = np.zeros(nvar)
        rows, rhs = [], []
        for l in range(k):
            c[pos[free] * k + l] = G[free, l]
            order = greedy_order(x[:, l])
            for a, b in zip(order[:-1], order[1:]):
                # x[b, l] - x[a, l] <= 0, constants moved to the right
                row = np.zeros(nvar)
                const = 0.0
                if pos[b] >= 0:
                    row[pos[b] * k + l] += 1.0
                else:
                    const += fixed[b, l]
                if pos[a] >= 0:
                    row[pos[a] * k + l] -= 1.0
                else:
                    const -= fixed[a, l]
                if np.any(row):
                    rows.append(row)
                    rhs.append(-const)
        res = simplex_solve(c, A_eq, b_eq, np.array(rows) if rows else None, np.array(rhs) if rows else None)
        y = fixed.copy()
        y[free] = res.x.reshape(free.size, k)
        y = project_feasible(y, terms)
        vals_y, G_y = _column_subgradients(oracle, y)
        if float(vals_y.sum()) < value - 1e-12:
            x, value, G = y, float(vals_y.sum()), G_y
        else:
            break
    return x, value, rounds


def solve_submp_rel(inst: MultiwayInstance, cfg: SolverConfig | None = None, x0=None):
    """Minimize the Lovasz relaxation by projected subgradient descent.

    Steps are ``c / sqrt(t)``.  When the best value stalls for ``patience``
    iterations the method restarts from the best iterate with ``c`` halved,
    up to ``restarts`` times.  The best iterate is then refined by
    :func:`order_polish` unless ``cfg.polish`` is off.  Returns
    ``(x, SolveReport)``.
    """
    cfg = cfg or SolverConfig()
    oracle, terms = inst.oracle, inst.terminals
    x = initial_point(inst) if x0 is None else validate_assignment(x0, terms).copy()
    free = np.ones(inst.n, dtype=bool)
    free[terms] = False
    n_free = int(free.sum())
    diameter = np.sqrt(2.0 * max(n_free, 1))

    values, G = _column_subgradients(oracle, x)
    best_val, best_x = float(values.sum()), x.copy()
    history = [best_val] if cfg.history else []
    c = cfg.step_c
    probe_norm = 0.0
    last_val = best_val
    if n_free == 0:
        return best_x, SolveReport(best_val, 0, 0.0, 0.0, 0, history, best_val)

    t = 1
    restarts = 0
    since_improve = 0
    stall_ref = best_val
    it = 0
    for it in range(1, cfg.max_iters + 1):
        G[~free] = 0.0
        gnorm = float(np.linalg.norm(G))
        if cfg.step_c is None and it <= 10:
            probe_norm = max(probe_norm, gnorm)
            c = diameter / probe_norm if probe_norm > 0 else 1.0
        if gnorm == 0.0:
            break
        x = project_feasible(x - (c / np.sqrt(t)) * G, terms)
        t += 1
        values, G = _column_subgradients(oracle, x)
        last_val = float(values.sum())
        if last_val < best_val:
            best_val, best_x = last_val, x.copy()
        if cfg.history:
            history.append(best_val)
        since_improve += 1
        if stall_ref - best_val > cfg.tol:
            stall_ref = best_val
            since_improve = 0
        elif since_improve >= cfg.patience:
            if restarts >= cfg.restarts:
                break
            restarts += 1
            c /= 2.0
            t = 1
            x = best_x.copy()
            values, G = _column_subgradients(oracle, x)
            stall_ref = best_val
            since_improve = 0
    report = SolveReport(best_val, it, last_val - best_val, float(c), restarts, history, best_val)
    if cfg.polish:
        best_x, report.value, report.polish_rounds = order_polish(inst, best_x, cfg.polish_rounds)
    return best_x, report
