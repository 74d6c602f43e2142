"""Dense two-phase primal simplex.

Solves ``min c.x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub`` and
``x >= 0``.  Upper bounds go in as ``A_ub`` rows.  Meant for the small,
dense LPs built in this package (a few thousand columns at most).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, InfeasibleError, NumericError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int
    duals: np.ndarray
    redundant_rows: list


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size == 0:
        return
    cols = np.flatnonzero(T[r])
    # tableaux here stay very sparse; touch only the affected block
    if 4 * rows.size * cols.size < T.size:
        T[np.ix_(rows, cols)] -= np.outer(col[rows], T[r, cols])
    else:
        T[rows] -= np.outer(col[rows], T[r])


def _entering(red, allowed, rule, tol):
    cand = np.flatnonzero((red < -tol) & allowed)
    if cand.size == 0:
        return -1
    if rule == "bland":
        return int(cand[0])
    return int(cand[np.argmin(red[cand])])


def _leaving(T, basis, j, tol):
    col = T[:-1, j]
    pos = np.flatnonzero(col > tol)
    if pos.size == 0:
        return -1
    ratios = T[pos, -1] / col[pos]
    best = ratios.min()
    ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
    # smallest basic variable index among ties (Bland)
    return int(ties[np.argmin(basis[ties])])


def _run(T, basis, allowed, rule, max_iter, tol, patience):
    """Iterate until optimal.  Dantzig pricing falls back to Bland's rule
    once the objective has not moved for ``patience`` pivots, which keeps
    the anti-cycling guarantee."""
    it = 0
    stalled = 0
    active = rule
    while True:
        j = _entering(T[-1, :-1], allowed, active, tol)
        if j < 0:
            return it
        r = _leaving(T, basis, j, tol)
        if r < 0:
            raise NumericError("LP is unbounded")
        if T[r, -1] <= tol:
            stalled += 1
            if stalled > patience:
                active = "bland"
        else:
            stalled = 0
            active = rule
        _pivot(T, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise CapacityError(f"simplex exceeded {max_iter} pivots")


def solve(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, rule: str = "dantzig",
          max_iter: int = 200000, tol: float = PIVOT_TOL, duals: bool = False) -> SimplexResult:
    """Two-phase simplex.

    ``rule`` is ``"bland"`` (pure Bland's rule) or ``"dantzig"`` (most
    negative reduced cost, switching to Bland during long degenerate runs).
    Raises :class:`InfeasibleError` with a Farkas vector ``y`` (``y.A <= 0``,
    ``y.b > 0`` on the equality form) as witness.  Duals of the equality
    form are computed only when ``duals`` is set.
    """
    if rule not in ("bland", "dantzig"):
        raise DomainError(f"unknown pivot rule {rule!r}")
    c = np.asarray(c, dtype=float)
    nvar = c.size
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    if A_eq.shape[1] != nvar or A_ub.shape[1] != nvar:
        raise DomainError("constraint matrices must have one column per variable")
    for arr in (c, A_eq, b_eq, A_ub, b_ub):
        if not np.all(np.isfinite(arr)):
            raise DomainError("LP data must be finite")
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    ncol = nvar + m_ub
    A = np.zeros((m, ncol))
    A[:m_eq, :nvar] = A_eq
    A[m_eq:, :nvar] = A_ub
    A[m_eq:, nvar:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    patience = max(1000, 2 * m)

    # phase 1: artificial j of row r has index ncol + r; artificials start
    # basic and are never priced again, so they need no tableau columns
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :ncol] = A
    T[:m, -1] = b
    T[-1, :ncol] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = np.arange(ncol, ncol + m)
    it = _run(T, basis, np.ones(ncol, dtype=bool), rule, max_iter, tol, patience)
    phase1 = -T[-1, -1]
    if phase1 > FEAS_TOL:
        full = np.hstack([A, np.eye(m)])
        cb = (basis >= ncol).astype(float)
        y = np.linalg.lstsq(full[:, basis].T, cb, rcond=None)[0]
        raise InfeasibleError(f"LP is infeasible (phase-1 value {phase1:.3g})",
                              {"phase1_value": float(phase1), "farkas": (y * sign).tolist()})

    # drive artificials out; rows where that is impossible are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= ncol:
            row = T[r, :ncol]
            cand = np.flatnonzero(np.abs(row) > tol)
            if cand.size:
                j = int(cand[np.argmax(np.abs(row[cand]))])
                _pivot(T, r, j)
                basis[r] = j
            else:
                keep[r] = False
    redundant = np.flatnonzero(~keep).tolist()
    rows = np.flatnonzero(keep)
    T2 = np.zeros((rows.size + 1, ncol + 1))
    T2[:-1] = T[rows]
    basis = basis[rows]
    cost = np.zeros(ncol)
    cost[:nvar] = c
    T2[-1, :ncol] = cost - cost[basis] @ T2[:-1, :ncol]
    T2[-1, -1] = -cost[basis] @ T2[:-1, -1]
    it += _run(T2, basis, np.ones(ncol, dtype=bool), rule, max_iter, tol, patience)

    x = np.zeros(ncol)
    x[basis] = T2[:-1, -1]
    x = x[:nvar]
    x[np.abs(x) < 1e-13] = 0.0
    y_full = np.zeros(m)
    if duals:
        y_full[rows] = np.linalg.lstsq(A[rows][:, basis].T, cost[basis], rcond=None)[0]
        y_full *= sign
    return SimplexResult(x, float(c @ x), it, y_full, redundant)
