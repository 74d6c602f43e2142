"""Exhaustive optima for multiway partition instances.

Enumeration order is lexicographic in the label vector of the free
vertices (first free vertex most significant), so the first minimizer found
is the lexicographically smallest one.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from itertools import permutations, product

import numpy as np

from .core import SymmetricGamma
from .errors import CapacityError, DomainError, InfeasibleError
from .instance import MultiwayInstance, Partition, SymmetrySpec

BRUTE_FORCE_BUDGET = 1 << 28
_CHUNK = 1 << 17
_ROUND = 9


def lexicographic_min(radices, cost_fn, budget: int = BRUTE_FORCE_BUDGET, threads: int = 1):
    """Minimize ``cost_fn`` over the mixed-radix odometer ``radices``.

    ``cost_fn`` maps a ``(m, len(radices))`` digit matrix to ``m`` costs.
    Returns ``(digits, value)`` of the first minimizer in lexicographic
    order; values are compared after rounding to 1e-9.
    """
    radices = [int(r) for r in radices]
    if any(r < 1 for r in radices):
        raise InfeasibleError("a variable has no admissible value")
    total = 1
    for r in radices:
        total *= r
        if total > budget:
            raise CapacityError(f"enumeration of {np.prod(radices, dtype=float):.3g} points exceeds budget {budget}")
    # the trailing digits that fit in one chunk repeat identically in every
    # chunk, so they are built once; the leading digits are constant per chunk
    L = len(radices)
    split, block = L, 1
    while split > 0 and block * radices[split - 1] <= _CHUNK:
        split -= 1
        block *= radices[split]
    suffix = np.zeros((block, L - split), dtype=np.int16)
    period = 1
    for p in range(L - 1, split - 1, -1):
        suffix[:, p - split] = (np.arange(block) // period) % radices[p]
        period *= radices[p]
    lead = radices[:split]
    n_chunks = total // block

    def prefix_digits(c):
        out = np.zeros(split, dtype=np.int16)
        for p in range(split - 1, -1, -1):
            c, out[p] = divmod(c, lead[p])
        return out

    def run(c):
        digits = np.empty((block, L), dtype=np.int16)
        digits[:, :split] = prefix_digits(c)
        digits[:, split:] = suffix
        vals = np.asarray(cost_fn(digits), dtype=float)
        t = int(np.argmin(np.round(vals, _ROUND)))
        return round(float(vals[t]), _ROUND), c * block + t, float(vals[t])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, range(n_chunks)))
    else:
        results = [run(c) for c in range(n_chunks)]
    key, best, value = min(results, key=lambda r: (r[0], r[1]))
    c, t = divmod(best, block)
    digits = np.concatenate([prefix_digits(c), suffix[t]]).astype(np.int64)
    return digits, value


def _partition_cost_fn(inst: MultiwayInstance, groups, fixed):
    """Cost of labelings where ``groups[p]`` all take digit ``p``'s label."""
    n, k = inst.n, inst.k
    owner = np.full(n, -1, dtype=np.int64)
    for p, g in enumerate(groups):
        owner[g] = p
    fixed_idx = np.array(sorted(fixed), dtype=np.int64)
    fixed_lab = np.array([fixed[v] for v in sorted(fixed)], dtype=np.int64)
    free_idx = np.flatnonzero(owner >= 0)

    def expand(digits):
        labels = np.empty((digits.shape[0], n), dtype=np.int16)
        labels[:, fixed_idx] = fixed_lab
        labels[:, free_idx] = digits[:, owner[free_idx]]
        return labels

    def cost(digits):
        labels = expand(digits)
        total = np.zeros(labels.shape[0])
        for lab in range(k):
            total += inst.oracle.value_batch(labels == lab)
        return total

    return cost, expand


def brute_force_partition(inst: MultiwayInstance, budget: int = BRUTE_FORCE_BUDGET, threads: int = 1):
    """Exact minimum of ``sum_i f(A_i)`` with terminals pinned."""
    free = inst.free_vertices()
    fixed = {t: i for i, t in enumerate(inst.terminals)}
    cost, expand = _partition_cost_fn(inst, [[int(v)] for v in free], fixed)
    digits, _ = lexicographic_min([inst.k] * free.size, cost, budget, threads)
    part = Partition(expand(digits[None, :])[0], inst.k)
    return part, part.cost(inst.oracle)


def brute_force_symmetric(inst: MultiwayInstance, sym: SymmetrySpec,
                          budget: int = BRUTE_FORCE_BUDGET, threads: int = 1):
    """Exact minimum over integral assignments constant on every orbit."""
    if sym.n != inst.n:
        raise DomainError("symmetry acts on a different ground set")
    term_label = {t: i for i, t in enumerate(inst.terminals)}
    fixed, groups = {}, []
    for orbit in sym.orbits():
        labs = {term_label[v] for v in orbit if v in term_label}
        if len(labs) > 1:
            raise InfeasibleError(f"orbit {orbit} contains terminals with different labels")
        if labs:
            lab = labs.pop()
            fixed.update({v: lab for v in orbit})
        else:
            groups.append(orbit)
    cost, expand = _partition_cost_fn(inst, groups, fixed)
    digits, _ = lexicographic_min([inst.k] * len(groups), cost, budget, threads)
    part = Partition(expand(digits[None, :])[0], inst.k)
    return part, part.cost(inst.oracle)


def symmetric_gamma_optimum(k: int, gamma: int | None = None):
    """Exact symmetric optimum of the symmetric-gamma grid instance.

    For assignments invariant under ``(i, j) <-> (j, i)`` the cost is twice
    the sum over rows of a function of the row's label counts, so the search
    runs over the ``k(k-1)/2`` off-diagonal pairs with per-row lower bounds.
    Returns ``(Partition, value)`` for the grid ground set.
    """
    oracle = SymmetricGamma(k, gamma)
    phi = oracle.phi
    cells = [(i, j) for i in range(k) for j in range(i + 1, k)]

    def row_cost(i, counts):
        return phi[k - counts[i]] + sum(phi[c] for lab, c in enumerate(counts) if lab != i)

    @lru_cache(maxsize=None)
    def completion(own, others, r):
        # others: sorted counts of the k-1 foreign labels
        if r == 0:
            return phi[k - own] + sum(phi[c] for c in others)
        best = completion(own + 1, others, r - 1)
        seen = set()
        for p, c in enumerate(others):
            if c in seen:
                continue
            seen.add(c)
            nxt = tuple(sorted(others[:p] + (c + 1,) + others[p + 1:]))
            best = min(best, completion(own, nxt, r - 1))
        return best

    counts = [[0] * k for _ in range(k)]
    for i in range(k):
        counts[i][i] = 1
    remaining = [k - 1] * k

    def row_bound(i):
        c = counts[i]
        others = tuple(sorted(c[lab] for lab in range(k) if lab != i))
        return completion(c[i], others, remaining[i])

    bounds = [row_bound(i) for i in range(k)]
    labels = np.zeros(len(cells), dtype=np.int64)

    # incumbents: every pair to terminal 0, and the staircase (i, j) -> min(i, j)
    best = [np.inf, None]
    for rule in (lambda i, j: 0, lambda i, j: min(i, j)):
        inc = [[0] * k for _ in range(k)]
        for i in range(k):
            inc[i][i] = 1
        for i, j in cells:
            inc[i][rule(i, j)] += 1
            inc[j][rule(i, j)] += 1
        val = 2 * sum(row_cost(i, inc[i]) for i in range(k)) + 1e-9
        if val < best[0]:
            best = [val, np.array([rule(i, j) for i, j in cells], dtype=np.int64)]

    def order(i, j):
        return [i, j] + [lab for lab in range(k) if lab not in (i, j)]

    def dfs(idx, bound_sum):
        if 2 * bound_sum >= best[0] - 1e-12:
            return
        if idx == len(cells):
            best[0] = 2 * bound_sum
            best[1] = labels.copy()
            return
        i, j = cells[idx]
        for lab in order(i, j):
            counts[i][lab] += 1
            counts[j][lab] += 1
            remaining[i] -= 1
            remaining[j] -= 1
            bi, bj = row_bound(i), row_bound(j)
            delta = bi + bj - bounds[i] - bounds[j]
            old_i, old_j = bounds[i], bounds[j]
            bounds[i], bounds[j] = bi, bj
            labels[idx] = lab
            dfs(idx + 1, bound_sum + delta)
            bounds[i], bounds[j] = old_i, old_j
            counts[i][lab] -= 1
            counts[j][lab] -= 1
            remaining[i] += 1
            remaining[j] += 1

    # The instance is invariant under relabeling indices and labels together,
    # so the first row only needs one representative per orbit of the
    # permutations fixing index 0.
    first = k - 1
    perms = [(0,) + p for p in permutations(range(1, k))]
    reps = set()
    for row in product(range(k), repeat=first):
        v = (0,) + row
        reps.add(min(tuple(p[v[p.index(j)]] for j in range(1, k)) for p in perms))
    for row in sorted(reps):
        for j, lab in enumerate(row, start=1):
            counts[0][lab] += 1
            counts[j][lab] += 1
            remaining[0] -= 1
            remaining[j] -= 1
            labels[j - 1] = lab
        saved = bounds[:]
        for i in range(k):
            bounds[i] = row_bound(i)
        dfs(first, sum(bounds))
        bounds[:] = saved
        for j, lab in enumerate(row, start=1):
            counts[0][lab] -= 1
            counts[j][lab] -= 1
            remaining[0] += 1
            remaining[j] += 1
    grid = np.zeros((k, k), dtype=np.int64)
    grid[np.arange(k), np.arange(k)] = np.arange(k)
    for (i, j), lab in zip(cells, best[1]):
        grid[i, j] = grid[j, i] = lab
    part = Partition(grid.reshape(-1), k)
    return part, part.cost(oracle)
