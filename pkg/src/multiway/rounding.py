"""Threshold rounding of a fractional assignment and its exact analysis.

For ``theta`` in ``(1/2, 1]`` every vertex with ``x[v, l] > theta`` goes to
label ``l``; the rest go to one random label ``i_star``.  All integrals over
``theta`` are computed exactly: the sets involved only change at the
breakpoints of a :class:`ThetaProfile`, so each integral is a finite sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SubmodularOracle, lovasz_extension
from .errors import DomainError, SubmodularityError
from .instance import MultiwayInstance, Partition, validate_assignment


@dataclass
class ThetaProfile:
    """Piecewise-constant description of ``A_i(theta)``, ``U(theta)``, ``B(theta)``.

    ``A[m, i]`` is ``{v : x[v, i] > theta}`` and ``B[m]`` is
    ``{v : 1 - max_i x[v, i] >= theta}``, both at the midpoint of
    interval ``m``.  Breakpoints are the entries of ``x``, the values
    ``1 - max_i x[v, i]`` (where ``B`` changes) and ``0, 1/2, 1``.
    """

    breakpoints: np.ndarray
    mids: np.ndarray
    lengths: np.ndarray
    A: np.ndarray
    U: np.ndarray
    B: np.ndarray

    @classmethod
    def from_assignment(cls, x, extra=()) -> "ThetaProfile":
        """``extra`` adds breakpoints, e.g. an integration limit."""
        x = np.asarray(x, dtype=float)
        top = x.max(axis=1)
        pts = np.unique(np.concatenate([x.ravel(), 1.0 - top, [0.0, 0.5, 1.0], np.asarray(extra, dtype=float)]))
        pts = pts[(pts >= 0.0) & (pts <= 1.0)]
        mids = (pts[:-1] + pts[1:]) / 2
        A = x.T[None, :, :] > mids[:, None, None]
        U = ~A.any(axis=1)
        B = (1.0 - top)[None, :] >= mids[:, None]
        return cls(pts, mids, np.diff(pts), A, U, B)

    def window(self, lo: float, hi: float) -> np.ndarray:
        """Mask of intervals inside ``[lo, hi]`` (``lo``, ``hi`` are breakpoints)."""
        return (self.mids > lo) & (self.mids < hi)

    def integrate(self, values: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> float:
        """``int_lo^hi`` of a function given by its per-interval values."""
        w = self.window(lo, hi)
        return float(np.dot(self.lengths[w], values[w]))


def _values(oracle: SubmodularOracle, sets: np.ndarray) -> np.ndarray:
    """Oracle values of a stack of membership rows, keeping the leading shape."""
    shape = sets.shape[:-1]
    return oracle.value_batch(sets.reshape(-1, sets.shape[-1])).reshape(shape)


def round_at(x, theta: float, i_star: int, terminals=None) -> Partition:
    """Labels ``l`` where ``x[v, l] > theta``, ``i_star`` elsewhere.

    When ``terminals`` is given they keep their own labels (this only
    matters at ``theta = 1``, a null event).
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[1]
    if not 0.5 < theta <= 1.0:
        raise DomainError(f"theta must lie in (1/2, 1], got {theta}")
    if not 0 <= i_star < k:
        raise DomainError(f"i_star must lie in range({k})")
    above = x > theta
    if np.any(above.sum(axis=1) > 1):
        raise DomainError("sets A_i(theta) overlap; rows of x must sum to one")
    labels = np.where(above.any(axis=1), above.argmax(axis=1), i_star)
    if terminals is not None:
        labels[list(terminals)] = np.arange(len(terminals))
    return Partition(labels, k)


def lp_cost_exact(x, oracle: SubmodularOracle, k: int | None = None) -> float:
    """``sum_i int_0^1 f(A_i(theta)) dtheta`` by breakpoint integration."""
    prof = ThetaProfile.from_assignment(x)
    return prof.integrate(_values(oracle, prof.A).sum(axis=1))


@dataclass
class RoundingTerms:
    hi_A: float
    lo_A: float
    lo_AB: float
    lo_B: float

    def alg(self, k: int) -> float:
        return (2 - 2 / k) * self.hi_A + (2 / k) * self.lo_AB

    def lp(self) -> float:
        return self.hi_A + self.lo_A


def rounding_terms(x, oracle: SubmodularOracle) -> RoundingTerms:
    prof = ThetaProfile.from_assignment(x)
    fA = _values(oracle, prof.A).sum(axis=1)
    fAB = _values(oracle, prof.A | prof.B[:, None, :]).sum(axis=1)
    fB = _values(oracle, prof.B)
    return RoundingTerms(prof.integrate(fA, 0.5, 1.0), prof.integrate(fA, 0.0, 0.5),
                         prof.integrate(fAB, 0.0, 0.5), prof.integrate(fB, 0.0, 0.5))


def expected_cost_exact(x, oracle: SubmodularOracle, k: int | None = None) -> float:
    """Expected rounded cost via ``(2-2/k) sum int_{1/2}^1 f(A_i) + (2/k) sum int_0^{1/2} f(A_i u B)``."""
    k = np.asarray(x).shape[1] if k is None else k
    return rounding_terms(x, oracle).alg(k)


def expected_cost_direct(x, oracle: SubmodularOracle) -> float:
    """Expected rounded cost by averaging the actual partitions.

    Uses ``A_i(theta) u U(theta)`` for ``theta`` in ``(1/2, 1]`` directly, so
    it does not rely on the ``B`` reformulation.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[1]
    prof = ThetaProfile.from_assignment(x)
    w = prof.window(0.5, 1.0)
    A, U = prof.A[w], prof.U[w]
    fA = _values(oracle, A)
    fAU = _values(oracle, A | U[:, None, :])
    # i_star = j adds U to block j only
    per_interval = fA.sum(axis=1) + (fAU - fA).mean(axis=1)
    return 2.0 * float(np.dot(prof.lengths[w], per_interval))


def rounding_monte_carlo(x, oracle: SubmodularOracle, samples: int = 100000, seed: int = 0,
                         terminals=None):
    """Sample mean and standard error of the rounded cost."""
    x = np.asarray(x, dtype=float)
    n, k = x.shape
    rng = np.random.Generator(np.random.Philox(seed))
    theta = 1.0 - 0.5 * rng.random(samples)  # uniform on (1/2, 1]
    i_star = rng.integers(0, k, samples)
    costs = np.empty(samples)
    chunk = 1 << 14
    for lo in range(0, samples, chunk):
        th, ist = theta[lo:lo + chunk], i_star[lo:lo + chunk]
        above = x[None, :, :] > th[:, None, None]
        labels = np.where(above.any(axis=2), above.argmax(axis=2), ist[:, None])
        if terminals is not None:
            labels[:, list(terminals)] = np.arange(len(terminals))
        total = np.zeros(th.size)
        for lab in range(k):
            total += oracle.value_batch(labels == lab)
        costs[lo:lo + chunk] = total
    return float(costs.mean()), float(costs.std(ddof=1) / np.sqrt(samples))


def best_rounding(x, inst: MultiwayInstance):
    """Cheapest partition in the support of the rounding.

    Enumerates every ``theta`` interval in ``(1/2, 1]`` (at its midpoint)
    and every ``i_star``.  This derandomization is not part of the original
    scheme.  Returns ``(Partition, value, theta, i_star)``.
    """
    x = validate_assignment(x, inst.terminals)
    prof = ThetaProfile.from_assignment(x)
    best = None
    for theta in prof.mids[prof.window(0.5, 1.0)]:
        for i_star in range(inst.k):
            part = round_at(x, float(theta), i_star, inst.terminals)
            val = part.cost(inst.oracle)
            if best is None or val < best[1] - 1e-12:
                best = (part, val, float(theta), i_star)
    return best


def union_identity_holds(x, theta: float) -> bool:
    """``A_i(theta) u U(theta) == A_i(1-theta) u B(1-theta)`` for every ``i``."""
    x = np.asarray(x, dtype=float)
    A = x > theta
    U = ~A.any(axis=1)
    A_low = x > 1.0 - theta
    B_low = (1.0 - x.max(axis=1)) >= 1.0 - theta
    return bool(np.array_equal(A | U[:, None], A_low | B_low[:, None]))


@dataclass
class LemmaReport:
    delta: float
    entries: list = field(default_factory=list)

    def add(self, name, lhs, rhs):
        self.entries.append({"name": name, "lhs": float(lhs), "rhs": float(rhs), "residual": float(lhs - rhs)})

    def min_residual(self) -> float:
        return min(e["residual"] for e in self.entries)

    def ok(self, tol: float = 1e-9) -> bool:
        return self.min_residual() >= -tol

    def to_dict(self):
        return {"delta": self.delta, "entries": self.entries}


def _pointwise_submodularity(oracle, S, T, fS, fT, what, tol):
    """Check ``f(S) + f(T) >= f(S u T) + f(S n T)`` row by row."""
    excess = _values(oracle, S | T) + _values(oracle, S & T) - fS - fT
    if excess.size and excess.max() > tol:
        r = np.unravel_index(int(np.argmax(excess)), excess.shape)
        a, b = np.flatnonzero(S[r]).tolist(), np.flatnonzero(T[r]).tolist()
        raise SubmodularityError(f"submodularity violated while checking {what}: A={a}, B={b} "
                                 f"(excess {excess.max():.3g})", (a, b), float(excess.max()))


def check_analysis_lemmas(x, oracle: SubmodularOracle, k: int | None = None,
                          delta: float = 0.5, tol: float = 1e-9) -> LemmaReport:
    """Evaluate the five inequalities of the rounding analysis exactly.

    Entries, each with ``lhs``, ``rhs`` and ``residual = lhs - rhs``:

    * ``cupcap``: ``sum_{i<k} int_0^delta f((A_1 u..u A_i) n A_{i+1}) >= int_0^1 f(U)``
    * ``ce``: ``sum_i int_0^delta f(A_i) >= int_0^delta f(A) + int_0^1 f(U)``
    * ``bound1``: ``sum_i int_0^{1/2} f(A_i) >= int_0^{1/2} f(B)``
    * ``bound2``: ``sum_i int_0^{1/2} f(A_i) >= sum_i int_0^{1/2} f(A_i u B) - (k-2) int_0^{1/2} f(B)``
    * ``theorem``: ``(2-2/k) LP >= ALG``

    The submodularity steps behind them are checked pointwise on every
    interval; a failure raises :class:`SubmodularityError` naming the sets.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[1] if k is None else k
    if not 0.5 <= delta <= 1.0:
        raise DomainError("delta must lie in [1/2, 1]")
    prof = ThetaProfile.from_assignment(x, [delta])
    A, U, B = prof.A, prof.U, prof.B
    fA = _values(oracle, A)
    chains = np.logical_or.accumulate(A, axis=1)
    meets = chains[:, :-1] & A[:, 1:]
    f_meet = _values(oracle, meets)
    f_union = _values(oracle, chains[:, -1])
    fU = _values(oracle, U)
    fB = _values(oracle, B)
    fAB = _values(oracle, A | B[:, None, :])
    _pointwise_submodularity(oracle, chains[:, :-1], A[:, 1:], _values(oracle, chains[:, :-1]),
                             fA[:, 1:], "the union chain", tol)
    Bk = np.broadcast_to(B[:, None, :], A.shape)
    _pointwise_submodularity(oracle, A, Bk, fA, np.broadcast_to(fB[:, None], fA.shape), "A_i against B", tol)

    rep = LemmaReport(float(delta))
    cup_lhs = prof.integrate(f_meet.sum(axis=1), 0.0, delta)
    u_int = prof.integrate(fU)
    rep.add("cupcap", cup_lhs, u_int)
    rep.add("ce", prof.integrate(fA.sum(axis=1), 0.0, delta), prof.integrate(f_union, 0.0, delta) + u_int)
    lo_A = prof.integrate(fA.sum(axis=1), 0.0, 0.5)
    lo_B = prof.integrate(fB, 0.0, 0.5)
    lo_AB = prof.integrate(fAB.sum(axis=1), 0.0, 0.5)
    rep.add("bound1", lo_A, lo_B)
    rep.add("bound2", lo_A, lo_AB - (k - 2) * lo_B)
    hi_A = prof.integrate(fA.sum(axis=1), 0.5, 1.0)
    alg = (2 - 2 / k) * hi_A + (2 / k) * lo_AB
    rep.add("theorem", (2 - 2 / k) * (hi_A + lo_A), alg)
    return rep


def lovasz_objective(x, oracle: SubmodularOracle) -> float:
    """``sum_i fhat(x[:, i])``, the second route to :func:`lp_cost_exact`."""
    x = np.asarray(x, dtype=float)
    return float(sum(lovasz_extension(oracle, np.clip(x[:, i], 0, 1)) for i in range(x.shape[1])))
