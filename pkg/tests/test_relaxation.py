import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import philox, random_feasible_x
from multiway.brute import brute_force_partition
from multiway.core import ExplicitTable, GridPartition, HypergraphCutCount, lovasz_extension
from multiway.errors import DomainError, NumericError
from multiway.instance import MultiwayInstance, integral_assignment, validate_assignment
from multiway.mincsp import build_basic_lp, multiway_to_mincsp, solve_lp
from multiway.relaxation import (SolverConfig, order_polish, project_feasible, project_simplex_rows,
                                 relaxation_value, solve_submp_rel, subgradient_at)
from multiway.zoo import gen_grid, gen_random_family, row_assignment

FAST = SolverConfig(max_iters=2000)


def test_single_edge(edge_instance):
    x, rep = solve_submp_rel(edge_instance, FAST)
    assert rep.value == pytest.approx(1.0, abs=1e-4)


def test_grid_at_most_dictator():
    inst, _ = gen_grid(3)
    x, rep = solve_submp_rel(inst, FAST)
    assert rep.value <= inst.cost(row_assignment(3)) + 1e-6
    assert rep.value == pytest.approx(3.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_graph_mc_matches_basic_lp(seed):
    inst = gen_random_family("graph-mc", 8, 3, 12, seed)
    _, rep = solve_submp_rel(inst, FAST)
    csp = multiway_to_mincsp(inst)
    lp = solve_lp(build_basic_lp(csp), csp).objective
    assert abs(rep.value - lp) <= 1e-3 * max(1.0, lp)


@pytest.mark.parametrize("kind", ["graph-mc", "hypergraph-mc", "hypergraph-concave", "coverage"])
def test_report_certificate_and_relaxation_ordering(kind):
    inst = gen_random_family(kind, 8, 3, 10, seed=11)
    cfg = SolverConfig(max_iters=1500, history=True)
    x, rep = solve_submp_rel(inst, cfg)
    validate_assignment(x, inst.terminals)
    assert relaxation_value(inst.oracle, x) == pytest.approx(rep.value, abs=1e-9)
    _, opt = brute_force_partition(inst)
    assert rep.value <= opt + 1e-9
    for i in range(inst.k):
        labels = np.full(inst.n, i)
        labels[inst.terminals] = np.arange(inst.k)
        assert rep.value <= inst.cost(labels) + 1e-9
    assert np.all(np.diff(rep.best_iterate_history) <= 0)


def test_polish_never_increases():
    inst = gen_random_family("hypergraph-concave", 9, 4, 12, seed=3)
    x = random_feasible_x(inst.n, inst.k, inst.terminals, philox(1))
    before = relaxation_value(inst.oracle, x)
    y, value, _ = order_polish(inst, x)
    validate_assignment(y, inst.terminals)
    assert value <= before + 1e-12
    assert value == pytest.approx(relaxation_value(inst.oracle, y), abs=1e-12)


def test_non_finite_oracle():
    f = ExplicitTable([0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    inst = MultiwayInstance(f, [0, 1])
    f.values[-1] = np.inf
    with pytest.raises(NumericError):
        solve_submp_rel(inst, FAST)


def test_bad_terminals():
    with pytest.raises(DomainError):
        MultiwayInstance(GridPartition(3), [0, 0])
    with pytest.raises(DomainError):
        MultiwayInstance(GridPartition(3), [0, 9])


# --- subgradients ------------------------------------------------------------

def test_subgradient_modular():
    w = np.array([0.3, 1.2, 0.7])
    masks = np.arange(8)
    f = ExplicitTable([sum(w[b] for b in range(3) if m >> b & 1) for m in masks])
    np.testing.assert_allclose(subgradient_at(f, [0.9, 0.2, 0.5]), w)


@pytest.mark.parametrize("kind", ["hypergraph-concave", "coverage"])
def test_subgradient_tight_at_indicator(kind):
    f = gen_random_family(kind, 8, 2, 10, seed=2).oracle
    s = philox(9).random(8) < 0.5
    assert subgradient_at(f, s.astype(float)) @ s == pytest.approx(f(s), abs=1e-12)


def _greedy_subgradient(f, order):
    prefixes = np.tril(np.ones((order.size + 1, order.size), dtype=bool), -1)
    members = np.zeros_like(prefixes)
    members[:, order] = prefixes
    g = np.empty(order.size)
    g[order] = np.diff(f.value_batch(members))
    return g


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ties=st.booleans())
def test_subgradient_probe_inequality(seed, ties):
    f = gen_random_family("hypergraph-concave", 9, 2, 12, seed=seed % 7).oracle
    rng = philox(seed)
    x = rng.random(9)
    if ties:
        x = np.round(x * 3) / 3
    fx = lovasz_extension(f, x)
    g = subgradient_at(f, x)
    # any tie order consistent with the descending sort is also a subgradient
    g_alt = _greedy_subgradient(f, np.lexsort((rng.random(9), -x)))
    for y in rng.random((100, 9)):
        fy = lovasz_extension(f, y)
        assert fy >= fx + g @ (y - x) - 1e-9
        assert fy >= fx + g_alt @ (y - x) - 1e-9


def test_subgradient_formula():
    f = gen_random_family("coverage", 7, 2, 5, seed=1).oracle
    x = np.array([0.2, 0.9, 0.2, 0.5, 0.0, 0.9, 0.4])
    np.testing.assert_allclose(subgradient_at(f, x), _greedy_subgradient(f, np.array([1, 5, 3, 6, 0, 2, 4])))


# --- projection --------------------------------------------------------------

def test_projection_examples():
    np.testing.assert_allclose(project_simplex_rows([[2.0, 0.0, 0.0]]), [[1.0, 0.0, 0.0]])
    x = project_feasible(np.array([[0.2, 0.3, 0.5], [5.0, -1.0, 2.0]]), [1])
    np.testing.assert_allclose(x[1], [1.0, 0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_feasible_idempotent_and_nearest(seed):
    rng = philox(seed)
    Y = rng.normal(size=(6, 4)) * 3
    terms = [0, 3, 5, 2]
    x = project_feasible(Y, terms)
    validate_assignment(x, terms)
    np.testing.assert_allclose(project_feasible(x, terms), x, atol=1e-12)
    # no feasible point on a free row is closer
    for _ in range(20):
        z = rng.dirichlet(np.ones(4))
        assert np.linalg.norm(Y[1] - x[1]) <= np.linalg.norm(Y[1] - z) + 1e-12


def test_integral_point_value():
    inst, _ = gen_grid(3)
    x = integral_assignment(row_assignment(3), 3)
    assert relaxation_value(inst.oracle, x) == pytest.approx(3.0)
