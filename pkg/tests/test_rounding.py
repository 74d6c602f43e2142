import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import philox, random_feasible_x
from multiway.brute import brute_force_partition
from multiway.core import ExplicitTable, lovasz_extension
from multiway.errors import DomainError, SubmodularityError
from multiway.instance import MultiwayInstance, integral_assignment
from multiway.relaxation import SolverConfig, solve_submp_rel
from multiway.rounding import (ThetaProfile, best_rounding, check_analysis_lemmas, expected_cost_direct,
                               expected_cost_exact, lp_cost_exact, lovasz_objective, round_at,
                               rounding_monte_carlo, union_identity_holds)
from multiway.zoo import gen_grid, gen_random_family, row_assignment


def pinned_edge_x():
    return np.eye(2)


# --- round_at ----------------------------------------------------------------

def test_integral_point_rounds_to_itself():
    labels = np.array([0, 1, 2, 2, 0, 1, 1])
    x = integral_assignment(labels, 3)
    for theta in (0.51, 0.75, 0.999):
        for i_star in range(3):
            np.testing.assert_array_equal(round_at(x, theta, i_star, [0, 1, 2]).labels, labels)


def test_single_edge_rounding(edge_instance):
    for theta in (0.6, 0.9):
        for i_star in (0, 1):
            assert round_at(pinned_edge_x(), theta, i_star).cost(edge_instance.oracle) == 1.0


def test_grid_dictator_rounding():
    inst, _ = gen_grid(3)
    x = integral_assignment(row_assignment(3), 3)
    assert round_at(x, 0.75, 1, inst.terminals).cost(inst.oracle) == pytest.approx(3.0)


@pytest.mark.parametrize("theta", [0.5, 0.2, 1.01])
def test_round_at_theta_domain(theta):
    with pytest.raises(DomainError):
        round_at(np.eye(2), theta, 0)


def test_round_at_overlap_detected():
    with pytest.raises(DomainError):
        round_at(np.array([[0.9, 0.9]]), 0.6, 0)


# --- exact integrals ---------------------------------------------------------

def test_single_edge_costs(edge_instance):
    f = edge_instance.oracle
    assert expected_cost_exact(pinned_edge_x(), f) == pytest.approx(1.0)
    assert lp_cost_exact(pinned_edge_x(), f) == pytest.approx(1.0)


def test_grid_dictator_costs():
    inst, _ = gen_grid(3)
    x = integral_assignment(row_assignment(3), 3)
    assert expected_cost_exact(x, inst.oracle) == pytest.approx(3.0)
    assert lp_cost_exact(x, inst.oracle) == pytest.approx(3.0)


def test_lp_cost_integral():
    inst = gen_random_family("coverage", 8, 3, 6, seed=1)
    labels = philox(1).integers(0, 3, 8)
    labels[:3] = [0, 1, 2]
    assert lp_cost_exact(integral_assignment(labels, 3), inst.oracle) == pytest.approx(inst.cost(labels))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5))
def test_two_routes_agree(seed, k):
    inst = gen_random_family("hypergraph-concave", 9, k, 10, seed=seed % 13)
    x = random_feasible_x(9, k, inst.terminals, philox(seed))
    assert lp_cost_exact(x, inst.oracle) == pytest.approx(lovasz_objective(x, inst.oracle), abs=1e-12)
    assert expected_cost_exact(x, inst.oracle) == pytest.approx(expected_cost_direct(x, inst.oracle), abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_monte_carlo_agrees(seed):
    inst = gen_random_family("coverage", 8, 3, 8, seed=seed)
    x = random_feasible_x(8, 3, inst.terminals, philox(seed))
    mean, se = rounding_monte_carlo(x, inst.oracle, samples=100000, seed=seed, terminals=inst.terminals)
    assert abs(mean - expected_cost_exact(x, inst.oracle)) <= 3 * se + 1e-12


def test_profile_sets():
    x = np.array([[1.0, 0.0], [0.3, 0.7], [0.6, 0.4]])
    prof = ThetaProfile.from_assignment(x)
    assert {0.0, 0.3, 0.4, 0.5, 0.6, 0.7, 1.0} <= set(np.round(prof.breakpoints, 12))
    t = int(np.searchsorted(prof.mids, 0.65))
    np.testing.assert_array_equal(prof.A[t], (x > prof.mids[t]).T)
    np.testing.assert_array_equal(prof.U[t], ~(x > prof.mids[t]).any(axis=1))
    np.testing.assert_array_equal(prof.B[t], 1 - x.max(axis=1) >= prof.mids[t])
    assert prof.lengths.sum() == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_union_identity(seed):
    rng = philox(seed)
    x = random_feasible_x(10, 4, [0, 1, 2, 3], rng)
    for theta in rng.uniform(0.5, 1.0, 20):
        assert union_identity_holds(x, float(theta))


# --- best rounding -----------------------------------------------------------

def test_best_rounding_single_edge(edge_instance):
    assert best_rounding(pinned_edge_x(), edge_instance)[1] == 1.0


def test_best_rounding_grid():
    inst, _ = gen_grid(3)
    x, _ = solve_submp_rel(inst, SolverConfig(max_iters=2000))
    _, opt = brute_force_partition(inst)
    part, value, theta, _ = best_rounding(x, inst)
    assert opt - 1e-9 <= value <= 4 + 1e-9
    assert part.cost(inst.oracle) == pytest.approx(value)
    assert 0.5 < theta <= 1


@pytest.mark.parametrize("seed", range(50))
def test_best_rounding_coverage(seed):
    k = 2 + seed % 4
    inst = gen_random_family("coverage", 8, k, 6, seed=seed)
    x = random_feasible_x(8, k, inst.terminals, philox(seed))
    part, value, _, _ = best_rounding(x, inst)
    assert part.respects(inst.terminals)
    assert value <= expected_cost_exact(x, inst.oracle) + 1e-9
    assert value <= (2 - 2 / k) * lp_cost_exact(x, inst.oracle) + 1e-9


# --- analysis lemmas ---------------------------------------------------------

def test_lemmas_single_edge(edge_instance):
    rep = check_analysis_lemmas(pinned_edge_x(), edge_instance.oracle)
    assert [e["name"] for e in rep.entries] == ["cupcap", "ce", "bound1", "bound2", "theorem"]
    assert rep.min_residual() >= 0


@pytest.mark.parametrize("k", [3, 4])
def test_lemmas_grid(k):
    inst, _ = gen_grid(k)
    x, _ = solve_submp_rel(inst, SolverConfig(max_iters=1000))
    assert check_analysis_lemmas(x, inst.oracle).min_residual() >= -1e-9


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5), delta=st.floats(0.5, 1.0),
       kind=st.sampled_from(["graph-mc", "hypergraph-concave", "coverage"]))
def test_lemmas_random(seed, k, delta, kind):
    inst = gen_random_family(kind, 8, k, 10, seed=seed % 17)
    x = random_feasible_x(8, k, inst.terminals, philox(seed))
    rep = check_analysis_lemmas(x, inst.oracle, delta=delta)
    assert rep.ok(1e-9), rep.entries
    assert expected_cost_exact(x, inst.oracle) <= (2 - 2 / k) * lp_cost_exact(x, inst.oracle) + 1e-9


def test_lemmas_reject_non_submodular():
    # supermodular: 1 only on the full ground set {0, 1, 2}
    f = ExplicitTable([0.0] * 7 + [1.0])
    x = np.array([[1.0, 0.0], [0.0, 1.0], [0.7, 0.3]])
    with pytest.raises(SubmodularityError) as err:
        check_analysis_lemmas(x, f)
    assert err.value.sets is not None


def test_lemma_delta_domain(edge_instance):
    with pytest.raises(DomainError):
        check_analysis_lemmas(pinned_edge_x(), edge_instance.oracle, delta=0.3)
