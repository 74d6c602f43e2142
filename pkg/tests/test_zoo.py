import numpy as np
import pytest

from conftest import philox
from multiway.brute import brute_force_partition, brute_force_symmetric, symmetric_gamma_optimum
from multiway.core import SymmetricGamma, check_submodular
from multiway.errors import CapacityError, DomainError
from multiway.instance import SymmetrySpec
from multiway.mincsp import (CspEdge, MinCspInstance, brute_force_csp, build_basic_lp, check_certificate,
                             compare_relaxations, csp_multilinear_value, multiway_to_mincsp, nae_table,
                             solve_lp)
from multiway.zoo import (GapReport, HMP_EPSILON, RANDOM_KINDS, brute_symmetric_csp, csp_invariance_defect,
                          fold_symmetric_instance, gen_grid, gen_hk, gen_hmp_cycle, gen_random_family,
                          gen_symmetric_gamma, hk_edge, hk_half_certificate, hk_vertices, row_assignment,
                          symmetrize_gap_instance, symmetrize_size)


def test_gap_report_ratio():
    r = GapReport(4.0, 3.0)
    assert r.ratio == pytest.approx(4 / 3) == r.to_dict()["ratio"]


# --- grid --------------------------------------------------------------------

def test_grid_shape_and_invariance():
    inst, sym = gen_grid(3)
    assert inst.n == 9 and inst.terminals == [0, 4, 8]
    assert inst.oracle([0, 1, 2]) == pytest.approx(1.0)
    sym.check_invariance(inst, samples=1000)
    S = philox(1).random((1000, 9)) < 0.5
    np.testing.assert_allclose(inst.oracle.value_batch(S), inst.oracle.value_batch(S[:, sym.generators[0]]))


def test_grid_k3_gap():
    inst, sym = gen_grid(3)
    part, opt = brute_force_partition(inst)
    spart, sopt = brute_force_symmetric(inst, sym)
    assert (opt, sopt) == (3, 4)
    assert sopt / opt == pytest.approx((2 * 3 - 2) / 3)
    g = sym.generators[0]
    np.testing.assert_array_equal(spart.labels, spart.labels[g])
    assert part.respects(inst.terminals) and spart.respects(inst.terminals)


def test_grid_rejects_small_k():
    with pytest.raises(DomainError):
        gen_grid(1)


# --- symmetric gamma ---------------------------------------------------------

def test_symmetric_gamma_k4():
    inst, sym = gen_symmetric_gamma(4)
    assert inst.oracle.gamma == 2
    assert inst.cost(row_assignment(4)) == pytest.approx(4 * (2 * 4 - 2))
    sym.check_invariance(inst, samples=1000)
    check_submodular(inst.oracle, samples=10000)


@pytest.mark.parametrize("k,gamma", [(3, None), (4, None), (4, 0), (4, 4)])
def test_symmetric_gamma_optimum_matches_orbit_enumeration(k, gamma):
    inst, sym = gen_symmetric_gamma(k, gamma)
    part, value = symmetric_gamma_optimum(k, gamma)
    _, brute = brute_force_symmetric(inst, sym)
    assert value == pytest.approx(brute)
    assert part.cost(inst.oracle) == pytest.approx(value)
    np.testing.assert_array_equal(part.labels, part.labels[sym.generators[0]])


def test_symmetric_gamma_row_cost_formula():
    for k in range(3, 9):
        f = SymmetricGamma(k)
        inst, _ = gen_symmetric_gamma(k)
        assert inst.cost(row_assignment(k)) == pytest.approx(k * (2 * k - f.gamma))


# --- H_k ---------------------------------------------------------------------

def test_hk_structure():
    csp = gen_hk(3)
    verts = hk_vertices(3)
    assert csp.n == 6 and len(csp.edges) == 3
    assert [verts[v] for v in csp.edges[0].vertices] == [(0, 0), (0, 1), (0, 2)]
    for i, e in enumerate(csp.edges):
        assert len(e.vertices) == 3
        assert sorted(verts[v] for v in e.vertices) == sorted(hk_edge(3, i))
        assert all(i in verts[v] for v in e.vertices)
    for v, c in enumerate(csp.effective_candidates()):
        a, b = verts[v]
        assert c == ([a] if a == b else [0, 1, 2])


def test_hk_gap():
    csp = gen_hk(3)
    vertex, edges = hk_half_certificate(3)
    cert = check_certificate(csp, vertex, edges)
    _, opt = brute_force_csp(csp)
    assert cert.objective == pytest.approx(1.5) and opt == 2
    assert opt / cert.objective >= (3 - 1) / (3 / 2) - 1e-12


# --- HMP 5-cycle -------------------------------------------------------------

def test_hmp_cycle_shape_and_separation():
    inst, csp = gen_hmp_cycle()
    assert inst.n == 10 and inst.k == 5
    assert len(inst.oracle.edges) == 6
    assert inst.oracle.weights.tolist() == [1.0] * 5 + [HMP_EPSILON]
    assert csp.n == 10 and len(csp.edges) == 6
    out = compare_relaxations(inst)
    assert out["separated"] and out["delta"] > 1e-4
    _, opt = brute_force_partition(inst)
    assert opt >= out["basic_lp_value"] - 1e-9
    assert brute_force_csp(csp)[1] == pytest.approx(opt)


# --- random families ---------------------------------------------------------

@pytest.mark.parametrize("kind", RANDOM_KINDS)
def test_random_family_reproducible(kind):
    a = gen_random_family(kind, 9, 3, 10, seed=42)
    b = gen_random_family(kind, 9, 3, 10, seed=42)
    c = gen_random_family(kind, 9, 3, 10, seed=43)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != c.to_dict()
    check_submodular(a.oracle)


def test_coverage_exhaustive_submodular_n10():
    for seed in range(5):
        check_submodular(gen_random_family("coverage", 10, 3, 8, seed).oracle)


def test_random_family_errors():
    with pytest.raises(DomainError):
        gen_random_family("nope", 5, 2, 3)
    with pytest.raises(DomainError):
        gen_random_family("graph-mc", 4, 2, 7)
    with pytest.raises(DomainError):
        gen_random_family("coverage", 3, 4, 2)


# --- symmetrization ----------------------------------------------------------

def test_symmetrize_hk3():
    csp = gen_hk(3)
    vertex, edges = hk_half_certificate(3)
    out, sym, info = symmetrize_gap_instance(csp, vertex, edges, 2)
    sizes = [len(o) for o in info["orbits"]]
    verts = hk_vertices(3)
    assert sizes == [1 if a == b else 2 for a, b in verts]
    assert symmetrize_size(vertex[1], 2) == 2
    # (a): the coordinate assignments cost at most the certificate value
    assert info["coordinate_costs"] == pytest.approx([1.5, 1.5])
    assert info["coordinate_mean"] <= info["lp_objective"] + 1e-9
    # (b): symmetric labelings cost at least OPT(H_3) = 2
    assert brute_symmetric_csp(out, sym)[1] >= 2 - 1e-9
    assert not csp_invariance_defect(out, sym)
    assert sum(e.weight for e in out.edges) == pytest.approx(sum(e.weight for e in csp.edges))


def test_symmetrize_normalize():
    csp = gen_hk(3)
    out, _, _ = symmetrize_gap_instance(csp, *hk_half_certificate(3), 2, normalize=True)
    assert sum(e.weight for e in out.edges) == pytest.approx(1.0)


def test_symmetrize_integral_cert_m1_isomorphic():
    csp = gen_hk(3)
    lab = np.array([0, 0, 0, 1, 1, 2])
    vertex = np.eye(3)[lab]
    edges = []
    for e in csp.edges:
        d = np.zeros((3,) * 3)
        d[tuple(lab[list(e.vertices)])] = 1.0
        edges.append(d)
    out, sym, info = symmetrize_gap_instance(csp, vertex, edges, 1)
    assert out.n == csp.n and len(out.edges) == len(csp.edges)
    assert [e.vertices for e in out.edges] == [e.vertices for e in csp.edges]
    assert info["coordinate_costs"] == [pytest.approx(csp.cost(lab))]
    assert brute_force_csp(out)[1] == brute_force_csp(csp)[1]


def test_symmetrize_guards():
    csp = gen_hk(3)
    vertex, edges = hk_half_certificate(3)
    with pytest.raises(DomainError):
        symmetrize_gap_instance(csp, vertex, edges, 3)
    with pytest.raises(CapacityError):
        symmetrize_gap_instance(csp, vertex, edges, 9)
    bad = vertex.copy()
    bad[1] = [1.0, 0.0, 0.0]
    with pytest.raises(DomainError):
        symmetrize_gap_instance(csp, bad, edges, 2)
    with pytest.raises(CapacityError):
        symmetrize_gap_instance(gen_hk(5), *hk_half_certificate(5), 2)


# --- folding -----------------------------------------------------------------

def grid_fold(c):
    inst, sym = gen_grid(3)
    csp = multiway_to_mincsp(inst)
    x = np.eye(3)[row_assignment(3)]
    return csp, fold_symmetric_instance(csp, sym, c, x=x), x


def test_fold_grid_n3():
    csp, (out, info), x = grid_fold(3)
    vertex, edges = info["certificate"]
    cert = check_certificate(out, vertex, edges)
    assert cert.feasible
    assert cert.objective == pytest.approx(csp_multilinear_value(csp, x))
    lp = solve_lp(build_basic_lp(out), out).objective
    assert lp <= cert.objective + 1e-7
    _, opt = brute_force_csp(out)
    assert opt / lp >= 1.30
    assert sorted(sum(info["clusters"], [])) == list(range(out.n))


def test_fold_trivial_group_isomorphic():
    csp = MinCspInstance(2, 3, [CspEdge((0, 1), nae_table(2, 2)), CspEdge((1, 2), nae_table(2, 2), 0.5)],
                         pins={0: 0, 2: 1})
    out, info = fold_symmetric_instance(csp, SymmetrySpec([], 3), 1)
    assert out.n == 3 and [e.vertices for e in out.edges] == [e.vertices for e in csp.edges]
    assert out.pins == csp.pins
    assert brute_force_csp(out)[1] == brute_force_csp(csp)[1]


def test_fold_rejects_non_invariant():
    csp = MinCspInstance(2, 3, [CspEdge((0, 1), nae_table(2, 2))])
    swap = np.array([0, 2, 1])
    with pytest.raises(DomainError):
        fold_symmetric_instance(csp, SymmetrySpec([swap], 3), 2)


def test_fold_cluster_size_guard():
    csp = MinCspInstance(2, 3, [CspEdge((1, 2), nae_table(2, 2))], pins={0: 0})
    sym = SymmetrySpec([np.array([0, 2, 1])], 3)
    with pytest.raises(DomainError):
        fold_symmetric_instance(csp, sym, 1)
    out, _ = fold_symmetric_instance(csp, sym, 2)
    assert out.n == 4 and len(out.edges) == 2
