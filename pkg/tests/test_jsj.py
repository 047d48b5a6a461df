import random
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import amalgam, c, c4c2c4, d4, free, load
from propp import bass_serre as bs
from propp import cylinders as cy
from propp import gog, jsj
from propp.errors import BadExpansion, InfiniteVertexGroup, NotFictitious, NotReduced
from propp.gog import GraphOfGroups, make_edge
from propp.groups import FiniteGroup
from propp.samples import random_finite_graph, random_free_graph


def fictitious_d4():
    return amalgam(c(2, name="b"), d4(), c(2, name="c"), ["b"], ["s"])


def triangle():
    vs = {"u": c(4), "w": c(4, name="b"), "x": c(4, name="d")}
    return GraphOfGroups(vs, [
        make_edge("e1", "u", "w", c(2, name="c"), ["a^2"], ["b^2"], graph_vertices=vs),
        make_edge("e2", "w", "x", c(2, name="c"), ["b^2"], ["d^2"], graph_vertices=vs),
        make_edge("e3", "x", "u", c(2, name="c"), ["d^2"], ["a^2"], graph_vertices=vs),
    ], 2)


def square_root_expansion():
    """C2 -C2- C4: presents C4 with a bijective attachment on the C2 side."""
    ivs = {"p": c(2, name="y"), "q": c(4)}
    return GraphOfGroups(ivs, [make_edge("f", "p", "q", c(2, name="z"), ["y"], ["a^2"], graph_vertices=ivs)], 2)


# --- domination ---------------------------------------------------------------

def test_refinement_dominates_its_collapse():
    g = load("amalg_d4_s_d4")
    col = gog.collapse_subgraph(g, ["e"], name="X")
    assert jsj.dominates(g, col).overall.is_yes
    assert jsj.dominates(col, g).overall.is_no


def test_everything_dominates_the_point():
    assert jsj.dominates(c4c2c4(), load("amalg_c4_c2_c4_collapsed")).overall.is_yes


def test_tree_dominates_its_tree_of_cylinders():
    g = c4c2c4()
    tc = cy.tree_of_cylinders(g)
    assert jsj.dominates(g, tc.graph).overall.is_yes


# --- deformation spaces -------------------------------------------------------

def test_reduction_stays_in_the_deformation_space():
    g = fictitious_d4()
    assert jsj.same_deformation_space(g, gog.reduce_graph(g)[0]).is_yes


def test_two_spanning_trees_give_the_same_deformation_space():
    g = triangle()
    t1 = g.with_tree(frozenset(["e1", "e2"]))
    t2 = g.with_tree(frozenset(["e2", "e3"]))
    assert jsj.same_deformation_space(t1, t2).is_yes


def test_forgetting_the_edge_group_changes_the_group():
    coarse = amalgam(c(4), c(4, name="b"), FiniteGroup.trivial(2), [], [])
    v = jsj.same_deformation_space(c4c2c4(), coarse)
    assert v.is_no
    assert v.witness["not_a_homomorphism"]["hyperbolic"]


# --- universal ellipticity and JSJ certificates ------------------------------

def test_universally_elliptic_edges():
    assert jsj.universally_elliptic_edges(load("amalg_d4_s_d4")) == {"e": "Certified"}
    assert jsj.universally_elliptic_edges(load("amalg_free_malnormal")) == {"e": "Unknown"}
    coarse = amalgam(free("ab"), free("xy"), FiniteGroup.trivial(2), [], [])
    assert jsj.universally_elliptic_edges(coarse) == {"e": "Certified"}


def test_reduced_d4_amalgam_is_certified():
    assert jsj.jsj_certify_finite(load("amalg_d4_s_d4"))["certified"]


def test_unreduced_input_is_not_certified():
    cert = jsj.jsj_certify_finite(fictitious_d4())
    assert not cert["certified"] and cert["trace"]["steps"]


def test_single_finite_vertex_is_certified():
    assert jsj.jsj_certify_finite(GraphOfGroups({"v": d4()}, [], 2))["certified"]


def test_certificate_needs_finite_vertices():
    with pytest.raises(InfiniteVertexGroup):
        jsj.jsj_certify_finite(load("amalg_free_malnormal"))


# --- accessibility audit ------------------------------------------------------

def _record(report, name):
    return next(r for r in report.records if r.name == name)


def test_cyclic_bounds_at_d_two():
    rep = jsj.accessibility_audit(c4c2c4())
    assert rep.d == 2
    assert _record(rep, "cyclic-edges").bound == 4
    assert _record(rep, "cyclic-vertices").bound == 3
    assert not rep.violations


def test_finite_edge_bound_at_d_three():
    rep = jsj.accessibility_audit(c4c2c4(), claims={"d": 3})
    assert _record(rep, "finite-edge").bound == 9


def test_acylindrical_bound():
    rep = jsj.accessibility_audit(load("amalg_free_malnormal"), claims={"d": 2, "acylindricity": 2})
    assert _record(rep, "acylindrical-edges").bound == 17


def test_acylindrical_bound_from_verdict():
    g = load("amalg_free_malnormal")
    rep = jsj.accessibility_audit(g, acylindricity=(2, bs.check_acylindrical(g, 2)))
    assert _record(rep, "acylindrical-edges").bound == rep.d * 9 - 1


def test_corrupt_claim_is_reported():
    g = load("audit_corrupt_claim")
    rep = jsj.accessibility_audit(g, claims={"d": 1})
    assert [r.name for r in rep.violations] == ["finite-family"]
    assert rep.exit_code == 1


def test_audit_needs_reduced_input():
    with pytest.raises(NotReduced):
        jsj.accessibility_audit(fictitious_d4())


def test_audit_rejects_pro_p_fictitious_edge():
    g = amalgam(free("a", 3), free("xy", 3), free("c", 3), ["a^2"], ["x"])
    with pytest.raises(NotReduced):
        jsj.accessibility_audit(g)


# --- moves --------------------------------------------------------------------

@pytest.mark.parametrize("target", ["p", "q"])
def test_expansion_then_reduction_is_identity(target):
    g = c4c2c4()
    out = jsj.expansion_move(g, "u", square_root_expansion(), {"e": target})
    assert len(out.vertices) == 3
    assert gog.isomorphic(jsj.reduction_move(out, "f"), g) is not None


def test_reduction_of_reduced_edge_is_refused():
    with pytest.raises(NotFictitious):
        jsj.reduction_move(c4c2c4(), "e")


def test_expansion_needs_a_bijective_attachment():
    with pytest.raises(BadExpansion):
        jsj.expansion_move(load("amalg_c4_c2_c4_collapsed"), "uw", c4c2c4())


def test_expansion_inserting_normalizer_matches_cylinder_picture():
    tc = cy.tree_of_cylinders(load("amalg_d4_s_d4")).graph
    e = tc.edges["u|0>cyl0"]
    ivs = {"u": tc.vertices["u"], "n": e.group}
    inner = GraphOfGroups(ivs, [make_edge("i", "u", "n", e.group, list(e.att(0).images), ["a", "b"],
                                          graph_vertices=ivs)], 2)
    out = jsj.expansion_move(tc, "u", inner, {"u|0>cyl0": "n"})
    assert out.vertex_names == ["cyl0", "n", "u", "w"]
    assert out.edges["u|0>cyl0"].ends == ("n", "cyl0")
    assert gog.isomorphic(jsj.reduction_move(out, "i"), tc) is not None


def test_reduction_then_expansion_is_identity():
    g = fictitious_d4()
    out = jsj.reduction_move(g, "e")
    ivs = {"u": g.vertices["u"], "w": g.vertices["w"]}
    inner = GraphOfGroups(ivs, [g.edges["e"]], 2)
    back = jsj.expansion_move(out, "w", inner)
    assert gog.isomorphic(back, g) is not None


# --- properties ---------------------------------------------------------------

seeds = st.integers(0, 10**6)


def collapse_chain(g):
    """g, g with one edge collapsed, and the point."""
    out = [g]
    non_loops = [n for n in g.edge_names if not g.edges[n].is_loop]
    if non_loops:
        out.append(gog.collapse_subgraph(g, [non_loops[0]], name="K"))
    out.append(gog.collapse_subgraph(g, g.edge_names, list(g.vertices), name="P"))
    return out


@settings(max_examples=25)
@given(seeds)
def test_domination_is_a_preorder(seed):
    g = random_finite_graph(random.Random(seed), 2, max_order=8, max_edges=3)
    family = collapse_chain(g)
    dom = {(i, j): jsj.dominates(a, b).overall.is_yes
           for i, a in enumerate(family) for j, b in enumerate(family)}
    for i in range(len(family)):
        assert dom[i, i]
    for i, j, k in permutations(range(len(family)), 3):
        if dom[i, j] and dom[j, k]:
            assert dom[i, k]


@settings(max_examples=10)
@given(seeds)
def test_same_deformation_space_is_an_equivalence(seed):
    g = random_finite_graph(random.Random(seed), 2, max_order=8, max_edges=3, reduced=False)
    family = [g, gog.reduce_graph(g)[0], collapse_chain(g)[-1]]
    rel = {(i, j): jsj.same_deformation_space(a, b).is_yes
           for i, a in enumerate(family) for j, b in enumerate(family)}
    for i in range(3):
        assert rel[i, i]
        for j in range(3):
            assert rel[i, j] == rel[j, i]
            for k in range(3):
                if rel[i, j] and rel[j, k]:
                    assert rel[i, k]
    assert rel[0, 1]


@given(seeds, st.sampled_from([2, 3]))
def test_reduced_finite_graphs_are_certified(seed, p):
    g = random_finite_graph(random.Random(seed), p, max_order=16 if p == 2 else 9, reduced=False)
    assert jsj.jsj_certify_finite(gog.reduce_graph(g)[0])["certified"]


@given(seeds)
def test_audit_never_fails_on_library_graphs(seed):
    rng = random.Random(seed)
    g = random_finite_graph(rng, 2) if seed % 2 else random_free_graph(rng, 2)
    assert not jsj.accessibility_audit(g).violations
