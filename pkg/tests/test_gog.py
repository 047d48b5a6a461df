import random
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import amalgam, c, c4c2c4, d4, free, load
from propp import gog
from propp.errors import Disconnected, EdgeGroupNotElliptic, NonInjectiveAttachment, NotConnected, NotSpanningTree, PrimeMismatch
from propp.gog import GraphOfGroups, make_edge
from propp.groups import FiniteGroup
from propp.homology import h1_dim
from propp.samples import random_finite_graph, random_free_graph, random_graph_with_trivial_edges


def trivial(p=2):
    return FiniteGroup.trivial(p)


def bouquet(n, p=2):
    vs = {"v": trivial(p)}
    edges = [make_edge(f"t{i}", "v", "v", trivial(p), [], [], graph_vertices=vs) for i in range(n)]
    return GraphOfGroups(vs, edges, p)


def path3():
    """C4 -C2- C4 -C2- C4, squares identified along both edges."""
    vs = {"u": c(4), "w": c(4, name="b"), "x": c(4, name="d")}
    e1 = make_edge("e1", "u", "w", c(2, name="c"), ["a^2"], ["b^2"], graph_vertices=vs)
    e2 = make_edge("e2", "w", "x", c(2, name="c"), ["b^2"], ["d^2"], graph_vertices=vs)
    return GraphOfGroups(vs, [e1, e2], 2)


def spanning_trees(graph):
    names = [n for n in graph.edge_names if not graph.edges[n].is_loop]
    k = len(graph.vertices) - 1
    for tree in combinations(names, k):
        try:
            graph.check_tree(frozenset(tree))
        except NotSpanningTree:
            continue
        yield list(tree)


# --- validation ---------------------------------------------------------------

def test_single_vertex_validates():
    GraphOfGroups({"v": c(4)}, [], 2).validate()


def test_square_embedding_validates():
    c4c2c4().validate()


def test_order_dropping_attachment_is_rejected():
    g = amalgam(c(4), c(2, name="b"), c(4, name="c"), ["a"], ["b"])
    with pytest.raises(NonInjectiveAttachment):
        g.validate()


def test_disconnected_graph_is_rejected():
    with pytest.raises(Disconnected):
        GraphOfGroups({"u": c(2), "w": c(2)}, [], 2).validate()


def test_mixed_primes_are_rejected():
    with pytest.raises(PrimeMismatch):
        GraphOfGroups({"u": c(2), "w": c(3, p=3)}, [
            make_edge("e", "u", "w", trivial(), [], [], graph_vertices={"u": c(2), "w": c(3, p=3)})
        ], 2).validate()


# --- presentations ------------------------------------------------------------

def test_single_vertex_presentation_is_the_vertex_group():
    pres = GraphOfGroups({"v": d4()}, [], 2).presentation()
    assert list(pres.generators) == ["v.r", "v.s"]
    assert pres.rank_mod_p(2) == 2


def test_amalgam_presentation():
    pres = c4c2c4().presentation()
    assert pres.to_json() == {
        "generators": ["u.a", "w.b"],
        "relators": ["u.a^4", "w.b^4", "u.a^2 w.b^-2"],
        "tree": ["e"],
        "killed": ["t_e"],
    }


def test_trivial_loop_gives_free_cyclic_presentation():
    pres = bouquet(1).presentation()
    assert pres.format() == "< t_t0 |  >"


def test_non_spanning_tree_is_rejected():
    with pytest.raises(NotSpanningTree):
        path3().presentation(["e1"])


# --- reduction ----------------------------------------------------------------

def test_fictitious_edge_collapses_onto_d4():
    g = amalgam(c(2, name="b"), d4(), c(2, name="c"), ["b"], ["s"])
    out, trace = gog.reduce_graph(g)
    assert out.vertex_names == ["w"] and not out.edges
    assert out.vertices["w"] == g.vertices["w"]
    assert len(trace) == 1


def test_reduced_input_is_unchanged():
    g = c4c2c4()
    out, trace = gog.reduce_graph(g)
    assert trace.is_empty
    assert gog.isomorphic(out, g) is not None


def test_chain_of_two_fictitious_edges():
    vs = {"x": c(2, name="y"), "u": c(4), "w": c(8, name="b")}
    e1 = make_edge("e1", "x", "u", c(2, name="c"), ["y"], ["a^2"], graph_vertices=vs)
    e2 = make_edge("e2", "u", "w", c(4, name="c"), ["a"], ["b^2"], graph_vertices=vs)
    g = GraphOfGroups(vs, [e1, e2], 2)
    out, trace = gog.reduce_graph(g)
    assert out.vertex_names == ["w"] and not out.edges
    assert len(trace) == 2
    assert gog.isomorphic(gog.replay_trace(g, trace), out) is not None


def test_bijective_loop_is_kept():
    g = GraphOfGroups({"v": c(4)}, [
        make_edge("t", "v", "v", c(4, name="c"), ["a"], ["a^-1"], graph_vertices={"v": c(4)})
    ], 2)
    _, trace = gog.reduce_graph(g)
    assert trace.is_empty


# --- collapse and refine ------------------------------------------------------

def test_collapse_one_edge_of_a_path():
    g = path3()
    out = gog.collapse_subgraph(g, ["e1"], name="uw")
    assert out.vertex_names == ["uw", "x"] and out.edge_names == ["e2"]
    inner = out.vertices["uw"]
    assert isinstance(inner, GraphOfGroups)
    assert inner.vertex_names == ["u", "w"] and inner.edge_names == ["e1"]


def test_collapse_everything():
    out = gog.collapse_subgraph(path3(), ["e1", "e2"])
    assert len(out.vertices) == 1 and not out.edges


def test_collapse_single_vertex_is_identity():
    g = path3()
    assert gog.isomorphic(gog.collapse_subgraph(g, [], ["u"]), g) is not None


def test_collapse_needs_connected_subgraph():
    with pytest.raises(NotConnected):
        gog.collapse_subgraph(path3(), ["e1"], ["x"])


def _amalgam_vertex_with_edge(edge_group, word, far):
    inner = c4c2c4()
    vs = {"v": inner, "x": c(4, name="d")}
    e = make_edge("f", "v", "x", edge_group, [word], [far], ("u",), (), graph_vertices=vs)
    return GraphOfGroups(vs, [e], 2), inner


@pytest.mark.parametrize("side", ["u", "w"])
def test_refine_amalgam_vertex_central_edge_goes_either_side(side):
    g, inner = _amalgam_vertex_with_edge(c(2, name="c"), "a^2", "d^2")
    g.validate()
    out = gog.refine_at_vertex(g, "v", inner, {"f": side})
    out.validate()
    assert out.vertex_names == ["u", "w", "x"]
    assert out.edges["f"].end(0) == side
    back = gog.collapse_subgraph(out, ["e"], name="v")
    assert back.vertices["v"].same_as(inner)


def test_refine_then_collapse_round_trip():
    g, inner = _amalgam_vertex_with_edge(c(2, name="c"), "a^2", "d^2")
    out = gog.refine_at_vertex(g, "v", inner, {"f": "u"})
    assert gog.isomorphic(gog.collapse_subgraph(out, ["e"], name="v"), g) is not None


def test_refine_by_the_vertex_itself_is_identity():
    g = path3()
    out = gog.refine_at_vertex(g, "w", GraphOfGroups({"z": c(4, name="b")}, [], 2))
    assert gog.isomorphic(out, g) is not None


def test_refine_rejects_edge_group_that_is_not_elliptic_in_the_target():
    g, inner = _amalgam_vertex_with_edge(c(4, name="c"), "a", "d")
    with pytest.raises(EdgeGroupNotElliptic):
        gog.refine_at_vertex(g, "v", inner, {"f": "w"})


# --- Grushko components and ranks --------------------------------------------

def test_grushko_two_blocks_joined_by_trivial_edge():
    a, b = c4c2c4(), c4c2c4()
    vs = {"u1": a.vertices["u"], "w1": a.vertices["w"], "u2": b.vertices["u"], "w2": b.vertices["w"]}
    edges = [
        make_edge("e1", "u1", "w1", c(2, name="c"), ["a^2"], ["b^2"], graph_vertices=vs),
        make_edge("e2", "u2", "w2", c(2, name="c"), ["a^2"], ["b^2"], graph_vertices=vs),
        make_edge("t", "w1", "u2", trivial(), [], [], graph_vertices=vs),
    ]
    g = GraphOfGroups(vs, edges, 2)
    parts, free_rank = gog.grushko_components(g)
    assert len(parts) == 2 and free_rank == 0
    assert gog.rank_mod_p(g) == sum(gog.rank_mod_p(x) for x in parts) + free_rank == 4


@pytest.mark.parametrize("n", [1, 2, 3])
def test_grushko_bouquet(n):
    parts, free_rank = gog.grushko_components(bouquet(n))
    assert parts == [] and free_rank == n
    assert gog.rank_mod_p(bouquet(n)) == n


def test_grushko_all_edges_nontrivial():
    parts, free_rank = gog.grushko_components(path3())
    assert len(parts) == 1 and free_rank == 0


def test_rank_of_cyclic_vertex():
    assert gog.rank_mod_p(GraphOfGroups({"v": c(2)}, [], 2)) == 1
    assert gog.rank_mod_p(GraphOfGroups({"v": c(3, p=3)}, [], 3)) == 1


def test_rank_of_c4_amalgam():
    assert gog.rank_mod_p(c4c2c4()) == 2


# --- incident edge groups -----------------------------------------------------

def test_incident_edges_at_middle_of_cylinder_path():
    tc = __import__("propp.cylinders", fromlist=["x"]).tree_of_cylinders(load("amalg_d4_s_d4"))
    (mid,) = tc.v1
    inc = gog.incident_edge_groups(tc.graph, mid)
    assert len(inc) == 2
    assert all(len(img) == 4 for _, _, img in inc)


def test_isolated_vertex_has_no_incident_edges():
    assert gog.incident_edge_groups(GraphOfGroups({"v": d4()}, [], 2), "v") == []


def test_loop_contributes_both_ends():
    g = GraphOfGroups({"v": c(4)}, [
        make_edge("t", "v", "v", c(2, name="c"), ["a^2"], ["a^2"], graph_vertices={"v": c(4)})
    ], 2)
    assert [(n, s) for n, s, _ in gog.incident_edge_groups(g, "v")] == [("t", 0), ("t", 1)]


# --- properties ---------------------------------------------------------------

seeds = st.integers(0, 10**6)


@given(seeds, st.sampled_from([2, 3]))
def test_reduce_is_idempotent_and_keeps_rank(seed, p):
    g = random_finite_graph(random.Random(seed), p, max_order=16 if p == 2 else 9, max_edges=5, reduced=False)
    out, _ = gog.reduce_graph(g)
    again, trace = gog.reduce_graph(out)
    assert trace.is_empty
    assert gog.isomorphic(again, out) is not None
    assert gog.rank_mod_p(out) == gog.rank_mod_p(g)
    assert gog.isomorphic(gog.replay_trace(g, _), out) is not None


@given(seeds)
def test_reduce_keeps_grushko_additivity(seed):
    g = random_graph_with_trivial_edges(random.Random(seed))
    out, _ = gog.reduce_graph(g)
    parts, free_rank = gog.grushko_components(out)
    assert h1_dim(out) == sum(h1_dim(x) for x in parts) + free_rank


@given(seeds)
def test_collapse_then_refine_is_identity(seed):
    rng = random.Random(seed)
    g = random_finite_graph(rng, 2, max_order=8, max_edges=4, reduced=False)
    non_loops = [n for n in g.edge_names if not g.edges[n].is_loop]
    if not non_loops:
        return
    e = rng.choice(non_loops)
    out = gog.collapse_subgraph(g, [e], name="K")
    inner = out.vertices["K"]
    attach = {}
    for f, side in out.ends_at("K"):
        attach[(f.name, side)] = g.edges[f.name].end(side)
    back = gog.refine_at_vertex(out, "K", inner, attach)
    assert gog.isomorphic(back, g) is not None


@given(seeds, st.booleans())
def test_presentation_counts_and_tree_independence(seed, free_family):
    rng = random.Random(seed)
    g = random_free_graph(rng, 2, max_edges=4) if free_family else random_finite_graph(rng, 2, max_order=8, reduced=False)
    vertex_gens = sum(len(g.vertices[v].gen_names) for v in g.vertex_names)
    edge_gens = sum(len(g.edges[n].group.gen_names) for n in g.edge_names)
    outside = set()
    ranks = set()
    for tree in spanning_trees(g):
        pres = g.presentation(tree)
        outside.add(len(g.edges) - len(tree))
        assert len(pres.generators) == vertex_gens + len(g.edges) - len(tree)
        assert len(pres.relators) >= edge_gens
        ranks.add(pres.rank_mod_p(2))
    assert len(outside) == 1
    assert len(ranks) == 1


@given(st.sampled_from(["C2", "C4", "C8", "D4", "Q8", "C2xC2", "C4xC2"]),
       st.sampled_from(["C2", "C4", "D4", "Q8", "C2xC2", "C4xC2"]), seeds)
def test_one_edge_rank_is_within_mayer_vietoris_bounds(n1, n2, seed):
    from propp.samples import finite_catalog

    cat = finite_catalog(2)
    g1, g2 = cat[n1], cat[n2]
    rng = random.Random(seed)
    orders = sorted({g1.element_order(x) for x in range(g1.n)} & {g2.element_order(x) for x in range(g2.n)} - {1})
    n = rng.choice(orders)
    x1 = rng.choice([x for x in range(g1.n) if g1.element_order(x) == n])
    x2 = rng.choice([x for x in range(g2.n) if g2.element_order(x) == n])
    vs = {"u": g1, "w": g2}
    e = make_edge("e", "u", "w", c(n, name="z"), [g1.word_of(x1)], [g2.word_of(x2)], graph_vertices=vs)
    g = GraphOfGroups(vs, [e], 2)
    g.validate()
    d1, d2, dc = h1_dim(g1), h1_dim(g2), h1_dim(e.group)
    assert d1 + d2 - dc <= gog.rank_mod_p(g) <= d1 + d2


def test_free_vertex_groups_rank():
    g = amalgam(free("ab"), free("xy"), free("c"), ["a"], ["x"])
    assert gog.rank_mod_p(g) == 3
