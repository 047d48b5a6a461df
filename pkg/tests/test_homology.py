import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import amalgam, c, c4c2c4, d4, free, hnn, load
from oracles import in_proper_free_factor
from propp import homology as H
from propp.errors import NotStar, NonFreeVertex, NotTree, TrivialEdgeWord
from propp.gog import GraphOfGroups, make_edge
from propp.groups import FiniteGroup
from propp.linalg import FpMatrix
from propp.words import reduce_word


def trivial_edge_amalgam():
    return amalgam(free("ab"), free("xy"), FiniteGroup.trivial(2), [], [])


# --- H1 and corestriction -----------------------------------------------------

def test_h1_dimensions():
    assert H.h1_dim(d4()) == 2
    assert H.h1_dim(free("abc")) == 3
    assert H.h1_dim(c4c2c4()) == 2


@pytest.mark.parametrize("word,column", [("a", [[1], [0]]), ("a^2 [a,b]", [[0], [0]])])
def test_corestriction_of_cyclic_edge_into_free_group(word, column):
    g = amalgam(free("ab"), free("xy"), free("c"), [word], ["x"])
    assert H.corestriction_matrix(g, "e", 0).to_list() == column


def test_corestriction_of_square_into_c4_vanishes():
    assert H.corestriction_matrix(c4c2c4(), "e", 0).to_list() == [[0]]


# --- Mayer-Vietoris -----------------------------------------------------------

def test_mayer_vietoris_of_free_amalgam_is_injective():
    mv = H.mayer_vietoris_edge_map(load("amalg_free_malnormal"))
    assert mv.injective
    assert mv.matrix.to_list() == [[1], [0], [1], [0]]


def test_mayer_vietoris_with_frattini_images_has_kernel():
    mv = H.mayer_vietoris_edge_map(load("amalg_frattini_nosplit"))
    assert not mv.injective
    assert mv.kernel == [(1,)] or [list(v) for v in mv.kernel] == [[1]]


def test_mayer_vietoris_with_trivial_edges_is_vacuously_injective():
    mv = H.mayer_vietoris_edge_map(trivial_edge_amalgam())
    assert mv.injective and mv.cols == []


# --- one-edge amalgams --------------------------------------------------------

def test_amalgam_with_primitive_side_splits():
    r = H.amalgam_free_splitting(free("ab"), free("xy"), "a", "x^2 [x,y]")
    assert r.status == "Splits"
    assert r.witness["factor"] == "a" and r.witness["complement"] == ["b"]


def test_amalgam_with_both_sides_in_frattini_does_not_split():
    r = H.amalgam_free_splitting(free("ab"), free("xy"), "a^2 [a,b]", "x^2 [x,y]")
    assert r.status == "NoSplit"
    assert r.exit_code == 1


def test_amalgam_identifying_generators_is_free_of_rank_three():
    r = H.amalgam_free_splitting(free("ab"), free("xy"), "a", "x")
    assert r.status == "Splits" and r.rank == 3
    assert sorted(r.basis) == ["a", "b", "y"]
    assert H.verify_free_result(r)


def test_amalgam_rejects_trivial_edge_word():
    with pytest.raises(TrivialEdgeWord):
        H.amalgam_free_splitting(free("ab"), free("xy"), "a a^-1", "x")


# --- HNN extensions -----------------------------------------------------------

def test_cyclic_hnn_over_frattini_word_is_free_on_a_and_t():
    r = H.hnn_free_splitting(free("ab"), "b", "a^2 [a,b]")
    assert r.status == "FreeOfRank" and r.rank == 2
    assert r.basis == ["a", "t"]
    assert H.verify_free_result(r)


def test_hnn_with_equal_vectors_is_not_free():
    r = H.hnn_free_splitting(free("a"), "a", "a")
    assert r.status == "NotFree"
    assert r.witness["vector"] == [1]


def test_hnn_conjugating_generators_is_free_on_a_and_t():
    r = H.hnn_free_splitting(free("ab"), "a", "b")
    assert r.status == "FreeOfRank" and r.basis == ["a", "t"]
    assert r.transcript.steps[0]["solution"] == "t^-1 a t"
    assert H.verify_free_result(r)


def test_one_loop_decision_on_fixture():
    r = H.hnn_one_loop_decision(load("hnn_free_cyclic"))
    assert r.status == "FreeOfRank" and r.rank == 2


def test_one_loop_with_finite_vertex_does_not_split():
    assert H.hnn_one_loop_decision(hnn(d4(), c(2, name="c"), ["s"], ["r s"])).status == "NoSplit"


def test_one_loop_with_trivial_edge_splits():
    vs = {"v": free("a")}
    g = GraphOfGroups(vs, [make_edge("t", "v", "v", FiniteGroup.trivial(2), [], [], graph_vertices=vs)], 2)
    r = H.hnn_one_loop_decision(g)
    assert r.status == "Splits" and r.rank == 2


# --- stars and trees ----------------------------------------------------------

def test_star_with_primitive_center_image():
    out = H.star_splitting(amalgam(free("ab"), free("xy"), free("c"), ["a"], ["x^2 [x,y]"]))
    e = out["edges"]["e"]
    assert e["F0"] == ["c"] and e["F1"] == []
    assert e["ker_cor0"] == [] and e["ker_cor1"] == [[1]]
    assert out["center_relative"]["factors"] == ["a"]


def test_star_with_trivial_edge():
    out = H.star_splitting(trivial_edge_amalgam())
    assert out["edges"]["e"]["F0"] == [] and out["edges"]["e"]["F1"] == []


def test_star_of_rank_one_identification():
    out = H.star_splitting(amalgam(free("a"), free("x"), free("c"), ["a"], ["x"]))
    assert out["edges"]["e"]["F0"] == ["c"]
    assert out["mv_injective"]


def test_star_needs_free_vertices():
    with pytest.raises(NonFreeVertex):
        H.star_splitting(c4c2c4())


def test_star_needs_a_star():
    vs = {"p": free("ab"), "q": free("xy"), "r": free("uz"), "s": free("gh")}
    g = GraphOfGroups(vs, [
        make_edge("e1", "p", "q", free("c"), ["a"], ["x"], graph_vertices=vs),
        make_edge("e2", "q", "r", free("c"), ["y"], ["u"], graph_vertices=vs),
        make_edge("e3", "r", "s", free("c"), ["z"], ["g"], graph_vertices=vs),
    ], 2)
    with pytest.raises(NotStar):
        H.star_splitting(g)


def test_tree_relative_split_one_edge():
    v, witness = H.tree_vertex_relative_split(amalgam(free("ab"), free("xy"), free("c"), ["a"], ["x^2 [x,y]"]))
    assert v == "u"
    assert witness["factors"] == {"e": "a"} and witness["basis"] == ["a", "b"]


def test_tree_relative_split_on_a_path_returns_a_pending_vertex():
    vs = {"p": free("ab"), "q": free("xy"), "r": free("uz")}
    g = GraphOfGroups(vs, [
        make_edge("e1", "p", "q", free("c"), ["a"], ["x y x"], graph_vertices=vs),
        make_edge("e2", "q", "r", free("c"), ["y"], ["u"], graph_vertices=vs),
    ], 2)
    v, witness = H.tree_vertex_relative_split(g)
    assert v in ("p", "r")
    assert len(g.ends_at(v)) == 1


def test_tree_relative_split_single_vertex():
    assert H.tree_vertex_relative_split(GraphOfGroups({"v": free("ab")}, [], 2))[0] == "v"


def test_tree_relative_split_rejects_loops():
    with pytest.raises(NotTree):
        H.tree_vertex_relative_split(load("hnn_free_cyclic"))


# --- properties ---------------------------------------------------------------

letters = st.sampled_from([1, -1, 2, -2])
words = st.lists(letters, min_size=1, max_size=4).map(lambda w: reduce_word(tuple(w))).filter(bool)


@given(words, words, st.sampled_from([2, 3]))
def test_free_verdicts_carry_verified_transcripts(c1, c2, p):
    f1, f2 = free("ab", p), free("xy", p)
    r = H.amalgam_free_splitting(f1, f2, c1, c2)
    if r.transcript is not None:
        assert H.verify_free_result(r)
        g = amalgam(f1, f2, free("c", p), [c1], [c2])
        assert H.mayer_vietoris_edge_map(g).injective
        assert g.rank_mod_p() == r.rank


@given(words, words, st.sampled_from([2, 3]))
def test_hnn_free_verdicts_are_verified_and_mv_injective(c, ct, p):
    f = free("ab", p)
    r = H.hnn_free_splitting(f, c, ct)
    if r.status == "FreeOfRank":
        assert H.verify_free_result(r)
        assert H.mayer_vietoris_edge_map(hnn(f, free("c", p), [c], [ct])).injective
    else:
        assert r.status == "NotFree"
        assert f.exponent_vector(c) == f.exponent_vector(ct)


@given(words, words, st.sampled_from([2, 3]))
def test_discrete_free_factor_forces_splitting(c1, c2, p):
    # the converse fails: the pro-p criterion sees more free factors than Nielsen moves do
    r = H.amalgam_free_splitting(free("ab", p), free("xy", p), c1, c2)
    if in_proper_free_factor(c1, 2) or in_proper_free_factor(c2, 2):
        assert r.status == "Splits"
    if r.status == "NoSplit":
        assert not in_proper_free_factor(c1, 2) and not in_proper_free_factor(c2, 2)


@given(st.lists(st.tuples(words, st.sampled_from(["x", "x^2 [x,y]", "y x y", "x^2"])), min_size=1, max_size=3))
def test_star_parts_split_edge_homology(branches):
    vs = {"o": free("ab")}
    edges = []
    for i, (w, far) in enumerate(branches):
        vs[f"p{i}"] = free(("xy", "gh", "mn")[i][0] + ("xy", "gh", "mn")[i][1])
        far_word = far.replace("x", ("xy", "gh", "mn")[i][0]).replace("y", ("xy", "gh", "mn")[i][1])
        edges.append(make_edge(f"e{i}", "o", f"p{i}", free("c"), [w], [far_word], graph_vertices=vs))
    g = GraphOfGroups(vs, edges, 2)
    out = H.star_splitting(g, "o")
    for name, part in out["edges"].items():
        assert len(part["F0"]) + len(part["F1"]) == 1
        cor0 = H.corestriction_matrix(g, name, 0)
        for w in part["F1"]:
            vec = FpMatrix.from_columns([g.edges[name].group.exponent_vector(g.edges[name].group.parse(w))], 2, 1)
            assert not any(x for row in (cor0 @ vec).to_list() for x in row)
