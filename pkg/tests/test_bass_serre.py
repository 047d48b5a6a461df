import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import amalgam, c, c4c2c4, d4, free, hnn, load
from oracles import amalgam_ball_counts
from propp import bass_serre as bs
from propp.errors import BudgetExceeded, NotFinite, NotInBall
from propp.gog import GraphOfGroups, make_edge
from propp.groups import FiniteGroup
from propp.samples import random_finite_graph


def trivial_loop():
    vs = {"v": FiniteGroup.trivial(2)}
    return GraphOfGroups(vs, [make_edge("t", "v", "v", FiniteGroup.trivial(2), [], [], graph_vertices=vs)], 2)


def hnn_c4():
    return hnn(c(4), c(2, name="c"), ["a^2"], ["a^2"])


def random_word(rng, gens, length):
    return " ".join(f"{rng.choice(gens)}^{rng.choice((1, -1))}" for _ in range(length)) or "1"


# --- normal forms -------------------------------------------------------------

def test_defining_relation_is_trivial():
    assert bs.normal_form(c4c2c4(), "u.a^2 w.b^-2").is_identity


def test_alternating_product_has_two_syllables():
    nf = bs.normal_form(c4c2c4(), "u.a w.b")
    assert not nf.is_identity
    assert nf.length == 2
    assert nf.format() == "u.a w.b"


def test_britton_pinch():
    g = hnn_c4()
    assert bs.same_element(g, "t_e^-1 v.a^2 t_e", "v.a^2")
    assert not bs.same_element(g, "t_e^-1 v.a t_e", "v.a")


# --- balls --------------------------------------------------------------------

def test_radius_one_ball_of_c4_amalgam():
    ball = bs.tree_ball(c4c2c4(), 1)
    assert ball.counts() == (3, 2)
    assert ball.degree(ball.base) == 2


@pytest.mark.parametrize("radius", [1, 2, 3])
def test_ball_counts_match_matrix_coset_oracle(radius):
    nv, ne, _ = amalgam_ball_counts(radius)
    assert bs.tree_ball(c4c2c4(), radius).counts() == (nv, ne)


def test_single_vertex_ball():
    assert bs.tree_ball(GraphOfGroups({"v": d4()}, [], 2), 3).counts() == (1, 0)


def test_trivial_loop_ball_is_a_path():
    ball = bs.tree_ball(trivial_loop(), 2)
    assert ball.counts() == (5, 4)
    assert sorted(ball.degree(v) for v in ball.vertices) == [1, 1, 2, 2, 2]


def test_ball_budget():
    with pytest.raises(BudgetExceeded):
        bs.tree_ball(c4c2c4(), 4, budget=10)


# --- geodesics ----------------------------------------------------------------

def test_geodesic_to_self_is_empty():
    ball = bs.tree_ball(c4c2c4(), 2)
    assert len(bs.geodesic(ball, 0, 0)) == 0


def test_geodesic_between_adjacent_vertices():
    ball = bs.tree_ball(c4c2c4(), 2)
    geo = bs.geodesic(ball, 0, 1)
    assert len(geo) == 1 and geo.stabilizer_check


def test_geodesic_through_base():
    ball = bs.tree_ball(c4c2c4(), 2)
    by_label = {ball.vertex_label(k): i for k, i in ball.vertex_ids().items()}
    for a, b, n in (("1.G(w)", "u.a.G(w)", 2), ("w.b.G(u)", "u.a w.b.G(u)", 4)):
        geo = bs.geodesic(ball, by_label[a], by_label[b])
        assert len(geo) == n
        assert geo.vertices[n // 2] == ball.base
        assert geo.stabilizer_check and geo.checked_elements > 0


def test_geodesic_outside_ball():
    with pytest.raises(NotInBall):
        bs.geodesic(bs.tree_ball(c4c2c4(), 1), 0, 17)


# --- fixed sets ---------------------------------------------------------------

def test_identity_fixes_the_whole_ball():
    ball = bs.tree_ball(c4c2c4(), 2)
    fixed = bs.fixed_subtree(ball, ["1"])
    assert len(fixed.vertices) == len(ball.vertices)
    assert fixed.diameter == 4


def test_central_square_fixes_the_whole_ball():
    ball = bs.tree_ball(c4c2c4(), 2)
    fixed = bs.fixed_subtree(ball, ["u.a^2"])
    assert len(fixed.vertices) == len(ball.vertices) and len(fixed.edges) == len(ball.edges)
    assert fixed.diameter >= 2


def test_generator_fixes_only_the_base_vertex():
    ball = bs.tree_ball(c4c2c4(), 1)
    fixed = bs.fixed_subtree(ball, ["u.a"])
    assert fixed.vertices == [ball.base]
    assert fixed.edges == [] and fixed.diameter == 0


# --- conjugating finite subgroups into vertex groups -------------------------

def test_edge_square_is_already_in_a_vertex_group():
    v = bs.conjugate_into_vertex(c4c2c4(), ["u.a^2"])
    assert v.is_yes and v.witness["conjugator"] == "1"


def test_conjugate_of_generator_is_found_with_its_conjugator():
    v = bs.conjugate_into_vertex(c4c2c4(), ["w.b u.a w.b^-1"])
    assert v.is_yes
    assert v.witness == {"vertex": "u", "conjugator": "w.b", "local": ["u.a"]}


def test_infinite_subgroup_is_rejected():
    with pytest.raises(NotFinite):
        bs.conjugate_into_vertex(c4c2c4(), ["u.a", "w.b u.a w.b^-1"])


# --- acylindricity ------------------------------------------------------------

def test_trivial_edges_are_zero_acylindrical():
    v = bs.check_acylindrical(trivial_loop(), 0)
    assert v.is_yes and v.witness["bound"] == 0


def test_malnormal_free_amalgam_is_two_acylindrical():
    v = bs.check_acylindrical(load("amalg_free_malnormal"), 2)
    assert v.is_yes


def test_central_edge_group_is_not_one_acylindrical():
    v = bs.check_acylindrical(c4c2c4(), 1)
    assert v.is_no
    assert v.witness["element"] == "u.a^2"
    assert v.witness["diameter"] > 1


# --- reducedness --------------------------------------------------------------

def test_is_reduced():
    assert bs.is_reduced(c4c2c4())
    assert not bs.is_reduced(amalgam(c(2, name="b"), d4(), c(2, name="c"), ["b"], ["s"]))
    assert bs.is_reduced(hnn(c(4), c(4, name="c"), ["a"], ["a^-1"]))


# --- properties ---------------------------------------------------------------

GRAPHS = {
    "c4c2c4": c4c2c4,
    "d4_amalgam": lambda: load("amalg_d4_s_d4"),
    "hnn_c4": hnn_c4,
    "hnn_d4": lambda: load("hnn_d4_case1"),
    "free_amalgam": lambda: amalgam(free("ab"), free("xy"), free("c"), ["a"], ["x"]),
}


def test_normal_form_is_multiplicative_on_random_pairs():
    rng = random.Random(0)
    for name, make in GRAPHS.items():
        g = make()
        gens = list(g.presentation().generators)
        for _ in range(200):
            w1 = random_word(rng, gens, rng.randint(0, 6))
            w2 = random_word(rng, gens, rng.randint(0, 6))
            n1, n2 = bs.normal_form(g, w1), bs.normal_form(g, w2)
            whole = bs.normal_form(g, f"{w1} {w2}")
            rebuilt = bs.normal_form(g, f"{n1.format()} {n2.format()}")
            assert whole == rebuilt, (name, w1, w2)


def _index(graph, e, side):
    _, grp = graph.target(e, side)
    return grp.n // len(graph.image(e, side))


@pytest.mark.parametrize("name", ["c4c2c4", "d4_amalgam", "hnn_c4", "hnn_d4"])
def test_ball_incidence_and_degrees(name):
    g = GRAPHS[name]()
    ball = bs.tree_ball(g, 3)
    assert bs.check_ball_incidence(ball) == []
    for key, depth in ball.vertices.items():
        if depth < ball.radius:
            expected = sum(_index(g, e, s) for e, s in g.ends_at(key[1]))
            assert ball.degree(key) == expected


@given(st.integers(0, 10**6))
def test_random_finite_graph_balls(seed):
    g = random_finite_graph(random.Random(seed), 2, max_order=8, max_edges=3)
    ball = bs.tree_ball(g, 2)
    assert bs.check_ball_incidence(ball) == []
    for key, depth in ball.vertices.items():
        if depth < 2:
            assert ball.degree(key) == sum(_index(g, e, s) for e, s in g.ends_at(key[1]))


@pytest.mark.parametrize("name", ["c4c2c4", "d4_amalgam", "hnn_d4"])
def test_geodesic_stabilizer_containment_on_every_pair(name):
    ball = bs.tree_ball(GRAPHS[name](), 2)
    n = len(ball.vertices)
    for i in range(n):
        for j in range(i, n):
            assert bs.geodesic(ball, i, j).stabilizer_check


@given(st.sampled_from(["c4c2c4", "d4_amalgam", "hnn_c4", "hnn_d4"]), st.integers(0, 10**6))
def test_fixed_set_of_one_element_is_connected(name, seed):
    g = GRAPHS[name]()
    rng = random.Random(seed)
    gens = list(g.presentation().generators)
    ball = bs.tree_ball(g, 2)
    fixed = bs.fixed_subtree(ball, [random_word(rng, gens, rng.randint(0, 4))])
    assert fixed.is_connected()
