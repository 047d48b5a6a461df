"""Small constructors shared by the test modules."""
from propp.gog import GraphOfGroups, make_edge
from propp.groups import FiniteGroup, FreeGroup
from propp.io import fixture_path, parse_input


def load(name):
    return parse_input(fixture_path(name))[0]


def c(n, p=2, name="a"):
    return FiniteGroup.cyclic(n, p, name)


def d4():
    return FiniteGroup.dihedral(4)


def amalgam(g1, g2, edge_group, w1, w2, names=("u", "w")):
    """One-edge graph g1 <- edge_group -> g2 with string image words."""
    vs = {names[0]: g1, names[1]: g2}
    e = make_edge("e", names[0], names[1], edge_group, w1, w2, graph_vertices=vs)
    return GraphOfGroups(vs, [e], g1.prime)


def hnn(g, edge_group, w0, w1, name="v"):
    vs = {name: g}
    e = make_edge("e", name, name, edge_group, w0, w1, graph_vertices=vs)
    return GraphOfGroups(vs, [e], g.prime)


def c4c2c4():
    return amalgam(c(4, name="a"), c(4, name="b"), c(2, name="c"), ["a^2"], ["b^2"])


def free(names, p=2):
    return FreeGroup(names, p)
