"""Seeded random graphs of groups for property suites and the `sample` command."""
from __future__ import annotations

import random

from .gog import Attachment, Edge, GraphOfGroups, reduce_graph
from .groups.finite import FiniteGroup
from .groups.free import FreeGroup
from .words import reduce_word


def finite_catalog(p, max_order=16):
    """Small p-groups keyed by a readable name."""
    def cyc(n, name="a"):
        return FiniteGroup.cyclic(n, p, name)

    out = {"1": FiniteGroup.trivial(p)}
    q = p
    while q <= max_order:
        out[f"C{q}"] = cyc(q)
        q *= p
    if p * p <= max_order:
        out[f"C{p}xC{p}"] = FiniteGroup.direct_product(cyc(p), cyc(p, "b"), names=("a", "b"))
    if p == 2:
        out["D4"] = FiniteGroup.dihedral(4)
        out["Q8"] = FiniteGroup.quaternion()
        out["C4xC2"] = FiniteGroup.direct_product(cyc(4), cyc(2, "b"), names=("a", "b"))
        if max_order >= 16:
            out["D8"] = FiniteGroup.dihedral(8)
            out["C2^3"] = FiniteGroup.direct_product(
                out["C2xC2"], cyc(2, "c"), names=("a", "b", "c")
            )
    return out


def _elements_of_order(group, n):
    return [x for x in range(group.n) if group.element_order(x) == n]


def _random_shape(rng, n_vertices, n_edges, loops=True):
    """Connected multigraph: a random spanning tree plus extra edges."""
    ends = []
    for v in range(1, n_vertices):
        ends.append((rng.randrange(v), v))
    while len(ends) < n_edges:
        a = rng.randrange(n_vertices)
        b = a if loops and rng.random() < 0.3 else rng.randrange(n_vertices)
        ends.append((a, b))
    rng.shuffle(ends)
    return ends


def random_finite_graph(rng, p=2, max_order=16, max_edges=6, trivial_edges=0.2, reduced=True):
    """Random graph of finite p-groups with cyclic (or trivial) edge groups.

    With ``reduced`` the graph is passed through reduction before returning.
    """
    if isinstance(rng, int):
        rng = random.Random(rng)
    catalog = finite_catalog(p, max_order)
    names = sorted(catalog)
    n_edges = rng.randint(0, max_edges)
    n_vertices = rng.randint(1, n_edges + 1)
    groups = {f"v{i}": catalog[rng.choice(names)] for i in range(n_vertices)}
    edges = []
    for k, (a, b) in enumerate(_random_shape(rng, n_vertices, n_edges)):
        ga, gb = groups[f"v{a}"], groups[f"v{b}"]
        orders = sorted({ga.element_order(x) for x in range(ga.n)} & {gb.element_order(x) for x in range(gb.n)})
        n = 1 if rng.random() < trivial_edges else rng.choice(orders)
        if n == 1:
            grp = FiniteGroup.trivial(p)
            att0 = att1 = Attachment(())
        else:
            grp = FiniteGroup.cyclic(n, p, "c")
            xa = rng.choice(_elements_of_order(ga, n))
            xb = rng.choice(_elements_of_order(gb, n))
            att0 = Attachment((ga.word_of(xa),))
            att1 = Attachment((gb.word_of(xb),))
        edges.append(Edge(f"e{k}", f"v{a}", f"v{b}", grp, att0, att1))
    graph = GraphOfGroups(groups, edges, p)
    if reduced:
        graph, _ = reduce_graph(graph)
    return graph


def random_word(rng, rank, max_len):
    while True:
        length = rng.randint(1, max_len)
        w = reduce_word(tuple(rng.choice((1, -1)) * rng.randint(1, rank) for _ in range(length)))
        if w:
            return w


_FREE_NAMES = ("ab", "xy", "uz", "gh", "mn", "pq", "rs")


def random_free_graph(rng, p=2, max_rank=2, max_edges=4, max_len=3, trivial_edges=0.0):
    """Random graph of free groups with cyclic edge groups, reduced in the pro-p sense."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    while True:
        n_edges = rng.randint(0, max_edges)
        n_vertices = rng.randint(1, n_edges + 1)
        groups = {}
        for i in range(n_vertices):
            rank = rng.randint(1, max_rank)
            groups[f"v{i}"] = FreeGroup(_FREE_NAMES[i % len(_FREE_NAMES)][:rank], p)
        edges = []
        cyc = FreeGroup(("c",), p)
        for k, (a, b) in enumerate(_random_shape(rng, n_vertices, n_edges)):
            if rng.random() < trivial_edges:
                grp, att0, att1 = FiniteGroup.trivial(p), Attachment(()), Attachment(())
            else:
                grp = cyc
                att0 = Attachment((random_word(rng, groups[f"v{a}"].rank, max_len),))
                att1 = Attachment((random_word(rng, groups[f"v{b}"].rank, max_len),))
            edges.append(Edge(f"e{k}", f"v{a}", f"v{b}", grp, att0, att1))
        graph = GraphOfGroups(groups, edges, p)
        if not any(graph.is_fictitious(n, pro_p=True) for n in graph.edge_names):
            return graph


def random_graph_with_trivial_edges(rng, p=2):
    """Mixed finite/free graph in which roughly half of the edges are trivial."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    if rng.random() < 0.5:
        return random_finite_graph(rng, p, max_order=8, max_edges=5, trivial_edges=0.5, reduced=False)
    return random_free_graph(rng, p, max_edges=4, trivial_edges=0.5)
