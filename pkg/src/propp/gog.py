"""Finite graphs of groups.

Vertex groups are finite p-groups, free groups, or nested graphs of groups
(the result of collapsing a subgraph).  An edge carries its own group and
two attachments; an attachment lists the images of the edge-group
generators as words in the local generators of the target group.  When the
target vertex is composite, ``inner`` names the vertex of the nested graph
(recursively) that receives the image.

Presentation symbols are ``<vertex>.<generator>`` for vertex generators,
always using the innermost vertex, and ``t_<edge>`` for stable letters.
Vertex and edge names are assumed unique across nesting levels.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

from .errors import (
    Disconnected,
    EdgeGroupNotElliptic,
    NonInjectiveAttachment,
    NotAHomomorphism,
    NotConnected,
    NotSpanningTree,
    PrimeMismatch,
    ProppError,
)
from .groups.finite import FiniteGroup, GroupHom
from .groups.free import FreeGroup, SubgroupAutomaton, is_injective_images
from .linalg import FpMatrix
from .words import format_pairs, invert_pairs, reduce_pairs, reduce_word


# --- small helpers on non-composite groups ------------------------------------

def elem_of(group, word):
    """Element of `group` represented by an int-coded local word."""
    if isinstance(group, FiniteGroup):
        return group.evaluate(word)
    return reduce_word(tuple(word))


def word_of(group, elem):
    if isinstance(group, FiniteGroup):
        return group.word_of(elem)
    return tuple(elem)


def canonical_word(group, word):
    return word_of(group, elem_of(group, word))


def group_mul(group, x, y):
    return group.mul(x, y)


def is_trivial_group(group):
    return isinstance(group, FiniteGroup) and group.n == 1


def symbol(vertex, gen):
    return f"{vertex}.{gen}"


def stable_letter(edge):
    return f"t_{edge}"


def _flip(side):
    return 1 - side


@dataclass(frozen=True)
class Attachment:
    images: tuple
    inner: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(tuple(w) for w in self.images))
        object.__setattr__(self, "inner", tuple(self.inner))


@dataclass(frozen=True)
class Edge:
    name: str
    src: str
    dst: str
    group: object
    att0: Attachment
    att1: Attachment

    @property
    def ends(self):
        return (self.src, self.dst)

    def att(self, side):
        return self.att0 if side == 0 else self.att1

    def end(self, side):
        return self.src if side == 0 else self.dst

    @property
    def is_loop(self):
        return self.src == self.dst

    def with_end(self, side, vertex, attachment):
        if side == 0:
            return replace(self, src=vertex, att0=attachment)
        return replace(self, dst=vertex, att1=attachment)


@dataclass(frozen=True)
class Presentation:
    generators: tuple
    relators: tuple
    tree: frozenset
    killed: tuple = ()

    def int_relators(self):
        index = {g: i + 1 for i, g in enumerate(self.generators)}
        return [tuple(index[s] * e for s, e in r) for r in self.relators]

    def relation_matrix(self, p):
        index = {g: i for i, g in enumerate(self.generators)}
        rows = []
        for r in self.relators:
            row = [0] * len(self.generators)
            for s, e in r:
                row[index[s]] += e
            rows.append(row)
        return FpMatrix.from_rows(rows, p, ncols=len(self.generators))

    def rank_mod_p(self, p):
        if not self.generators:
            return 0
        if not self.relators:
            return len(self.generators)
        return len(self.generators) - self.relation_matrix(p).rank()

    def format(self):
        gens = ", ".join(self.generators)
        rels = ", ".join(format_pairs(r) for r in self.relators)
        return f"< {gens} | {rels} >"

    def to_json(self):
        return {
            "generators": list(self.generators),
            "relators": [format_pairs(r) for r in self.relators],
            "tree": sorted(self.tree),
            "killed": list(self.killed),
        }


class GraphOfGroups:
    """A finite connected graph of groups; immutable after construction."""

    kind = "graph"

    def __init__(self, vertices, edges=(), prime=None, tree=None):
        self.vertices = dict(vertices)
        if isinstance(edges, dict):
            edges = edges.values()
        self.edges = {e.name: e for e in edges}
        if prime is None:
            primes = {g.prime for g in self.vertices.values()}
            if len(primes) != 1:
                raise PrimeMismatch("cannot infer a single prime")
            prime = primes.pop()
        self.prime = prime
        self.tree = None if tree is None else frozenset(tree)
        for e in self.edges.values():
            for v in e.ends:
                if v not in self.vertices:
                    raise Disconnected(f"edge {e.name} ends at unknown vertex {v}")

    # basic structure ------------------------------------------------
    @property
    def vertex_names(self):
        return sorted(self.vertices)

    @property
    def edge_names(self):
        return sorted(self.edges)

    def __repr__(self):
        return f"GraphOfGroups(V={self.vertex_names}, E={self.edge_names}, p={self.prime})"

    def describe(self):
        return f"pi1({len(self.vertices)}V,{len(self.edges)}E)"

    def ends_at(self, v):
        """(edge, side) pairs for every edge end at v (loops twice)."""
        out = []
        for name in self.edge_names:
            e = self.edges[name]
            for side in (0, 1):
                if e.end(side) == v:
                    out.append((e, side))
        return out

    def neighbours(self, v):
        return sorted({e.end(1 - s) for e, s in self.ends_at(v)})

    def is_connected(self, vertices=None, edges=None):
        vertices = set(self.vertices if vertices is None else vertices)
        edges = [self.edges[n] for n in (self.edge_names if edges is None else edges)]
        if not vertices:
            return False
        adj = {v: set() for v in vertices}
        for e in edges:
            if e.src in adj and e.dst in adj:
                adj[e.src].add(e.dst)
                adj[e.dst].add(e.src)
        start = min(vertices)
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen == vertices

    @property
    def is_composite_free(self):
        return not any(isinstance(g, GraphOfGroups) for g in self.vertices.values())

    # groups at ends --------------------------------------------------
    def resolve(self, vertex, inner=()):
        """(innermost vertex name, group) reached from `vertex` along `inner`."""
        g = self.vertices[vertex]
        name = vertex
        graph = self
        for step in inner:
            if not isinstance(g, GraphOfGroups):
                raise ProppError(f"inner path {inner} enters non-composite vertex {name}")
            graph = g
            name = step
            g = graph.vertices[step]
        if isinstance(g, GraphOfGroups):
            raise ProppError(f"attachment into composite vertex {name} needs an inner vertex")
        return name, g

    def target(self, edge, side):
        e = self.edges[edge] if isinstance(edge, str) else edge
        return self.resolve(e.end(side), e.att(side).inner)

    def _hom(self, e, side):
        key = (e.name, side)
        cache = self.__dict__.setdefault("_homs", {})
        if key in cache:
            return cache[key]
        _, tgt = self.target(e, side)
        src = e.group
        images = e.att(side).images
        if len(images) != len(src.gens):
            raise NonInjectiveAttachment(
                f"edge {e.name}: {len(images)} images for {len(src.gens)} generators"
            )
        if is_trivial_group(src):
            hom = ("trivial", None)
        elif isinstance(src, FiniteGroup) and isinstance(tgt, FiniteGroup):
            try:
                gh = GroupHom.from_generators(src, tgt, [tgt.evaluate(w) for w in images])
            except NotAHomomorphism as exc:
                raise NonInjectiveAttachment(f"edge {e.name} side {side}: {exc}") from None
            hom = ("finite", gh)
        elif isinstance(src, FreeGroup) and isinstance(tgt, FreeGroup):
            hom = ("free", tuple(reduce_word(w) for w in images))
        else:
            raise NonInjectiveAttachment(
                f"edge {e.name} side {side}: no injective map {src.describe()} -> {tgt.describe()}"
            )
        cache[key] = hom
        return hom

    def apply(self, edge, side, x):
        """Image of the edge-group element x (int or word) under the attachment."""
        e = self.edges[edge] if isinstance(edge, str) else edge
        kind, data = self._hom(e, side)
        _, tgt = self.target(e, side)
        if kind == "trivial":
            return tgt.identity
        if kind == "finite":
            return data(x)
        out = ()
        for letter in x:
            w = data[abs(letter) - 1]
            out = reduce_word(out + (w if letter > 0 else tuple(-y for y in reversed(w))))
        return out

    def image_automaton(self, edge, side):
        e = self.edges[edge] if isinstance(edge, str) else edge
        cache = self.__dict__.setdefault("_auts", {})
        key = (e.name, side)
        if key not in cache:
            _, tgt = self.target(e, side)
            kind, data = self._hom(e, side)
            gens = [] if kind == "trivial" else list(data)
            cache[key] = SubgroupAutomaton(tgt, gens)
        return cache[key]

    def image(self, edge, side):
        """Image subgroup: a frozenset for finite targets, an automaton for free ones."""
        e = self.edges[edge] if isinstance(edge, str) else edge
        _, tgt = self.target(e, side)
        kind, data = self._hom(e, side)
        if isinstance(tgt, FiniteGroup):
            if kind == "trivial":
                return frozenset([tgt.identity])
            return data.image_members()
        return self.image_automaton(e, side)

    def preimage(self, edge, side, y):
        """Edge-group element mapping to y, or None when y is not in the image."""
        e = self.edges[edge] if isinstance(edge, str) else edge
        _, tgt = self.target(e, side)
        kind, data = self._hom(e, side)
        if kind == "trivial":
            return e.group.identity if y == tgt.identity else None
        if kind == "finite":
            return data.preimage(y)
        return self.image_automaton(e, side).preimage(y)

    def attachment_bijective(self, edge, side, pro_p=False):
        """Is the attachment onto its target vertex group?

        For free groups the abstract test is index one; with ``pro_p`` the
        test is rank equality plus spanning F/Phi.
        """
        e = self.edges[edge] if isinstance(edge, str) else edge
        vgroup = self.vertices[e.end(side)]
        if isinstance(vgroup, GraphOfGroups):
            order = vgroup.finite_order()
            return order is not None and isinstance(e.group, FiniteGroup) and order == e.group.n
        _, tgt = self.target(e, side)
        if isinstance(tgt, FiniteGroup):
            return isinstance(e.group, FiniteGroup) and e.group.n == tgt.n
        if not isinstance(e.group, FreeGroup) or e.group.rank != tgt.rank:
            return False
        if pro_p:
            kind, data = self._hom(e, side)
            m = FpMatrix.from_columns([tgt.exponent_vector(w) for w in data], self.prime, tgt.rank)
            return m.rank() == tgt.rank
        return self.image_automaton(e, side).states == 1

    def is_fictitious(self, edge, pro_p=False):
        e = self.edges[edge] if isinstance(edge, str) else edge
        if e.is_loop:
            return False
        return self.attachment_bijective(e, 0, pro_p) or self.attachment_bijective(e, 1, pro_p)

    # validation -----------------------------------------------------
    def validate(self):
        if not self.vertices:
            raise Disconnected("graph has no vertices")
        for name, g in self.vertices.items():
            if g.prime != self.prime:
                raise PrimeMismatch(f"vertex {name} has prime {g.prime}, graph has {self.prime}")
            g.validate()
        if not self.is_connected():
            raise Disconnected("underlying graph is not connected")
        for e in self.edges.values():
            if e.group.prime != self.prime:
                raise PrimeMismatch(f"edge {e.name} has prime {e.group.prime}")
            e.group.validate()
            for side in (0, 1):
                self._check_injective(e, side)
        if self.tree is not None:
            self.spanning_tree()
        return None

    def _check_injective(self, e, side):
        kind, data = self._hom(e, side)
        if kind == "trivial":
            return
        if kind == "finite":
            if not data.is_injective():
                raise NonInjectiveAttachment(f"edge {e.name} side {side} is not injective")
            return
        _, tgt = self.target(e, side)
        if not is_injective_images(tgt, data):
            raise NonInjectiveAttachment(f"edge {e.name} side {side} is not injective")

    # spanning trees and presentations --------------------------------
    def default_tree(self):
        parent = {v: v for v in self.vertices}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        tree = []
        for name in self.edge_names:
            e = self.edges[name]
            a, b = find(e.src), find(e.dst)
            if a != b:
                parent[a] = b
                tree.append(name)
        return frozenset(tree)

    def check_tree(self, tree):
        tree = frozenset(tree)
        if not tree <= set(self.edges):
            raise NotSpanningTree("tree contains unknown edges")
        if len(tree) != len(self.vertices) - 1:
            raise NotSpanningTree(f"a spanning tree needs {len(self.vertices) - 1} edges")
        if any(self.edges[n].is_loop for n in tree):
            raise NotSpanningTree("spanning trees contain no loops")
        if not self.is_connected(edges=sorted(tree)):
            raise NotSpanningTree("edges do not span a tree")
        return tree

    def spanning_tree(self):
        if self.tree is not None:
            return self.check_tree(self.tree)
        return self.default_tree()

    def with_tree(self, tree):
        return GraphOfGroups(self.vertices, self.edges, self.prime, tree=self.check_tree(tree))

    def flatten(self):
        """Replace every composite vertex by its (flattened) nested graph."""
        if self.is_composite_free:
            return self if self.tree is not None else self.with_tree(self.default_tree())
        vertices = {}
        edges = {}
        tree = set(self.spanning_tree())
        for name in self.vertex_names:
            g = self.vertices[name]
            if isinstance(g, GraphOfGroups):
                inner = g.flatten()
                for vn, vg in inner.vertices.items():
                    if vn in vertices or (vn in self.vertices and vn != name):
                        raise ProppError(f"vertex name {vn} is not unique across nesting")
                    vertices[vn] = vg
                for en, ev in inner.edges.items():
                    if en in self.edges or en in edges:
                        raise ProppError(f"edge name {en} is not unique across nesting")
                    edges[en] = ev
                tree |= inner.tree
            else:
                vertices[name] = g
        for name in self.edge_names:
            e = self.edges[name]
            new = e
            for side in (0, 1):
                att = e.att(side)
                if att.inner:
                    new = new.with_end(side, att.inner[-1], Attachment(att.images))
            edges[name] = new
        return GraphOfGroups(vertices, edges.values(), self.prime, tree=frozenset(tree))

    def symbols(self):
        flat = self.flatten()
        syms = []
        for v in flat.vertex_names:
            syms += [symbol(v, a) for a in flat.vertices[v].gen_names]
        tree = flat.spanning_tree()
        syms += [stable_letter(e) for e in flat.edge_names if e not in tree]
        return syms

    def presentation(self, tree=None):
        g = self if tree is None else self.with_tree(tree)
        flat = g.flatten()
        tree = flat.spanning_tree()
        gens = []
        rels = []
        for v in flat.vertex_names:
            names, vrels = flat.vertices[v].presentation()
            gens += [symbol(v, a) for a in names]
            for r in vrels:
                rels.append(tuple((symbol(v, names[abs(x) - 1]), 1 if x > 0 else -1) for x in r))
        for name in flat.edge_names:
            if name not in tree:
                gens.append(stable_letter(name))
        for name in flat.edge_names:
            e = flat.edges[name]
            t = () if name in tree else ((stable_letter(name), 1),)
            for i in range(len(e.group.gens)):
                w0 = flat.local_to_pairs(e.src, e.att0.images[i])
                w1 = flat.local_to_pairs(e.dst, e.att1.images[i])
                r = reduce_pairs(invert_pairs(t) + w0 + t + invert_pairs(w1))
                if r:
                    rels.append(r)
        killed = tuple(stable_letter(n) for n in sorted(tree))
        return Presentation(tuple(gens), tuple(rels), tree, killed)

    def local_to_pairs(self, vertex, word):
        names = self.vertices[vertex].gen_names
        return tuple((symbol(vertex, names[abs(x) - 1]), 1 if x > 0 else -1) for x in word)

    def rank_mod_p(self):
        return self.presentation().rank_mod_p(self.prime)

    @property
    def h1_dim(self):
        return self.rank_mod_p()

    @property
    def gen_names(self):
        return tuple(self.symbols())

    @property
    def is_finite(self):
        return self.finite_order() is not None

    @property
    def order(self):
        return self.finite_order()

    def finite_order(self):
        """Order of the fundamental group when it is finite and detectable by reduction."""
        cache = self.__dict__.setdefault("_finite_order", [])
        if cache:
            return cache[0]
        red, _ = reduce_graph(self.flatten())
        out = None
        if len(red.vertices) == 1 and not red.edges:
            (g,) = red.vertices.values()
            if isinstance(g, FiniteGroup):
                out = g.n
        cache.append(out)
        return out

    # structural comparison -------------------------------------------
    def same_as(self, other):
        """Equality up to the words chosen for attachment images."""
        if not isinstance(other, GraphOfGroups) or self.prime != other.prime:
            return False
        if set(self.vertices) != set(other.vertices) or set(self.edges) != set(other.edges):
            return False
        for v, g in self.vertices.items():
            if not same_group(g, other.vertices[v]):
                return False
        for n, e in self.edges.items():
            f = other.edges[n]
            if not same_group(e.group, f.group):
                return False
            if (e.src, e.dst) != (f.src, f.dst):
                return False
            for side in (0, 1):
                if e.att(side).inner != f.att(side).inner:
                    return False
                if not self._same_images(e, side, other, f):
                    return False
        return True

    def _same_images(self, e, side, other, f, other_side=None):
        other_side = side if other_side is None else other_side
        _, tgt = self.target(e, side)
        _, tgt2 = other.target(f, other_side)
        if not same_group(tgt, tgt2):
            return False
        return all(
            elem_of(tgt, w1) == elem_of(tgt2, w2)
            for w1, w2 in zip(e.att(side).images, f.att(other_side).images)
        )

    def to_dict(self):
        from .io import graph_to_dict

        return graph_to_dict(self)


def _same_edge_group(a, b):
    # generator names of a free edge group carry no information
    if isinstance(a, FreeGroup) and isinstance(b, FreeGroup):
        return a.rank == b.rank and a.prime == b.prime
    return same_group(a, b)


def same_group(a, b):
    if isinstance(a, GraphOfGroups):
        return isinstance(b, GraphOfGroups) and a.same_as(b)
    return type(a) is type(b) and a == b


# --- constructors --------------------------------------------------------------

def make_edge(name, src, dst, group, images0, images1, inner0=(), inner1=(), graph_vertices=None):
    """Build an Edge, parsing string images in the local names of the targets."""

    def conv(images, vertex, inner):
        out = []
        for w in images:
            if isinstance(w, str):
                g = graph_vertices[vertex] if graph_vertices else None
                for step in inner:
                    g = g.vertices[step]
                out.append(g.parse(w) if not isinstance(g, FiniteGroup) else _parse_finite(g, w))
            else:
                out.append(tuple(w))
        return tuple(out)

    return Edge(
        name,
        src,
        dst,
        group,
        Attachment(conv(images0, src, inner0), inner0),
        Attachment(conv(images1, dst, inner1), inner1),
    )


def _parse_finite(group, text):
    from .words import parse_word

    return parse_word(text, group.gen_names)


def single_vertex(name, group):
    return GraphOfGroups({name: group}, [], group.prime)


# --- reduction -------------------------------------------------------------------

@dataclass
class ReductionTrace:
    steps: list = field(default_factory=list)
    forward: dict = field(default_factory=dict)
    backward: dict = field(default_factory=dict)
    input_tree: frozenset = frozenset()

    def __len__(self):
        return len(self.steps)

    @property
    def is_empty(self):
        return not any("edge" in s for s in self.steps)

    def to_json(self):
        return {
            "steps": self.steps,
            "input_tree": sorted(self.input_tree),
            "forward": {k: format_pairs(v) for k, v in sorted(self.forward.items())},
        }


def _map_local_word(graph, e, s, word_u):
    """Send a word in G(d_s e) through d_k o d_s^-1 into the other end's target."""
    k = 1 - s
    _, src_group = graph.target(e, s)
    y = elem_of(src_group, word_u)
    pre = graph.preimage(e, s, y)
    if pre is None:
        raise ProppError(f"element outside the image of edge {e.name}")
    out = graph.apply(e, k, pre)
    _, tgt = graph.target(e, k)
    return word_of(tgt, out)


def contract_edge(graph, edge, removed_side):
    """Remove d_s(e) (whose attachment is bijective) and edge e.

    Returns (new graph, phi) where phi maps local words of the removed
    vertex group to local words of the kept target group.
    """
    e = graph.edges[edge] if isinstance(edge, str) else edge
    s = removed_side
    k = 1 - s
    u = e.end(s)
    w = e.end(k)
    if e.is_loop:
        raise ProppError("cannot contract a loop")
    if isinstance(graph.vertices[u], GraphOfGroups):
        raise ProppError("removed vertex must not be composite")
    katt = e.att(k)

    def phi(word):
        return _map_local_word(graph, e, s, word)

    edges = []
    for name in graph.edge_names:
        if name == e.name:
            continue
        f = graph.edges[name]
        for side in (0, 1):
            if f.end(side) == u:
                new_images = tuple(phi(img) for img in f.att(side).images)
                f = f.with_end(side, w, Attachment(new_images, katt.inner))
        edges.append(f)
    vertices = {v: g for v, g in graph.vertices.items() if v != u}
    return GraphOfGroups(vertices, edges, graph.prime, tree=None), phi


def expand_composite(graph, v):
    """Replace composite vertex v by its nested graph (one level)."""
    nested = graph.vertices[v]
    vertices = {n: g for n, g in graph.vertices.items() if n != v}
    for n, g in nested.vertices.items():
        if n in vertices:
            raise ProppError(f"vertex name {n} is not unique across nesting")
        vertices[n] = g
    edges = list(nested.edges.values())
    for name in graph.edge_names:
        e = graph.edges[name]
        for side in (0, 1):
            if e.end(side) == v:
                att = e.att(side)
                e = e.with_end(side, att.inner[0], Attachment(att.images, att.inner[1:]))
        edges.append(e)
    return GraphOfGroups(vertices, edges, graph.prime)


def _pick_fictitious(graph):
    for name in graph.edge_names:
        e = graph.edges[name]
        if e.is_loop:
            continue
        for s in (0, 1):
            if graph.attachment_bijective(e, s):
                # prefer removing a non-composite vertex
                if not isinstance(graph.vertices[e.end(s)], GraphOfGroups):
                    return ("contract", e.name, s)
        for s in (0, 1):
            if graph.attachment_bijective(e, s):
                return ("expand", e.end(s), None)
    return None


def reduce_graph(graph):
    """Collapse fictitious edges until none remain.

    Returns (reduced graph, ReductionTrace).  The trace carries symbol
    translations in both directions between the two presentations.
    """
    flat_in = graph.flatten()
    in_tree = flat_in.spanning_tree()
    fates = {v: (v, None, ()) for v in flat_in.vertices}  # vertex -> (current, map, conj)
    current = GraphOfGroups(graph.vertices, graph.edges, graph.prime)
    trace = ReductionTrace()
    contracted = []
    while True:
        pick = _pick_fictitious(current)
        if pick is None:
            break
        action, name, s = pick
        if action == "expand":
            trace.steps.append({"expand": name})
            current = expand_composite(current, name)
            continue
        e = current.edges[name]
        u, w = e.end(s), e.end(1 - s)
        target_name, _ = current.target(e, 1 - s)
        new, phi = contract_edge(current, e, s)
        # conjugator of the removed frame relative to the kept one
        t = () if name in in_tree else ((stable_letter(name), 1),)
        conj = t if s == 0 else invert_pairs(t)
        for x, (cur, fmap, c) in list(fates.items()):
            if cur == u:
                fmap = _compose_maps(flat_in.vertices[x], fmap, phi)
                fates[x] = (target_name, fmap, reduce_pairs(c + conj))
        trace.steps.append({"edge": name, "removed": u, "kept": w, "iso_side": s})
        contracted.append(name)
        current = new
    out = current
    flat_out = out.flatten()
    trace.input_tree = frozenset(flat_out.spanning_tree()) | frozenset(contracted)
    vertex_maps = {}
    for x, (cur, fmap, _) in fates.items():
        gens = flat_in.vertices[x].gen_names
        if fmap is None:
            vertex_maps[x] = {a: ((symbol(cur, a), 1),) for a in gens}
        else:
            vertex_maps[x] = {a: flat_out.local_to_pairs(cur, fmap[i]) for i, a in enumerate(gens)}
    out_tree = flat_out.spanning_tree()
    edge_elems = {
        n: (() if n in contracted or n in out_tree else ((stable_letter(n), 1),)) for n in flat_in.edges
    }
    trace.forward = path_translation(flat_in, vertex_maps, edge_elems)
    back_vertex = {
        v: {a: ((symbol(v, a), 1),) for a in flat_out.vertices[v].gen_names} for v in flat_out.vertices
    }
    back_edges = {}
    for n, f in flat_out.edges.items():
        orig = flat_in.edges[n]
        c0 = fates[orig.src][2]
        c1 = fates[orig.dst][2]
        t = () if n in in_tree else ((stable_letter(n), 1),)
        back_edges[n] = reduce_pairs(invert_pairs(c0) + t + c1)
    trace.backward = path_translation(flat_out, back_vertex, back_edges)
    return out, trace


def _compose_maps(group_x, fmap, phi):
    gens = group_x.gen_names
    if fmap is None:
        fmap = [(i + 1,) for i in range(len(gens))]
    return [phi(w) for w in fmap]


def reduce(graph):
    return reduce_graph(graph)


def replay_trace(graph, trace):
    current = GraphOfGroups(graph.vertices, graph.edges, graph.prime)
    for step in trace.steps:
        if "expand" in step:
            current = expand_composite(current, step["expand"])
        else:
            current, _ = contract_edge(current, step["edge"], step["iso_side"])
    return current


def is_reduced(graph):
    _, trace = reduce_graph(graph)
    return trace.is_empty and not trace.steps


def path_translation(src, vertex_maps, edge_elems):
    """Symbol map of a graph morphism out of the flat graph `src`.

    ``vertex_maps[v][gen]`` is the image word of the local generator and
    ``edge_elems[e]`` the image of the edge path element.  Presentation
    symbols of `src` (relative to its spanning tree) map to
    ``P_v * image * P_v^-1`` and ``P_d0 * tau_e * P_d1^-1``.
    """
    tree = src.spanning_tree()
    base = src.vertex_names[0]
    paths = {base: ()}
    queue = deque([base])
    while queue:
        v = queue.popleft()
        for name in sorted(tree):
            e = src.edges[name]
            for s in (0, 1):
                if e.end(s) == v and e.end(1 - s) not in paths:
                    tau = edge_elems[name] if s == 0 else invert_pairs(edge_elems[name])
                    paths[e.end(1 - s)] = reduce_pairs(paths[v] + tau)
                    queue.append(e.end(1 - s))
    out = {}
    for v in src.vertex_names:
        for a in src.vertices[v].gen_names:
            img = vertex_maps[v][a]
            out[symbol(v, a)] = reduce_pairs(paths[v] + img + invert_pairs(paths[v]))
    for name in src.edge_names:
        if name in tree:
            continue
        e = src.edges[name]
        out[stable_letter(name)] = reduce_pairs(
            paths[e.src] + edge_elems[name] + invert_pairs(paths[e.dst])
        )
    return out


def translate_word(word, translation):
    out = ()
    for s, e in word:
        img = translation[s]
        out = reduce_pairs(out + (img if e > 0 else invert_pairs(img)))
    return out


# --- collapse and refinement -------------------------------------------------------

def collapse_subgraph(graph, edges=(), vertices=(), name=None):
    """Collapse the connected subgraph spanned by `edges` (and `vertices`)."""
    edges = sorted(set(edges))
    for n in edges:
        if n not in graph.edges:
            raise NotConnected(f"unknown edge {n}")
    vs = set(vertices)
    for n in edges:
        vs |= set(graph.edges[n].ends)
    if not vs:
        raise NotConnected("empty subgraph")
    for v in vs:
        if v not in graph.vertices:
            raise NotConnected(f"unknown vertex {v}")
    if not graph.is_connected(vertices=vs, edges=edges):
        raise NotConnected("subgraph is not connected")
    if not edges and len(vs) == 1:
        return graph
    if name is None:
        name = "[" + "+".join(sorted(vs)) + "]"
    if name in graph.vertices and name not in vs:
        raise ProppError(f"vertex name {name} already used")
    outer_tree = graph.spanning_tree()
    inner_tree = _extend_tree(graph, vs, [n for n in edges if n in outer_tree], edges)
    nested = GraphOfGroups(
        {v: graph.vertices[v] for v in vs},
        [graph.edges[n] for n in edges],
        graph.prime,
        tree=inner_tree,
    )
    new_vertices = {v: g for v, g in graph.vertices.items() if v not in vs}
    new_vertices[name] = nested
    new_edges = []
    for n in graph.edge_names:
        if n in edges:
            continue
        e = graph.edges[n]
        for side in (0, 1):
            if e.end(side) in vs:
                att = e.att(side)
                e = e.with_end(side, name, Attachment(att.images, (e.end(side),) + att.inner))
        new_edges.append(e)
    remaining_tree = [n for n in outer_tree if n not in edges and n not in inner_tree]
    out = GraphOfGroups(new_vertices, new_edges, graph.prime)
    tree = _extend_tree(out, set(new_vertices), remaining_tree, out.edge_names)
    return GraphOfGroups(new_vertices, new_edges, graph.prime, tree=tree)


def _extend_tree(graph, vs, preferred, allowed):
    parent = {v: v for v in vs}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    tree = []
    for n in list(preferred) + sorted(allowed):
        e = graph.edges[n]
        if e.src not in parent or e.dst not in parent:
            continue
        a, b = find(e.src), find(e.dst)
        if a != b:
            parent[a] = b
            tree.append(n)
    return frozenset(tree)


def refine_at_vertex(graph, v, inner, attach=None):
    """Replace vertex v by the graph of groups `inner`.

    ``attach`` maps edge names (or ``(edge, side)`` pairs) incident to v to
    an inner vertex name, optionally as ``(inner_vertex, conjugator)`` with
    the conjugator a local word of the current target group.  Images are
    moved to the requested inner vertex along the inner spanning tree; an
    image that does not survive the move raises EdgeGroupNotElliptic.
    """
    attach = dict(attach or {})
    vgroup = graph.vertices[v]
    if isinstance(vgroup, GraphOfGroups):
        if not (vgroup.same_as(inner) or _same_underlying(vgroup, inner)):
            raise ProppError("inner graph does not match the composite vertex group")
        base = inner
        identify = None
    else:
        base = inner
        identify = _identify_with_vertex(vgroup, inner)
    inner_flat_names = set(base.vertices)
    for n in inner_flat_names:
        if n in graph.vertices and n != v:
            raise ProppError(f"vertex name {n} is not unique")
    for n in base.edges:
        if n in graph.edges:
            raise ProppError(f"edge name {n} is not unique")
    vertices = {n: g for n, g in graph.vertices.items() if n != v}
    vertices.update(base.vertices)
    edges = list(base.edges.values())
    for name in graph.edge_names:
        e = graph.edges[name]
        for side in (0, 1):
            if e.end(side) != v:
                continue
            req = attach.get((name, side), attach.get(name))
            conj = None
            if isinstance(req, (tuple, list)):
                req, conj = req
            att = e.att(side)
            if identify is None:
                cur_vertex, inner_path, images = att.inner[0], att.inner[1:], att.images
                if conj is not None:
                    _, tg = base.resolve(cur_vertex, inner_path)
                    images = _conjugate_images(tg, images, conj)
            else:
                images = att.images
                if conj is not None:
                    images = _conjugate_images(vgroup, images, conj)
                cur_vertex, inner_path, images = identify(e, images, req)
            if req is not None and req != cur_vertex:
                if inner_path:
                    raise EdgeGroupNotElliptic("cannot move images out of a nested vertex")
                images = _transport(base, cur_vertex, req, e.group, images)
                cur_vertex = req
            e = e.with_end(side, cur_vertex, Attachment(images, inner_path))
        edges.append(e)
    tree = None
    if graph.tree is not None or base.tree is not None:
        tree = (graph.spanning_tree()) | base.spanning_tree()
    return GraphOfGroups(vertices, edges, graph.prime, tree=tree)


def _same_underlying(a, b):
    return set(a.vertices) == set(b.vertices) and set(a.edges) == set(b.edges) and a.flatten().same_as(
        b.flatten()
    )


def _conjugate_images(group, images, conj):
    if isinstance(conj, str):
        conj = _parse_finite(group, conj) if isinstance(group, FiniteGroup) else group.parse(conj)
    c = elem_of(group, conj)
    ci = group.inv(c)
    return tuple(word_of(group, group.mul(group.mul(ci, elem_of(group, w)), c)) for w in images)


def _identify_with_vertex(vgroup, inner):
    """Identify vgroup with pi1(inner) when inner reduces to a copy of vgroup.

    Returns a function placing an incident edge image into an inner vertex.
    """
    if len(inner.vertices) == 1 and not inner.edges:
        (name, g), = inner.vertices.items()
        if not same_group(g, vgroup):
            raise ProppError("inner vertex group differs from the refined vertex group")

        def place_single(edge, images, req):
            if req is not None and req != name:
                raise EdgeGroupNotElliptic(f"unknown inner vertex {req}")
            return name, (), images

        return place_single
    red, trace = reduce_graph(inner)
    if len(red.vertices) != 1 or red.edges:
        raise ProppError("inner graph does not present the vertex group")
    (kept, g), = red.vertices.items()
    if not same_group(g, vgroup):
        raise ProppError("inner graph does not reduce to the refined vertex group")
    # images of each inner vertex group inside the kept copy
    emb = {}
    flat = inner.flatten()
    for x, xg in flat.vertices.items():
        if x == kept:
            emb[x] = None
            continue
        emb[x] = [trace.forward[symbol(x, a)] for a in xg.gen_names]

    def place(edge, images, req):
        target = req if req is not None else kept
        xg = flat.vertices.get(target)
        if xg is None:
            raise EdgeGroupNotElliptic(f"unknown inner vertex {target}")
        if isinstance(edge.group, FiniteGroup) and isinstance(xg, FiniteGroup) and edge.group.n > xg.n:
            raise EdgeGroupNotElliptic(
                f"edge {edge.name}: |G(e)| = {edge.group.n} exceeds |G({target})| = {xg.n}"
            )
        if emb[target] is None:
            return target, (), images
        # conjugation-free embedding required: images of generators are plain words
        words = []
        for w in emb[target]:
            if any(not s.startswith(kept + ".") for s, _ in w):
                raise EdgeGroupNotElliptic("embedding of the inner vertex involves stable letters")
            words.append(tuple(
                (vgroup.gen_names.index(s[len(kept) + 1:]) + 1) * e for s, e in w
            ))
        if isinstance(vgroup, FiniteGroup):
            hom = GroupHom.from_generators(xg, vgroup, [vgroup.evaluate(w) for w in words])
            out = []
            for img in images:
                y = vgroup.evaluate(img)
                pre = hom.preimage(y)
                if pre is None:
                    raise EdgeGroupNotElliptic(
                        f"edge {edge.name}: image not contained in inner vertex {target}"
                    )
                out.append(xg.word_of(pre))
            return target, (), tuple(out)
        aut = SubgroupAutomaton(vgroup, words)
        out = []
        for img in images:
            pre = aut.preimage(img)
            if pre is None:
                raise EdgeGroupNotElliptic(
                    f"edge {edge.name}: image not contained in inner vertex {target}"
                )
            out.append(pre)
        return target, (), tuple(out)

    return place


def _transport(inner, start, goal, edge_group, images):
    """Move images from inner vertex `start` to `goal` along the inner tree."""
    flat = inner
    tree = flat.spanning_tree()
    prev = {start: None}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for n in sorted(tree):
            e = flat.edges[n]
            for s in (0, 1):
                if e.end(s) == x and e.end(1 - s) not in prev:
                    prev[e.end(1 - s)] = (n, s, x)
                    queue.append(e.end(1 - s))
    if goal not in prev:
        raise EdgeGroupNotElliptic(f"inner vertex {goal} not found")
    steps = []
    x = goal
    while prev[x] is not None:
        steps.append(prev[x])
        x = prev[x][2]
    steps.reverse()
    cur = start
    for n, s, _ in steps:
        e = flat.edges[n]
        _, g_here = flat.target(e, s)
        if isinstance(edge_group, FiniteGroup) and isinstance(g_here, FiniteGroup):
            if edge_group.n > e.group.n if isinstance(e.group, FiniteGroup) else False:
                raise EdgeGroupNotElliptic("order obstruction while moving the edge image")
        new = []
        for w in images:
            y = elem_of(g_here, w)
            pre = flat.preimage(e, s, y)
            if pre is None:
                raise EdgeGroupNotElliptic(
                    f"image does not lie in the image of inner edge {n} at {cur}"
                )
            _, g_next = flat.target(e, 1 - s)
            new.append(word_of(g_next, flat.apply(e, 1 - s, pre)))
        images = tuple(new)
        cur = e.end(1 - s)
    return images


# --- Grushko and incidence ------------------------------------------------------------

def grushko_components(graph):
    """(parts, free_rank): restricted graphs over nontrivial edges, plus free rank."""
    parent = {v: v for v in graph.vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    trivial = []
    for n in graph.edge_names:
        e = graph.edges[n]
        if is_trivial_group(e.group):
            trivial.append(n)
        else:
            parent[find(e.src)] = find(e.dst)
    comps = {}
    for v in graph.vertex_names:
        comps.setdefault(find(v), set()).add(v)
    parts = []
    for key in sorted(comps, key=lambda k: sorted(comps[k])):
        vs = comps[key]
        es = [
            graph.edges[n]
            for n in graph.edge_names
            if n not in trivial and graph.edges[n].src in vs
        ]
        if len(vs) == 1 and not es:
            (only,) = vs
            g = graph.vertices[only]
            if is_trivial_group(g):
                continue
        parts.append(GraphOfGroups({v: graph.vertices[v] for v in vs}, es, graph.prime))
    free_rank = len(trivial) - len(comps) + 1
    return parts, free_rank


def incident_edge_groups(graph, v):
    """(edge name, side, image) for each edge end at v; loops contribute twice."""
    if v not in graph.vertices:
        raise ProppError(f"unknown vertex {v}")
    return [(e.name, side, graph.image(e, side)) for e, side in graph.ends_at(v)]


def fundamental_presentation(graph, tree=None):
    return graph.presentation(tree)


def rank_mod_p(graph):
    return graph.rank_mod_p()


def validate(graph):
    graph.validate()


# --- isomorphism -------------------------------------------------------------------------

def isomorphic(g1, g2):
    """Graph isomorphism respecting vertex groups, edge groups and attachments.

    Brute force with pruning by vertex-group identity; inner vertex names of
    composite vertices must agree.  Returns a vertex map or None.
    """
    if len(g1.vertices) != len(g2.vertices) or len(g1.edges) != len(g2.edges):
        return None
    v1 = g1.vertex_names
    cands = {
        a: [b for b in g2.vertex_names if same_group(g1.vertices[a], g2.vertices[b])
            and len(g1.ends_at(a)) == len(g2.ends_at(b))]
        for a in v1
    }
    if any(not c for c in cands.values()):
        return None
    order = sorted(v1, key=lambda a: len(cands[a]))

    def edges_match(vmap):
        used = set()
        for n in g1.edge_names:
            e = g1.edges[n]
            found = None
            for m in g2.edge_names:
                if m in used:
                    continue
                f = g2.edges[m]
                if not _same_edge_group(e.group, f.group):
                    continue
                # edges are unoriented: try f as stored and reversed
                for flip in (0, 1):
                    if (vmap[e.src], vmap[e.dst]) != (f.end(flip), f.end(1 - flip)):
                        continue
                    if all(
                        e.att(s).inner == f.att(s ^ flip).inner and g1._same_images(e, s, g2, f, s ^ flip)
                        for s in (0, 1)
                    ):
                        found = m
                        break
                if found is not None:
                    break
            if found is None:
                return False
            used.add(found)
        return True

    def search(i, vmap, used):
        if i == len(order):
            return dict(vmap) if edges_match(vmap) else None
        a = order[i]
        for b in cands[a]:
            if b in used:
                continue
            vmap[a] = b
            used.add(b)
            res = search(i + 1, vmap, used)
            if res is not None:
                return res
            used.discard(b)
            del vmap[a]
        return None

    return search(0, {}, set())
