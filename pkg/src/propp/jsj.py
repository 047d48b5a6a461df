"""Domination, deformation spaces, JSJ certificates and accessibility audits."""
from __future__ import annotations

from dataclasses import dataclass, field

from .bass_serre import algebra, conjugate_into_vertex, cyclic_core, elliptic_subgroup, normal_form
from .errors import (
    BadExpansion,
    IncompatiblePresentations,
    InfiniteVertexGroup,
    NotFictitious,
    NotFinite,
    NotReduced,
    ProppError,
)
from .gog import (
    GraphOfGroups,
    contract_edge,
    path_translation,
    reduce_graph,
    refine_at_vertex,
    stable_letter,
    symbol,
    translate_word,
)
from .groups.finite import FiniteGroup
from .groups.free import FreeGroup, conjugate_subgroups_free
from .verdict import Status, Verdict
from .words import format_pairs


# --- translations between presentations ---------------------------------------------

def _compose(first, second):
    return {s: translate_word(w, second) for s, w in first.items()}


def _same_flat(a, b):
    fa, fb = a.flatten(), b.flatten()
    strip = lambda g: GraphOfGroups(g.vertices, g.edges, g.prime)
    return strip(fa).same_as(strip(fb))


def _flat_translation(t1, t2):
    """Identity on the common flat graph, re-expressed in the spanning tree of t2."""
    f1 = t1.flatten()
    alg = algebra(t2)
    vertex_maps = {v: {a: ((symbol(v, a), 1),) for a in f1.vertices[v].gen_names} for v in f1.vertex_names}
    edge_elems = {}
    for name in f1.edge_names:
        e = f1.edges[name]
        path = (alg.ident(e.src), (name, 1), alg.ident(e.dst))
        edge_elems[name] = alg.path_to_word(path, start=e.src)
    return path_translation(f1, vertex_maps, edge_elems)


def _reduction_inputs(t):
    return [t] if t.is_composite_free else [t, t.flatten()]


def find_translation(t1, t2):
    """Symbol map from the presentation of t1 into that of t2, with its provenance."""
    if _same_flat(t1, t2):
        return _flat_translation(t1, t2), "same flat graph"
    # composite vertices reduce differently at top level and once flattened; try both
    for g1 in _reduction_inputs(t1):
        red, trace = reduce_graph(g1)
        if _same_flat(red, t2):
            tr = _compose(_flat_translation(t1, g1), trace.forward)
            return _compose(tr, _flat_translation(red, t2)), "t2 is the reduction of t1"
    for g2 in _reduction_inputs(t2):
        red2, trace2 = reduce_graph(g2)
        if _same_flat(red2, t1):
            tr = _compose(_flat_translation(t1, red2), trace2.backward)
            return _compose(tr, _flat_translation(g2, t2)), "t1 is the reduction of t2"
    from .cylinders import tree_of_cylinders

    try:
        q = tree_of_cylinders(t1)
    except ProppError:
        q = None
    if q is not None:
        if _same_flat(q.graph, t2):
            return _compose(q.translation, _flat_translation(q.graph, t2)), "t2 is the tree of cylinders of t1"
        if _same_flat(q.reduced, t2):
            tr = _compose(q.translation, q.trace.forward)
            return _compose(tr, _flat_translation(q.reduced, t2)), "t2 is the reduced tree of cylinders of t1"
    try:
        q = tree_of_cylinders(t2)
    except ProppError:
        q = None
    if q is not None:
        if _same_flat(q.graph, t1):
            return _compose(_flat_translation(t1, q.graph), q.backward), "t1 is the tree of cylinders of t2"
        if _same_flat(q.reduced, t1):
            tr = _compose(_flat_translation(t1, q.reduced), q.trace.backward)
            return _compose(tr, q.backward), "t1 is the reduced tree of cylinders of t2"
    s1, s2 = set(t1.symbols()), set(t2.symbols())
    if s1 <= s2:
        return {s: ((s, 1),) for s in s1}, "shared symbols"
    raise IncompatiblePresentations("no common generating alphabet between the two graphs")


def check_relators(t1, t2, translation):
    """None when every relator of t1 dies in t2, else a witness."""
    for rel in t1.presentation().relators:
        img = translate_word(rel, translation)
        nf = normal_form(t2, img)
        if not nf.is_identity:
            core = cyclic_core(t2, img)
            return {
                "relator": format_pairs(rel),
                "image": nf.format(),
                "hyperbolic": not core.elliptic,
                "translation_length": core.translation_length,
            }
    return None


# --- domination ----------------------------------------------------------------------

@dataclass
class DominationReport:
    vertices: dict
    overall: Verdict
    translation_source: str = ""
    relator_failure: dict = None

    def to_json(self):
        return {
            "overall": self.overall.to_json(),
            "vertices": {v: r.to_json() for v, r in sorted(self.vertices.items())},
            "translation": self.translation_source,
            "relator_failure": self.relator_failure,
        }

    @property
    def exit_code(self):
        return self.overall.exit_code


def vertex_generators(graph, v):
    """Presentation symbols generating the vertex group of a top-level vertex."""
    g = graph.vertices[v]
    if not isinstance(g, GraphOfGroups):
        return [symbol(v, a) for a in g.gen_names]
    inner = g.flatten()
    tree = graph.flatten().spanning_tree()
    syms = [symbol(w, a) for w in inner.vertex_names for a in inner.vertices[w].gen_names]
    syms += [stable_letter(e) for e in inner.edge_names if e not in tree]
    return syms


def dominates(t1, t2, budget=6, translation=None):
    """Does t1 dominate t2: is every vertex group of t1 elliptic in t2?"""
    if t1.prime != t2.prime:
        raise IncompatiblePresentations("graphs use different primes")
    if translation is None:
        translation, source = find_translation(t1, t2)
    else:
        source = "supplied"
    failure = check_relators(t1, t2, translation)
    if failure is not None:
        return DominationReport({}, Verdict.no({"not_a_homomorphism": failure}), source, failure)
    point = len(t2.vertices) == 1 and not t2.edges
    results = {}
    for v in t1.vertex_names:
        gens = vertex_generators(t1, v)
        if point:
            results[v] = Verdict.yes({"reason": "the target tree is a point"})
            continue
        words = [translate_word(((s, 1),), translation) for s in gens]
        ok, hyper = elliptic_subgroup(t2, words)
        if not ok:
            results[v] = Verdict.no({"hyperbolic": hyper})
            continue
        results[v] = Verdict.yes(_elliptic_witness(t2, t1.vertices[v], words, budget))
    status = (
        Status.YES if all(r.is_yes for r in results.values())
        else Status.NO if any(r.is_no for r in results.values()) else Status.UNKNOWN
    )
    bad = sorted(v for v, r in results.items() if not r.is_yes)
    return DominationReport(results, Verdict(status, {"failing": bad} if bad else None), source)


def _elliptic_witness(t2, group, words, budget):
    wit = {"criterion": "generators and pairwise products elliptic"}
    if isinstance(group, FiniteGroup):
        try:
            conj = conjugate_into_vertex(t2, [format_pairs(w) or "1" for w in words], budget)
        except (NotFinite, ProppError):
            return wit
        if conj.is_yes:
            wit.update(conj.witness)
    return wit


def same_deformation_space(t1, t2, budget=6):
    """ProvenYes iff each graph dominates the other."""
    forward = dominates(t1, t2, budget)
    if forward.relator_failure is not None:
        return Verdict.no({"direction": "t1 -> t2", **forward.overall.witness})
    backward = dominates(t2, t1, budget)
    if backward.relator_failure is not None:
        return Verdict.no({"direction": "t2 -> t1", **backward.overall.witness})
    for name, rep in (("t1 -> t2", forward), ("t2 -> t1", backward)):
        if rep.overall.is_no:
            bad = rep.overall.witness["failing"][0]
            return Verdict.no({"direction": name, "vertex": bad, **rep.vertices[bad].witness})
    if forward.overall.is_yes and backward.overall.is_yes:
        return Verdict.yes({"t1 -> t2": forward.translation_source, "t2 -> t1": backward.translation_source})
    return Verdict.unknown({"t1 -> t2": forward.overall.status.value, "t2 -> t1": backward.overall.status.value})


# --- universal ellipticity and JSJ over finite groups -------------------------------

def universally_elliptic_edges(graph):
    out = {}
    for name in graph.edge_names:
        g = graph.edges[name].group
        out[name] = "Certified" if isinstance(g, FiniteGroup) else "Unknown"
    return out


def jsj_certify_finite(graph):
    flat = graph.flatten()
    for v, g in flat.vertices.items():
        if not isinstance(g, FiniteGroup):
            raise InfiniteVertexGroup(f"vertex {v} is infinite")
    red, trace = reduce_graph(graph)
    reduced = not trace.steps
    edges_finite = all(isinstance(e.group, FiniteGroup) for e in flat.edges.values())
    cert = {"reduced": reduced, "edges_finite": edges_finite, "certified": reduced and edges_finite}
    if not reduced:
        cert["trace"] = trace.to_json()
    return cert


# --- accessibility --------------------------------------------------------------------

@dataclass
class BoundRecord:
    name: str
    quantity: str
    formula: str
    bound: float
    observed: int

    @property
    def passed(self):
        return self.observed <= self.bound

    def to_json(self):
        return {"bound": self.name, "quantity": self.quantity, "formula": self.formula,
                "value": self.bound, "observed": self.observed, "pass": self.passed}


@dataclass
class AccessibilityReport:
    d: int
    records: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def violations(self):
        return [r for r in self.records if not r.passed]

    @property
    def exit_code(self):
        return 1 if self.violations else 0

    def to_json(self):
        return {"d": self.d, "records": [r.to_json() for r in self.records],
                "violations": [r.name for r in self.violations], **self.notes}


def _procyclic(g):
    if isinstance(g, FreeGroup):
        return g.rank <= 1
    return g.h1_dim <= 1


def edge_group_classes(graph):
    """Upper estimate of the number of G-conjugacy classes of edge groups.

    Edges are merged when their images are conjugate inside a common
    vertex group, so the count never undercounts the true class number.
    """
    flat = graph.flatten()
    names = flat.edge_names
    parent = {n: n for n in names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in flat.vertex_names:
        ends = flat.ends_at(v)
        grp = flat.vertices[v]
        for i, (e, s) in enumerate(ends):
            for f, t in ends[i + 1:]:
                if find(e.name) == find(f.name):
                    continue
                if _images_conjugate(flat, grp, (e, s), (f, t)):
                    parent[find(e.name)] = find(f.name)
    return len({find(n) for n in names})


def _images_conjugate(flat, grp, a, b):
    (e, s), (f, t) = a, b
    if isinstance(grp, FiniteGroup):
        return grp.are_conjugate(flat.image(e, s), flat.image(f, t)) is not None
    ka, da = flat._hom(e, s)
    kb, db = flat._hom(f, t)
    if ka == "trivial" or kb == "trivial":
        return ka == kb
    return conjugate_subgroups_free(grp, list(da), list(db)) is not None


def accessibility_audit(graph, claims=None, acylindricity=None):
    """Evaluate the accessibility bounds against exact counts.

    ``claims`` may override d (key "d"), supply an edge-order bound ("k")
    or an acylindricity constant ("acylindricity"); claimed values are
    reported alongside the computed ones.  ``acylindricity`` is a pair
    (k, Verdict) from the acylindricity checker.
    """
    claims = dict(claims or {})
    red, trace = reduce_graph(graph)
    if trace.steps:
        raise NotReduced(f"graph is not reduced: {trace.steps[0]}")
    for name in graph.edge_names:
        if graph.is_fictitious(name, pro_p=True):
            raise NotReduced(f"edge {name} is fictitious in the pro-p sense")
    flat = graph.flatten()
    p = flat.prime
    d_computed = graph.rank_mod_p()
    d = claims.get("d", d_computed)
    nv, ne = len(graph.vertices), len(graph.edges)
    report = AccessibilityReport(d, notes={"d_computed": d_computed, "vertices": nv, "edges": ne,
                                           "claims": claims})
    groups = [e.group for e in graph.edges.values()]
    # d = 0 means G is trivial: the only reduced graph is one trivial vertex
    if d >= 1 and all(isinstance(g, FiniteGroup) for g in groups):
        k = claims.get("k", max((g.n for g in groups), default=1))
        bound = p * k / (p - 1) * (d - 1) + 1
        report.records.append(BoundRecord("finite-edge", "edges", "p k/(p-1) (d-1) + 1", bound, ne))
    if d >= 2 and all(_procyclic(g) for g in groups):
        report.records.append(BoundRecord("cyclic-vertices", "vertices", "2d - 1", 2 * d - 1, nv))
        report.records.append(BoundRecord("cyclic-edges", "edges", "3d - 2", 3 * d - 2, ne))
    k_acyl = claims.get("acylindricity")
    if k_acyl is None and acylindricity is not None:
        k, verdict = acylindricity
        if verdict.is_yes:
            k_acyl = k
    if k_acyl is not None and k_acyl >= 1:
        report.records.append(BoundRecord("acylindrical-edges", "edges", "d (4k + 1) - 1",
                                          d * (4 * k_acyl + 1) - 1, ne))
        report.records.append(BoundRecord("acylindrical-vertices", "vertices", "4 k d", 4 * k_acyl * d, nv))
    if groups:
        classes = claims.get("edge_classes", edge_group_classes(graph))
        report.records.append(BoundRecord("finite-family", "vertices", "d |E/G|", d * classes, nv))
        report.notes["edge_classes"] = classes
    return report


# --- elementary moves -----------------------------------------------------------------

def reduction_move(graph, edge, side=None):
    """Collapse a fictitious edge, removing the endpoint whose attachment is bijective."""
    e = graph.edges[edge] if isinstance(edge, str) else edge
    if e.is_loop or not graph.is_fictitious(e):
        raise NotFictitious(f"edge {e.name} is not fictitious")
    if side is None:
        side = 1 if graph.attachment_bijective(e, 1) else 0
    elif not graph.attachment_bijective(e, side):
        raise NotFictitious(f"edge {e.name} is not bijective on side {side}")
    new, _ = contract_edge(graph, e, side)
    return new


def expansion_move(graph, v, inner, attach=None):
    """Split vertex v along a one-edge graph with a bijective attachment."""
    if not isinstance(inner, GraphOfGroups) or len(inner.edges) != 1 or len(inner.vertices) != 2:
        raise BadExpansion("expansion needs a one-edge inner graph with two vertices")
    (e,) = inner.edges.values()
    if not (inner.attachment_bijective(e, 0) or inner.attachment_bijective(e, 1)):
        raise BadExpansion("neither attachment of the inner edge is an isomorphism")
    try:
        return refine_at_vertex(graph, v, inner, attach)
    except ProppError as exc:
        raise BadExpansion(str(exc)) from None
