"""JSON input/output for groups and graphs of groups, plus DOT export."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import ProppError, SchemaError, ValidationError
from .gog import GraphOfGroups, make_edge
from .groups.finite import FiniteGroup
from .groups.free import FreeGroup
from .words import WordSyntaxError, format_word

GRAPH_FIELDS = ("vertices", "edges")
EDGE_FIELDS = ("name", "from", "to", "group", "attach_from", "attach_to")


# --- groups --------------------------------------------------------------------

def group_from_dict(data, prime=None, named=None, where="group"):
    """Build a group descriptor; `data` may be a name looked up in `named`."""
    named = named or {}
    if isinstance(data, str):
        if data not in named:
            raise SchemaError(f"{where}: unknown group reference {data!r}")
        return named[data]
    if not isinstance(data, dict):
        raise SchemaError(f"{where}: expected an object or a group name")
    kind = data.get("kind")
    p = data.get("prime", prime)
    if kind in ("graph", "composite"):
        return graph_from_dict(data, prime=p, named=named, where=where)
    if p is None:
        raise SchemaError(f"{where}: missing field 'prime'")
    names = data.get("names")
    if kind == "free":
        gens = data.get("generators")
        if not gens:
            raise SchemaError(f"{where}: free group needs a nonempty 'generators' list")
        return FreeGroup(gens, p)
    if kind != "finite":
        raise SchemaError(f"{where}: unknown group kind {kind!r}")
    if "perm_gens" in data:
        return FiniteGroup.from_perms(data["perm_gens"], p, names=names)
    if "cayley" in data:
        return FiniteGroup(data["cayley"], p, gens=data.get("gens"), names=names)
    raise SchemaError(f"{where}: finite group needs 'perm_gens' or 'cayley'")


def group_to_dict(group):
    if isinstance(group, GraphOfGroups):
        return graph_to_dict(group, kind=True)
    if isinstance(group, FreeGroup):
        return {"kind": "free", "prime": group.prime, "generators": list(group.names)}
    out = {"kind": "finite", "prime": group.prime}
    if group.perms is not None:
        out["perm_gens"] = [list(pm) for pm in group.perms]
    else:
        out["cayley"] = group.table.tolist()
        out["gens"] = [int(g) for g in group.gens]
    out["names"] = list(group.gen_names)
    return out


# --- graphs --------------------------------------------------------------------

def _attachment(raw, where):
    if isinstance(raw, dict):
        if "images" not in raw:
            raise SchemaError(f"{where}: attachment object needs 'images'")
        return list(raw["images"]), tuple(raw.get("inner", ()))
    if isinstance(raw, list):
        return raw, ()
    raise SchemaError(f"{where}: attachment must be a list of words or an object")


def graph_from_dict(data, prime=None, named=None, where="graph"):
    if not isinstance(data, dict):
        raise SchemaError(f"{where}: expected an object")
    for key in GRAPH_FIELDS:
        if key not in data:
            raise SchemaError(f"{where}: missing field {key!r}")
    prime = data.get("prime", prime)
    named = dict(named or {})
    for name, raw in sorted(data.get("groups", {}).items()):
        named[name] = group_from_dict(raw, prime, named, where=f"groups.{name}")
    if not isinstance(data["vertices"], dict) or not data["vertices"]:
        raise SchemaError(f"{where}: 'vertices' must be a nonempty object")
    vertices = {
        v: group_from_dict(raw, prime, named, where=f"vertices.{v}")
        for v, raw in data["vertices"].items()
    }
    if prime is None:
        prime = next(iter(vertices.values())).prime
    edges = []
    for i, raw in enumerate(data["edges"]):
        label = f"edges[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{label}: expected an object")
        if "name" in raw:
            label = f"edge {raw['name']!r}"
        for key in EDGE_FIELDS:
            if key not in raw:
                raise SchemaError(f"{label}: missing field {key!r}")
        for key in ("from", "to"):
            if raw[key] not in vertices:
                raise SchemaError(f"{label}: field {key!r} names unknown vertex {raw[key]!r}")
        group = group_from_dict(raw["group"], prime, named, where=f"{label}.group")
        im0, in0 = _attachment(raw["attach_from"], f"{label}.attach_from")
        im1, in1 = _attachment(raw["attach_to"], f"{label}.attach_to")
        try:
            edges.append(
                make_edge(raw["name"], raw["from"], raw["to"], group, im0, im1, in0, in1, graph_vertices=vertices)
            )
        except (WordSyntaxError, KeyError, AttributeError) as exc:
            raise SchemaError(f"{label}: bad attachment word or inner path ({exc})") from None
    return GraphOfGroups(vertices, edges, prime, tree=data.get("tree"))


def _image_words(graph, e, side):
    _, target = graph.target(e, side)
    names = target.gen_names
    return [format_word(w, names) for w in e.att(side).images]


def graph_to_dict(graph, kind=False):
    out = {"kind": "graph"} if kind else {}
    out["prime"] = graph.prime
    out["vertices"] = {v: group_to_dict(graph.vertices[v]) for v in graph.vertex_names}
    edges = []
    for name in graph.edge_names:
        e = graph.edges[name]
        item = {"name": name, "from": e.src, "to": e.dst, "group": group_to_dict(e.group)}
        for key, side in (("attach_from", 0), ("attach_to", 1)):
            images = _image_words(graph, e, side)
            inner = e.att(side).inner
            item[key] = {"images": images, "inner": list(inner)} if inner else images
        edges.append(item)
    out["edges"] = edges
    if graph.tree is not None:
        out["tree"] = sorted(graph.tree)
    return out


# --- files ---------------------------------------------------------------------

def load_document(path):
    """Parse a JSON file, reporting syntax errors with their line."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def parse_input(path, validate=True):
    """(graph, document) for a JSON file; the document keeps optional keys like 'claims'."""
    doc = load_document(path)
    graph = graph_from_dict(doc, where=str(path))
    if validate:
        check(graph)
    return graph, doc


def check(graph):
    try:
        graph.validate()
    except SchemaError:
        raise
    except ProppError as exc:
        raise ValidationError(exc) from exc
    return graph


def dumps(obj):
    """Deterministic JSON text."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --- DOT -----------------------------------------------------------------------

def group_label(group):
    if isinstance(group, FreeGroup):
        return f"F_{group.rank}"
    if isinstance(group, GraphOfGroups):
        return f"pi1({len(group.vertices)}V,{len(group.edges)}E)"
    return str(group.n)


def _quote(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def node_id(name, cylinders=()):
    """Stable DOT id: "cyl:<class>" for cylinder vertices, "v:<name>" otherwise."""
    if name in cylinders:
        return "cyl:" + (name[3:] if name.startswith("cyl") else name)
    return f"v:{name}"


def graph_to_dot(graph, name="G", cylinders=(), overlay=None):
    """DOT text for a graph of groups; `cylinders` marks cylinder vertices."""
    overlay = overlay or {}
    lines = [f"graph {_quote(name)} {{"]
    for v in graph.vertex_names:
        shape = "box" if v in cylinders else "ellipse"
        extra = ", style=filled" if v in overlay.get("vertices", ()) else ""
        lines.append(
            f"  {_quote(node_id(v, cylinders))} [label={_quote(f'{v} {group_label(graph.vertices[v])}')}, shape={shape}{extra}];"
        )
    for en in graph.edge_names:
        e = graph.edges[en]
        lines.append(
            f"  {_quote(node_id(e.src, cylinders))} -- {_quote(node_id(e.dst, cylinders))}"
            f" [label={_quote(f'{en} {group_label(e.group)}')}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def ball_to_dot(ball, fixed=None):
    """DOT text for a tree ball; cells in `fixed` (a FixedSet) are highlighted."""
    keys = sorted(ball.vertices, key=_ball_order)
    ids = {k: i for i, k in enumerate(keys)}
    fixed_v = set(fixed.vertices) if fixed is not None else set()
    fixed_e = {k for k, _ in fixed.edges} if fixed is not None else set()
    lines = ["graph ball {"]
    for k in keys:
        extra = ", style=filled" if k in fixed_v else ""
        lines.append(f"  {_quote(f'v:{ids[k]}')} [label={_quote(ball.vertex_label(k))}{extra}];")
    for k, (a, b) in sorted(ball.edges.items(), key=lambda kv: _ball_order(kv[0])):
        extra = ", penwidth=3" if k in fixed_e else ""
        lines.append(
            f"  {_quote(f'v:{ids[a]}')} -- {_quote(f'v:{ids[b]}')} [label={_quote(ball.edge_label(k))}{extra}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _ball_order(key):
    from .bass_serre import _key_order

    return _key_order(key)


def fixture_path(name):
    """Path of a shipped fixture, e.g. ``fixture_path("amalg_c4_c2_c4")``."""
    from importlib.resources import files

    if not name.endswith(".json"):
        name += ".json"
    return Path(str(files("propp") / "fixtures" / name))


def fixture_names():
    from importlib.resources import files

    return sorted(p.name[:-5] for p in files("propp").joinpath("fixtures").iterdir() if p.name.endswith(".json"))
