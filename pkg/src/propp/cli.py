"""Command-line interface: `propp <command> INPUT [options]`.

Exit codes: 0 success or ProvenYes, 1 ProvenNo or a negative verdict,
2 Unknown/Undecided, 3 any error.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import bass_serre, cylinders, gog, homology, jsj
from .errors import ProppError
from .groups.finite import FiniteGroup, is_prime
from .groups.free import FreeGroup
from .io import (
    ball_to_dot,
    check,
    dumps,
    graph_from_dict,
    graph_to_dict,
    graph_to_dot,
    load_document,
)
from .samples import random_finite_graph, random_free_graph
from .words import format_pairs, parse_word


@dataclass
class RunConfig:
    command: str
    inputs: list
    prime: int = None
    radius: int = 2
    budget: int = 6
    fmt: str = "json"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.radius < 0:
            raise ProppError("radius must be non-negative")
        if self.budget < 1:
            raise ProppError("budget must be at least 1")
        if self.prime is not None and not is_prime(self.prime):
            raise ProppError(f"{self.prime} is not prime")


@dataclass
class Report:
    code: int
    data: dict
    dot: str = None


# --- input ---------------------------------------------------------------------

def _override_prime(doc, p):
    if isinstance(doc, dict):
        return {k: (p if k == "prime" else _override_prime(v, p)) for k, v in doc.items()}
    if isinstance(doc, list):
        return [_override_prime(x, p) for x in doc]
    return doc


def read_graph(path, prime=None):
    doc = load_document(path)
    if prime is not None:
        doc = _override_prime(doc, prime)
    graph = check(graph_from_dict(doc, where=str(path)))
    return graph, doc


# --- commands ------------------------------------------------------------------

def _summary(graph):
    return {
        "prime": graph.prime,
        "vertices": {v: _group_text(graph.vertices[v]) for v in graph.vertex_names},
        "edges": {n: _group_text(graph.edges[n].group) for n in graph.edge_names},
    }


def _group_text(g):
    if isinstance(g, FreeGroup):
        return f"F_{g.rank}"
    if isinstance(g, FiniteGroup):
        return f"order {g.n}"
    return f"graph({', '.join(g.vertex_names)})"


def cmd_validate(cfg, graph, doc):
    return Report(0, {"valid": True, **_summary(graph)}, graph_to_dot(graph))


def cmd_present(cfg, graph, doc):
    tree = cfg.options.get("tree")
    pres = graph.presentation(None if tree is None else _names(tree))
    return Report(0, {**pres.to_json(), "text": pres.format(), "rank_mod_p": pres.rank_mod_p(graph.prime)})


def cmd_reduce(cfg, graph, doc):
    out, trace = gog.reduce_graph(graph)
    return Report(0, {"graph": graph_to_dict(out), "trace": trace.to_json()}, graph_to_dot(out))


def cmd_collapse(cfg, graph, doc):
    out = gog.collapse_subgraph(graph, _names(cfg.options.get("edges")),
                                _names(cfg.options.get("vertices")), cfg.options.get("name"))
    return Report(0, {"graph": graph_to_dict(out)}, graph_to_dot(out))


def _attach_map(graph, v, raw):
    """Edge -> inner vertex, or [inner vertex, conjugator word] in the group at v."""
    if not raw:
        return None
    out = {}
    group = graph.vertices[v]
    for edge, target in json.loads(raw).items():
        if isinstance(target, list):
            inner, conj = target
            names = group.gen_names if not isinstance(group, gog.GraphOfGroups) else ()
            out[edge] = (inner, parse_word(conj, names))
        else:
            out[edge] = target
    return out


def cmd_refine(cfg, graph, doc):
    v = cfg.options["vertex"]
    inner, _ = read_graph(cfg.options["inner"], cfg.prime)
    out = gog.refine_at_vertex(graph, v, inner, _attach_map(graph, v, cfg.options.get("attach")))
    return Report(0, {"graph": graph_to_dict(out)}, graph_to_dot(out))


def cmd_grushko(cfg, graph, doc):
    parts, free_rank = gog.grushko_components(graph)
    d = gog.rank_mod_p(graph)
    total = sum(gog.rank_mod_p(x) for x in parts) + free_rank
    return Report(0, {
        "parts": [graph_to_dict(x) for x in parts],
        "free_rank": free_rank,
        "rank_mod_p": d,
        "additive": d == total,
    })


def cmd_rank(cfg, graph, doc):
    return Report(0, {"rank_mod_p": gog.rank_mod_p(graph), "mayer_vietoris": homology.mv_h1_dim(graph)})


def cmd_ball(cfg, graph, doc):
    ball = bass_serre.tree_ball(graph, cfg.radius)
    nv, ne = ball.counts()
    incidence = bass_serre.check_ball_incidence(ball)
    data = {**ball.to_json(), "counts": {"vertices": nv, "edges": ne}, "incidence_ok": incidence}
    return Report(0, data, ball_to_dot(ball))


def _vertex_ref(text):
    return int(text) if text.isdigit() else text


def cmd_geodesic(cfg, graph, doc):
    ball = bass_serre.tree_ball(graph, cfg.radius)
    geo = bass_serre.geodesic(ball, _vertex_ref(cfg.options["source"]), _vertex_ref(cfg.options["target"]))
    data = {
        "vertices": [ball.vertex_label(k) for k in geo.vertices],
        "edges": [ball.edge_label(k) for k in geo.edges],
        "length": len(geo),
        "stabilizer_check": geo.stabilizer_check,
        "checked_elements": geo.checked_elements,
    }
    return Report(0 if geo.stabilizer_check else 1, data)


def cmd_fixed(cfg, graph, doc):
    ball = bass_serre.tree_ball(graph, cfg.radius)
    fixed = bass_serre.fixed_subtree(ball, cfg.options.get("element") or ["1"])
    data = {
        "vertices": [ball.vertex_label(k) for k in fixed.vertices],
        "edges": [ball.edge_label(k) for k, _ in fixed.edges],
        "diameter": fixed.diameter,
        "connected": fixed.is_connected(),
    }
    return Report(0, data, ball_to_dot(ball, fixed))


def cmd_acyl(cfg, graph, doc):
    k = cfg.options.get("k", 1)
    radius = max(cfg.radius, k + 2)
    verdict = bass_serre.check_acylindrical(graph, k, radius)
    return Report(verdict.exit_code, {"k": k, **verdict.to_json()})


def cmd_cylinders(cfg, graph, doc):
    rel = cylinders.EQUALITY if cfg.options.get("relation", "equality") == "equality" else cylinders.COMMENSURABILITY
    verdict = cylinders.check_admissible(graph, rel, radius=cfg.radius)
    data = {"relation": rel.kind, "admissible": verdict.to_json()}
    if rel.kind != "equality":
        return Report(verdict.exit_code, data)
    tc = cylinders.tree_of_cylinders(graph, rel)
    data["tree_of_cylinders"] = tc.to_json()
    cyl = set(tc.v1)
    shown = tc.reduced if cfg.options.get("reduced") and tc.reduced is not None else tc.graph
    return Report(0, data, graph_to_dot(shown, "Tc", cylinders=cyl))


def cmd_aut_shape(cfg, graph, doc):
    flags = cfg.options.get("nonrigid") or []
    choice = cfg.options.get("malnormal", "auto")
    malnormal = None if choice == "auto" else choice == "yes"
    shape = cylinders.aut_splitting_shape(graph, "1" not in flags, "2" not in flags,
                                          cfg.options.get("swap", False), malnormal)
    return Report(0 if shape["expression"] is not None else 2, shape)


def _one_edge_free(graph):
    flat = graph.flatten()
    if len(flat.edges) != 1:
        raise ProppError("expected exactly one edge")
    (e,) = flat.edges.values()
    return flat, e


def cmd_free_split(cfg, graph, doc):
    shape = cfg.options["shape"]
    if shape == "amalgam":
        flat, e = _one_edge_free(graph)
        if e.is_loop:
            raise ProppError("amalgam needs a non-loop edge; use 'hnn'")
        f1, f2 = flat.vertices[e.src], flat.vertices[e.dst]
        res = homology.amalgam_free_splitting(f1, f2, flat.apply(e, 0, (1,)), flat.apply(e, 1, (1,)))
    elif shape == "hnn":
        res = homology.hnn_one_loop_decision(graph)
    elif shape == "star":
        data = homology.star_splitting(graph, cfg.options.get("center"))
        return Report(0, data)
    else:
        v, witness = homology.tree_vertex_relative_split(graph)
        return Report(0, {"vertex": v, "witness": witness})
    data = res.to_json()
    if res.transcript is not None:
        data["transcript_verified"] = homology.verify_free_result(res)
    return Report(res.exit_code, data)


def cmd_mv(cfg, graph, doc):
    mv = homology.mayer_vietoris_edge_map(graph)
    return Report(0 if mv.injective else 1, {**mv.to_json(), "h1_dim": homology.mv_h1_dim(graph)})


def _second(cfg):
    if len(cfg.inputs) != 2:
        raise ProppError("this command takes two --input files")
    return read_graph(cfg.inputs[1], cfg.prime)[0]


def cmd_dominates(cfg, graph, doc):
    rep = jsj.dominates(graph, _second(cfg), cfg.budget)
    return Report(rep.exit_code, rep.to_json())


def cmd_deformation(cfg, graph, doc):
    verdict = jsj.same_deformation_space(graph, _second(cfg), cfg.budget)
    return Report(verdict.exit_code, verdict.to_json())


def cmd_jsj_certify(cfg, graph, doc):
    cert = jsj.jsj_certify_finite(graph)
    cert["universally_elliptic"] = jsj.universally_elliptic_edges(graph)
    return Report(0 if cert["certified"] else 1, cert)


def cmd_audit(cfg, graph, doc):
    acyl = None
    k = cfg.options.get("k")
    if k is not None:
        acyl = (k, bass_serre.check_acylindrical(graph, k, max(cfg.radius, k + 2)))
    rep = jsj.accessibility_audit(graph, doc.get("claims"), acyl)
    return Report(rep.exit_code, rep.to_json())


def cmd_moves(cfg, graph, doc):
    kind = cfg.options["move"]
    if kind == "reduce":
        side = cfg.options.get("side")
        out = jsj.reduction_move(graph, cfg.options["edge"], side)
    else:
        v = cfg.options["vertex"]
        inner, _ = read_graph(cfg.options["inner"], cfg.prime)
        out = jsj.expansion_move(graph, v, inner, _attach_map(graph, v, cfg.options.get("attach")))
    return Report(0, {"move": kind, "graph": graph_to_dict(out)}, graph_to_dot(out))


def cmd_sample(cfg, graph, doc):
    rng = random.Random(cfg.seed)
    p = cfg.prime or 2
    if cfg.options.get("family") == "free":
        g = random_free_graph(rng, p)
    else:
        g = random_finite_graph(rng, p)
    return Report(0, graph_to_dict(g), graph_to_dot(g))


COMMANDS = {
    "validate": cmd_validate,
    "present": cmd_present,
    "reduce": cmd_reduce,
    "collapse": cmd_collapse,
    "refine": cmd_refine,
    "grushko": cmd_grushko,
    "rank": cmd_rank,
    "ball": cmd_ball,
    "geodesic": cmd_geodesic,
    "fixed": cmd_fixed,
    "acyl": cmd_acyl,
    "cylinders": cmd_cylinders,
    "aut-shape": cmd_aut_shape,
    "free-split": cmd_free_split,
    "mv": cmd_mv,
    "dominates": cmd_dominates,
    "deformation": cmd_deformation,
    "jsj-certify": cmd_jsj_certify,
    "audit": cmd_audit,
    "moves": cmd_moves,
    "sample": cmd_sample,
}


def _names(text):
    if not text:
        return []
    if isinstance(text, (list, tuple)):
        return list(text)
    return [x for x in text.split(",") if x]


# --- output --------------------------------------------------------------------

def to_text(data, indent=0):
    """Plain `key: value` rendering of a JSON-like report."""
    pad = "  " * indent
    lines = []
    if isinstance(data, dict):
        for k in sorted(data):
            v = data[k]
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(to_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(data, list):
        for item in data:
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}-")
                lines.append(to_text(item, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(data)}")
    return "\n".join(lines)


def _scalar(v):
    if isinstance(v, tuple):
        return format_pairs(v)
    if v is None:
        return "-"
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    return str(v)


def render(report, fmt):
    if fmt == "dot":
        if report.dot is None:
            raise ProppError("this command has no DOT output")
        return report.dot
    if fmt == "text":
        return to_text(report.data) + "\n"
    return dumps(report.data)


def run(cfg):
    """Execute a configured command; returns (exit code, output text)."""
    if cfg.command == "sample":
        graph, doc = None, {}
    else:
        if not cfg.inputs:
            raise ProppError("no input file")
        graph, doc = read_graph(cfg.inputs[0], cfg.prime)
    report = COMMANDS[cfg.command](cfg, graph, doc)
    return report.code, render(report, cfg.fmt), report


# --- argument parsing ----------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", dest="extra_inputs", action="append", default=[],
                        help="input file (repeat for two-graph commands)")
    common.add_argument("--format", choices=("json", "text", "dot"), default="json")
    common.add_argument("--dot", metavar="PATH", help="also write DOT output to PATH")
    common.add_argument("--prime", type=int)
    common.add_argument("--radius", type=int, default=2)
    common.add_argument("--budget", type=int, default=6)
    common.add_argument("--seed", type=int, default=0)

    parser = _Parser(prog="propp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        _add_options(sp, name)
        sp.add_argument("input", nargs="?", help="graph of groups JSON file")
    return parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _add_options(sp, name):
    if name == "present":
        sp.add_argument("--tree", help="comma-separated spanning-tree edges")
    elif name == "collapse":
        sp.add_argument("--edges", default="")
        sp.add_argument("--vertices", default="")
        sp.add_argument("--name")
    elif name in ("refine", "moves"):
        if name == "moves":
            sp.add_argument("move", choices=("reduce", "expand"))
            sp.add_argument("--edge")
            sp.add_argument("--side", type=int, choices=(0, 1))
        sp.add_argument("--vertex")
        sp.add_argument("--inner", help="JSON file of the inner graph")
        sp.add_argument("--attach", help='JSON map, e.g. {"e": "u"} or {"e": ["u", "a b"]}')
    elif name == "geodesic":
        sp.add_argument("--from", dest="source", default="0")
        sp.add_argument("--to", dest="target", default="0")
    elif name == "fixed":
        sp.add_argument("--element", action="append", help="group word (repeatable)")
    elif name in ("acyl", "audit"):
        sp.add_argument("--k", type=int, default=1 if name == "acyl" else None)
    elif name == "cylinders":
        sp.add_argument("--relation", choices=("equality", "commensurability"), default="equality")
        sp.add_argument("--reduced", action="store_true", help="DOT output shows the reduced quotient")
    elif name == "aut-shape":
        sp.add_argument("--nonrigid", action="append", choices=("1", "2"))
        sp.add_argument("--swap", action="store_true")
        sp.add_argument("--malnormal", choices=("auto", "yes", "no"), default="auto")
    elif name == "free-split":
        sp.add_argument("shape", choices=("amalgam", "hnn", "star", "tree"))
        sp.add_argument("--center")
    elif name == "sample":
        sp.add_argument("--family", choices=("finite", "free"), default="finite")


_GLOBAL = {"command", "input", "extra_inputs", "format", "dot", "prime", "radius", "budget", "seed"}


def config_from_args(args):
    inputs = ([args.input] if args.input else []) + args.extra_inputs
    options = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
    return RunConfig(args.command, inputs, args.prime, args.radius, args.budget, args.format, args.seed, options)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        code, text, report = run(cfg)
        if args.dot:
            if report.dot is None:
                raise ProppError("this command has no DOT output")
            Path(args.dot).write_text(report.dot)
    except (ProppError, OSError, KeyError, json.JSONDecodeError) as exc:
        name = type(exc).__name__
        sys.stderr.write(dumps({"error": name, "message": str(exc)}) if args.format != "text"
                         else f"error: {name}: {exc}\n")
        return 3
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
