"""Graphs of finite p-groups and free groups: presentations, trees, splittings."""
from .errors import ProppError
from .verdict import Status, Verdict
from .groups import FiniteGroup, FreeGroup, GroupHom, Subgroup
from .gog import Attachment, Edge, GraphOfGroups, Presentation

__all__ = [
    "Attachment",
    "Edge",
    "FiniteGroup",
    "FreeGroup",
    "GraphOfGroups",
    "GroupHom",
    "Presentation",
    "ProppError",
    "Status",
    "Subgroup",
    "Verdict",
]
