"""Whitelist/blacklist normalization shared by both learner families.

A whitelisted arc is guaranteed present, a blacklisted one guaranteed
absent. Listing both orientations changes the meaning: whitelisting both
forces the edge but leaves the orientation to the learner, blacklisting
both removes the pair entirely (the undirected arc included). A
single-orientation whitelist also bans the reverse arc and the undirected
form; a single-orientation blacklist bans that arc and the undirected
form but leaves the reverse available. An arc on both lists in the same
orientation is treated as whitelisted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import Graph, GraphError, topological_order


class PriorError(ValueError):
    """Inconsistent or impossible prior constraints."""


@dataclass(frozen=True)
class ArcList:
    """Directed (from, to) rows over a declared node universe."""

    rows: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        rows = tuple((str(u), str(v)) for u, v in self.rows)
        if len(set(rows)) != len(rows):
            raise PriorError("duplicate rows in arc list")
        object.__setattr__(self, "rows", rows)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class PriorKnowledge:
    whitelist: ArcList = field(default_factory=ArcList)
    blacklist: ArcList = field(default_factory=ArcList)

    def __post_init__(self):
        if not isinstance(self.whitelist, ArcList):
            object.__setattr__(self, "whitelist", ArcList(tuple(self.whitelist)))
        if not isinstance(self.blacklist, ArcList):
            object.__setattr__(self, "blacklist", ArcList(tuple(self.blacklist)))


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Constraints:
    """Normalized prior knowledge, ready for the learners."""

    nodes: tuple[str, ...]
    forced_arcs: frozenset  # arcs that must appear, in this orientation
    required_edges: frozenset  # pairs that must appear, orientation free
    forbidden_arcs: frozenset  # orientations that may never appear
    forbidden_edges: frozenset  # pairs that may not appear at all
    forbidden_undirected: frozenset  # pairs that may not stay undirected

    def arc_allowed(self, u: str, v: str) -> bool:
        return ((u, v) not in self.forbidden_arcs
                and _pair(u, v) not in self.forbidden_edges)

    def undirected_allowed(self, a: str, b: str) -> bool:
        p = _pair(a, b)
        return p not in self.forbidden_edges and p not in self.forbidden_undirected

    def edge_allowed(self, a: str, b: str) -> bool:
        return _pair(a, b) not in self.forbidden_edges

    def is_empty(self) -> bool:
        return not (self.forced_arcs or self.required_edges
                    or self.forbidden_arcs or self.forbidden_edges)

    def forced_adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.forced_arcs:
            adj[u].add(v)
            adj[v].add(u)
        for a, b in self.required_edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def normalize_priors(priors: PriorKnowledge | None, nodes) -> Constraints:
    """Resolve whitelist/blacklist interactions into explicit constraints.

    Raises PriorError when endpoints are unknown, an arc is a self-loop,
    or the forced arcs alone already contain a directed cycle.
    """
    nodes = tuple(nodes)
    node_set = set(nodes)
    if priors is None:
        priors = PriorKnowledge()
    wl = set()
    bl = set()
    for name, rows, target in (("whitelist", priors.whitelist, wl),
                               ("blacklist", priors.blacklist, bl)):
        for u, v in rows:
            if u not in node_set or v not in node_set:
                raise PriorError(f"{name} endpoint not among the nodes: {u!r} -> {v!r}")
            if u == v:
                raise PriorError(f"{name} contains a self-loop on {u!r}")
            target.add((u, v))
    bl -= wl  # an arc whitelisted and blacklisted at once is whitelisted

    required_edges = {_pair(u, v) for u, v in wl if (v, u) in wl}
    forced_arcs = {(u, v) for u, v in wl if (v, u) not in wl}
    forbidden_arcs = set(bl) | {(v, u) for u, v in forced_arcs}
    forbidden_edges = {_pair(u, v) for u, v in bl
                       if (v, u) in bl and _pair(u, v) not in required_edges}
    forbidden_edges -= {_pair(u, v) for u, v in forced_arcs}
    forbidden_undirected = ({_pair(u, v) for u, v in forced_arcs}
                            | {_pair(u, v) for u, v in bl}
                            | forbidden_edges)
    forbidden_undirected -= required_edges

    for u, v in forced_arcs:
        if _pair(u, v) in forbidden_edges:
            raise PriorError(f"arc {u} -> {v} is both forced and fully blacklisted")

    probe = Graph(nodes, forced_arcs) if _acyclic_or_none(nodes, forced_arcs) else None
    if probe is None:
        raise PriorError("the whitelist forces a cycle")
    return Constraints(nodes, frozenset(forced_arcs), frozenset(required_edges),
                       frozenset(forbidden_arcs), frozenset(forbidden_edges),
                       frozenset(forbidden_undirected))


def _acyclic_or_none(nodes, arcs) -> bool:
    try:
        g = Graph(nodes, arcs)
    except GraphError:
        return False
    return topological_order(g) is not None
