"""Undirected social graph over posts.

Nodes are individual records (not users) carrying cleaned content and a
location; edges come from retweet/reply references resolved by id within
the batch. Graphs are immutable values: removal and restriction return
new graphs with components recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .geoloc import GeoPoint
from .textprep import CleanDoc

__all__ = ["NodeData", "SocialGraph", "UnknownNode", "build_graph",
           "connected_components", "remove_nodes"]


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class NodeData:
    content: CleanDoc
    loc: GeoPoint


def _norm_edge(u: str, v: str) -> tuple[str, str]:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class SocialGraph:
    nodes: dict[str, NodeData]
    edges: frozenset[tuple[str, str]]
    components: tuple[frozenset[str], ...]
    dangling_refs: tuple[tuple[str, str], ...] = ()  # (node, missing target)

    def __post_init__(self):
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge ({u}, {v}) references missing node")

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.nodes))

    def neighbors(self, u: str) -> tuple[str, ...]:
        out = [b if a == u else a for a, b in self.edges if u in (a, b)]
        return tuple(sorted(out))

    def subgraph(self, keep: Iterable[str]) -> "SocialGraph":
        """Restriction to `keep`: surviving nodes plus edges with both
        endpoints inside, components recomputed."""
        keep_set = set(keep) & set(self.nodes)
        nodes = {i: self.nodes[i] for i in sorted(keep_set)}
        edges = frozenset(e for e in self.edges if e[0] in keep_set and e[1] in keep_set)
        return SocialGraph(nodes, edges, _partition(nodes, edges))

    def dump_edges(self) -> str:
        return "\n".join(f"{u}\t{v}" for u, v in sorted(self.edges))

    def dump_nodes(self) -> str:
        """Debug dump: one JSON line of attributes per node."""
        import json

        lines = []
        for node_id in self.node_ids:
            data = self.nodes[node_id]
            lines.append(json.dumps({
                "id": node_id,
                "tokens": list(data.content.tokens),
                "lat": data.loc.lat if data.loc.resolved else None,
                "lon": data.loc.lon if data.loc.resolved else None,
                "source": data.loc.source.value,
            }, sort_keys=True))
        return "\n".join(lines)


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {i: i for i in items}
        self.rank = {i: 0 for i in self.parent}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def _partition(
    nodes: Mapping[str, NodeData], edges: frozenset[tuple[str, str]]
) -> tuple[frozenset[str], ...]:
    uf = _UnionFind(nodes)
    for u, v in edges:
        uf.union(u, v)
    groups: dict[str, set[str]] = {}
    for n in nodes:
        groups.setdefault(uf.find(n), set()).add(n)
    return tuple(
        frozenset(g) for g in sorted(groups.values(), key=lambda g: min(g))
    )


def build_graph(
    records: Iterable,
    contents: Mapping[str, CleanDoc],
    locs: Mapping[str, GeoPoint],
) -> SocialGraph:
    """One node per record; an edge where one record retweets or replies
    to another in the batch. References leaving the batch are dropped and
    reported on the graph (dangling_refs), not fatal: the target may
    simply not have arrived yet."""
    recs = list(records)
    nodes: dict[str, NodeData] = {}
    for r in recs:
        if r.id not in contents or r.id not in locs:
            raise KeyError(f"record {r.id} missing content or location entry")
        nodes[r.id] = NodeData(content=contents[r.id], loc=locs[r.id])

    edges: set[tuple[str, str]] = set()
    dangling: list[tuple[str, str]] = []
    for r in recs:
        for target in (r.retweet_of, r.reply_to):
            if target is None:
                continue
            if target == r.id:
                continue  # self-reference carries no relationship
            if target in nodes:
                edges.add(_norm_edge(r.id, target))
            else:
                dangling.append((r.id, target))

    nodes = {i: nodes[i] for i in sorted(nodes)}
    fedges = frozenset(edges)
    return SocialGraph(nodes, fedges, _partition(nodes, fedges), tuple(dangling))


def connected_components(graph: SocialGraph) -> tuple[frozenset[str], ...]:
    """Partition into connected parts, ordered by smallest member id."""
    return _partition(graph.nodes, graph.edges)


def remove_nodes(graph: SocialGraph, doomed: Iterable[str]) -> SocialGraph:
    """New graph without `doomed` and their incident edges; the input is
    untouched."""
    doomed_set = set(doomed)
    unknown = doomed_set - set(graph.nodes)
    if unknown:
        raise UnknownNode(f"not in graph: {sorted(unknown)}")
    keep = set(graph.nodes) - doomed_set
    return graph.subgraph(keep)
