"""Geographic clustering of topic-graph nodes into communities.

DBSCAN runs over great-circle distances and is fully deterministic for a
given input order: border points join the first cluster that claims them
in scan order, and no randomness is involved. Every cluster of a topic
graph becomes one community graph. Cluster validity (Davies-Bouldin,
Calinski-Harabasz, Silhouette) is computed with the same haversine
metric; centroids are spherical (3-D vector mean) to stay correct across
the antimeridian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geoloc import GeoPoint, GeoSource, haversine, pairwise_km
from .socialgraph import SocialGraph
from .topics import TopicGraph

__all__ = [
    "GeoCluster",
    "CommunityGraph",
    "TooFewClusters",
    "dbscan",
    "community_graphs",
    "spherical_centroid",
    "davies_bouldin",
    "calinski_harabasz",
    "silhouette",
]


class TooFewClusters(ValueError):
    pass


@dataclass(frozen=True)
class GeoCluster:
    cluster_id: int
    core_points: tuple[GeoPoint, ...]
    members: tuple[int, ...]  # indices into the clustered point list


_UNVISITED = -2
_NOISE = -1


def dbscan(
    points: Sequence[GeoPoint], eps_km: float, min_pts: int
) -> tuple[list[GeoCluster], tuple[int, ...]]:
    """Density clustering with the haversine metric.

    A point is core when at least min_pts points (itself included) lie
    within eps_km. Expansion processes seeds in index order, so the
    partition depends only on input order.
    """
    if eps_km <= 0:
        raise ValueError("eps_km must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    for p in points:
        if not p.resolved:
            raise ValueError("dbscan input must be resolved points")

    n = len(points)
    if n == 0:
        return [], ()
    dist = pairwise_km([p.lat for p in points], [p.lon for p in points])
    neighbor_lists = [np.flatnonzero(dist[i] <= eps_km) for i in range(n)]

    labels = np.full(n, _UNVISITED, dtype=int)
    core_flags = [len(neighbor_lists[i]) >= min_pts for i in range(n)]
    clusters: list[list[int]] = []
    cores: list[list[int]] = []

    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        if not core_flags[i]:
            labels[i] = _NOISE
            continue
        cid = len(clusters)
        clusters.append([])
        cores.append([])
        labels[i] = cid
        seeds = list(neighbor_lists[i])
        pos = 0
        clusters[cid].append(i)
        cores[cid].append(i)
        while pos < len(seeds):
            q = int(seeds[pos])
            pos += 1
            if labels[q] == _NOISE:  # border point claimed by this cluster
                labels[q] = cid
                clusters[cid].append(q)
                continue
            if labels[q] != _UNVISITED:
                continue
            labels[q] = cid
            clusters[cid].append(q)
            if core_flags[q]:
                cores[cid].append(q)
                seeds.extend(neighbor_lists[q])

    out = []
    for cid, members in enumerate(clusters):
        out.append(
            GeoCluster(
                cluster_id=cid,
                core_points=tuple(points[i] for i in sorted(cores[cid])),
                members=tuple(sorted(members)),
            )
        )
    noise = tuple(int(i) for i in np.flatnonzero(labels == _NOISE))
    return out, noise


@dataclass(frozen=True)
class CommunityGraph:
    topic: int
    area_id: int
    graph: SocialGraph
    core_points: tuple[GeoPoint, ...]
    centroid: GeoPoint
    radius_km: float

    @property
    def member_ids(self) -> tuple[str, ...]:
        return self.graph.node_ids


def community_graphs(
    topic_graph: TopicGraph, eps_km: float, min_pts: int
) -> list[CommunityGraph]:
    """One community per density cluster of the topic graph's resolved
    locations; noise nodes produce nothing. Unresolved nodes never enter
    the clustering."""
    g = topic_graph.graph
    ids = [i for i in g.node_ids if g.nodes[i].loc.resolved]
    points = [g.nodes[i].loc for i in ids]
    clusters, _noise = dbscan(points, eps_km, min_pts)
    out = []
    for cluster in clusters:
        member_ids = [ids[i] for i in cluster.members]
        sub = g.subgraph(member_ids)
        locs = [g.nodes[i].loc for i in member_ids]
        centroid = spherical_centroid(locs)
        radius = max(haversine(centroid, p) for p in locs)
        out.append(
            CommunityGraph(
                topic=topic_graph.topic,
                area_id=cluster.cluster_id,
                graph=sub,
                core_points=cluster.core_points,
                centroid=centroid,
                radius_km=radius,
            )
        )
    return out


def spherical_centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    """Normalized 3-D vector mean; immune to longitude wrap-around."""
    if not points:
        raise ValueError("centroid of nothing")
    first = points[0]
    if all(p.lat == first.lat and p.lon == first.lon for p in points):
        return GeoPoint(first.lat, first.lon, GeoSource.PLACE_CENTROID)
    x = y = z = 0.0
    for p in points:
        phi, lam = math.radians(p.lat), math.radians(p.lon)
        x += math.cos(phi) * math.cos(lam)
        y += math.cos(phi) * math.sin(lam)
        z += math.sin(phi)
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0.0:  # pathological: antipodal cancellation
        return points[0]
    x, y, z = x / norm, y / norm, z / norm
    return GeoPoint(math.degrees(math.asin(z)), math.degrees(math.atan2(y, x)),
                    GeoSource.PLACE_CENTROID)


def _check_clusters(clusters: Sequence[Sequence[GeoPoint]]) -> None:
    if len(clusters) < 2:
        raise TooFewClusters("need at least 2 clusters")
    for c in clusters:
        if len(c) < 1:
            raise TooFewClusters("empty cluster")


def davies_bouldin(clusters: Sequence[Sequence[GeoPoint]]) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j) ratio;
    s is mean member distance to the spherical centroid. Lower is
    better; 0 for coincident-point clusters."""
    _check_clusters(clusters)
    cents = [spherical_centroid(c) for c in clusters]
    scatter = [
        sum(haversine(p, cents[i]) for p in c) / len(c)
        for i, c in enumerate(clusters)
    ]
    k = len(clusters)
    worst = []
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            d = haversine(cents[i], cents[j])
            s = scatter[i] + scatter[j]
            if d == 0.0:
                ratios.append(0.0 if s == 0.0 else math.inf)
            else:
                ratios.append(s / d)
        worst.append(max(ratios))
    return float(sum(worst) / k)


def calinski_harabasz(clusters: Sequence[Sequence[GeoPoint]]) -> float:
    """Between-cluster over within-cluster dispersion ratio (squared
    haversine distances to spherical centroids); higher is better."""
    _check_clusters(clusters)
    all_points = [p for c in clusters for p in c]
    n, k = len(all_points), len(clusters)
    global_c = spherical_centroid(all_points)
    cents = [spherical_centroid(c) for c in clusters]
    between = sum(
        len(c) * haversine(cents[i], global_c) ** 2 for i, c in enumerate(clusters)
    )
    within = sum(
        haversine(p, cents[i]) ** 2 for i, c in enumerate(clusters) for p in c
    )
    if within == 0.0:
        return math.inf
    if n == k:
        return 0.0
    return float((between / (k - 1)) / (within / (n - k)))


def silhouette(clusters: Sequence[Sequence[GeoPoint]]) -> float:
    """Mean per-point (b - a) / max(a, b) with haversine distances;
    points in singleton clusters contribute 0."""
    _check_clusters(clusters)
    scores = []
    for i, c in enumerate(clusters):
        for pi, p in enumerate(c):
            if len(c) == 1:
                scores.append(0.0)
                continue
            a = sum(haversine(p, q) for qi, q in enumerate(c) if qi != pi) / (len(c) - 1)
            b = min(
                sum(haversine(p, q) for q in other) / len(other)
                for j, other in enumerate(clusters)
                if j != i
            )
            m = max(a, b)
            scores.append(0.0 if m == 0.0 else (b - a) / m)
    return float(sum(scores) / len(scores))
