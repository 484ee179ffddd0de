"""
Neighborhood expansion: grows N_E(u) on a circuit-distance basis.

Hop length from s to t is log10(deg(s)^2 / C(s,t)^2), with deg taken in the
sink-augmented graph, so hops out of hubs are expensive. Distances accumulate
along paths and nodes are taken closest-first (Dijkstra), ties to the smaller
id. The sink only inflates degrees; it is never expanded.
"""

from __future__ import annotations

import heapq
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from errors import GraphDomainError
from graph_core import AugmentedGraph, Graph, augment, weighted_degree

logger = logging.getLogger(__name__)


@dataclass
class ExpandedNeighborhood:
    source: int
    size_target: int
    members: list[int] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)

    def distance_of(self, v: int) -> float:
        return self.distances[self.members.index(v)]


def _hop_length(deg: float, c: float) -> float:
    # Clamped at 0 so the expansion stays admissible on heavy edges
    return max(0.0, math.log10(deg * deg / (c * c)))


def edge_length(ag: AugmentedGraph, s: int, t: int) -> float:
    return _hop_length(weighted_degree(ag, s), ag.base.conductance(s, t))


def expand(ag: AugmentedGraph, source: int, e: int) -> ExpandedNeighborhood:
    if source != ag.source:
        raise GraphDomainError(f"Augmented graph was built for source {ag.source}, not {source}")
    if e < 1:
        raise GraphDomainError(f"Expansion size must be >= 1, got {e}")

    g = ag.base
    result = ExpandedNeighborhood(source=source, size_target=e)
    expanded: set[int] = set()
    best: dict[int, float] = {source: 0.0}
    pending: list[tuple[float, int]] = [(0.0, source)]

    while pending and len(result.members) < e:
        dist, node = heapq.heappop(pending)
        if node in expanded:
            continue
        expanded.add(node)
        result.members.append(node)
        result.distances.append(dist)
        if len(result.members) == e:
            break

        deg = weighted_degree(ag, node)
        for nbr, c in g.neighbors(node):
            if nbr in expanded:
                continue
            candidate = dist + _hop_length(deg, c)
            if candidate < best.get(nbr, math.inf):
                best[nbr] = candidate
                heapq.heappush(pending, (candidate, nbr))

    return result


def _expand_one(graph: Graph, source: int, e: int, alpha: float) -> ExpandedNeighborhood:
    return expand(augment(graph, source, alpha), source, e)


def expand_all(graph: Graph, e: int, alpha: float = 1.0, threads: int = 1) -> dict[int, ExpandedNeighborhood]:
    """One neighborhood per node; each source gets its own augmentation."""
    if e < 1:
        raise GraphDomainError(f"Expansion size must be >= 1, got {e}")
    sources = range(graph.n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _expand_one(graph, s, e, alpha), sources))
    else:
        results = [_expand_one(graph, s, e, alpha) for s in sources]
    return {ne.source: ne for ne in results}


def format_expanded(neighborhoods: dict[int, ExpandedNeighborhood], graph: Graph) -> str:
    out = io.StringIO()
    for source in sorted(neighborhoods):
        members = " ".join(graph.names[v] for v in neighborhoods[source].members)
        out.write(f"{graph.names[source]}: {members}\n")
    return out.getvalue()
