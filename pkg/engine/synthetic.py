"""Synthetic graphs with known structure, for tests, scripts and sweeps."""

from __future__ import annotations

import networkx as nx

from graph_core import Graph, LabelSet


def planted_partition(
    blocks: int = 2,
    block_size: int = 50,
    p_in: float = 0.3,
    p_out: float = 0.01,
    seed: int = 0,
) -> tuple[Graph, LabelSet]:
    """Dense blocks with sparse cross edges; each node is labeled with its block."""
    g = nx.planted_partition_graph(blocks, block_size, p_in, p_out, seed=seed)
    graph = Graph.from_networkx(g)
    labels = LabelSet(
        labels=[frozenset({v // block_size}) for v in range(graph.n)],
        label_names=[f"block{b}" for b in range(blocks)],
    )
    return graph, labels


def two_cliques(size: int = 10) -> Graph:
    """Two `size`-cliques joined by a single bridge edge."""
    return Graph.from_networkx(nx.barbell_graph(size, 0))


def random_regular(degree: int, n: int, seed: int = 0) -> Graph:
    return Graph.from_networkx(nx.random_regular_graph(degree, n, seed=seed))
