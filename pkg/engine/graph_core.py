"""
Graph core: the input network, its label sets, and the sink-augmented view.

Node ids are dense (0..n-1) and assigned in order of first appearance in the
edge list. Every neighbor list is sorted by id, so anything iterating the
graph sees one fixed order.

The augmented view adds a grounded universal sink z (id n) wired to every
node except the current source, with conductance alpha * strength(v).
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import networkx as nx
import numpy as np

from errors import GraphDomainError, GraphParseError, LabelReferenceError

logger = logging.getLogger(__name__)

ByteSource = Union[BinaryIO, bytes]


class Graph:
    """Undirected weighted graph with a bidirectional name table."""

    def __init__(
        self,
        names: Sequence[str],
        edges: Iterable[tuple[int, int, float]],
        skipped_self_loops: int = 0,
    ):
        self.names: list[str] = [str(name) for name in names]
        self.ids: dict[str, int] = {name: i for i, name in enumerate(self.names)}
        if len(self.ids) != len(self.names):
            raise GraphDomainError("Node names must be unique")

        n = len(self.names)
        self.nx_graph = nx.Graph()
        self.nx_graph.add_nodes_from(range(n))
        # Kept edges in insertion order, first-seen orientation; drives write_edge_list
        self.edge_order: list[tuple[int, int, float]] = []

        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphDomainError(f"Edge ({u}, {v}) references a node outside 0..{n - 1}")
            if u == v:
                raise GraphDomainError(f"Self-loop on node {u}")
            w = float(w)
            if not math.isfinite(w) or w <= 0:
                raise GraphDomainError(f"Conductance of edge ({u}, {v}) must be positive, got {w}")
            if self.nx_graph.has_edge(u, v):
                continue
            self.nx_graph.add_edge(u, v, weight=w)
            self.edge_order.append((u, v, w))

        self.skipped_self_loops = skipped_self_loops
        self._adjacency: tuple[tuple[tuple[int, float], ...], ...] = tuple(
            tuple(sorted((nbr, data["weight"]) for nbr, data in self.nx_graph.adj[v].items()))
            for v in range(n)
        )
        self.strength = np.array([sum(w for _, w in adj) for adj in self._adjacency], dtype=float)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Union[tuple[int, int], tuple[int, int, float]]],
        n: Optional[int] = None,
    ) -> "Graph":
        """Build from integer edges; names are the ids as strings. Pass n to keep isolated nodes."""
        triples = [(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges]
        if n is None:
            n = 1 + max((max(u, v) for u, v, _ in triples), default=-1)
        return cls([str(i) for i in range(n)], triples)

    @classmethod
    def from_networkx(cls, g: nx.Graph, weight: str = "weight") -> "Graph":
        nodes = sorted(g.nodes())
        index = {node: i for i, node in enumerate(nodes)}
        self_loops = nx.number_of_selfloops(g)
        if self_loops:
            logger.warning("Skipped %d self-loop edge(s)", self_loops)
        edges = sorted(
            (min(index[a], index[b]), max(index[a], index[b]), float(data.get(weight, 1.0)))
            for a, b, data in g.edges(data=True)
            if a != b
        )
        return cls([str(node) for node in nodes], edges, skipped_self_loops=self_loops)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return self.nx_graph.number_of_edges()

    def neighbors(self, v: int) -> tuple[tuple[int, float], ...]:
        return self._adjacency[v]

    def conductance(self, s: int, t: int) -> float:
        try:
            return self.nx_graph.adj[s][t]["weight"]
        except KeyError:
            raise GraphDomainError(f"({s}, {t}) is not an edge") from None

    def has_edge(self, s: int, t: int) -> bool:
        return self.nx_graph.has_edge(s, t)

    def is_weighted(self) -> bool:
        return any(w != 1.0 for _, _, w in self.edge_order)


@dataclass(frozen=True)
class AugmentedGraph:
    """G plus the universal sink z, seen from one source node."""
    base: Graph
    source: int
    alpha: float
    sink_conductance: np.ndarray

    @property
    def sink_id(self) -> int:
        return self.base.n


@dataclass
class LabelSet:
    """Per-node label-id sets plus the label-name table."""
    labels: list[frozenset[int]]
    label_names: list[str]

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def label_count(self) -> int:
        return len(self.label_names)

    def labeled_nodes(self) -> list[int]:
        return [v for v, labels in enumerate(self.labels) if labels]

    def indicator(self) -> np.ndarray:
        out = np.zeros((self.n, self.label_count), dtype=np.int8)
        for v, labels in enumerate(self.labels):
            for label in labels:
                out[v, label] = 1
        return out


def _read_text(source: ByteSource) -> str:
    raw = source if isinstance(source, bytes) else source.read()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line_number = raw[: exc.start].count(b"\n") + 1
        raise GraphParseError(f"invalid UTF-8 byte at offset {exc.start}", line_number) from None


def load_edge_list(source: ByteSource, weighted: bool = False) -> Graph:
    """Parse `u v` (or `u v w` when weighted) lines into a symmetric Graph."""
    names: list[str] = []
    ids: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    self_loops = 0
    expected = 3 if weighted else 2

    def node_id(name: str) -> int:
        if name not in ids:
            ids[name] = len(names)
            names.append(name)
        return ids[name]

    for line_number, line in enumerate(_read_text(source).splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != expected:
            raise GraphParseError(
                f"expected {expected} fields ({'u v w' if weighted else 'u v'}), got {len(tokens)}",
                line_number,
            )
        w = 1.0
        if weighted:
            try:
                w = float(tokens[2])
            except ValueError:
                raise GraphParseError(f"weight {tokens[2]!r} is not a number", line_number) from None
            if not math.isfinite(w) or w <= 0:
                raise GraphDomainError(f"line {line_number}: conductance must be positive, got {tokens[2]}")
        if tokens[0] == tokens[1]:
            self_loops += 1
            continue
        edges.append((node_id(tokens[0]), node_id(tokens[1]), w))

    if self_loops:
        logger.warning("Skipped %d self-loop line(s)", self_loops)
    graph = Graph(names, edges, skipped_self_loops=self_loops)
    logger.debug("Loaded graph with %d nodes and %d edges", graph.n, graph.m)
    return graph


def read_edge_list(path: Union[str, Path], weighted: bool = False) -> Graph:
    with open(path, "rb") as f:
        return load_edge_list(f, weighted=weighted)


def write_edge_list(g: Graph, weighted: Optional[bool] = None) -> str:
    if weighted is None:
        weighted = g.is_weighted()
    out = io.StringIO()
    for u, v, w in g.edge_order:
        if weighted:
            out.write(f"{g.names[u]} {g.names[v]} {w!r}\n")
        else:
            out.write(f"{g.names[u]} {g.names[v]}\n")
    return out.getvalue()


def edge_list_sha256(g: Graph) -> str:
    """Digest of the canonical weighted edge list; ties persisted artifacts to one graph."""
    return hashlib.sha256(write_edge_list(g, weighted=True).encode("utf-8")).hexdigest()


def load_labels(source: ByteSource, node_names: Sequence[str]) -> LabelSet:
    """Parse `node label1 label2 ...` lines against an existing name table."""
    index = {name: i for i, name in enumerate(node_names)}
    label_ids: dict[str, int] = {}
    label_names: list[str] = []
    per_node: list[set[int]] = [set() for _ in node_names]

    for line_number, line in enumerate(_read_text(source).splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        node, *labels = stripped.split()
        if node not in index:
            raise LabelReferenceError(f"line {line_number}: node {node!r} is not in the graph")
        for label in labels:
            if label not in label_ids:
                label_ids[label] = len(label_names)
                label_names.append(label)
            per_node[index[node]].add(label_ids[label])

    return LabelSet(labels=[frozenset(s) for s in per_node], label_names=label_names)


def read_labels(path: Union[str, Path], node_names: Sequence[str]) -> LabelSet:
    with open(path, "rb") as f:
        return load_labels(f, node_names)


def augment(g: Graph, source: int, alpha: float = 1.0) -> AugmentedGraph:
    if not 0 <= source < g.n:
        raise GraphDomainError(f"Source {source} is outside 0..{g.n - 1}")
    if not alpha > 0:
        raise GraphDomainError(f"alpha must be positive, got {alpha}")
    # Summed over N(v): the form that reproduces the worked voltage example
    sink = alpha * g.strength
    sink[source] = 0.0
    sink.setflags(write=False)
    return AugmentedGraph(base=g, source=source, alpha=alpha, sink_conductance=sink)


def weighted_degree(ag: AugmentedGraph, v: int) -> float:
    """Sum of base conductances at v plus its sink edge (the source has none)."""
    if not 0 <= v < ag.base.n:
        raise GraphDomainError(f"Node {v} is outside 0..{ag.base.n - 1}")
    return float(ag.base.strength[v] + ag.sink_conductance[v])
