"""
Neighborhood refinement: turns N_E(u) into N_R(u) on a current basis.

The expanded members form a circuit: induced base edges, plus an edge from
every member except u to the grounded sink z whose conductance comes from the
full graph (flow toward excluded regions is lost to ground). With V(u)=1 and
V(z)=0 the interior voltages are harmonic. Currents run strictly downhill, so
they form a DAG, and u->z paths are taken in decreasing total current (sum of
edge currents along the path) until N_R(u) holds r nodes.
"""

from __future__ import annotations

import heapq
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve, spsolve_triangular

from errors import GraphDomainError, StructuralError
from expansion import ExpandedNeighborhood
from graph_core import AugmentedGraph, Graph, augment

logger = logging.getLogger(__name__)

DIRECT_SOLVER_LIMIT = 2000
SOLVER_TOLERANCE = 1e-10
VOLTAGE_EPSILON = 1e-12
DEFAULT_K_MAX = 10_000
MAX_GAUSS_SEIDEL_SWEEPS = 10_000
SINK_NAME = "<sink>"


@dataclass
class CircuitSolution:
    source: int
    sink: int
    members: list[int]
    voltage: dict[int, float]
    # tail -> [(head, current)], downhill edges only, heads ascending
    currents: dict[int, list[tuple[int, float]]]
    isolated_members: int = 0
    residual: float = 0.0

    def outflow(self, node: int) -> float:
        return sum(c for _, c in self.currents.get(node, ()))

    def inflow(self, node: int) -> float:
        return sum(c for edges in self.currents.values() for head, c in edges if head == node)

    def source_outflow(self) -> float:
        return self.outflow(self.source)

    def sink_inflow(self) -> float:
        return self.inflow(self.sink)


@dataclass
class CircuitPath:
    nodes: tuple[int, ...]
    total_current: float


@dataclass
class RefinedNeighborhood:
    source: int
    size_target: int
    members: list[int] = field(default_factory=list)
    paths: list[CircuitPath] = field(default_factory=list)
    path_count: int = 0
    top_current: float = 0.0
    exhausted: bool = False
    circuit: Optional[CircuitSolution] = None


def _gauss_seidel(a: sp.csr_matrix, b: np.ndarray) -> tuple[np.ndarray, float]:
    lower = sp.tril(a, format="csr")
    upper = sp.triu(a, k=1, format="csr")
    norm_b = np.linalg.norm(b) or 1.0
    x = np.zeros_like(b)
    residual = np.inf
    for _ in range(MAX_GAUSS_SEIDEL_SWEEPS):
        x = spsolve_triangular(lower, b - upper @ x, lower=True)
        residual = float(np.linalg.norm(b - a @ x) / norm_b)
        if residual <= SOLVER_TOLERANCE:
            break
    else:
        logger.warning("Gauss-Seidel stopped after %d sweeps at residual %.3e", MAX_GAUSS_SEIDEL_SWEEPS, residual)
    return x, residual


def solve_voltages(
    ne: ExpandedNeighborhood,
    ag: AugmentedGraph,
    direct_limit: int = DIRECT_SOLVER_LIMIT,
) -> CircuitSolution:
    if ne.source != ag.source:
        raise GraphDomainError(f"Augmented graph was built for source {ag.source}, not {ne.source}")

    g = ag.base
    u = ne.source
    interior = ne.members[1:]
    position = {v: i for i, v in enumerate(interior)}
    in_circuit = set(ne.members)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b = np.zeros(len(interior))
    isolated = 0

    for i, s in enumerate(interior):
        diag = float(ag.sink_conductance[s])
        linked = False
        for t, c in g.neighbors(s):
            if t not in in_circuit:
                continue
            linked = True
            diag += c
            if t == u:
                b[i] += c
            else:
                rows.append(i)
                cols.append(position[t])
                vals.append(-c)
        if not linked:
            isolated += 1
            # Pinned to ground: unit diagonal, zero right-hand side
            diag = 1.0
        rows.append(i)
        cols.append(i)
        vals.append(diag)

    if isolated:
        logger.warning("Source %d: %d member(s) have no circuit edge; voltage set to 0", u, isolated)

    residual = 0.0
    x = np.zeros(0)
    if interior:
        a = sp.csr_matrix((vals, (rows, cols)), shape=(len(interior), len(interior)))
        if len(interior) <= direct_limit:
            x = np.atleast_1d(np.asarray(spsolve(a.tocsc(), b, use_umfpack=False), dtype=float))
            norm_b = np.linalg.norm(b) or 1.0
            residual = float(np.linalg.norm(b - a @ x) / norm_b)
            if residual > SOLVER_TOLERANCE:
                logger.warning("Source %d: direct solve residual %.3e above tolerance", u, residual)
        else:
            logger.debug("Source %d: %d interior nodes, using Gauss-Seidel", u, len(interior))
            x, residual = _gauss_seidel(a, b)
        x = np.clip(x, 0.0, 1.0)

    voltage: dict[int, float] = {u: 1.0}
    for s, v in zip(interior, x):
        voltage[s] = float(v)
    voltage[ag.sink_id] = 0.0

    currents: dict[int, list[tuple[int, float]]] = {v: [] for v in ne.members}
    for s in ne.members:
        for t, c in g.neighbors(s):
            if t <= s or t not in in_circuit:
                continue
            drop = voltage[s] - voltage[t]
            if drop > VOLTAGE_EPSILON:
                currents[s].append((t, c * drop))
            elif drop < -VOLTAGE_EPSILON:
                currents[t].append((s, -c * drop))
    for s in interior:
        cz = float(ag.sink_conductance[s])
        if cz > 0 and voltage[s] > VOLTAGE_EPSILON:
            currents[s].append((ag.sink_id, cz * voltage[s]))
    for edges in currents.values():
        edges.sort()

    return CircuitSolution(
        source=u,
        sink=ag.sink_id,
        members=list(ne.members),
        voltage=voltage,
        currents=currents,
        isolated_members=isolated,
        residual=residual,
    )


def iter_paths(cs: CircuitSolution) -> Iterator[CircuitPath]:
    """
    Lazily yield u->z paths by non-increasing total current, ties by node-id sequence.

    Best-first search over the current DAG with an exact "best remaining
    current" bound per node. Totals are kept as exact rationals so equal sums
    compare equal and the tie-break is honored.
    """
    exact_edges = {
        tail: [(head, Fraction(c)) for head, c in edges]
        for tail, edges in cs.currents.items()
    }

    # Ascending voltage is a reverse topological order of a downhill DAG
    best_rest: dict[int, Fraction] = {cs.sink: Fraction(0)}
    for node in sorted(cs.voltage, key=lambda v: (cs.voltage[v], v)):
        if node == cs.sink:
            continue
        options = [c + best_rest[head] for head, c in exact_edges.get(node, ()) if head in best_rest]
        if options:
            best_rest[node] = max(options)

    if cs.source not in best_rest:
        return

    frontier: list[tuple[Fraction, tuple[int, ...], Fraction]] = [
        (-best_rest[cs.source], (cs.source,), Fraction(0))
    ]
    while frontier:
        _, nodes, gained = heapq.heappop(frontier)
        tail = nodes[-1]
        if tail == cs.sink:
            yield CircuitPath(nodes=nodes, total_current=float(gained))
            continue
        for head, c in exact_edges[tail]:
            rest = best_rest.get(head)
            if rest is None:
                continue
            total = gained + c
            heapq.heappush(frontier, (-(total + rest), nodes + (head,), total))


def enumerate_paths(cs: CircuitSolution, k_max: int = DEFAULT_K_MAX) -> list[CircuitPath]:
    return list(islice(iter_paths(cs), k_max))


def refine(
    ne: ExpandedNeighborhood,
    ag: AugmentedGraph,
    r: int,
    k_max: int = DEFAULT_K_MAX,
    keep_circuit: bool = False,
) -> RefinedNeighborhood:
    if r < 1:
        raise GraphDomainError(f"Refinement size must be >= 1, got {r}")

    cs = solve_voltages(ne, ag)
    result = RefinedNeighborhood(source=ne.source, size_target=r, members=[ne.source])
    seen = {ne.source}
    paths = iter_paths(cs)

    while len(result.members) < r and len(result.paths) < k_max:
        path = next(paths, None)
        if path is None:
            break
        result.paths.append(path)
        for v in path.nodes:
            if v != cs.sink and v not in seen:
                seen.add(v)
                result.members.append(v)

    result.path_count = len(result.paths)
    result.top_current = result.paths[0].total_current if result.paths else 0.0
    result.exhausted = len(result.members) < r
    if keep_circuit:
        result.circuit = cs
    return result


def _refine_one(graph: Graph, ne: ExpandedNeighborhood, alpha: float, r: int, k_max: int,
                keep_circuit: bool) -> RefinedNeighborhood:
    return refine(ne, augment(graph, ne.source, alpha), r, k_max, keep_circuit)


def refine_all(
    graph: Graph,
    expanded: dict[int, ExpandedNeighborhood],
    alpha: float = 1.0,
    r: int = 800,
    k_max: int = DEFAULT_K_MAX,
    threads: int = 1,
    keep_circuit: bool = False,
) -> dict[int, RefinedNeighborhood]:
    sources = sorted(expanded)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda s: _refine_one(graph, expanded[s], alpha, r, k_max, keep_circuit), sources
            ))
    else:
        results = [_refine_one(graph, expanded[s], alpha, r, k_max, keep_circuit) for s in sources]

    short = sum(1 for rn in results if rn.exhausted)
    if short:
        logger.info("%d of %d refined neighborhoods ran out of paths before reaching %d nodes",
                    short, len(results), r)
    return {rn.source: rn for rn in results}


def format_refined(
    refined: dict[int, RefinedNeighborhood],
    graph: Graph,
    provenance: Optional[dict[str, str]] = None,
) -> str:
    out = io.StringIO()
    if provenance:
        out.write("# " + " ".join(f"{key}={value}" for key, value in provenance.items()) + "\n")
    for source in sorted(refined):
        rn = refined[source]
        members = " ".join(graph.names[v] for v in rn.members)
        out.write(f"{graph.names[source]}: {members} | {rn.path_count} {rn.top_current:.9g}\n")
    return out.getvalue()


def read_provenance(text: str) -> Optional[dict[str, str]]:
    """The `# key=value ...` header of a refined dump, or None when it has none."""
    first = next((line for line in text.splitlines() if line.strip()), "")
    if not first.startswith("# "):
        return None
    provenance = {}
    for token in first[2:].split():
        key, eq, value = token.partition("=")
        if not eq:
            raise StructuralError(f"refined dump header token {token!r} is not key=value")
        provenance[key] = value
    return provenance


def parse_refined(text: str, graph: Graph, r: Optional[int] = None) -> dict[int, RefinedNeighborhood]:
    """Read a refined dump back; paths are summarized only (count and top total)."""
    refined: dict[int, RefinedNeighborhood] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("# "):
            continue
        head, sep, summary = line.rpartition(" | ")
        source_name, colon, member_names = head.partition(": ")
        if not sep or not colon:
            raise StructuralError(f"refined dump line {line_number} is malformed")
        try:
            source = graph.ids[source_name]
            members = [graph.ids[name] for name in member_names.split()]
            count, top = summary.split()
            path_count, top_current = int(count), float(top)
        except (KeyError, ValueError) as exc:
            raise StructuralError(f"refined dump line {line_number}: {exc}") from None
        target = r if r is not None else len(members)
        refined[source] = RefinedNeighborhood(
            source=source,
            size_target=target,
            members=members,
            path_count=path_count,
            top_current=top_current,
            exhausted=len(members) < target,
        )
    return refined


def format_circuit(cs: CircuitSolution, graph: Graph) -> str:
    def name(v: int) -> str:
        return SINK_NAME if v == cs.sink else graph.names[v]

    out = io.StringIO()
    out.write(f"# circuit {graph.names[cs.source]}\n")
    for v in cs.members + [cs.sink]:
        out.write(f"V {name(v)} {cs.voltage[v]:.12g}\n")
    for tail in cs.members:
        for head, current in cs.currents.get(tail, ()):
            out.write(f"I {name(tail)} {name(head)} {current:.12g}\n")
    return out.getvalue()
