#!/usr/bin/env python3
"""
Recompute the small hand-checked distance and voltage cases.

Usage: python3 scripts/worked_examples.py
Exits 1 if any value drifts outside its tolerance.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "engine"))
from expansion import ExpandedNeighborhood, expand
from graph_core import Graph, augment
from refinement import enumerate_paths, refine, solve_voltages


def distance_example() -> list[tuple[str, float, float, float]]:
    # u=0 with unit neighbors 1, 2, 3; node 1 also reaches 4 and 5
    g = Graph.from_edges([(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)])
    ne = expand(augment(g, 0), 0, g.n)
    return [
        ("D(u, 1)", ne.distance_of(1), 0.954, 0.01),
        ("D(u, 4)", ne.distance_of(4), 2.510, 0.01),
    ]


def voltage_example() -> list[tuple[str, float, float, float]]:
    # node 1 hangs off u and has 47 more leaves: C(1, z) = 48
    g = Graph.from_edges([(0, 1)] + [(1, leaf) for leaf in range(2, 49)])
    ag = augment(g, 0)
    cs = solve_voltages(ExpandedNeighborhood(source=0, size_target=2, members=[0, 1]), ag)
    top = enumerate_paths(cs, 1)[0]
    return [
        ("C(1, z)", float(ag.sink_conductance[1]), 48.0, 0.0),
        ("V(1)", cs.voltage[1], 1 / 49, 1e-9),
        ("top path total", top.total_current, 1.96, 0.01),
    ]


def star_example() -> list[int]:
    # neighbors 1, 2, 3 of u with sink conductances 48, 24, 32
    edges = [(0, 1), (0, 2), (0, 3)]
    leaf = 4
    for hub, extra in ((1, 47), (2, 23), (3, 31)):
        for _ in range(extra):
            edges.append((hub, leaf))
            leaf += 1
    g = Graph.from_edges(edges)
    ne = ExpandedNeighborhood(source=0, size_target=4, members=[0, 1, 2, 3])
    return refine(ne, augment(g, 0), r=3).members


def main() -> int:
    failures = 0
    print(f"{'quantity':<16} {'computed':>12} {'expected':>12}")
    for name, got, want, tol in distance_example() + voltage_example():
        ok = abs(got - want) <= tol
        failures += not ok
        print(f"{name:<16} {got:>12.6f} {want:>12.6f}  {'ok' if ok else 'FAIL'}")

    members = star_example()
    ok = members == [0, 1, 3]
    failures += not ok
    print(f"{'star refine r=3':<16} {str(members):>12} {'[0, 1, 3]':>12}  {'ok' if ok else 'FAIL'}")

    print(f"\n{failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
