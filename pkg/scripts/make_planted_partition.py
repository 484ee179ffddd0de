#!/usr/bin/env python3
"""
Write a planted-partition edge list and its block labels.

Usage: python3 scripts/make_planted_partition.py OUT_DIR [blocks] [block_size] [p_in] [p_out] [seed]
Defaults: 2 blocks of 50 nodes, p_in=0.3, p_out=0.01, seed 0.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "engine"))
from graph_core import write_edge_list
from synthetic import planted_partition


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    out_dir = Path(sys.argv[1])
    blocks = int(sys.argv[2]) if len(sys.argv) > 2 else 2
    block_size = int(sys.argv[3]) if len(sys.argv) > 3 else 50
    p_in = float(sys.argv[4]) if len(sys.argv) > 4 else 0.3
    p_out = float(sys.argv[5]) if len(sys.argv) > 5 else 0.01
    seed = int(sys.argv[6]) if len(sys.argv) > 6 else 0

    graph, labels = planted_partition(blocks, block_size, p_in, p_out, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "graph.edges").write_text(write_edge_list(graph, weighted=False), encoding="utf-8")
    with open(out_dir / "labels.txt", "w", encoding="utf-8") as f:
        for v, node_labels in enumerate(labels.labels):
            names = " ".join(labels.label_names[label] for label in sorted(node_labels))
            f.write(f"{graph.names[v]} {names}\n")

    print(f"Wrote {graph.n} nodes / {graph.m} edges to {out_dir / 'graph.edges'}")
    print(f"Wrote {labels.label_count} labels to {out_dir / 'labels.txt'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
