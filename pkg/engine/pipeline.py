"""Glue for the two neighborhood phases and training, shared by the CLI and the sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

from expansion import ExpandedNeighborhood, expand_all
from graph_core import Graph, edge_list_sha256
from models import PipelineConfig
from refinement import RefinedNeighborhood, refine_all
from skipgram import EmbeddingMatrix, train

logger = logging.getLogger(__name__)


@dataclass
class NeighborhoodRun:
    expanded: dict[int, ExpandedNeighborhood]
    refined: dict[int, RefinedNeighborhood]
    expansion_seconds: float
    refinement_seconds: float


def build_neighborhoods(graph: Graph, config: PipelineConfig, keep_circuits: bool = False) -> NeighborhoodRun:
    started = time.perf_counter()
    expanded = expand_all(graph, config.expansion_size, config.alpha, config.threads)
    expansion_seconds = time.perf_counter() - started

    started = time.perf_counter()
    refined = refine_all(
        graph,
        expanded,
        alpha=config.alpha,
        r=config.refinement_size,
        k_max=config.k_max,
        threads=config.threads,
        keep_circuit=keep_circuits,
    )
    refinement_seconds = time.perf_counter() - started

    logger.info(
        "Neighborhoods for %d nodes: expansion %.3fs, refinement %.3fs",
        graph.n, expansion_seconds, refinement_seconds,
    )
    return NeighborhoodRun(expanded, refined, expansion_seconds, refinement_seconds)


def embed_graph(
    graph: Graph,
    config: PipelineConfig,
    refined: Optional[dict[int, RefinedNeighborhood]] = None,
) -> EmbeddingMatrix:
    if refined is None:
        refined = build_neighborhoods(graph, config).refined
    return train(refined, config.train_config(), n=graph.n)


def neighborhood_provenance(graph: Graph, config: PipelineConfig) -> dict[str, str]:
    """Settings a refined dump depends on, written as its header and checked before reuse."""
    return {
        "e": str(config.expansion_size),
        "r": str(config.refinement_size),
        "alpha": repr(config.alpha),
        "k_max": str(config.k_max),
        "graph_sha256": edge_list_sha256(graph),
    }
