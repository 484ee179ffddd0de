"""
Evaluation: multi-label node classification, cross-run stability, and
parameter sensitivity sweeps.

Classification is one-vs-rest L2 logistic regression fitted by full-batch
gradient descent, scored with Micro-F1 pooled over all labels of a test fold.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from config import build_config
from errors import ConfigValidationError, StructuralError
from graph_core import Graph, LabelSet
from models import EvalReport, PerformanceStabilityReport, PipelineConfig, StabilityReport
from pipeline import NeighborhoodRun, build_neighborhoods, embed_graph
from skipgram import read_embeddings

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 500
GRADIENT_TOLERANCE = 1e-8
SWEEP_PARAMETERS = ("expansion_size", "refinement_size", "dimensions", "log2_dimensions")


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float
    l2_lambda: float
    iterations: int = 0

    def decision(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        return expit(self.decision(features)) >= 0.5


def micro_f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator else 0.0


def logistic_loss_and_grad(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    targets: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss plus (lambda/2)||w||^2; the bias is not penalized."""
    z = features @ weights + bias
    n = len(targets)
    loss = float(np.mean(np.logaddexp(0.0, z) - targets * z) + 0.5 * l2_lambda * weights @ weights)
    residual = expit(z) - targets
    grad_w = features.T @ residual / n + l2_lambda * weights
    grad_b = float(residual.sum() / n)
    return loss, grad_w, grad_b


def fit_logistic(features: np.ndarray, targets: np.ndarray, l2_lambda: float) -> ClassifierModel:
    n, d = features.shape
    augmented = np.hstack([features, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(augmented, 2) ** 2 / n + l2_lambda
    step = 1.0 / lipschitz

    weights = np.zeros(d)
    bias = 0.0
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        _, grad_w, grad_b = logistic_loss_and_grad(weights, bias, features, targets, l2_lambda)
        if max(np.abs(grad_w).max(initial=0.0), abs(grad_b)) <= GRADIENT_TOLERANCE:
            break
        weights = weights - step * grad_w
        bias -= step * grad_b
    return ClassifierModel(weights=weights, bias=bias, l2_lambda=l2_lambda, iterations=iterations)


def train_classifier(
    features: np.ndarray,
    labels: LabelSet,
    l2_lambda: float = 1e-4,
    folds: int = 10,
    label_fraction: float = 0.9,
    seed: int = 0,
) -> EvalReport:
    if features.shape[0] != labels.n:
        raise StructuralError(f"{features.shape[0]} feature rows but {labels.n} labeled-graph nodes")
    if folds < 2:
        raise ConfigValidationError(f"folds must be >= 2, got {folds}")

    evaluated = np.array(labels.labeled_nodes(), dtype=np.int64)
    if len(evaluated) < folds:
        raise ConfigValidationError(f"{len(evaluated)} labeled nodes cannot fill {folds} folds")

    indicator = labels.indicator()
    rng = np.random.default_rng(seed)
    parts = np.array_split(rng.permutation(evaluated), folds)
    wanted = int(round(label_fraction * len(evaluated)))

    fold_scores: list[float] = []
    no_positives = 0
    train_count = 0
    for i, test in enumerate(parts):
        pool = np.concatenate([p for j, p in enumerate(parts) if j != i])
        train_count = min(len(pool), wanted)
        train = pool[:train_count]

        tp = fp = fn = 0
        for label in range(labels.label_count):
            y_train = indicator[train, label].astype(float)
            y_test = indicator[test, label].astype(bool)
            if not y_train.any():
                no_positives += 1
                predicted = np.zeros(len(test), dtype=bool)
            else:
                model = fit_logistic(features[train], y_train, l2_lambda)
                predicted = model.predict(features[test])
            tp += int(np.sum(predicted & y_test))
            fp += int(np.sum(predicted & ~y_test))
            fn += int(np.sum(~predicted & y_test))
        fold_scores.append(micro_f1(tp, fp, fn))
        logger.debug("Fold %d: micro-F1 %.4f (tp=%d fp=%d fn=%d)", i, fold_scores[-1], tp, fp, fn)

    if no_positives:
        logger.warning("%d fold/label combination(s) had no training positives; predicted all-negative",
                       no_positives)

    return EvalReport(
        fold_scores=fold_scores,
        micro_f1=float(np.mean(fold_scores)),
        label_fraction=label_fraction,
        fold_count=folds,
        evaluated_nodes=len(evaluated),
        train_per_fold=train_count,
        labels_without_positives=no_positives,
    )


def align_rows(names: Sequence[str], vectors: np.ndarray, order: Sequence[str]) -> np.ndarray:
    """Reorder embedding rows to follow `order`; the name sets must match exactly."""
    if len(names) != len(order) or set(names) != set(order):
        missing = sorted(set(order) - set(names))[:5]
        extra = sorted(set(names) - set(order))[:5]
        raise StructuralError(f"node names differ (missing {missing}, unexpected {extra})")
    index = {name: i for i, name in enumerate(names)}
    return vectors[[index[name] for name in order]]


def compare_embeddings(
    names_a: Sequence[str],
    a: np.ndarray,
    names_b: Sequence[str],
    b: np.ndarray,
    tolerance: float = 0.0,
) -> StabilityReport:
    if a.shape != b.shape:
        raise StructuralError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    b = align_rows(names_b, b, names_a)
    if len(a):
        per_dimension = np.abs(a - b).max(axis=0)
    else:
        per_dimension = np.zeros(a.shape[1])
    global_max = float(per_dimension.max(initial=0.0))
    return StabilityReport(
        per_dimension=[float(x) for x in per_dimension],
        global_max=global_max,
        worst_dimension=int(np.argmax(per_dimension)) if global_max > 0 else None,
        tolerance=tolerance,
        passed=global_max <= tolerance,
    )


def compare_runs(
    emb_a: Union[str, Path],
    emb_b: Union[str, Path],
    tolerance: float = 0.0,
) -> StabilityReport:
    names_a, a = read_embeddings(emb_a)
    names_b, b = read_embeddings(emb_b)
    return compare_embeddings(names_a, a, names_b, b, tolerance)


def performance_stability(
    embedding_files: Sequence[Union[str, Path]],
    labels: LabelSet,
    node_names: Sequence[str],
    l2_lambda: float = 1e-4,
    folds: int = 10,
    label_fraction: float = 0.9,
    seed: int = 0,
) -> PerformanceStabilityReport:
    """Micro-F1 of each run under one fixed fold partition, plus the max-min spread."""
    scores = []
    for path in embedding_files:
        names, vectors = read_embeddings(path)
        features = align_rows(names, vectors, node_names)
        report = train_classifier(features, labels, l2_lambda, folds, label_fraction, seed)
        scores.append(report.micro_f1)
    return PerformanceStabilityReport(run_scores=scores, spread=max(scores) - min(scores) if scores else 0.0)


def sensitivity_sweep(
    graph: Graph,
    labels: LabelSet,
    param: str,
    grid: Sequence[Union[int, float]],
    config: PipelineConfig,
) -> pd.DataFrame:
    """Full pipeline per grid point; neighborhoods are shared across points that agree on them."""
    if param not in SWEEP_PARAMETERS:
        raise ConfigValidationError(f"Cannot sweep {param!r}; choose from {', '.join(SWEEP_PARAMETERS)}")

    cache: dict[tuple, NeighborhoodRun] = {}
    rows = []
    for value in grid:
        if param == "log2_dimensions":
            update = {"dimensions": 2 ** int(value)}
        else:
            update = {param: int(value)}
        try:
            point = build_config({**config.model_dump(), **update})
        except ConfigValidationError as exc:
            logger.warning("Skipping %s=%s: %s", param, value, exc)
            continue

        started = time.perf_counter()
        key = (point.expansion_size, point.refinement_size, point.alpha, point.k_max)
        run = cache.get(key)
        if run is None:
            run = build_neighborhoods(graph, point)
            cache[key] = run
            started = time.perf_counter()
        emb = embed_graph(graph, point, run.refined)
        report = train_classifier(
            emb.input_vectors, labels, point.l2_lambda, point.folds, point.label_fraction, point.seed
        )
        seconds = run.expansion_seconds + run.refinement_seconds + (time.perf_counter() - started)
        logger.info("Sweep %s=%s: micro-F1 %.4f in %.2fs", param, value, report.micro_f1, seconds)
        rows.append({"parameter": param, "value": value, "micro_f1": report.micro_f1, "seconds": seconds})

    return pd.DataFrame(rows, columns=["parameter", "value", "micro_f1", "seconds"])
