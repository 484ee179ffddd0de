"""
SkipGram with negative sampling over refined neighborhoods.

Each (u, w) pair with w in N_R(u) is one positive example. Scores are
sigmoid(context[w] . input[u]); the published embedding is the input matrix.
All randomness flows from numpy Generators seeded by (seed, stream index), and
updates run strictly in sequence, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from errors import StructuralError, TrainingAbortedError
from models import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingMatrix:
    input_vectors: np.ndarray
    context_vectors: np.ndarray
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def d(self) -> int:
        return self.input_vectors.shape[1]


def _members(neighborhood) -> Sequence[int]:
    return getattr(neighborhood, "members", neighborhood)


def build_pairs(neighborhoods: Mapping[int, object]) -> np.ndarray:
    """(u, w) rows: u ascending, w in first-inclusion order, u itself excluded."""
    pairs: list[tuple[int, int]] = []
    empty = 0
    for u in sorted(neighborhoods):
        before = len(pairs)
        pairs.extend((u, w) for w in _members(neighborhoods[u]) if w != u)
        if len(pairs) == before:
            empty += 1
    if empty:
        logger.warning("%d node(s) have no context and contribute no training pairs", empty)
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def positive_score(u: int, w: int, emb: EmbeddingMatrix) -> float:
    return float(expit(emb.context_vectors[w] @ emb.input_vectors[u]))


def noise_distribution(pairs: np.ndarray, n: int, exponent: float = 0.75) -> np.ndarray:
    """Cumulative noise table: pair-list frequency of each node raised to `exponent`."""
    counts = np.bincount(pairs.ravel(), minlength=n).astype(float)
    weights = np.where(counts > 0, counts ** exponent, 0.0)
    total = weights.sum()
    if total == 0:
        weights = np.ones(n)
        total = float(n)
    cdf = np.cumsum(weights) / total
    cdf[-1] = 1.0
    return cdf


def draw_negatives(
    rng: np.random.Generator,
    cdf: np.ndarray,
    k: int,
    exclude: Optional[int] = None,
) -> np.ndarray:
    """k noise draws; draws equal to `exclude` are redrawn, or dropped if it holds all the mass."""
    picks = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), len(cdf) - 1)
    if exclude is None:
        return picks
    mass = cdf[exclude] - (cdf[exclude - 1] if exclude > 0 else 0.0)
    if mass >= 1.0 - 1e-12:
        return picks[:0]
    clash = picks == exclude
    while clash.any():
        redrawn = np.searchsorted(cdf, rng.random(int(clash.sum())), side="right")
        picks[clash] = np.minimum(redrawn, len(cdf) - 1)
        clash = picks == exclude
    return picks


def negative_sampling_gradients(
    h: np.ndarray,
    context_rows: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Loss and gradients for one input vector against positive/negative context rows.

    L = sum_j log(1 + exp(-y_j s_j)) with s_j = context_j . h and y_j = +1 for
    the positive row and -1 for negatives. Returns (L, dL/dh, dL/dcontext).
    """
    scores = context_rows @ h
    signs = np.where(labels > 0, 1.0, -1.0)
    loss = float(np.logaddexp(0.0, -signs * scores).sum())
    slope = expit(scores) - labels
    return loss, slope @ context_rows, np.outer(slope, h)


def sgd_step(
    pair: tuple[int, int],
    emb: EmbeddingMatrix,
    cfg: TrainConfig,
    rng: np.random.Generator,
    cdf: np.ndarray,
    learning_rate: Optional[float] = None,
) -> float:
    """One positive and `negatives_k` sampled negative updates; returns the pair loss."""
    u, w = int(pair[0]), int(pair[1])
    rate = cfg.learning_rate if learning_rate is None else learning_rate

    negatives = draw_negatives(rng, cdf, cfg.negatives_k, exclude=w)
    rows = np.concatenate(([w], negatives)).astype(np.int64)
    labels = np.zeros(len(rows))
    labels[0] = 1.0

    h = emb.input_vectors[u].copy()
    loss, grad_h, grad_context = negative_sampling_gradients(h, emb.context_vectors[rows], labels)
    if not (np.isfinite(loss) and np.isfinite(grad_h).all() and np.isfinite(grad_context).all()):
        raise TrainingAbortedError(f"Non-finite gradient at pair ({u}, {w})")

    emb.input_vectors[u] -= rate * grad_h
    np.add.at(emb.context_vectors, rows, -rate * grad_context)
    return loss


def initial_embedding(n: int, cfg: TrainConfig) -> EmbeddingMatrix:
    rng = np.random.default_rng([cfg.seed, 0])
    bound = 0.5 / cfg.dimensions
    return EmbeddingMatrix(
        input_vectors=rng.uniform(-bound, bound, size=(n, cfg.dimensions)),
        context_vectors=np.zeros((n, cfg.dimensions)),
    )


def train(neighborhoods: Mapping[int, object], cfg: TrainConfig, n: Optional[int] = None) -> EmbeddingMatrix:
    if n is None:
        n = 1 + max(
            (max([u, *_members(nb)]) for u, nb in neighborhoods.items()),
            default=-1,
        )
    pairs = build_pairs(neighborhoods)
    emb = initial_embedding(n, cfg)
    if cfg.epochs == 0 or len(pairs) == 0:
        return emb

    cdf = noise_distribution(pairs, n, cfg.noise_exponent)
    total_steps = cfg.epochs * len(pairs)
    floor = min(cfg.min_learning_rate, cfg.learning_rate)
    step = 0

    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, epoch + 1])
        order = rng.permutation(len(pairs)) if cfg.shuffle else np.arange(len(pairs))
        epoch_loss = 0.0
        for index in order:
            rate = cfg.learning_rate - (cfg.learning_rate - floor) * step / total_steps
            epoch_loss += sgd_step(pairs[index], emb, cfg, rng, cdf, learning_rate=rate)
            step += 1
        emb.epoch_losses.append(epoch_loss / len(pairs))
        logger.info("Epoch %d/%d: mean loss %.6f over %d pairs",
                    epoch + 1, cfg.epochs, emb.epoch_losses[-1], len(pairs))

    return emb


def write_embeddings(vectors: Union[EmbeddingMatrix, np.ndarray], names: Sequence[str]) -> str:
    if isinstance(vectors, EmbeddingMatrix):
        vectors = vectors.input_vectors
    n, d = vectors.shape
    if n != len(names):
        raise StructuralError(f"{n} vectors but {len(names)} node names")
    out = io.StringIO()
    out.write(f"{n} {d}\n")
    for name, row in zip(names, vectors):
        out.write(name + "".join(f" {x:.9g}" for x in row) + "\n")
    return out.getvalue()


def parse_embeddings(text: str) -> tuple[list[str], np.ndarray]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise StructuralError("embedding file is empty")
    try:
        n, d = (int(x) for x in lines[0].split())
    except ValueError:
        raise StructuralError(f"bad embedding header {lines[0]!r}") from None
    if len(lines) - 1 != n:
        raise StructuralError(f"header says {n} nodes, found {len(lines) - 1} rows")

    names: list[str] = []
    vectors = np.zeros((n, d))
    for i, line in enumerate(lines[1:]):
        name, *values = line.split()
        if len(values) != d:
            raise StructuralError(f"row for {name!r} has {len(values)} values, expected {d}")
        names.append(name)
        try:
            vectors[i] = [float(x) for x in values]
        except ValueError:
            raise StructuralError(f"row for {name!r} has a non-numeric value") from None
    return names, vectors


def read_embeddings(path: Union[str, Path]) -> tuple[list[str], np.ndarray]:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StructuralError(f"{path}: invalid UTF-8 byte at offset {exc.start}") from None
    return parse_embeddings(text)
