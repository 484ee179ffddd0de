"""
Data models for the circuit-embedding pipeline.

Configs are validated pydantic models: TrainConfig for the SkipGram trainer,
PipelineConfig for a whole CLI run (it also renders/reads the flat key=value
config format). Reports are what the evaluation commands print.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


# --- Training ---

class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dimensions: int = Field(128, ge=1)
    epochs: int = Field(5, ge=0)
    learning_rate: float = Field(0.025, ge=0)      # start of the linear decay
    min_learning_rate: float = Field(1e-4, ge=0)   # floor reached on the last step
    negatives_k: int = Field(5, ge=1)
    noise_exponent: float = 0.75
    seed: int = Field(0, ge=0, lt=2**64)
    shuffle: bool = True                           # seeded per-epoch pair shuffle


# --- Pipeline ---

class PipelineConfig(BaseModel):
    """Everything a run depends on. Defaults are the full-scale settings."""
    model_config = ConfigDict(extra="forbid")

    graph_path: Optional[Path] = None
    weighted: bool = False
    alpha: float = Field(1.0, gt=0)                 # sink conductance scale
    expansion_size: int = Field(1200, ge=1)         # e = |N_E(u)|
    refinement_size: int = Field(800, ge=1)         # r = |N_R(u)|
    k_max: int = Field(10_000, ge=1)                # path cap per source
    dimensions: int = Field(128, ge=1)
    epochs: int = Field(5, ge=0)
    learning_rate: float = Field(0.025, ge=0)
    min_learning_rate: float = Field(1e-4, ge=0)
    negatives_k: int = Field(5, ge=1)
    noise_exponent: float = 0.75
    seed: int = Field(0, ge=0, lt=2**64)
    shuffle: bool = True
    threads: int = Field(1, ge=1)                   # never changes output bytes
    labels_path: Optional[Path] = None
    label_fraction: float = Field(0.9, gt=0, le=1)
    folds: int = Field(10, ge=2)
    l2_lambda: float = Field(1e-4, ge=0)
    output_dir: Path = Path("output")
    expanded_path: Optional[Path] = None
    refined_path: Optional[Path] = None
    embedding_path: Optional[Path] = None
    history_db: Optional[Path] = None

    @model_validator(mode="after")
    def _refinement_fits_expansion(self) -> "PipelineConfig":
        if self.refinement_size > self.expansion_size:
            raise ValueError(
                f"refinement_size ({self.refinement_size}) must not exceed "
                f"expansion_size ({self.expansion_size})"
            )
        return self

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            dimensions=self.dimensions,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            min_learning_rate=self.min_learning_rate,
            negatives_k=self.negatives_k,
            noise_exponent=self.noise_exponent,
            seed=self.seed,
            shuffle=self.shuffle,
        )

    @property
    def expanded_file(self) -> Path:
        return self.expanded_path or self.output_dir / "expanded.txt"

    @property
    def refined_file(self) -> Path:
        return self.refined_path or self.output_dir / "refined.txt"

    @property
    def embedding_file(self) -> Path:
        return self.embedding_path or self.output_dir / "embedding.emb"

    def to_text(self) -> str:
        lines = []
        for key in type(self).model_fields:
            lines.append(f"{key}={_render(getattr(self, key))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        return cls(**parse_key_values(text))


def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_key_values(text: str) -> dict[str, Optional[str]]:
    """Flat `key=value` lines; `#` comments and blanks ignored, empty value means unset."""
    values: dict[str, Optional[str]] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"line {line_number}: expected key=value, got {stripped!r}")
        value = value.strip()
        values[key.strip()] = value if value else None
    return values


# --- Reports ---

class EvalReport(BaseModel):
    fold_scores: list[float]
    micro_f1: float                       # mean of fold_scores
    label_fraction: float
    fold_count: int
    evaluated_nodes: int
    train_per_fold: int
    labels_without_positives: int = 0     # (fold, label) cases predicted all-negative

    def to_text(self) -> str:
        lines = [f"fold\t{i}\t{score:.6f}" for i, score in enumerate(self.fold_scores)]
        lines += [
            f"mean_micro_f1\t{self.micro_f1:.6f}",
            f"label_fraction\t{self.label_fraction}",
            f"fold_count\t{self.fold_count}",
            f"evaluated_nodes\t{self.evaluated_nodes}",
            f"train_per_fold\t{self.train_per_fold}",
            f"labels_without_positives\t{self.labels_without_positives}",
        ]
        return "\n".join(lines) + "\n"


class StabilityReport(BaseModel):
    per_dimension: list[float]            # max |a - b| over nodes, per dimension
    global_max: float
    worst_dimension: Optional[int] = None
    tolerance: float = 0.0
    passed: bool

    def to_text(self) -> str:
        lines = [f"dim\t{i}\t{dev:.9g}" for i, dev in enumerate(self.per_dimension)]
        lines += [
            f"global_max\t{self.global_max:.9g}",
            f"worst_dimension\t{'' if self.worst_dimension is None else self.worst_dimension}",
            f"tolerance\t{self.tolerance:.9g}",
            f"result\t{'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines) + "\n"


class PerformanceStabilityReport(BaseModel):
    run_scores: list[float]
    spread: float                         # max - min of run_scores

    def to_text(self) -> str:
        lines = [f"run\t{i}\t{score:.6f}" for i, score in enumerate(self.run_scores)]
        lines.append(f"micro_f1_spread\t{self.spread:.6f}")
        return "\n".join(lines) + "\n"
