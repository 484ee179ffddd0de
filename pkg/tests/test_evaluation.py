"""Tests for classification scoring, run comparison and sweeps."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "engine"))

from errors import ConfigValidationError, StructuralError
from evaluation import (
    compare_embeddings,
    compare_runs,
    fit_logistic,
    logistic_loss_and_grad,
    micro_f1,
    performance_stability,
    sensitivity_sweep,
    train_classifier,
)
from graph_core import LabelSet
from models import PipelineConfig
from pipeline import embed_graph
from skipgram import write_embeddings
from synthetic import planted_partition


def block_labels(n: int, block_size: int) -> LabelSet:
    blocks = (n + block_size - 1) // block_size
    return LabelSet(
        labels=[frozenset({v // block_size}) for v in range(n)],
        label_names=[f"b{i}" for i in range(blocks)],
    )


class TestMicroF1:

    def test_closed_form_anchor(self):
        assert micro_f1(2, 1, 1) == pytest.approx(0.6667, abs=1e-4)

    def test_all_negative_predictions(self):
        assert micro_f1(0, 0, 7) == 0.0

    def test_empty(self):
        assert micro_f1(0, 0, 0) == 0.0

    def test_perfect(self):
        assert micro_f1(5, 0, 0) == 1.0


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    step = 1e-6
    for _ in range(50):
        d = int(rng.integers(1, 6))
        x = rng.normal(size=(10, d))
        y = (rng.random(10) < 0.5).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        lam = float(rng.uniform(0, 0.1))
        _, grad_w, grad_b = logistic_loss_and_grad(w, b, x, y, lam)

        numeric_w = np.zeros(d)
        for i in range(d):
            bump = np.zeros(d)
            bump[i] = step
            up = logistic_loss_and_grad(w + bump, b, x, y, lam)[0]
            down = logistic_loss_and_grad(w - bump, b, x, y, lam)[0]
            numeric_w[i] = (up - down) / (2 * step)
        numeric_b = (
            logistic_loss_and_grad(w, b + step, x, y, lam)[0]
            - logistic_loss_and_grad(w, b - step, x, y, lam)[0]
        ) / (2 * step)

        analytic = np.append(grad_w, grad_b)
        numeric = np.append(numeric_w, numeric_b)
        assert np.linalg.norm(numeric - analytic) <= 1e-6 * np.linalg.norm(analytic)


def test_fit_logistic_separates_line():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    model = fit_logistic(x, y, 1e-4)
    assert model.predict(x).tolist() == [False, False, True, True]
    assert model.weights[0] > 0


class TestTrainClassifier:

    def test_separable_scores_one(self):
        labels = block_labels(40, 20)
        features = np.zeros((40, 2))
        features[:20, 0] = 1.0
        features[20:, 1] = 1.0
        report = train_classifier(features, labels, folds=5, seed=3)
        assert report.micro_f1 == 1.0
        assert report.fold_scores == [1.0] * 5

    def test_random_features_near_half(self):
        labels = block_labels(200, 100)
        means = []
        for seed in range(3):
            features = np.random.default_rng(seed).normal(size=(200, 8))
            means.append(train_classifier(features, labels, folds=5, seed=seed).micro_f1)
        assert 0.4 <= np.mean(means) <= 0.6

    def test_fold_count_and_mean(self):
        labels = block_labels(30, 15)
        features = np.random.default_rng(1).normal(size=(30, 4))
        report = train_classifier(features, labels, folds=10)
        assert len(report.fold_scores) == 10
        assert report.fold_count == 10
        assert report.micro_f1 == pytest.approx(np.mean(report.fold_scores))

    def test_label_fraction_sets_training_size(self):
        labels = block_labels(30, 15)
        features = np.random.default_rng(1).normal(size=(30, 4))
        assert train_classifier(features, labels, folds=5, label_fraction=0.5).train_per_fold == 15
        # capped by the nodes left outside the test fold
        assert train_classifier(features, labels, folds=5, label_fraction=0.9).train_per_fold == 24

    def test_only_labeled_nodes_evaluated(self):
        labels = LabelSet(
            labels=[frozenset({0})] * 10 + [frozenset()] * 5 + [frozenset({1})] * 10,
            label_names=["a", "b"],
        )
        features = np.random.default_rng(2).normal(size=(25, 3))
        assert train_classifier(features, labels, folds=5).evaluated_nodes == 20

    def test_label_without_training_positives_counted(self):
        labels = LabelSet(
            labels=[frozenset({0})] * 19 + [frozenset({0, 1})],
            label_names=["common", "rare"],
        )
        features = np.random.default_rng(4).normal(size=(20, 3))
        report = train_classifier(features, labels, folds=5)
        assert report.labels_without_positives == 1

    def test_deterministic(self):
        labels = block_labels(40, 20)
        features = np.random.default_rng(6).normal(size=(40, 4))
        a = train_classifier(features, labels, folds=4, seed=9)
        b = train_classifier(features, labels, folds=4, seed=9)
        assert a == b

    def test_row_mismatch(self):
        with pytest.raises(StructuralError):
            train_classifier(np.zeros((3, 2)), block_labels(4, 2), folds=2)

    def test_too_few_folds(self):
        with pytest.raises(ConfigValidationError):
            train_classifier(np.zeros((4, 2)), block_labels(4, 2), folds=1)


class TestCompareRuns:

    def setup_method(self):
        self.names = ["a", "b", "c"]
        self.vectors = np.array([[0.5, -0.25], [1.0, 2.0], [0.125, 0.0]])

    def write(self, tmp_path: Path, name: str, vectors, names=None) -> Path:
        path = tmp_path / name
        path.write_text(write_embeddings(vectors, names or self.names))
        return path

    def test_file_against_itself(self, tmp_path: Path):
        path = self.write(tmp_path, "a.emb", self.vectors)
        report = compare_runs(path, path)
        assert report.global_max == 0.0
        assert report.passed
        assert report.worst_dimension is None

    def test_perturbed_entry(self, tmp_path: Path):
        perturbed = self.vectors.copy()
        perturbed[1, 1] += 1e-3
        report = compare_runs(self.write(tmp_path, "a.emb", self.vectors), self.write(tmp_path, "b.emb", perturbed))
        assert report.global_max == pytest.approx(1e-3, rel=1e-6)
        assert report.per_dimension[0] == 0.0
        assert report.worst_dimension == 1
        assert not report.passed
        assert compare_runs(
            self.write(tmp_path, "c.emb", self.vectors), self.write(tmp_path, "d.emb", perturbed), tolerance=0.01
        ).passed

    def test_symmetric(self):
        other = self.vectors + np.array([[0.0, 0.1], [0.3, 0.0], [0.0, -0.2]])
        ab = compare_embeddings(self.names, self.vectors, self.names, other)
        ba = compare_embeddings(self.names, other, self.names, self.vectors)
        assert ab.global_max == ba.global_max

    def test_rows_aligned_by_name(self):
        order = [2, 0, 1]
        report = compare_embeddings(
            self.names, self.vectors, [self.names[i] for i in order], self.vectors[order]
        )
        assert report.global_max == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            compare_embeddings(self.names, self.vectors, self.names, self.vectors[:, :1])

    def test_name_mismatch(self):
        with pytest.raises(StructuralError):
            compare_embeddings(self.names, self.vectors, ["a", "b", "z"], self.vectors)


def test_performance_stability_identical_runs(tmp_path: Path):
    labels = block_labels(20, 10)
    features = np.random.default_rng(3).normal(size=(20, 3))
    names = [str(v) for v in range(20)]
    paths = []
    for i in range(2):
        path = tmp_path / f"run{i}.emb"
        path.write_text(write_embeddings(features, names))
        paths.append(path)
    report = performance_stability(paths, labels, names, folds=4)
    assert len(report.run_scores) == 2
    assert report.spread == 0.0


class TestSensitivitySweep:

    def setup_method(self):
        self.graph, self.labels = planted_partition(2, 10, 0.5, 0.05, seed=1)
        self.config = PipelineConfig(
            expansion_size=8, refinement_size=4, dimensions=4, epochs=1, learning_rate=0.25, folds=2
        )

    def test_single_point_equals_direct_run(self):
        table = sensitivity_sweep(self.graph, self.labels, "expansion_size", [8], self.config)
        emb = embed_graph(self.graph, self.config)
        direct = train_classifier(emb.input_vectors, self.labels, folds=2, label_fraction=0.9, seed=0)
        assert len(table) == 1
        assert table.loc[0, "micro_f1"] == direct.micro_f1

    def test_infeasible_point_skipped(self):
        table = sensitivity_sweep(self.graph, self.labels, "refinement_size", [2, 50], self.config)
        assert table["value"].tolist() == [2]

    def test_log2_dimensions(self):
        table = sensitivity_sweep(self.graph, self.labels, "log2_dimensions", [2, 3, 4], self.config)
        assert list(table.columns) == ["parameter", "value", "micro_f1", "seconds"]
        assert len(table) == 3
        assert np.isfinite(table["micro_f1"]).all()
        assert (table["seconds"] >= 0).all()

    def test_unknown_parameter(self):
        with pytest.raises(ConfigValidationError):
            sensitivity_sweep(self.graph, self.labels, "alpha", [1], self.config)
