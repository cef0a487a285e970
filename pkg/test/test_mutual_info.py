"""Unit tests for the mutual information estimates"""

import json

import numpy as np
import pytest
from features.features import FeatureMatrix, FEATURE_NAMES
from infotheory.mutual_info import (
    discretize,
    entropy,
    mutual_information,
    normalized_mi,
    joint_normalized_mi,
    mi_report,
)
from utils.errors import TooFewSamplesError, EmptyInputError, ZeroLabelEntropyError


@pytest.fixture
def labels():
    """500 normophonic then 500 pathological frames."""
    return np.repeat([0, 1], 500)


@pytest.fixture
def table(labels):
    rng = np.random.default_rng(9)
    values = rng.normal(size=(1000, 10))
    values[:, FEATURE_NAMES.index("dCGD")] += 3 * labels
    patients = [f"{'P' if label else 'N'}{i // 50}" for i, label in enumerate(labels)]
    return FeatureMatrix(values, labels, patients)


class TestDiscretize:

    def test_equal_frequency(self):
        bins = discretize(np.random.default_rng(0).normal(size=100), 10)
        assert np.array_equal(np.bincount(bins), np.full(10, 10))

    def test_uneven_counts(self):
        counts = np.bincount(discretize(np.arange(105.0), 10))
        assert set(counts) <= {10, 11}

    def test_monotone(self):
        feature = np.random.default_rng(1).normal(size=200)
        bins = discretize(feature, 20)
        order = np.argsort(feature)
        assert np.all(np.diff(bins[order]) >= 0)

    def test_constant(self):
        assert np.all(discretize(np.ones(60), 50) == 0)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamplesError):
            discretize(np.arange(10.0), 50)


class TestEntropy:

    def test_balanced_binary(self, labels):
        assert entropy(labels) == pytest.approx(1.0)

    def test_single_class(self):
        assert entropy(np.zeros(10)) == 0.0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            entropy([])

    def test_mutual_information_of_copy(self, labels):
        assert mutual_information(labels, labels) == pytest.approx(1.0)


class TestNormalizedMi:

    def test_label_copy(self, labels):
        assert normalized_mi(labels.astype(float), labels) == pytest.approx(100.0)

    def test_independent_feature(self):
        labels = np.tile([0, 1], 500)
        assert normalized_mi(np.arange(1000.0), labels) == pytest.approx(0.0, abs=1e-9)

    def test_single_class_labels(self):
        with pytest.raises(ZeroLabelEntropyError):
            normalized_mi(np.arange(100.0), np.zeros(100))

    def test_joint_is_at_least_each(self, labels):
        rng = np.random.default_rng(4)
        a = rng.normal(size=1000) + labels
        b = rng.normal(size=1000) - labels
        joint = joint_normalized_mi(a, b, labels, 10)
        assert joint >= max(normalized_mi(a, labels, 10), normalized_mi(b, labels, 10)) - 1e-9


class TestReport:

    def test_per_feature(self, table):
        report = mi_report(table)
        assert list(report.per_feature_nmi) == list(FEATURE_NAMES)
        assert report.label_entropy_bits == pytest.approx(1.0)
        assert max(report.per_feature_nmi, key=report.per_feature_nmi.get) == "dCGD"

    def test_duplicate_feature_is_fully_redundant(self, labels):
        feature = np.random.default_rng(2).normal(size=1000) + labels
        matrix = FeatureMatrix(np.column_stack([feature, feature]), labels, ["X"] * 500 + ["Y"] * 500, names=("a", "b"))
        report = mi_report(matrix, n_bins=10, pairs=True)
        assert report.redundancy("a", "b") == pytest.approx(report.per_feature_nmi["a"])

    def test_missing_values_are_skipped(self, table):
        table.values[:10, 5] = np.nan
        assert np.isfinite(mi_report(table).per_feature_nmi["T1"])

    def test_pairs_and_json(self, table, tmp_path):
        report = mi_report(table.select(["dFM", "dCGD", "BAL1"]), n_bins=10, pairs=True)
        assert len(report.pairwise_joint_nmi) == 3
        assert "dCGD" in report.best_pair()
        path = tmp_path / "mi.json"
        report.write_json(str(path), "abc123")
        document = json.loads(path.read_text(encoding="UTF-8"))
        assert document["config_hash"] == "abc123"
        assert document["n_bins"] == 10
        assert len(document["pairwise_joint_nmi"]) == 3

    def test_text_shows_reference(self, table):
        text = mi_report(table).to_text()
        assert "dCGD" in text
        assert "55.97" in text


class TestReferenceValues:

    def test_entropy_of_class_priors(self):
        assert entropy(np.repeat([1, 0], [53, 657])) == pytest.approx(0.3833, abs=1e-3)

    def test_independent_feature_on_a_large_sample(self):
        rng = np.random.default_rng(12)
        labels = rng.integers(0, 2, 100_000)
        assert normalized_mi(rng.uniform(size=100_000), labels) < 1.0

    def test_complementary_pair_beats_redundant_pair(self):
        rng = np.random.default_rng(13)
        labels = np.repeat([0, 1], 5000)
        f1 = labels + rng.normal(0.0, 0.8, 10_000)
        f2 = f1 + rng.normal(0.0, 0.01, 10_000)
        f3 = labels + rng.normal(0.0, 0.8, 10_000)
        assert joint_normalized_mi(f1, f3, labels, 10) > joint_normalized_mi(f1, f2, labels, 10)
