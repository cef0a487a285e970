"""Histogram estimates of the information features carry about the class labels.

Features are binned by rank into equally populated bins, then a plug-in estimate of the mutual
information is read from the contingency table of bins and labels. Results are normalized by the
label entropy and expressed in percent.
"""

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import entropy as shannon_entropy
from scipy.stats.contingency import crosstab

from features.features import FeatureMatrix
from utils.errors import TooFewSamplesError, EmptyInputError, ZeroLabelEntropyError, IoFailureError

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50

# Normalized MI (%) reported on the MEEI corpus, shown next to measured values
REFERENCE_NMI = {
    "dFM": 22.32,
    "dSMOOTH": 16.32,
    "dMODGD": 30.56,
    "dPPGD": 15.43,
    "dCGD": 55.97,
    "T1": 32.02,
    "T2": 23.09,
    "BAL1": 56.64,
    "BAL2": 55.85,
    "BAL3": 15.39,
}
REFERENCE_JOINT_NMI = {("BAL1", "BAL2"): 64.65, ("T2", "BAL1"): 79.31}


def discretize(feature, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-frequency bin index of every sample.

    Bins follow the rank of each sample, ties ordered by position, so every bin holds
    floor or ceil of N / n_bins samples. A constant feature falls entirely into bin 0.

    Args:
        feature: real samples
        n_bins: number of bins
    """
    feature = np.asarray(feature, dtype=np.float64).reshape(-1)
    if feature.shape[0] < n_bins:
        raise TooFewSamplesError(f"{feature.shape[0]} samples cannot fill {n_bins} bins")
    if np.all(feature == feature[0]):
        return np.zeros(feature.shape[0], dtype=np.int64)

    order = np.argsort(feature, kind="stable")
    ranks = np.empty_like(order)
    ranks[order] = np.arange(feature.shape[0])
    return ranks * n_bins // feature.shape[0]


def entropy(labels) -> float:
    """Empirical entropy in bits."""
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] == 0:
        raise EmptyInputError("entropy of an empty sequence")
    _, counts = np.unique(labels, return_counts=True)
    return float(shannon_entropy(counts, base=2))


def mutual_information(x, y) -> float:
    """Plug-in mutual information in bits between two discrete sequences."""
    counts = crosstab(np.asarray(x), np.asarray(y)).count.astype(np.float64)
    joint = counts / counts.sum()
    marginal_x = joint.sum(axis=1, keepdims=True)
    marginal_y = joint.sum(axis=0, keepdims=True)
    cells = joint > 0
    return float(np.sum(joint[cells] * np.log2(joint[cells] / (marginal_x @ marginal_y)[cells])))


def _label_entropy(labels) -> float:
    h_labels = entropy(labels)
    if h_labels == 0:
        raise ZeroLabelEntropyError("labels hold a single class")
    return h_labels


def normalized_mi(feature, labels, n_bins: int = DEFAULT_BINS) -> float:
    """100 * I(binned feature; labels) / H(labels)."""
    h_labels = _label_entropy(labels)
    return 100.0 * mutual_information(discretize(feature, n_bins), labels) / h_labels


def joint_normalized_mi(feature_a, feature_b, labels, n_bins: int = DEFAULT_BINS) -> float:
    """Normalized MI of the pair, on the product of both binnings."""
    h_labels = _label_entropy(labels)
    joint = discretize(feature_a, n_bins) * n_bins + discretize(feature_b, n_bins)
    return 100.0 * mutual_information(joint, labels) / h_labels


@dataclass
class MIReport:
    """Normalized MI of every feature and optionally of every feature pair."""

    per_feature_nmi: dict
    label_entropy_bits: float
    n_bins: int
    n_samples: int
    pairwise_joint_nmi: dict = field(default_factory=dict)

    def redundancy(self, a: str, b: str) -> float:
        """nmi(a) + nmi(b) - joint(a, b), large when the pair shares information."""
        joint = self.pairwise_joint_nmi.get((a, b), self.pairwise_joint_nmi.get((b, a)))
        if joint is None:
            raise KeyError(f"pair ({a}, {b}) was not evaluated")
        return self.per_feature_nmi[a] + self.per_feature_nmi[b] - joint

    def best_pair(self):
        """Pair with the highest joint MI, None without pairs."""
        if not self.pairwise_joint_nmi:
            return None
        return max(self.pairwise_joint_nmi, key=lambda pair: (self.pairwise_joint_nmi[pair], pair))

    def to_dict(self, config_hash: str = "") -> dict:
        """JSON-ready document."""
        document = {
            "config_hash": config_hash,
            "n_bins": self.n_bins,
            "n_samples": self.n_samples,
            "label_entropy_bits": self.label_entropy_bits,
            "per_feature_nmi": self.per_feature_nmi,
            "pairwise_joint_nmi": [
                {"features": list(pair), "joint_nmi": value, "redundancy": self.redundancy(*pair)}
                for pair, value in self.pairwise_joint_nmi.items()
            ],
        }
        best = self.best_pair()
        document["best_pair"] = list(best) if best else None
        return document

    def write_json(self, path: str, config_hash: str = ""):
        """Writes the report as JSON."""
        try:
            with open(path, "w", encoding="UTF-8") as file:
                json.dump(self.to_dict(config_hash), file, indent=2)
                file.write("\n")
        except OSError as err:
            raise IoFailureError(f"cannot write '{path}': {err}") from err

    def to_text(self) -> str:
        """Aligned table with the reference values alongside."""
        names = list(self.per_feature_nmi)
        width = max(8, *(len(n) for n in names))
        lines = [
            f"{'Feature':<{width}}  {'NMI (%)':>8}  {'Ref (%)':>8}",
            "-" * (width + 20),
        ]
        for name in names:
            ref = REFERENCE_NMI.get(name)
            ref_text = f"{ref:8.2f}" if ref is not None else f"{'-':>8}"
            lines.append(f"{name:<{width}}  {self.per_feature_nmi[name]:8.2f}  {ref_text}")
        lines.append(f"H(C) = {self.label_entropy_bits:.4f} bits, N = {self.n_samples}, {self.n_bins} bins")

        best = self.best_pair()
        if best:
            pair_width = 2 * width + 3
            lines += ["", f"{'Pair':<{pair_width}}  {'Joint (%)':>9}  {'Redund.':>8}"]
            for pair, value in sorted(self.pairwise_joint_nmi.items(), key=lambda item: -item[1]):
                label = " + ".join(pair)
                lines.append(f"{label:<{pair_width}}  {value:9.2f}  {self.redundancy(*pair):8.2f}")
            lines.append(f"Best pair: {' + '.join(best)}")
        return "\n".join(lines)


def mi_report(matrix: FeatureMatrix, n_bins: int = DEFAULT_BINS, pairs: bool = False) -> MIReport:
    """Normalized MI of every column of a feature table.

    Rows where a feature (or one of a pair) is missing are left out of that estimate.

    Args:
        matrix: feature table
        n_bins: bins per feature
        pairs: also evaluate every feature pair
    """
    labels = matrix.labels
    h_labels = _label_entropy(labels)

    per_feature = {}
    for name in matrix.names:
        values = matrix.column(name)
        ok = np.isfinite(values)
        per_feature[name] = normalized_mi(values[ok], labels[ok], n_bins)

    joint = {}
    if pairs:
        for a, b in combinations(matrix.names, 2):
            va, vb = matrix.column(a), matrix.column(b)
            ok = np.isfinite(va) & np.isfinite(vb)
            joint[(a, b)] = joint_normalized_mi(va[ok], vb[ok], labels[ok], n_bins)
        logger.info("Evaluated %d feature pairs", len(joint))

    return MIReport(per_feature, h_labels, n_bins, len(matrix), joint)
