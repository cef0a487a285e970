"""Patient-disjoint cross-validation, patient decisions and ROC analysis"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd

from classifier.mlp import fit
from features.features import FeatureMatrix, Label, FEATURE_NAMES
from utils.args_config import TrainConfig, DecisionConfig
from utils.errors import TooFewPatientsError, SingleClassError, EmptyInputError, IoFailureError

logger = logging.getLogger(__name__)

# Feature subsets of the reference comparison with their (frame, patient) error rates in % on MEEI
REFERENCE_ERRORS = {
    ("dFM",): (17.2, 8.73),
    ("dCGD",): (9.40, 4.93),
    ("T1", "T2"): (13.28, 5.35),
    ("BAL1", "T2"): (8.65, 5.07),
    ("BAL1", "BAL2", "BAL3"): (9.97, 7.89),
    ("dMODGD", "dPPGD", "dCGD"): (7.92, 4.08),
    ("dFM", "dSMOOTH", "dMODGD", "dPPGD", "dCGD"): (8.25, 4.65),
    ("T1", "T2", "dMODGD", "dPPGD", "dCGD"): (7.97, 4.08),
    FEATURE_NAMES: (6.16, 4.08),
}
TABLE_SUBSETS = tuple(REFERENCE_ERRORS)


def classify_patient(posteriors, frame_threshold: float = 0.5) -> Label:
    """Majority vote of the frame decisions, a tie counts as pathological.

    Args:
        posteriors: frame posteriors of one patient
        frame_threshold: posterior at which a frame is called pathological
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    if posteriors.size == 0:
        raise EmptyInputError("patient has no frame")
    votes = int(np.count_nonzero(posteriors >= frame_threshold))
    return Label.PATHOLOGICAL if 2 * votes >= posteriors.size else Label.NORMOPHONIC


@dataclass
class RocCurve:
    """Operating points ordered by decreasing threshold."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray

    def auc(self) -> float:
        """Area under the curve by the trapezoidal rule."""
        return float(np.trapezoid(self.tpr, self.fpr))

    def write_csv(self, path: str, config_hash: str = ""):
        """One operating point per row."""
        table = pd.DataFrame({"threshold": self.thresholds, "tpr": self.tpr, "fpr": self.fpr})
        try:
            with open(path, "w", encoding="UTF-8", newline="") as file:
                file.write(f"# config_hash={config_hash}\n")
                table.to_csv(file, index=False, float_format="%.17g")
        except OSError as err:
            raise IoFailureError(f"cannot write '{path}': {err}") from err


def roc_curve(posteriors, labels, n_points: int = 101) -> RocCurve:
    """Sweeps the decision threshold over [0, 1].

    A leading +inf threshold gives the (0, 0) end and threshold 0 the (1, 1) end.

    Args:
        posteriors: positive-class scores in [0, 1]
        labels: 1 for positive, 0 for negative
        n_points: thresholds spread evenly over [0, 1]
    """
    posteriors = np.asarray(posteriors, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if labels.all() or not labels.any():
        raise SingleClassError("ROC needs both classes")

    thresholds = np.concatenate([[np.inf], np.linspace(1.0, 0.0, n_points)])
    positives, negatives = posteriors[labels], posteriors[~labels]
    tpr = np.array([np.mean(positives >= t) for t in thresholds])
    fpr = np.array([np.mean(negatives >= t) for t in thresholds])
    return RocCurve(thresholds, tpr, fpr)


@dataclass
class FoldStats:
    """Errors on one held-out fold."""

    fold: int = 0
    n_frames: int = 0
    frame_errors: int = 0
    n_normophonic: int = 0
    n_pathological: int = 0
    false_positives: int = 0  # Normophonic patients called pathological
    false_negatives: int = 0  # Pathological patients called normophonic
    validation_patients: list = field(default_factory=list)

    @property
    def n_patients(self) -> int:
        """Patients in the fold."""
        return self.n_normophonic + self.n_pathological

    @property
    def patient_errors(self) -> int:
        """Misclassified patients."""
        return self.false_positives + self.false_negatives


def _pct(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


@dataclass
class CvReport:
    """Aggregated cross-validation outcome."""

    feature_subset: tuple
    threshold: float
    folds: list
    posteriors: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    frame_labels: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def n_frames(self) -> int:
        """Frames evaluated over all folds."""
        return sum(f.n_frames for f in self.folds)

    @property
    def n_patients(self) -> int:
        """Patients evaluated over all folds."""
        return sum(f.n_patients for f in self.folds)

    @property
    def frame_error_pct(self) -> float:
        """Misclassified frames in %."""
        return _pct(sum(f.frame_errors for f in self.folds), self.n_frames)

    @property
    def patient_error_pct(self) -> float:
        """Misclassified patients in %."""
        return _pct(sum(f.patient_errors for f in self.folds), self.n_patients)

    @property
    def false_positive_pct(self) -> float:
        """Normophonic patients called pathological, in % of normophonic patients."""
        return _pct(sum(f.false_positives for f in self.folds), sum(f.n_normophonic for f in self.folds))

    @property
    def false_negative_pct(self) -> float:
        """Pathological patients called normophonic, in % of pathological patients."""
        return _pct(sum(f.false_negatives for f in self.folds), sum(f.n_pathological for f in self.folds))

    def roc(self, n_points: int = 101) -> RocCurve:
        """Frame-level ROC of the pooled held-out posteriors."""
        return roc_curve(self.posteriors, self.frame_labels, n_points)

    def to_dict(self, config: dict | None = None, config_hash: str = "") -> dict:
        """JSON-ready document."""
        return {
            "config_hash": config_hash,
            "config": config or {},
            "feature_subset": list(self.feature_subset),
            "threshold": self.threshold,
            "n_frames": self.n_frames,
            "n_patients": self.n_patients,
            "frame_error_pct": self.frame_error_pct,
            "patient_error_pct": self.patient_error_pct,
            "false_positive_pct": self.false_positive_pct,
            "false_negative_pct": self.false_negative_pct,
            "auc": self.roc().auc(),
            "folds": [asdict(f) for f in self.folds],
        }

    def write_json(self, path: str, config: dict | None = None, config_hash: str = ""):
        """Writes the report as JSON."""
        try:
            with open(path, "w", encoding="UTF-8") as file:
                json.dump(self.to_dict(config, config_hash), file, indent=2)
                file.write("\n")
        except OSError as err:
            raise IoFailureError(f"cannot write '{path}': {err}") from err

    def to_text(self) -> str:
        """Short plain-text summary."""
        return "\n".join(
            [
                f"Features:        {','.join(self.feature_subset)}",
                f"Frame error:     {self.frame_error_pct:6.2f} %  ({self.n_frames} frames)",
                f"Patient error:   {self.patient_error_pct:6.2f} %  ({self.n_patients} patients)",
                f"False positives: {self.false_positive_pct:6.2f} %",
                f"False negatives: {self.false_negative_pct:6.2f} %",
                f"ROC area:        {self.roc().auc():6.4f}",
            ]
        )


def _fit_and_score(train: FeatureMatrix, held_out: FeatureMatrix, config: TrainConfig, fold: int):
    """Trains on one side of a split and returns the held-out posteriors."""
    model = fit(train.values, train.labels, config, train.names)
    logger.debug("Fold %d trained on %d frames", fold, len(train))
    return model.predict_proba(held_out.values)


class CrossValidator:
    """Runs k-fold cross-validation with folds made of whole patients"""

    def __init__(
        self,
        features: FeatureMatrix,
        config: TrainConfig | None = None,
        decision: DecisionConfig | None = None,
        k: int | None = None,
    ):
        """Prepares the folds.

        Arguments:
            features: feature table restricted to the evaluated subset
            config: training settings, the seed also shuffles the folds
            decision: frame threshold and default number of folds
            k: number of folds, overrides decision.k_folds
        """
        self.features = features
        self.config = config or TrainConfig()
        self.decision = decision or DecisionConfig()
        self.k = k or self.decision.k_folds
        self.fold_of = self.make_folds()

    def make_folds(self) -> dict:
        """Fold index of every patient, stratified by class."""
        labels = self.features.patient_labels()
        rng = np.random.default_rng([self.config.seed, 2])
        fold_of = {}
        for label in Label:
            patients = sorted(p for p, lab in labels.items() if lab == label)
            if len(patients) < self.k:
                raise TooFewPatientsError(
                    f"{len(patients)} {label.name.lower()} patients cannot fill {self.k} folds"
                )
            for i, patient in enumerate(rng.permutation(patients)):
                fold_of[patient] = i % self.k
        return fold_of

    def split(self, fold: int):
        """Training and held-out tables of one fold."""
        in_fold = np.array([self.fold_of[p] == fold for p in self.features.patient_ids])
        train, held_out = self.features.subset_rows(~in_fold), self.features.subset_rows(in_fold)
        if set(train.patient_ids) & set(held_out.patient_ids):
            raise AssertionError(f"fold {fold} leaks patients into training")
        return train, held_out

    def score_fold(self, fold: int, held_out: FeatureMatrix, posteriors: np.ndarray) -> FoldStats:
        """Frame and patient errors of one fold."""
        threshold = self.decision.frame_threshold
        stats = FoldStats(fold=fold, n_frames=len(held_out))
        stats.frame_errors = int(np.count_nonzero((posteriors >= threshold) != (held_out.labels == 1)))
        for patient, label in held_out.patient_labels().items():
            decision = classify_patient(posteriors[held_out.patient_ids == patient], threshold)
            stats.validation_patients.append(str(patient))
            if label == Label.NORMOPHONIC:
                stats.n_normophonic += 1
                stats.false_positives += int(decision == Label.PATHOLOGICAL)
            else:
                stats.n_pathological += 1
                stats.false_negatives += int(decision == Label.NORMOPHONIC)
        return stats

    def run(self, jobs: int = 1) -> CvReport:
        """Trains and scores every fold, folds run in worker processes when jobs > 1."""
        splits = [self.split(fold) for fold in range(self.k)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [
                    pool.submit(_fit_and_score, train, held_out, self.config, fold)
                    for fold, (train, held_out) in enumerate(splits)
                ]
                scores = [f.result() for f in futures]
        else:
            scores = [
                _fit_and_score(train, held_out, self.config, fold) for fold, (train, held_out) in enumerate(splits)
            ]

        folds = [self.score_fold(fold, splits[fold][1], scores[fold]) for fold in range(self.k)]
        report = CvReport(
            tuple(self.features.names),
            self.decision.frame_threshold,
            folds,
            np.concatenate(scores),
            np.concatenate([held_out.labels for _, held_out in splits]),
        )
        logger.info(
            "%s: frame error %.2f %%, patient error %.2f %%",
            ",".join(report.feature_subset),
            report.frame_error_pct,
            report.patient_error_pct,
        )
        return report


def cross_validate(
    features: FeatureMatrix,
    k: int = 10,
    config: TrainConfig | None = None,
    feature_subset=FEATURE_NAMES,
    decision: DecisionConfig | None = None,
    jobs: int = 1,
) -> CvReport:
    """Patient-disjoint stratified k-fold evaluation of one feature subset.

    Args:
        features: full feature table
        k: number of folds
        config: training settings
        feature_subset: feature names to train on
        decision: frame threshold
        jobs: worker processes, the report does not depend on it
    """
    return CrossValidator(features.select(feature_subset), config, decision, k).run(jobs)


def evaluate_table(
    features: FeatureMatrix,
    k: int = 10,
    config: TrainConfig | None = None,
    decision: DecisionConfig | None = None,
    jobs: int = 1,
) -> list:
    """Cross-validation reports of the nine reference subsets."""
    return [cross_validate(features, k, config, subset, decision, jobs) for subset in TABLE_SUBSETS]


def format_table(reports) -> str:
    """Frame and patient errors of several subsets next to the reference values."""
    width = max(len(",".join(r.feature_subset)) for r in reports)
    lines = [
        f"{'Features':<{width}}  {'Frame %':>8}  {'Patient %':>9}  {'Ref frame':>9}  {'Ref pat.':>8}",
        "-" * (width + 44),
    ]
    for report in reports:
        name = ",".join(report.feature_subset)
        ref = REFERENCE_ERRORS.get(tuple(report.feature_subset))
        ref_text = f"{ref[0]:9.2f}  {ref[1]:8.2f}" if ref else f"{'-':>9}  {'-':>8}"
        lines.append(f"{name:<{width}}  {report.frame_error_pct:8.2f}  {report.patient_error_pct:9.2f}  {ref_text}")
    return "\n".join(lines)
