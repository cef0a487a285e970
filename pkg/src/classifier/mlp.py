"""One-hidden-layer sigmoid perceptron for frame classification"""

import json
import logging

import numpy as np
from scipy.special import expit

from features.features import FeatureMatrix
from utils.args_config import TrainConfig
from utils.errors import SingleClassError, ArityMismatchError, InvalidInputError, IoFailureError

logger = logging.getLogger(__name__)

INIT_RANGE = 0.5  # Weights start uniform in [-INIT_RANGE, INIT_RANGE]
PARAMETER_NAMES = ("w1", "b1", "w2", "b2")


class MlpModel:
    """Sigmoid hidden layer and a single sigmoid output giving P(pathological)"""

    def __init__(self, n_inputs: int, hidden_units: int = 16, seed: int = 0, feature_names=None):
        """Random initial weights and identity input normalization.

        Args:
            n_inputs: number of features
            hidden_units: width of the hidden layer
            seed: seed of the weight initialization
            feature_names: names of the input columns
        """
        rng = np.random.default_rng(seed)
        self.w1 = rng.uniform(-INIT_RANGE, INIT_RANGE, (hidden_units, n_inputs))
        self.b1 = rng.uniform(-INIT_RANGE, INIT_RANGE, hidden_units)
        self.w2 = rng.uniform(-INIT_RANGE, INIT_RANGE, hidden_units)
        self.b2 = np.array(rng.uniform(-INIT_RANGE, INIT_RANGE))
        self.input_mean = np.zeros(n_inputs)
        self.input_std = np.ones(n_inputs)
        self.feature_names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(n_inputs)]
        self.config_hash = ""

    @property
    def n_inputs(self) -> int:
        """Expected feature vector length."""
        return self.w1.shape[1]

    @property
    def parameters(self) -> dict:
        """Trainable arrays by name (views, not copies)."""
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def fit_normalization(self, x: np.ndarray):
        """Stores z-score statistics of the training inputs, constant columns keep unit scale."""
        self.input_mean = x.mean(axis=0)
        std = x.std(axis=0)
        self.input_std = np.where(std > 0, std, 1.0)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Applies the stored z-score."""
        return (x - self.input_mean) / self.input_std

    def forward(self, x_norm: np.ndarray):
        """Hidden activations and output logits for normalized inputs."""
        hidden = expit(x_norm @ self.w1.T + self.b1)
        return hidden, hidden @ self.w2 + self.b2

    def loss_and_gradients(self, x_norm: np.ndarray, y: np.ndarray, weights=None, l2_penalty: float = 0.0):
        """Weighted mean cross-entropy and its gradient with respect to every parameter.

        Args:
            x_norm: normalized inputs
            y: targets in {0, 1}
            weights: per-sample weights, uniform when None
            l2_penalty: weight decay on w1 and w2
        """
        weights = np.ones(y.shape[0]) if weights is None else weights
        weights = weights / weights.sum()
        hidden, logits = self.forward(x_norm)

        # Cross-entropy on logits, log(1 + e^z) - y z
        loss = float(np.sum(weights * (np.logaddexp(0.0, logits) - y * logits)))
        loss += 0.5 * l2_penalty * (np.sum(self.w1**2) + np.sum(self.w2**2))

        d_logits = weights * (expit(logits) - y)
        d_hidden = np.outer(d_logits, self.w2) * hidden * (1 - hidden)
        gradients = {
            "w1": d_hidden.T @ x_norm + l2_penalty * self.w1,
            "b1": d_hidden.sum(axis=0),
            "w2": hidden.T @ d_logits + l2_penalty * self.w2,
            "b2": np.array(d_logits.sum()),
        }
        return loss, gradients

    def check_inputs(self, x) -> np.ndarray:
        """Inputs as a matrix, rejecting wrong arity and non-finite values."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.shape[1] != self.n_inputs:
            raise ArityMismatchError(f"model expects {self.n_inputs} features, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("feature vector contains non-finite values")
        return x

    def predict_proba(self, x) -> np.ndarray:
        """Posterior of the pathological class for every row."""
        x = self.check_inputs(x)
        return expit(self.forward(self.normalize(x))[1])

    def save_file(self, filename: str = "model.json"):
        """Saves weights, normalization, feature names and config hash as JSON."""
        document = {
            "config_hash": self.config_hash,
            "feature_names": self.feature_names,
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": float(self.b2),
        }
        try:
            with open(filename, "w", encoding="UTF-8") as f:
                json.dump(document, f, indent=2)
                f.write("\n")
        except OSError as err:
            raise IoFailureError(f"cannot write '{filename}': {err}") from err

    @classmethod
    def load_file(cls, filename: str = "model.json"):
        """Loads a model written by save_file."""
        try:
            with open(filename, "r", encoding="UTF-8") as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as err:
            raise IoFailureError(f"cannot read model '{filename}': {err}") from err

        w1 = np.asarray(document["w1"], dtype=np.float64)
        model = cls(w1.shape[1], w1.shape[0], feature_names=document["feature_names"])
        model.w1 = w1
        model.b1 = np.asarray(document["b1"], dtype=np.float64)
        model.w2 = np.asarray(document["w2"], dtype=np.float64)
        model.b2 = np.array(float(document["b2"]))
        model.input_mean = np.asarray(document["input_mean"], dtype=np.float64)
        model.input_std = np.asarray(document["input_std"], dtype=np.float64)
        model.config_hash = document.get("config_hash", "")
        return model


def _class_weights(y: np.ndarray) -> np.ndarray:
    """Inverse-frequency sample weights, both classes weigh the same in total."""
    counts = np.bincount(y.astype(int), minlength=2)
    return np.where(y == 1, 1.0 / counts[1], 1.0 / counts[0])


def fit(x, y, config: TrainConfig | None = None, feature_names=None) -> MlpModel:
    """Trains a model on raw inputs and 0/1 targets by mini-batch gradient descent.

    Args:
        x: [n_samples x n_features] inputs
        y: targets
        config: optimizer settings, its seed fixes the initialization and the batch order
        feature_names: names of the input columns
    """
    config = config or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.unique(y).shape[0] < 2:
        raise SingleClassError("training data hold a single class")

    model = MlpModel(x.shape[1], config.hidden_units, config.seed, feature_names)
    model.check_inputs(x)
    model.fit_normalization(x)
    x_norm = model.normalize(x)
    weights = _class_weights(y) if config.class_weighting else np.ones(y.shape[0])

    rng = np.random.default_rng([config.seed, 1])
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, gradients = model.loss_and_gradients(x_norm[batch], y[batch], weights[batch], config.l2_penalty)
            for name, grad in gradients.items():
                getattr(model, name)[...] -= config.learning_rate * grad
        if logger.isEnabledFor(logging.DEBUG) and (epoch + 1) % 50 == 0:
            loss, _ = model.loss_and_gradients(x_norm, y, weights, config.l2_penalty)
            logger.debug("Epoch %d: loss %.5f", epoch + 1, loss)
    return model


def train_mlp(features: FeatureMatrix, config: TrainConfig | None = None) -> MlpModel:
    """Trains on every row of a feature table, PATHOLOGICAL as the positive class."""
    return fit(features.values, features.labels, config, features.names)


def predict_frame(model: MlpModel, feature_row) -> float:
    """Posterior of one frame."""
    row = np.asarray(feature_row, dtype=np.float64)
    if row.ndim != 1:
        raise ArityMismatchError("predict_frame takes a single feature vector")
    return float(model.predict_proba(row)[0])
