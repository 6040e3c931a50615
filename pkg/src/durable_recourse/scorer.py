"""Synthetic candidate universe and the fixed logistic decision model."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .errors import ConfigurationError, DivergenceError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSpec:
    num_examples: int = 10_000
    num_features: int = 10
    label_noise_sigma: float = 0.05
    label_threshold: float = 0.5
    weight_range: tuple = (0.1, 1.0)
    mean_range: tuple = (0.0, 1.0)
    std_range: tuple = (0.05, 0.3)
    rng_seed: int = 0

    def validate(self):
        if self.num_examples < 1:
            raise ConfigurationError("num_examples must be >= 1")
        if self.num_features < 1:
            raise ConfigurationError("num_features must be >= 1")
        if not self.label_noise_sigma >= 0:
            raise ConfigurationError("label_noise_sigma must be >= 0")
        lo, hi = self.weight_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigurationError(f"weight_range must lie within (0, 1], got {self.weight_range}")
        slo, shi = self.std_range
        if not (0.0 < slo <= shi):
            raise ConfigurationError(f"invalid std_range {self.std_range}")
        return self


@dataclass(frozen=True)
class FeatureMarginals:
    """Per-feature normal marginals plus the frozen min-max normalization.

    Every population in the simulation is drawn through :meth:`sample`, so
    training-time and simulation-time feature scales agree.
    """

    means: np.ndarray
    stds: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def num_features(self):
        return len(self.means)

    def normalize(self, raw):
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return (raw - self.lo) / span

    def sample(self, n, rng):
        """``n`` candidates in ``[0, 1]^z``; out-of-range draws are clipped."""
        raw = rng.normal(self.means, self.stds, size=(n, self.num_features))
        return np.clip(self.normalize(raw), 0.0, 1.0)

    def arrays(self):
        return {"means": self.means, "stds": self.stds, "lo": self.lo, "hi": self.hi}


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    generating_weights: np.ndarray
    marginals: FeatureMarginals

    def to_csv(self, path):
        z = self.features.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"f{i}" for i in range(z)] + ["label"])
            for row, y in zip(self.features, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(y)])


def read_dataset_csv(path):
    """Return ``(features, labels)`` from a CSV written by :meth:`LabeledDataset.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise ConfigurationError(f"{path}: missing 'label' header column")
    data = np.array(rows[1:], dtype=np.float64).reshape(len(rows) - 1, len(rows[0]))
    return data[:, :-1], data[:, -1].astype(int)


def generate_dataset(spec: DatasetSpec) -> LabeledDataset:
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    z = spec.num_features
    means = rng.uniform(*spec.mean_range, size=z)
    stds = rng.uniform(*spec.std_range, size=z)
    raw = rng.normal(means, stds, size=(spec.num_examples, z))
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    marginals = FeatureMarginals(means, stds, lo, hi)
    x = marginals.normalize(raw)
    w = rng.uniform(*spec.weight_range, size=z)
    w = w / w.sum()
    noisy = x @ w + rng.normal(0.0, spec.label_noise_sigma, size=spec.num_examples)
    labels = (noisy > spec.label_threshold).astype(int)
    return LabeledDataset(x, labels, w, marginals)


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


@dataclass
class ScoreModel:
    """Logistic scorer ``sigmoid(w . x + b)``; immutable once trained."""

    weights: np.ndarray
    bias: float
    training_meta: dict = field(default_factory=dict)
    marginals: FeatureMarginals | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.weights.setflags(write=False)
        self.bias = float(self.bias)

    @property
    def num_features(self):
        return self.weights.shape[0]

    def logit(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.num_features:
            raise ShapeError(f"expected {self.num_features} features, got {x.shape[-1]}")
        return x @ self.weights + self.bias

    def score(self, x):
        return sigmoid(self.logit(x))

    __call__ = score

    def save(self, path):
        header = {"z": self.num_features, "bias": self.bias,
                  "training_meta": self.training_meta}
        arrays = {"weights": self.weights}
        if self.marginals is not None:
            arrays.update({f"marginal_{k}": v for k, v in self.marginals.arrays().items()})
        checkpoint.save(path, "scorer", header, arrays)

    @classmethod
    def load(cls, path):
        header, arrays = checkpoint.load(path, expect_kind="scorer")
        marg = None
        if "marginal_means" in arrays:
            marg = FeatureMarginals(*(arrays[f"marginal_{k}"] for k in ("means", "stds", "lo", "hi")))
        model = cls(arrays["weights"], header["bias"], header["training_meta"], marg)
        if model.num_features != header["z"]:
            raise checkpoint.CheckpointFormatError("z in header disagrees with weight vector")
        return model


def score(model: ScoreModel, x):
    return model.score(x)


def train_score_model(data: LabeledDataset, epochs=500, lr=5.0) -> ScoreModel:
    """Full-batch gradient descent on mean cross-entropy.

    Descent runs on mean-centred inputs (an affine reparameterization of
    the same model) and the centring is folded back into the bias.
    """
    x = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.float64)
    if x.size == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    if not lr > 0:
        raise ConfigurationError("lr must be positive")
    n, z = x.shape
    mu = x.mean(axis=0)
    xc = x - mu
    w = np.zeros(z)
    c = 0.0
    losses = []
    for epoch in range(epochs):
        t = xc @ w + c
        p = sigmoid(t)
        loss = float(np.mean(np.logaddexp(0.0, t) - y * t))
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch} (lr={lr})",
                                  {"epoch": epoch, "lr": lr})
        losses.append(loss)
        g = p - y
        w -= lr * (xc.T @ g) / n
        c -= lr * float(g.mean())
    bias = c - float(mu @ w)
    t = x @ w + bias
    final_loss = float(np.mean(np.logaddexp(0.0, t) - y * t))
    acc = float(np.mean((t > 0) == (y > 0.5)))
    meta = {"epochs": int(epochs), "lr": float(lr), "final_loss": final_loss, "accuracy": acc}
    log.info("trained score model: loss %.4f accuracy %.4f", final_loss, acc)
    model = ScoreModel(w, bias, meta, data.marginals)
    model.loss_history = losses
    return model
