"""Linear SVM motion detector over per-cascade data-consistency weights."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClassError, FormatError, ShapeError

MIN_STD = 1e-12


@dataclass
class SvmModel:
    weights: np.ndarray
    bias: float
    lam: float
    means: np.ndarray
    stds: np.ndarray

    def standardize(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape[-1] != self.weights.shape[0]:
            raise ShapeError(f"feature length {f.shape[-1]} != model length {self.weights.shape[0]}")
        return (f - self.means) / self.stds

    def decision_function(self, f) -> np.ndarray:
        return self.standardize(f) @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "lambda": self.lam,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        try:
            return cls(
                np.asarray(d["weights"], dtype=np.float64),
                float(d["bias"]),
                float(d["lambda"]),
                np.asarray(d["means"], dtype=np.float64),
                np.asarray(d["stds"], dtype=np.float64),
            )
        except KeyError as exc:
            raise FormatError(f"SVM model is missing field {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        return cls.from_dict(json.loads(text))


def _objective(w, xa, y, lam):
    margins = y * (xa @ w)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def svm_train(features, labels, lam: float = 0.01, epochs: int = 500, seed: int = 0, batch_size: int | None = None) -> SvmModel:
    """Pegasos-style subgradient descent on hinge loss plus ``lam/2 |w|^2``.

    Features are standardized first. The bias is handled as an extra
    constant feature. Each epoch takes one step of size ``1 / (lam t)`` on
    the full batch (or on ``batch_size`` rows drawn with ``seed``), followed
    by projection onto the ball of radius ``1/sqrt(lam)``. The iterate with
    the lowest full training objective is returned.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y_bool = np.asarray(labels, dtype=bool)
    if x.shape[0] != y_bool.shape[0]:
        raise ShapeError(f"{x.shape[0]} feature rows but {y_bool.shape[0]} labels")
    if y_bool.sum() < 2 or (~y_bool).sum() < 2:
        raise DegenerateClassError("need at least two examples of each class")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > MIN_STD, stds, 1.0)
    xa = np.hstack([(x - means) / stds, np.ones((x.shape[0], 1))])
    y = np.where(y_bool, 1.0, -1.0)
    rng = np.random.default_rng(seed)
    radius = 1.0 / np.sqrt(lam)

    w = np.zeros(xa.shape[1])
    best_w, best_obj = w.copy(), _objective(w, xa, y, lam)
    for t in range(1, epochs + 1):
        if batch_size is None or batch_size >= len(y):
            xb, yb = xa, y
        else:
            idx = rng.choice(len(y), size=batch_size, replace=False)
            xb, yb = xa[idx], y[idx]
        active = yb * (xb @ w) < 1.0
        grad = lam * w - (yb[active, None] * xb[active]).sum(axis=0) / len(yb)
        w = w - grad / (lam * t)
        norm = np.linalg.norm(w)
        if norm > radius:
            w *= radius / norm
        obj = _objective(w, xa, y, lam)
        if obj < best_obj:
            best_w, best_obj = w.copy(), obj
    return SvmModel(best_w[:-1].copy(), float(best_w[-1]), float(lam), means, stds)


def svm_predict(model: SvmModel, f) -> bool:
    """True means motion; a score of exactly zero counts as no motion."""
    return bool(model.decision_function(f) > 0)


def svm_predict_batch(model: SvmModel, features) -> np.ndarray:
    return model.decision_function(np.atleast_2d(features)) > 0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, truth, predicted) -> "ConfusionCounts":
        t = np.asarray(truth, dtype=bool)
        p = np.asarray(predicted, dtype=bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & ~p)), int(np.sum(~t & p)), int(np.sum(t & ~p)))


def _ratio(num: int, den: int):
    return num / den if den > 0 else None


def confusion_metrics(c: ConfusionCounts) -> dict:
    """Accuracy, precision, sensitivity, specificity; ``None`` where undefined."""
    return {
        "accuracy": _ratio(c.tp + c.tn, c.total),
        "precision": _ratio(c.tp, c.tp + c.fp),
        "sensitivity": _ratio(c.tp, c.tp + c.fn),
        "specificity": _ratio(c.tn, c.tn + c.fp),
    }


def normalized_confusion(c: ConfusionCounts) -> np.ndarray:
    """Row-normalized matrix; rows are true (motion, no motion), columns predicted."""
    pos, neg = c.tp + c.fn, c.tn + c.fp
    if pos == 0 or neg == 0:
        raise ValueError("each true-label row needs at least one example")
    return np.array([[c.tp / pos, c.fn / pos], [c.fp / neg, c.tn / neg]])


def format_confusion_table(c: ConfusionCounts) -> str:
    m = normalized_confusion(c)
    lines = [
        "                 predicted motion   predicted no motion",
        f"true motion      {m[0, 0]:.2f} (TP)          {m[0, 1]:.2f} (FN)",
        f"true no motion   {m[1, 0]:.2f} (FP)          {m[1, 1]:.2f} (TN)",
    ]
    return "\n".join(lines)
