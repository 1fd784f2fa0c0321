"""Reconstruction quality metrics and batch reports.

``nmse`` is the unsquared ratio of Frobenius norms. ``psnr`` is
``20 log10(max(ref) / rmse)``. ``ssim_metric`` delegates to
:func:`mivarnet.nn.ssim.ssim`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .nn.ssim import SsimParams, ssim

METRICS = ("nmse_pct", "psnr_db", "ssim_pct")
CSV_COLUMNS = ("id", "mode", "motion", "nmse_pct", "psnr_db", "ssim_pct")


def _pair(ref, img):
    ref = np.asarray(ref, dtype=np.float64)
    img = np.asarray(img, dtype=np.float64)
    if ref.shape != img.shape:
        raise ShapeError(f"reference {ref.shape} and image {img.shape} differ in shape")
    return ref, img


def nmse(ref, img) -> float:
    ref, img = _pair(ref, img)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ParameterError("nmse is undefined for an all-zero reference")
    return float(np.linalg.norm(ref - img) / denom)


def rmse(ref, img) -> float:
    ref, img = _pair(ref, img)
    return float(np.sqrt(np.mean((ref - img) ** 2)))


def psnr(ref, img) -> float:
    """Peak SNR in dB; ``math.inf`` for identical images."""
    ref, img = _pair(ref, img)
    err = rmse(ref, img)
    if err == 0:
        return math.inf
    return float(20.0 * np.log10(ref.max() / err))


def ssim_metric(ref, img, params: SsimParams = SsimParams()) -> float:
    ref, img = _pair(ref, img)
    return ssim(ref, img, params)


def normalize_pair(ref, img):
    """Scale both images by the reference maximum."""
    ref, img = _pair(ref, img)
    peak = ref.max()
    if peak <= 0:
        raise ParameterError("reference maximum must be positive")
    return ref / peak, img / peak


@dataclass
class MetricsReport:
    rows: list
    aggregates: dict
    conditions: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row.get(k) for k in CSV_COLUMNS})
        return buf.getvalue()


def aggregate(rows: list) -> dict:
    """Mean and population std of each metric over rows without an error."""
    ok = [r for r in rows if r.get("error") is None]
    out = {}
    for key in METRICS:
        vals = np.array([r[key] for r in ok], dtype=np.float64)
        if vals.size == 0:
            out[key] = {"mean": None, "std": None, "n": 0}
            continue
        std = 0.0 if np.all(vals == vals[0]) else float(np.std(vals))
        out[key] = {"mean": float(np.mean(vals)), "std": std, "n": int(vals.size)}
    return out


def evaluate_batch(pairs, labels=None, ids=None, mode: str | None = None, normalize: bool = True) -> MetricsReport:
    """Per-image metrics in input order plus aggregates.

    ``labels`` are per-image motion flags. A failing pair becomes a row with
    an ``error`` entry instead of aborting the batch.
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("evaluate_batch needs at least one pair")
    labels = [None] * len(pairs) if labels is None else list(labels)
    ids = [str(i) for i in range(len(pairs))] if ids is None else [str(i) for i in ids]
    rows = []
    for pid, (ref, img), motion in zip(ids, pairs, labels):
        row = {"id": pid, "mode": mode, "motion": motion, "error": None}
        try:
            if normalize:
                ref, img = normalize_pair(ref, img)
            row.update(
                nmse_pct=100.0 * nmse(ref, img),
                psnr_db=psnr(ref, img),
                ssim_pct=100.0 * ssim_metric(ref, img),
            )
        except (ParameterError, ShapeError) as exc:
            row.update(nmse_pct=None, psnr_db=None, ssim_pct=None, error=str(exc))
        rows.append(row)
    present = sorted({m for m in labels if m is not None})
    conditions = {"model_mode": mode, "motion_present": present[0] if len(present) == 1 else None}
    return MetricsReport(rows, aggregate(rows), conditions)
