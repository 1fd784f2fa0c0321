"""Varnet vs VarnetMi ablation on synthetic phantoms.

Both modes start from identical weights and see the same phantom stream;
they differ only in whether training inputs pass through the motion layer.
Held-out evaluation covers motion-corrupted and motion-free inputs, and the
per-cascade weights of each model feed a linear SVM motion detector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kspace as ks
from .config import ExperimentConfig
from .detect import ConfusionCounts, SvmModel, confusion_metrics, svm_predict_batch, svm_train
from .metrics import MetricsReport, evaluate_batch
from .motion import sample_trajectory
from .varnet import PhantomStream, ReconModel, make_training_example, reconstruct, train

log = logging.getLogger(__name__)

# item seeds are stream_seed ^ i; distinct high bits keep the streams disjoint
STREAM_STRIDE = 1 << 20


def stream_seed(config: ExperimentConfig, stream: int) -> int:
    return config.seed + stream * STREAM_STRIDE


@dataclass
class HeldOutItem:
    item_id: str
    k_input: np.ndarray
    mask: ks.SamplingMask
    target: np.ndarray
    motion: bool


def held_out_items(config: ExperimentConfig, seed: int, n: int, motion: bool, prefix: str = "item") -> list:
    """``n`` test items; motion items get between 1 and ``max_events`` events."""
    stream = PhantomStream(seed, config)
    m = config.motion
    items = []
    for i in range(n):
        image, maps = stream[i]
        rng = np.random.default_rng([seed, i, 7])
        mask = ks.make_equispaced_mask(config.image_size, config.accel, config.center_fraction, seed=int(rng.integers(2**32)))
        n_events = int(rng.integers(1, m.max_events + 1)) if motion else 0
        traj = sample_trajectory(rng, config.image_size, m.max_events, m.max_trans_px, m.max_rot_deg, n_events=n_events)
        ex = make_training_example(image, maps, mask, "varnet_mi", rng, config, trajectory=traj)
        items.append(HeldOutItem(f"{prefix}{i:04d}", ex.k_input, mask, ex.target, ex.motion_label))
    return items


def evaluate_model(model: ReconModel, items: list) -> tuple:
    """Return ``(MetricsReport, features)`` for a list of held-out items."""
    pairs, feats = [], []
    for it in items:
        res = reconstruct(it.k_input, it.mask, model)
        pairs.append((it.target, res.image))
        feats.append(res.features)
    report = evaluate_batch(pairs, [it.motion for it in items], [it.item_id for it in items], mode=model.mode)
    return report, np.array(feats)


def zero_filled_report(items: list) -> MetricsReport:
    pairs = [(it.target, ks.rss_combine(ks.ifft2c(it.k_input))) for it in items]
    return evaluate_batch(pairs, [it.motion for it in items], [it.item_id for it in items], mode="zero_filled")


@dataclass
class DetectionResult:
    accuracy: float
    counts: ConfusionCounts
    metrics: dict
    model: SvmModel


def detection_experiment(train_feats, train_labels, test_feats, test_labels, lam: float = 0.01, seed: int = 0) -> DetectionResult:
    svm = svm_train(train_feats, train_labels, lam=lam, seed=seed)
    pred = svm_predict_batch(svm, test_feats)
    counts = ConfusionCounts.from_predictions(test_labels, pred)
    metrics = confusion_metrics(counts)
    return DetectionResult(metrics["accuracy"], counts, metrics, svm)


@dataclass
class AblationResult:
    config: ExperimentConfig
    models: dict
    losses: dict
    motion_reports: dict
    clean_reports: dict
    detection: dict
    zero_filled: dict = field(default_factory=dict)

    def mean(self, group: str, mode: str, metric: str) -> float:
        reports = self.motion_reports if group == "motion" else self.clean_reports
        return reports[mode].aggregates[metric]["mean"]


def run_ablation(
    config: ExperimentConfig,
    n_test: int = 50,
    n_svm_train: int = 400,
    n_svm_test: int = 200,
    models: dict | None = None,
) -> AblationResult:
    """Train both modes (unless ``models`` is given) and evaluate them."""
    config = config.validate()
    losses = {}
    if models is None:
        models = {}
        for mode in ("varnet", "varnet_mi"):
            log.info("training %s for %d steps", mode, config.steps)
            model = ReconModel(config, mode)
            _, losses[mode] = train(model, PhantomStream(config.seed, config))
            models[mode] = model

    motion_items = held_out_items(config, stream_seed(config, 1), n_test, motion=True, prefix="motion")
    clean_items = held_out_items(config, stream_seed(config, 2), n_test, motion=False, prefix="clean")

    def balanced(first_stream, n, prefix):
        half = n // 2
        return held_out_items(config, stream_seed(config, first_stream), half, True, prefix + "m") + held_out_items(
            config, stream_seed(config, first_stream + 1), n - half, False, prefix + "c"
        )

    svm_train_items = balanced(3, n_svm_train, "svmtrain")
    svm_test_items = balanced(5, n_svm_test, "svmtest")

    motion_reports, clean_reports, detection = {}, {}, {}
    for mode, model in models.items():
        motion_reports[mode], _ = evaluate_model(model, motion_items)
        clean_reports[mode], _ = evaluate_model(model, clean_items)
        _, f_train = evaluate_model(model, svm_train_items)
        _, f_test = evaluate_model(model, svm_test_items)
        detection[mode] = detection_experiment(
            f_train, [it.motion for it in svm_train_items], f_test, [it.motion for it in svm_test_items], seed=config.seed
        )
    zero = {"motion": zero_filled_report(motion_items), "clean": zero_filled_report(clean_items)}
    return AblationResult(config, models, losses, motion_reports, clean_reports, detection, zero)
