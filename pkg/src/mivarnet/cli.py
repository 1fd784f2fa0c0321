"""Command-line driver: ``mivarnet <subcommand> [options]``.

Pipeline::

    gen-data -> train -> recon -> svm-train -> detect
                      \\-> eval -> report

Exit codes: 0 success, 2 configuration error, 3 I/O or format error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from . import kspace as ks
from .config import MODES, ExperimentConfig, load_config
from .detect import (
    ConfusionCounts,
    SvmModel,
    confusion_metrics,
    format_confusion_table,
    normalized_confusion,
    svm_predict,
    svm_train,
)
from .errors import ConfigError, DegenerateClassError, DivergenceError, FormatError, ParameterError, ShapeError
from .metrics import METRICS, evaluate_batch
from .motion import MotionTrajectory, corrupt_kspace, sample_trajectory
from .phantom import forward_acquire, gen_coil_maps, gen_phantom
from .varnet import ReconModel, reconstruct, train

log = logging.getLogger("mivarnet")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4
ITEM_FILES = ("image", "maps", "kspace", "corrupted", "mask")


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    return cfg.with_overrides(**overrides).validate()


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# gen-data ----------------------------------------------------------------------


def generate_dataset(cfg: ExperimentConfig, n: int, out: Path) -> dict:
    """Write ``n`` items plus ``manifest.json``; item ``i`` uses seed ``seed ^ i``."""
    (out / "items").mkdir(parents=True, exist_ok=True)
    m = cfg.motion
    items = []
    for i in range(n):
        seed = cfg.seed ^ i
        image = gen_phantom(seed, cfg.image_size, cfg.image_size, cfg.n_ellipses)
        maps = gen_coil_maps(seed, cfg.coils, cfg.image_size, cfg.image_size)
        mask = ks.make_equispaced_mask(cfg.image_size, cfg.accel, cfg.center_fraction, seed=seed)
        clean = forward_acquire(image, maps)
        if cfg.mode == "varnet_mi":
            traj = sample_trajectory(np.random.default_rng([seed, 2]), cfg.image_size, m.max_events, m.max_trans_px, m.max_rot_deg)
        else:
            traj = MotionTrajectory(cfg.image_size, ())
        corrupted = corrupt_kspace(image, maps, traj) if traj.label else clean
        item_id = f"item{i:05d}"
        arrays = {"image": image, "maps": maps, "kspace": clean, "corrupted": corrupted, "mask": mask.columns.astype(np.float64)}
        files = {}
        for key in ITEM_FILES:
            name = f"items/{item_id}_{key}.ctns"
            mio.write_tensor(out / name, arrays[key])
            files[key] = name
        items.append({"id": item_id, "seed": seed, "label": traj.label, "trajectory": traj.to_dict(), "files": files})
    manifest = {"config": cfg.to_dict(), "n": n, "items": items}
    mio.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_gen_data(args) -> int:
    cfg = _resolve_config(args)
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    manifest = generate_dataset(cfg, args.n, _out(args))
    n_motion = sum(it["label"] for it in manifest["items"])
    print(f"wrote {args.n} items ({n_motion} with motion) to {args.out}")
    return EXIT_OK


def _load_manifest(data_dir: Path) -> dict:
    manifest = mio.read_json(data_dir / "manifest.json")
    if "items" not in manifest:
        raise FormatError(f"{data_dir}: manifest has no items")
    return manifest


class ManifestDataset:
    """``(image, maps)`` pairs read from a gen-data directory."""

    def __init__(self, data_dir: Path):
        self.dir = Path(data_dir)
        self.items = _load_manifest(self.dir)["items"]

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        files = self.items[i]["files"]
        return mio.read_tensor(self.dir / files["image"]), mio.read_tensor(self.dir / files["maps"])


# train ----------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _out(args)
    dataset = ManifestDataset(Path(args.data))
    model = ReconModel(cfg, cfg.mode)
    _, losses = train(model, dataset, log=lambda s, v: log.debug("step %d loss %.6f", s, v))
    ckpt = out / f"{args.name}.ckpt"
    mio.save_checkpoint(ckpt, model)
    with open(out / f"{args.name}_loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "loss"])
        writer.writerows((i, repr(v)) for i, v in enumerate(losses))
    print(f"trained {cfg.mode} for {cfg.steps} steps, final loss {losses[-1]:.4f}; checkpoint {ckpt}")
    return EXIT_OK


# recon -----------------------------------------------------------------------------


def _mask_from_columns(columns: np.ndarray, cfg: ExperimentConfig) -> ks.SamplingMask:
    return ks.SamplingMask(np.asarray(columns) != 0, cfg.accel, cfg.center_fraction)


def recon_one(model, k, columns, out: Path, prefix: str, item_id: str, label=None) -> dict:
    mask = _mask_from_columns(columns, model.config)
    res = reconstruct(k, mask, model)
    mio.write_tensor(out / f"{prefix}.ctns", res.image)
    mio.write_png(out / f"{prefix}.png", res.image)
    record = {"id": item_id, "mode": model.mode, "features": res.features.tolist()}
    if label is not None:
        record["label"] = bool(label)
    mio.write_json(out / f"{prefix}_features.json", record)
    return record


def cmd_recon(args) -> int:
    model = mio.load_checkpoint(args.checkpoint)
    out = _out(args)
    if args.data:
        data_dir = Path(args.data)
        for it in _load_manifest(data_dir)["items"]:
            f = it["files"]
            k = mio.read_tensor(data_dir / f["corrupted"])
            recon_one(model, k, mio.read_tensor(data_dir / f["mask"]), out, it["id"], it["id"], it["label"])
        print(f"reconstructed dataset {data_dir} into {out}")
        return EXIT_OK
    if not (args.kspace and args.mask):
        raise ConfigError("recon needs --data or both --kspace and --mask")
    prefix = args.prefix or Path(args.kspace).stem
    recon_one(model, mio.read_tensor(args.kspace), mio.read_tensor(args.mask), out, prefix, prefix)
    print(f"wrote {out / prefix}.ctns, .png and _features.json")
    return EXIT_OK


# svm-train / detect ------------------------------------------------------------------


def _read_features(paths):
    records = [mio.read_json(p) for p in paths]
    for p, r in zip(paths, records):
        if "features" not in r:
            raise FormatError(f"{p}: no features field")
    return records


def cmd_svm_train(args) -> int:
    records = _read_features(args.features)
    if any("label" not in r for r in records):
        raise FormatError("every features file needs a label for svm-train")
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    model = svm_train([r["features"] for r in records], [r["label"] for r in records], lam=args.lam, epochs=args.epochs, seed=seed)
    path = _out(args) / f"{args.name}.json"
    path.write_text(model.to_json() + "\n")
    print(f"trained SVM on {len(records)} feature vectors; model {path}")
    return EXIT_OK


def detection_summary(counts: ConfusionCounts) -> dict:
    summary = {"counts": {"tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn}, "metrics": confusion_metrics(counts)}
    if counts.tp + counts.fn and counts.tn + counts.fp:
        summary["normalized_confusion"] = normalized_confusion(counts).tolist()
    return summary


def cmd_detect(args) -> int:
    svm = SvmModel.from_json(Path(args.svm).read_text())
    records = _read_features(args.features)
    preds = []
    for r in records:
        p = svm_predict(svm, r["features"])
        preds.append(p)
        print(f"{r.get('id', '?')}\t{'yes' if p else 'no'}")
    if records and all("label" in r for r in records):
        counts = ConfusionCounts.from_predictions([r["label"] for r in records], preds)
        summary = detection_summary(counts)
        if "normalized_confusion" in summary:
            print(format_confusion_table(counts))
        for key, value in summary["metrics"].items():
            print(f"{key}: {'undefined' if value is None else f'{value:.4f}'}")
        if args.out:
            mio.write_json(_out(args) / "detection.json", summary)
    return EXIT_OK


# eval / report -------------------------------------------------------------------------


def evaluate_checkpoints(models: dict, data_dirs) -> tuple:
    """Four-condition grid (model x motion partition) plus per-row reports."""
    items = [(Path(d), it) for d in data_dirs for it in _load_manifest(Path(d))["items"]]
    grid, reports = {}, []
    for label, model in models.items():
        grid[label] = {}
        for part, flag in (("motion", True), ("no_motion", False)):
            chosen = [(d, it) for d, it in items if bool(it["label"]) == flag]
            if not chosen:
                raise ConfigError(f"test set has no {part} items")
            pairs = []
            for d, it in chosen:
                f = it["files"]
                k = mio.read_tensor(d / f["corrupted"])
                res = reconstruct(k, _mask_from_columns(mio.read_tensor(d / f["mask"]), model.config), model)
                target = ks.rss_combine(ks.sense_expand(mio.read_tensor(d / f["image"]), mio.read_tensor(d / f["maps"])))
                pairs.append((target, res.image))
            ids = [f"{d.name}/{it['id']}" for d, it in chosen]
            rep = evaluate_batch(pairs, [flag] * len(chosen), ids, mode=label)
            grid[label][part] = rep.aggregates
            reports.append(rep)
    return grid, reports


def cmd_eval(args) -> int:
    a, b = mio.load_checkpoint(args.a), mio.load_checkpoint(args.b)
    names = [a.mode, b.mode] if a.mode != b.mode else [f"{a.mode}_a", f"{b.mode}_b"]
    grid, reports = evaluate_checkpoints(dict(zip(names, (a, b))), args.data)
    out = _out(args)
    mio.write_json(out / f"{args.name}.json", {"models": names, "grid": grid, "rows": [r.rows for r in reports]})
    csv_text = reports[0].to_csv() + "".join(r.to_csv().split("\n", 1)[1] for r in reports[1:])
    (out / f"{args.name}.csv").write_text(csv_text)
    print(format_grid(names, grid))
    return EXIT_OK


def format_grid(names, grid) -> str:
    lines = ["model        partition   NMSE (%)   PSNR (dB)   SSIM (%)"]
    for name in names:
        for part in ("motion", "no_motion"):
            agg = grid[name][part]
            vals = "  ".join(f"{agg[m]['mean']:9.2f}" if agg[m]["mean"] is not None else "      n/a" for m in METRICS)
            lines.append(f"{name:<12} {part:<10} {vals}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    ev = mio.read_json(args.eval)
    try:
        text = format_grid(ev["models"], ev["grid"])
    except KeyError as exc:
        raise FormatError(f"{args.eval}: missing {exc}") from exc
    if args.detection:
        det = mio.read_json(args.detection)
        c = det["counts"]
        counts = ConfusionCounts(c["tp"], c["tn"], c["fp"], c["fn"])
        text += "\n\nmotion detection\n" + format_confusion_table(counts)
        text += "\n" + "\n".join(f"{k}: {v:.4f}" for k, v in det["metrics"].items() if v is not None)
    text += "\n"
    print(text, end="")
    if args.out:
        (_out(args) / f"{args.name}.txt").write_text(text)
    return EXIT_OK


# entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # subparser copies must not clobber values given before the subcommand
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--config", default=d(None), help="JSON experiment config")
        parser.add_argument("--seed", type=int, default=d(None), help="override the config seed")
        parser.add_argument("--out", default=d(None), help="output directory (default: current directory)")
        parser.add_argument("-v", "--verbose", action="store_true", default=d(False))

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)
    p = argparse.ArgumentParser(prog="mivarnet", description=__doc__.split("\n")[0])
    global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="write a synthetic dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--mode", choices=MODES)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", parents=[common], help="train a reconstruction model")
    t.add_argument("--data", required=True, help="gen-data directory")
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--steps", type=int)
    t.add_argument("--name", default="model")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("recon", parents=[common], help="reconstruct k-space with a checkpoint")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--kspace")
    r.add_argument("--mask")
    r.add_argument("--prefix")
    r.add_argument("--data", help="reconstruct every item of a gen-data directory")
    r.set_defaults(func=cmd_recon)

    s = sub.add_parser("svm-train", parents=[common], help="fit the motion detector")
    s.add_argument("features", nargs="+")
    s.add_argument("--lam", type=float, default=0.01)
    s.add_argument("--epochs", type=int, default=500)
    s.add_argument("--name", default="svm")
    s.set_defaults(func=cmd_svm_train)

    d = sub.add_parser("detect", parents=[common], help="classify feature files")
    d.add_argument("--svm", required=True)
    d.add_argument("features", nargs="+")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("eval", parents=[common], help="compare two checkpoints")
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.add_argument("--data", required=True, nargs="+", help="one or more gen-data directories")
    e.add_argument("--name", default="eval")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", parents=[common], help="format eval and detection results")
    rp.add_argument("--eval", required=True)
    rp.add_argument("--detection")
    rp.add_argument("--name", default="report")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, DegenerateClassError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
