"""Command-line pipeline: generate -> build -> preprocess -> train -> evaluate,
plus frozen-encoder transfer.

Every command is deterministic given its inputs, config and seed; outputs
carry the resolved config and input hashes (never timestamps or absolute
paths), so re-runs are byte-identical. Exit codes: 0 success, 2 validation
failure, 3 I/O failure, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as lio
from .book import BookError, BookState
from .metrics import LossConfig, MetricError, WeightProfile, cross_entropy, report
from .models import (
    IMPUTATION,
    PREDICTION,
    RECONSTRUCTION,
    LinearAutoencoder,
    NumericError,
    TaskHead,
    TrainConfig,
    evaluate_classification,
    finetune_frozen,
    predict_labels,
    train,
)
from .preprocess import (
    LabelConfig,
    PreprocessError,
    balance_classes,
    fit_feature_stats,
    fit_group_stats,
    label_trend,
    make_windows,
    mask_for_imputation,
    normalize,
    split_train_test,
)
from .sampling import SamplingError, SessionCalendar, sample
from .synth import PROFILES, generate_day, replay_check

TASKS = {
    "reconstruction": RECONSTRUCTION,
    "prediction": PREDICTION,
    "imputation": IMPUTATION,
}


def _out_path(p: str) -> Path:
    root = os.environ.get("LOBKIT_OUT")
    path = Path(p)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _blocks_str(blocks) -> str:
    return ",".join(f"{a}:{b}" for a, b in blocks)


def _parse_blocks(s: str):
    out = []
    for part in s.split(","):
        a, _, b = part.partition(":")
        out.append((int(a), int(b)))
    return out


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    profile = PROFILES[args.profile]
    stream = generate_day(profile, args.seed)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lio.write_flow(stream, out)
    return 0


def cmd_build(args) -> int:
    flow = _out_path(args.flow)
    stream = lio.read_flow(flow)
    calendar = SessionCalendar()
    series, rep = replay_check(
        stream, calendar, l=args.levels,
        instrument=stream.profile, day=args.day,
    )
    if not rep.balanced():
        raise SamplingError("volume conservation failed on replay")
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lio.save_tensor(out, series.data)
    blocks = []
    pos = 0
    for start, end in calendar.intervals:
        n = (end - start) // calendar.period
        blocks.append((pos, pos + n))
        pos += n
    lio.write_kv(out.with_suffix(".meta.txt"), {"series": {
        "instrument": series.instrument,
        "day": series.day,
        "levels": series.levels,
        "snapshots": len(series),
        "blocks": _blocks_str(blocks),
        "flow_file": flow.name,
        "flow_sha256": lio.file_sha256(flow),
    }})
    return 0


def _split_blocks(blocks, cut):
    train_blocks, test_blocks = [], []
    for a, b in blocks:
        if b <= cut:
            train_blocks.append((a, b))
        elif a >= cut:
            test_blocks.append((a - cut, b - cut))
        else:
            train_blocks.append((a, cut))
            test_blocks.append((0, b - cut))
    return train_blocks, test_blocks


def _block_labels(series_raw, blocks, levels, label_cfg):
    """Per-snapshot trend labels (NaN where the lookahead is unavailable or
    would cross a session-block boundary)."""
    labels = np.full(series_raw.shape[0], np.nan)
    for a, b in blocks:
        mids = (series_raw[a:b, 0] + series_raw[a:b, 2 * levels]) / 2.0
        for t in range(b - a - label_cfg.horizon):
            labels[a + t] = label_trend(mids, t, label_cfg)
    return labels


def cmd_preprocess(args) -> int:
    series_path = _out_path(args.series)
    raw = lio.load_tensor(series_path)
    meta = lio.read_kv(series_path.with_suffix(".meta.txt"))["series"]
    levels = int(meta["levels"])
    blocks = _parse_blocks(meta["blocks"])
    train_raw, test_raw = split_train_test(raw)
    cut = train_raw.shape[0]
    train_blocks, test_blocks = _split_blocks(blocks, cut)

    fit = fit_group_stats if args.scheme == "global" else fit_feature_stats
    fit_data = train_raw if args.scope == "train" else raw
    stats = fit(fit_data, scope=args.scope, levels=levels)

    label_cfg = LabelConfig(horizon=args.horizon, delta=args.delta)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lio.save_tensor(out / "train_series.bin", normalize(train_raw, stats))
    lio.save_tensor(out / "test_series.bin", normalize(test_raw, stats))
    lio.save_tensor(
        out / "train_labels.bin",
        _block_labels(train_raw, train_blocks, levels, label_cfg),
    )
    lio.save_tensor(
        out / "test_labels.bin",
        _block_labels(test_raw, test_blocks, levels, label_cfg),
    )
    lio.save_norm_stats(out / "norm_stats.txt", stats)
    lio.write_kv(out / "meta.txt", {"preprocess": {
        "scheme": args.scheme,
        "scope": args.scope,
        "levels": levels,
        "instrument": meta["instrument"],
        "day": meta["day"],
        "label_horizon": label_cfg.horizon,
        "label_delta": repr(label_cfg.delta),
        "train_snapshots": train_raw.shape[0],
        "test_snapshots": test_raw.shape[0],
        "train_blocks": _blocks_str(train_blocks),
        "test_blocks": _blocks_str(test_blocks),
        "series_file": series_path.name,
        "series_sha256": lio.file_sha256(series_path),
    }})
    return 0


def _load_split(data_dir: Path, split: str, T: int, step: int):
    """Windows (segmented per session block) plus per-window labels."""
    meta = lio.read_kv(data_dir / "meta.txt")["preprocess"]
    series = lio.load_tensor(data_dir / f"{split}_series.bin")
    labels = lio.load_tensor(data_dir / f"{split}_labels.bin")
    blocks = _parse_blocks(meta[f"{split}_blocks"])
    instrument, day = meta["instrument"], int(meta["day"])
    windows = []
    for a, b in blocks:
        ws = make_windows(series[a:b], T=T, step=step,
                          origin=(instrument, day, a))
        for w in ws:
            t_last = w.origin[2] + T - 1
            lbl = labels[t_last]
            w.label = None if np.isnan(lbl) else int(lbl)
        windows.extend(ws)
    return windows, meta


def _prepare_task_data(windows, task, seed, mask_ratio=0.2):
    if task == PREDICTION:
        labeled = [w for w in windows if w.label is not None]
        return balance_classes(labeled, seed)
    if task == IMPUTATION:
        return [
            mask_for_imputation(w, ratio=mask_ratio, seed=seed + i)
            for i, w in enumerate(windows)
        ]
    return windows


def _loss_config(args) -> LossConfig:
    weights = (
        WeightProfile.uniform() if args.weights == "uniform"
        else WeightProfile.inverse_level()
    )
    return LossConfig(alpha=args.alpha, lam=args.lam, weights=weights)


def _model_arrays(model, head, T, levels):
    arrays = dict(model.params)
    arrays["meta.relu"] = np.array(float(model.relu))
    arrays["meta.input_dim"] = np.array(float(model.input_dim))
    arrays["meta.latent"] = np.array(float(model.latent))
    arrays["meta.T"] = np.array(float(T))
    arrays["meta.levels"] = np.array(float(levels))
    if head is not None:
        arrays.update(head.params)
        kinds = {RECONSTRUCTION: 0.0, PREDICTION: 1.0, IMPUTATION: 2.0}
        arrays["meta.head_kind"] = np.array(kinds[head.kind])
    return arrays


def _scalar(a) -> float:
    return float(np.asarray(a).ravel()[0])


def _model_from_arrays(arrays):
    model = LinearAutoencoder(
        input_dim=int(_scalar(arrays["meta.input_dim"])),
        latent=int(_scalar(arrays["meta.latent"])),
        relu=bool(_scalar(arrays["meta.relu"])),
    )
    for k in ("enc.W", "enc.b", "dec.W", "dec.b"):
        model.params[k] = arrays[k].copy()
    head = None
    if "head.W" in arrays:
        kinds = {0: RECONSTRUCTION, 1: PREDICTION, 2: IMPUTATION}
        kind = kinds[int(_scalar(arrays["meta.head_kind"]))]
        head = TaskHead(kind, latent=model.latent,
                        out_dim=arrays["head.W"].shape[1])
        head.params["head.W"] = arrays["head.W"].copy()
        head.params["head.b"] = arrays["head.b"].copy()
    T = int(_scalar(arrays["meta.T"]))
    levels = int(_scalar(arrays["meta.levels"]))
    return model, head, T, levels


def cmd_train(args) -> int:
    data_dir = _out_path(args.data)
    task = TASKS[args.task]
    windows, meta = _load_split(data_dir, "train", args.window, args.step)
    data = _prepare_task_data(windows, task, args.seed, args.mask_ratio)
    levels = int(meta["levels"])
    input_dim = args.window * 4 * levels

    model = LinearAutoencoder(input_dim=input_dim, latent=args.latent,
                              relu=args.relu, seed=args.seed)
    head = None
    if task == PREDICTION:
        head = TaskHead(PREDICTION, latent=args.latent, seed=args.seed + 1)
    elif task == IMPUTATION:
        head = TaskHead(IMPUTATION, latent=args.latent, out_dim=input_dim,
                        seed=args.seed + 1)
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        seed=args.seed, loss=_loss_config(args), task=task, levels=levels,
        clip_norm=args.clip_norm,
    )
    trace = train(model, head, data, cfg)

    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lio.save_checkpoint(out / "checkpoint.bin",
                        _model_arrays(model, head, args.window, levels))
    Path(out / "trace.txt").write_text(
        "".join(f"epoch={i} loss={v!r}\n" for i, v in enumerate(trace))
    )
    lio.write_kv(out / "config.txt", {"train": {
        "task": args.task, "epochs": args.epochs,
        "batch_size": args.batch_size, "lr": repr(args.lr),
        "seed": args.seed, "window": args.window, "step": args.step,
        "latent": args.latent, "relu": args.relu,
        "alpha": repr(args.alpha), "lam": repr(args.lam),
        "weights": args.weights, "mask_ratio": repr(args.mask_ratio),
        "data_dir": data_dir.name,
    }})
    return 0


def cmd_evaluate(args) -> int:
    data_dir = _out_path(args.data)
    arrays = lio.load_checkpoint(_out_path(args.checkpoint))
    model, head, T, levels = _model_from_arrays(arrays)
    windows, meta = _load_split(data_dir, args.split, T, args.step)
    cfg = _loss_config(args)

    lines = []
    if head is not None and head.kind == PREDICTION:
        usable = [w for w in windows if w.label is not None]
        preds = predict_labels(model, head, usable)
        labels = np.array([w.label for w in usable])
        stats = evaluate_classification(preds, labels)
        X = np.stack([w.data.ravel() for w in usable])
        logits = np.atleast_2d(head.forward(model.encode(X)))
        ce = float(np.mean([
            cross_entropy(logits[i], usable[i].label)
            for i in range(len(usable))
        ]))
        parts = [f"count={len(usable)}", f"ce={ce!r}",
                 f"accuracy={stats['accuracy']!r}",
                 f"macro_precision={stats['macro_precision']!r}",
                 f"macro_recall={stats['macro_recall']!r}"]
        for c in (-1, 0, 1):
            parts.append(f"precision[{c}]={stats['precision'][c]!r}")
            parts.append(f"recall[{c}]={stats['recall'][c]!r}")
        lines.append(" ".join(parts))
    else:
        masked_vals = None
        if head is not None and head.kind == IMPUTATION:
            data = _prepare_task_data(windows, IMPUTATION, args.seed,
                                      args.mask_ratio)
            X = np.stack([w.masked_input().ravel() for w in data])
            Y = np.atleast_2d(head.forward(model.encode(X)))
            from .metrics import masked_mse
            masked_vals = [
                masked_mse(w.data, Y[i].reshape(T, -1), w.mask)
                for i, w in enumerate(data)
            ]
            xs = [w.data for w in data]
            xhs = [Y[i].reshape(T, -1) for i in range(len(data))]
        else:
            X = np.stack([w.data.ravel() for w in windows])
            Y = np.atleast_2d(model.decode(model.encode(X)))
            xs = [w.data for w in windows]
            xhs = [Y[i].reshape(T, -1) for i in range(len(windows))]
        rep = report(xs, xhs, cfg, levels, masked=masked_vals)
        lines.append(" ".join(f"{k}={v!r}" for k, v in rep.as_items()))

    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    Path(out / "report.txt").write_text("\n".join(lines) + "\n")
    lio.write_kv(out / "config.txt", {"evaluate": {
        "checkpoint": Path(args.checkpoint).name,
        "checkpoint_sha256": lio.file_sha256(_out_path(args.checkpoint)),
        "data_dir": data_dir.name, "split": args.split,
        "seed": args.seed, "step": args.step,
    }})
    return 0


def cmd_transfer(args) -> int:
    arrays = lio.load_checkpoint(_out_path(args.checkpoint))
    model, head, T, levels = _model_from_arrays(arrays)
    if head is None or head.kind != PREDICTION:
        raise PreprocessError("transfer requires a prediction checkpoint")
    data_dir = _out_path(args.data)
    windows, meta = _load_split(data_dir, "train", T, args.step)
    data = _prepare_task_data(windows, PREDICTION, args.seed)

    test_windows, _ = _load_split(data_dir, "test", T, args.step)
    usable = [w for w in test_windows if w.label is not None]
    labels = np.array([w.label for w in usable])
    before = evaluate_classification(
        predict_labels(model, head, usable), labels
    )

    encoder_before = {k: model.params[k].copy()
                      for k in ("enc.W", "enc.b")}
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        seed=args.seed, task=PREDICTION, freeze_encoder=True, levels=levels,
    )
    finetune_frozen(model, head, data, cfg, budget=args.budget)
    for k, v in encoder_before.items():
        assert np.array_equal(model.params[k], v), "encoder changed"

    after = evaluate_classification(
        predict_labels(model, head, usable), labels
    )

    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # head-only delta checkpoint
    lio.save_checkpoint(out / "head_delta.bin", {
        "head.W": head.params["head.W"],
        "head.b": head.params["head.b"],
        "meta.head_kind": np.array(1.0),
        "meta.latent": np.array(float(model.latent)),
    })
    Path(out / "report.txt").write_text(
        f"budget={args.budget} "
        f"macro_recall_before={before['macro_recall']!r} "
        f"macro_recall_after={after['macro_recall']!r} "
        f"macro_precision_before={before['macro_precision']!r} "
        f"macro_precision_after={after['macro_precision']!r}\n"
    )
    lio.write_kv(out / "config.txt", {"transfer": {
        "checkpoint": Path(args.checkpoint).name,
        "budget": args.budget, "seed": args.seed,
        "lr": repr(args.lr), "batch_size": args.batch_size,
        "data_dir": data_dir.name,
    }})
    return 0


# -------------------------------------------------------------------- parser

def _add_loss_flags(p):
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--weights", choices=["inverse-level", "uniform"],
                   default="inverse-level")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lobkit",
        description="LOB benchmarking pipeline (synthetic flow -> book replay"
                    " -> preprocessing -> reference models)",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize one day of order flow")
    p.add_argument("--profile", choices=sorted(PROFILES), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build", help="replay flow into a sampled day series")
    p.add_argument("--flow", required=True)
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("preprocess",
                       help="split, normalize and label a day series")
    p.add_argument("--series", required=True)
    p.add_argument("--scheme", choices=["global", "feature"],
                   default="global")
    p.add_argument("--scope", choices=["train", "all"], default="train")
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--delta", type=float, default=0.001)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a reference model")
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=sorted(TASKS), required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--latent", type=int, default=256)
    p.add_argument("--relu", action="store_true")
    p.add_argument("--mask-ratio", type=float, default=0.2)
    p.add_argument("--clip-norm", type=float, default=None)
    _add_loss_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="write metric records for a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--mask-ratio", type=float, default=0.2)
    _add_loss_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("transfer",
                       help="frozen-encoder fine-tune on a target dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (lio.FormatError, PreprocessError, BookError, MetricError,
            SamplingError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
