"""Command line front end for the full pipeline.

Every command accepts --seed and --config FILE (a JSON object). Precedence is
built-in defaults, then config file entries, then explicitly passed flags.
Commands exit nonzero on any failure; `sweep` additionally exits 1 when any
job inside an otherwise-completed sweep recorded an error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from ..dataspec import DomainWindow, MasterSpec, generate_master, read_sigmf, write_sigmf
from ..dataspec import split as split_dataset
from ..dataspec import subset as window_subset
from ..nnkernel import cnn_specs, load_checkpoint, save_checkpoint
from ..statfit import fit_predictor, load_predictor, predict_accuracy, save_predictor
from ..tmetrics import score_pair
from ..xfer import TrainMode, TrainRecipe, evaluate_top1, fine_tune, head_retrain, pretrain
from .records import load_records, to_transfer_records
from .reports import emit_heatmap, emit_scatter_fit
from .sweep import DESK_CLASSES, SweepConfig, plan_sweep, run_sweep


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise click.ClickException("config file must hold a JSON object")
    return data


def _merge(defaults: dict, config_path, **flags) -> dict:
    """defaults < config file < flags the user actually passed (non-None)."""
    merged = dict(defaults)
    data = _load_config(config_path)
    unknown = sorted(set(data) - set(defaults))
    if unknown:
        raise click.ClickException(f"unknown config keys: {', '.join(unknown)}")
    merged.update(data)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _names(value) -> tuple:
    """Comma-separated string or JSON list -> tuple of names."""
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    return tuple(part.strip() for part in str(value).split(",") if part.strip())


def _ints(value) -> tuple:
    return tuple(int(v) for v in _names(value))


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise click.ClickException(f"--{key.replace('_', '-')} is required (flag or config)")
    return cfg[key]


def seed_option(fn):
    return click.option("--seed", type=int, default=None, help="Base RNG seed.")(fn)


def config_option(fn):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON config file; flags override its entries.",
    )(fn)


@click.group()
def main():
    """Modulation-classification transfer pipeline.

    Synthesize datasets, pretrain sources, transfer to new domains, score
    transferability, fit accuracy predictors, and run full domain sweeps.
    """


@main.command()
@click.option("--classes", default=None, help="Comma-separated class names.")
@click.option("--per-class", type=int, default=None, help="Examples per class.")
@click.option("--frame-len", type=int, default=None)
@click.option("--snr-lo", type=float, default=None, help="Master SNR range low edge (dB).")
@click.option("--snr-hi", type=float, default=None)
@click.option("--fo-lo", type=float, default=None, help="Master FO range low edge (fraction).")
@click.option("--fo-hi", type=float, default=None)
@seed_option
@config_option
@click.option("--out", required=True, type=click.Path(), help="Output dataset directory.")
def generate(classes, per_class, frame_len, snr_lo, snr_hi, fo_lo, fo_hi, seed, config_path, out):
    """Synthesize a labeled master dataset and write it as SigMF recordings."""
    defaults = {
        "classes": DESK_CLASSES,
        "per_class": 2000,
        "frame_len": 128,
        "snr_lo": -10.0,
        "snr_hi": 20.0,
        "fo_lo": -0.10,
        "fo_hi": 0.10,
        "seed": 0,
    }
    cfg = _merge(
        defaults,
        config_path,
        classes=classes,
        per_class=per_class,
        frame_len=frame_len,
        snr_lo=snr_lo,
        snr_hi=snr_hi,
        fo_lo=fo_lo,
        fo_hi=fo_hi,
        seed=seed,
    )
    spec = MasterSpec(
        classes=_names(cfg["classes"]),
        per_class=cfg["per_class"],
        frame_len=cfg["frame_len"],
        snr_range_db=(cfg["snr_lo"], cfg["snr_hi"]),
        fo_range_frac=(cfg["fo_lo"], cfg["fo_hi"]),
        seed=cfg["seed"],
    )
    handle = generate_master(spec)
    write_sigmf(handle, out)
    click.echo(f"wrote {handle.n_examples} examples ({len(spec.classes)} classes) to {out}")


@main.command(name="subset")
@click.option("--master", "master_path", required=True, type=click.Path(exists=True))
@click.option("--snr-lo", type=float, default=None, help="Window SNR low edge (dB).")
@click.option("--snr-hi", type=float, default=None)
@click.option("--fo-lo", type=float, default=None, help="Window FO low edge (fraction).")
@click.option("--fo-hi", type=float, default=None)
@click.option("--per-class", type=int, default=None, help="Examples per class to draw.")
@click.option("--train", type=int, default=None, help="Optional split: train per class.")
@click.option("--val", type=int, default=None, help="Optional split: val per class.")
@click.option("--test", type=int, default=None, help="Optional split: test per class.")
@seed_option
@config_option
@click.option("--out", required=True, type=click.Path())
def subset_cmd(master_path, snr_lo, snr_hi, fo_lo, fo_hi, per_class, train, val, test, seed,
               config_path, out):
    """Draw a per-class subset inside a domain window; optionally split it.

    With --train/--val/--test the subset is split and written to train/, val/
    and test/ under --out; otherwise the whole subset lands in --out.
    """
    defaults = {
        "snr_lo": -10.0,
        "snr_hi": 20.0,
        "fo_lo": -0.10,
        "fo_hi": 0.10,
        "per_class": None,
        "train": None,
        "val": None,
        "test": None,
        "seed": 0,
    }
    cfg = _merge(
        defaults,
        config_path,
        snr_lo=snr_lo,
        snr_hi=snr_hi,
        fo_lo=fo_lo,
        fo_hi=fo_hi,
        per_class=per_class,
        train=train,
        val=val,
        test=test,
        seed=seed,
    )
    per = _require(cfg, "per_class")
    master = read_sigmf(master_path)
    window = DomainWindow(snr_db=(cfg["snr_lo"], cfg["snr_hi"]), fo_frac=(cfg["fo_lo"], cfg["fo_hi"]))
    pool = window_subset(master, window, per, np.random.default_rng([cfg["seed"], 0]))
    counts = (cfg["train"], cfg["val"], cfg["test"])
    if any(c is not None for c in counts):
        if any(c is None for c in counts):
            raise click.ClickException("--train/--val/--test must be given together")
        parts = split_dataset(pool, *counts, np.random.default_rng([cfg["seed"], 1]))
        out = Path(out)
        for name, part in zip(("train", "val", "test"), parts):
            write_sigmf(part, out / name)
            click.echo(f"wrote {part.n_examples} examples to {out / name}")
    else:
        write_sigmf(pool, out)
        click.echo(f"wrote {pool.n_examples} examples to {out}")


@main.command(name="pretrain")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True))
@click.option("--conv-channels", default=None, help="Comma pair, e.g. 64,32.")
@click.option("--hidden", type=int, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--lr", type=float, default=None, help="Override the mode default of 0.001.")
@click.option("--label", default=None, help="Provenance label for the checkpoint.")
@seed_option
@config_option
@click.option("--out", required=True, type=click.Path(), help="Checkpoint output path (.npz).")
def pretrain_cmd(train_path, val_path, conv_channels, hidden, dropout, epochs, batch, lr, label,
                 seed, config_path, out):
    """Train a source model from scratch; keeps the lowest-val-loss epoch."""
    defaults = {
        "conv_channels": (64, 32),
        "hidden": 32,
        "dropout": 0.5,
        "epochs": 15,
        "batch": 64,
        "lr": None,
        "label": None,
        "seed": 0,
    }
    cfg = _merge(
        defaults,
        config_path,
        conv_channels=conv_channels,
        hidden=hidden,
        dropout=dropout,
        epochs=epochs,
        batch=batch,
        lr=lr,
        label=label,
        seed=seed,
    )
    train = read_sigmf(train_path)
    val = read_sigmf(val_path)
    specs = cnn_specs(
        len(train.class_names),
        conv_channels=_ints(cfg["conv_channels"]),
        hidden=cfg["hidden"],
        dropout_rate=cfg["dropout"],
    )
    recipe = TrainRecipe(
        TrainMode.PRETRAIN, lr=cfg["lr"], epochs=cfg["epochs"], batch=cfg["batch"], seed=cfg["seed"]
    )
    ckpt = pretrain(specs, train, val, recipe, label=cfg["label"])
    save_checkpoint(ckpt, out)
    click.echo(
        f"saved {out} (best epoch {ckpt.provenance['epoch']}, "
        f"val loss {ckpt.provenance['val_loss']:.4f})"
    )


@main.command()
@click.option("--source", "source_path", required=True, type=click.Path(exists=True))
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", type=click.Path(exists=True), default=None,
              help="Optional test set; prints top-1 accuracy after transfer.")
@click.option("--method", type=click.Choice(["HEAD", "FINETUNE"]), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--lr", type=float, default=None, help="Override the mode default.")
@click.option("--warm-start/--no-warm-start", "warm", default=None,
              help="HEAD only: keep the source head instead of reinitializing.")
@click.option("--label", default=None)
@seed_option
@config_option
@click.option("--out", required=True, type=click.Path())
def transfer(source_path, train_path, val_path, test_path, method, epochs, batch, lr, warm, label,
             seed, config_path, out):
    """Adapt a pretrained checkpoint to target-domain data."""
    defaults = {
        "method": "HEAD",
        "epochs": 15,
        "batch": 64,
        "lr": None,
        "warm_start": False,
        "label": None,
        "seed": 0,
    }
    cfg = _merge(
        defaults,
        config_path,
        method=method,
        epochs=epochs,
        batch=batch,
        lr=lr,
        warm_start=warm,
        label=label,
        seed=seed,
    )
    source = load_checkpoint(source_path)
    train = read_sigmf(train_path)
    val = read_sigmf(val_path)
    if cfg["method"] == "HEAD":
        recipe = TrainRecipe(TrainMode.HEAD_RETRAIN, lr=cfg["lr"], epochs=cfg["epochs"],
                             batch=cfg["batch"], seed=cfg["seed"])
        moved = head_retrain(source, train, val, recipe,
                             warm_start=bool(cfg["warm_start"]), label=cfg["label"])
    else:
        recipe = TrainRecipe(TrainMode.FINE_TUNE, lr=cfg["lr"], epochs=cfg["epochs"],
                             batch=cfg["batch"], seed=cfg["seed"])
        moved = fine_tune(source, train, val, recipe, label=cfg["label"])
    save_checkpoint(moved, out)
    click.echo(
        f"saved {out} (best epoch {moved.provenance['epoch']}, "
        f"val loss {moved.provenance['val_loss']:.4f})"
    )
    if test_path:
        acc = evaluate_top1(moved, read_sigmf(test_path))
        click.echo(f"test top-1 accuracy: {acc:.4f}")


@main.command()
@click.option("--source", "source_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--batch", type=int, default=None)
@seed_option
@config_option
@click.option("--out", type=click.Path(), default=None, help="Optional JSON output path.")
def score(source_path, target_path, batch, seed, config_path, out):
    """LEEP and LogME transferability of a checkpoint on a labeled dataset.

    --seed is accepted for interface uniformity; scoring is deterministic.
    """
    defaults = {"batch": 256, "seed": 0}
    cfg = _merge(defaults, config_path, batch=batch, seed=seed)
    source = load_checkpoint(source_path)
    target = read_sigmf(target_path)
    leep_score, logme_score = score_pair(source, target, batch=cfg["batch"])
    payload = {
        "leep": leep_score.value,
        "logme": logme_score.value,
        "n_examples": leep_score.n_examples,
        "source_id": leep_score.source_id,
        "target_id": leep_score.target_id,
    }
    text = json.dumps(payload, indent=1, sort_keys=True)
    click.echo(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--metric", type=click.Choice(["LEEP", "LOGME"], case_sensitive=False), default=None)
@click.option("--method", type=click.Choice(["HEAD", "FINETUNE"]), default=None)
@seed_option
@config_option
@click.option("--out", required=True, type=click.Path(), help="Predictor JSON output path.")
def fit(records_path, metric, method, seed, config_path, out):
    """Fit a score-to-accuracy linear predictor from sweep records.

    --seed is accepted for interface uniformity; fitting is deterministic.
    """
    defaults = {"metric": "LEEP", "method": "HEAD", "seed": 0}
    cfg = _merge(defaults, config_path, metric=metric, method=method, seed=seed)
    rows = to_transfer_records(load_records(records_path))
    predictor = fit_predictor(rows, cfg["metric"].upper(), method=cfg["method"])
    save_predictor(predictor, out)
    click.echo(
        f"fit {predictor.metric}/{cfg['method']} on {predictor.n_fit} records: "
        f"accuracy = {predictor.beta0:.4f} * score + {predictor.beta1:.4f} "
        f"(mean |resid| {predictor.mean_abs_residual:.4f}) -> {out}"
    )


@main.command()
@click.option("--predictor", "predictor_path", required=True, type=click.Path(exists=True))
@click.option("--score", "score_value", required=True, type=float)
@click.option("--confidence", type=float, default=None, help="One of 0.90, 0.95, 0.99.")
@seed_option
@config_option
@click.option("--out", type=click.Path(), default=None, help="Optional JSON output path.")
def predict(predictor_path, score_value, confidence, seed, config_path, out):
    """Predicted accuracy interval for a transferability score.

    --seed is accepted for interface uniformity; prediction is deterministic.
    """
    defaults = {"confidence": 0.95, "seed": 0}
    cfg = _merge(defaults, config_path, confidence=confidence, seed=seed)
    predictor = load_predictor(predictor_path)
    p = predict_accuracy(predictor, score_value, confidence=cfg["confidence"])
    payload = {
        "estimate": p.estimate,
        "lower": p.lower,
        "upper": p.upper,
        "clamped": p.clamped,
        "confidence": cfg["confidence"],
    }
    text = json.dumps(payload, indent=1, sort_keys=True)
    click.echo(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")


@main.command()
@click.option("--axis", type=click.Choice(["SNR", "FO", "SNR_FO"]), default=None)
@click.option("--classes", default=None, help="Comma-separated class names.")
@click.option("--master-per-class", type=int, default=None)
@click.option("--train-per-class", type=int, default=None)
@click.option("--val-per-class", type=int, default=None)
@click.option("--test-per-class", type=int, default=None)
@click.option("--pretrain-train-per-class", type=int, default=None,
              help="Larger per-class split for window pretraining (set with its val twin).")
@click.option("--pretrain-val-per-class", type=int, default=None)
@click.option("--epochs", type=int, default=None, help="Pretraining epochs per window.")
@click.option("--transfer-epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--methods", default=None, help="Comma subset of HEAD,FINETUNE.")
@click.option("--plan-only", is_flag=True, default=False,
              help="Print the window list and job count, then exit.")
@seed_option
@config_option
@click.option("--workdir", required=True, type=click.Path())
def sweep(axis, classes, master_per_class, train_per_class, val_per_class, test_per_class,
          pretrain_train_per_class, pretrain_val_per_class, epochs,
          transfer_epochs, batch, methods, plan_only, seed, config_path, workdir):
    """Run a full domain sweep: pretrain, transfer, score, record.

    Window geometry (widths, steps, spans, fixed ranges) and model knobs are
    settable through --config; exits 1 if any job recorded an error.
    """
    defaults = asdict(SweepConfig())
    cfg = _merge(
        defaults,
        config_path,
        axis=axis,
        classes=_names(classes) if classes is not None else None,
        master_per_class=master_per_class,
        train_per_class=train_per_class,
        val_per_class=val_per_class,
        test_per_class=test_per_class,
        pretrain_train_per_class=pretrain_train_per_class,
        pretrain_val_per_class=pretrain_val_per_class,
        epochs=epochs,
        transfer_epochs=transfer_epochs,
        batch=batch,
        methods=_names(methods) if methods is not None else None,
        seed=seed,
    )
    for key in ("snr_span", "fo_span", "fixed_fo", "fixed_snr", "master_snr", "master_fo",
                "conv_channels", "classes", "methods"):
        cfg[key] = tuple(cfg[key])
    try:
        config = SweepConfig(**cfg)
        plan = plan_sweep(config)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{config.axis} sweep: {len(plan.windows)} windows, {len(plan.jobs)} transfer jobs")
    if plan_only:
        for window in plan.windows:
            click.echo(f"  {window.label}")
        return
    result = run_sweep(config, workdir, echo=click.echo)
    n_err = sum(1 for r in result["records"] if r["status"] != "ok")
    click.echo(f"records: {len(result['records'])} rows -> {result['csv']} ({n_err} errors)")
    if not result["ok"]:
        sys.exit(1)


@main.command()
@click.option("--workdir", required=True, type=click.Path(exists=True),
              help="Sweep directory holding records.csv and windows.json.")
@click.option("--method", type=click.Choice(["HEAD", "FINETUNE"]), default=None)
@click.option("--out-dir", type=click.Path(), default=None, help="Default: WORKDIR/reports.")
@seed_option
@config_option
def report(workdir, method, out_dir, seed, config_path):
    """Emit the accuracy heatmap and score-vs-accuracy fits for a sweep.

    --seed is accepted for interface uniformity; reporting is deterministic.
    """
    defaults = {"method": "HEAD", "out_dir": None, "seed": 0}
    cfg = _merge(defaults, config_path, method=method, out_dir=out_dir, seed=seed)
    workdir = Path(workdir)
    method = cfg["method"]
    out = Path(cfg["out_dir"]) if cfg["out_dir"] else workdir / "reports"
    records = load_records(workdir / "records.csv")
    if not records:
        raise click.ClickException(f"no records found in {workdir / 'records.csv'}")
    windows_file = workdir / "windows.json"
    if not windows_file.exists():
        raise click.ClickException(f"missing {windows_file}; run the sweep first")
    labels = [entry["label"] for entry in json.loads(windows_file.read_text())]
    path = out / f"heatmap_{method.lower()}.csv"
    matrix, _ = emit_heatmap(records, method, labels, path)
    filled = int(np.sum(~np.isnan(matrix)))
    click.echo(f"heatmap: {filled}/{matrix.size} cells -> {path}")
    for metric in ("LEEP", "LOGME"):
        prefix = out / f"{metric.lower()}_{method.lower()}"
        summary = emit_scatter_fit(records, metric, method, prefix)
        click.echo(
            f"{metric}: n={summary['n']} r={summary['pearson_r']:.3f} "
            f"tau={summary['weighted_tau']:.3f} -> {prefix}_fit.json"
        )


@main.command()
@click.option("--library", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of source checkpoints (.npz) to serve.")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@seed_option
@config_option
def serve(library, host, port, seed, config_path):
    """Run the HTTP scoring service over a checkpoint library.

    --seed is accepted for interface uniformity.
    """
    defaults = {"library": ".", "host": "127.0.0.1", "port": 8000, "seed": 0}
    cfg = _merge(defaults, config_path, library=library, host=host, port=port, seed=seed)
    import uvicorn

    from ..service import create_app

    app = create_app(cfg["library"])
    uvicorn.run(app, host=cfg["host"], port=cfg["port"])


if __name__ == "__main__":
    main()
