"""Sweep planning and execution.

A sweep slides a domain window along one axis (or a grid over both), pretrains
one source model per window, transfers every source to every other window's
data, and scores every (source, target) pair. Jobs run sequentially in
manifest order with per-job seeds derived from (config seed, job key), so a
resumed run reproduces exactly what an uninterrupted run would have written.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..dataspec import DomainWindow, MasterSpec, generate_master, split, subset
from ..nnkernel import cnn_specs, load_checkpoint, save_checkpoint
from ..tmetrics import score_pair
from ..xfer import TrainMode, TrainRecipe, evaluate_top1, fine_tune, head_retrain, pretrain
from .records import append_record, canonicalize_records, job_key, load_records

AXES = ("SNR", "FO", "SNR_FO")
TRANSFER_METHODS = ("HEAD", "FINETUNE")

DESK_CLASSES = ("BPSK", "QPSK", "QAM16", "GFSK5k", "FM-NB", "AWGN")
PAPER_CLASSES = None  # filled lazily from the synth registry


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "SNR"
    # window construction; the non-swept axis is pinned to a fixed range
    snr_width: float = 10.0
    snr_step: float = 5.0
    snr_span: tuple = (-10.0, 20.0)
    fo_width: float = 0.05
    fo_step: float = 0.025
    fo_span: tuple = (-0.075, 0.075)
    fixed_fo: tuple = (-0.05, 0.05)  # FO range during SNR sweeps
    fixed_snr: tuple = (0.0, 20.0)  # SNR range during FO sweeps
    # data
    classes: tuple = DESK_CLASSES
    master_per_class: int = 2000
    frame_len: int = 128
    master_snr: tuple = (-10.0, 20.0)
    master_fo: tuple = (-0.10, 0.10)
    train_per_class: int = 200
    val_per_class: int = 40
    test_per_class: int = 100
    # optional larger split for pretraining each window's own model; when unset
    # the transfer split doubles as the pretraining split
    pretrain_train_per_class: int = None
    pretrain_val_per_class: int = None
    # model and recipes
    conv_channels: tuple = (64, 32)
    hidden: int = 32
    dropout: float = 0.5
    epochs: int = 15  # pretraining
    transfer_epochs: int = 15
    batch: int = 64
    methods: tuple = ("HEAD",)
    seed: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        bad = [m for m in self.methods if m not in TRANSFER_METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {TRANSFER_METHODS}")
        for name in ("snr_width", "snr_step", "fo_width", "fo_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        pre = (self.pretrain_train_per_class, self.pretrain_val_per_class)
        if (pre[0] is None) != (pre[1] is None):
            raise ValueError("pretrain train/val per-class sizes must be set together")
        if pre[0] is not None and (pre[0] < 1 or pre[1] < 1):
            raise ValueError("pretrain per-class sizes must be >= 1")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))

    @property
    def pretrain_sizes(self):
        if self.pretrain_train_per_class is None:
            return self.train_per_class, self.val_per_class
        return self.pretrain_train_per_class, self.pretrain_val_per_class

    @classmethod
    def paper_snr(cls, **over):
        over.setdefault("classes", _paper_classes())
        return cls(axis="SNR", snr_width=5.0, snr_step=1.0, snr_span=(-10.0, 20.0), **over)

    @classmethod
    def paper_fo(cls, **over):
        over.setdefault("classes", _paper_classes())
        return cls(axis="FO", fo_width=0.05, fo_step=0.005, fo_span=(-0.10, 0.10), **over)

    @classmethod
    def paper_snr_fo(cls, **over):
        over.setdefault("classes", _paper_classes())
        return cls(
            axis="SNR_FO",
            snr_width=10.0,
            snr_step=5.0,
            snr_span=(-10.0, 20.0),
            fo_width=0.10,
            fo_step=0.025,
            fo_span=(-0.10, 0.10),
            **over,
        )


def _paper_classes():
    global PAPER_CLASSES
    if PAPER_CLASSES is None:
        from ..sigsynth import CLASS_NAMES

        PAPER_CLASSES = tuple(CLASS_NAMES)
    return PAPER_CLASSES


@dataclass(frozen=True)
class SweepPlan:
    config: SweepConfig
    windows: tuple  # DomainWindow per source/target domain
    jobs: tuple  # (source label, target label, method), diagonal excluded

    @property
    def ordered_keys(self):
        """Canonical record order: SELF rows, then the transfer manifest."""
        keys = [job_key("SELF", w.label, w.label) for w in self.windows]
        keys += [job_key(m, s, t) for s, t, m in self.jobs]
        return keys


def _axis_positions(span, width, step, name):
    lo, hi = float(span[0]), float(span[1])
    if width > hi - lo + 1e-12:
        raise ValueError(f"{name}: window width {width} exceeds span {span}")
    count_f = (hi - lo - width) / step
    count = int(round(count_f))
    if abs(count_f - count) > 1e-9:
        raise ValueError(
            f"{name}: span {span} minus width {width} is not a whole number of steps {step}"
        )
    # rounding keeps float accumulation noise out of window labels and bounds
    return [round(lo + i * step, 12) for i in range(count + 1)]


def plan_sweep(config: SweepConfig) -> SweepPlan:
    """Windows along the configured axis plus the transfer-job manifest."""
    if config.axis == "SNR":
        positions = _axis_positions(config.snr_span, config.snr_width, config.snr_step, "snr")
        windows = [
            DomainWindow(snr_db=(p, round(p + config.snr_width, 12)), fo_frac=config.fixed_fo)
            for p in positions
        ]
    elif config.axis == "FO":
        positions = _axis_positions(config.fo_span, config.fo_width, config.fo_step, "fo")
        windows = [
            DomainWindow(snr_db=config.fixed_snr, fo_frac=(p, round(p + config.fo_width, 12)))
            for p in positions
        ]
    else:  # SNR_FO: full grid, SNR-major
        snr_pos = _axis_positions(config.snr_span, config.snr_width, config.snr_step, "snr")
        fo_pos = _axis_positions(config.fo_span, config.fo_width, config.fo_step, "fo")
        windows = [
            DomainWindow(
                snr_db=(s, round(s + config.snr_width, 12)),
                fo_frac=(f, round(f + config.fo_width, 12)),
            )
            for s in snr_pos
            for f in fo_pos
        ]
    labels = [w.label for w in windows]
    if len(set(labels)) != len(labels):
        raise ValueError("window labels collide; widen steps or spans")
    jobs = [
        (src.label, tgt.label, method)
        for src in windows
        for tgt in windows
        if src.label != tgt.label
        for method in config.methods
    ]
    return SweepPlan(config=config, windows=tuple(windows), jobs=tuple(jobs))


def _job_seed(base_seed: int, key: str) -> int:
    return (int(base_seed) ^ zlib.crc32(key.encode())) & 0x7FFFFFFF


class WindowSets(NamedTuple):
    pre_train: object  # pretraining split (may alias the transfer split)
    pre_val: object
    train: object  # transfer-training split; also the scoring dataset
    val: object
    test: object


def _window_sets(master, window, config) -> WindowSets:
    """Deterministic splits for one window."""
    tr, va, te = config.train_per_class, config.val_per_class, config.test_per_class
    crc = zlib.crc32(window.label.encode())
    if config.pretrain_train_per_class is None:
        pool = subset(master, window, tr + va + te, np.random.default_rng([config.seed, crc, 0]))
        train, val, test = split(pool, tr, va, te, np.random.default_rng([config.seed, crc, 1]))
        return WindowSets(train, val, train, val, test)
    ptr, pva = config.pretrain_train_per_class, config.pretrain_val_per_class
    pool = subset(
        master, window, ptr + pva + tr + va + te, np.random.default_rng([config.seed, crc, 0])
    )
    pre_train, pre_val, rest = split(
        pool, ptr, pva, tr + va + te, np.random.default_rng([config.seed, crc, 1])
    )
    train, val, test = split(rest, tr, va, te, np.random.default_rng([config.seed, crc, 2]))
    return WindowSets(pre_train, pre_val, train, val, test)


def run_sweep(config: SweepConfig, workdir, echo=None) -> dict:
    """Execute a sweep end to end; resumable and deterministic.

    Existing record rows are honored (their jobs are skipped); pretrained
    checkpoints found on disk are reused. Job failures become error rows and
    the sweep continues.
    """
    say = echo if echo is not None else (lambda msg: None)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    plan = plan_sweep(config)
    csv_path = workdir / "records.csv"
    done = {job_key(r) for r in load_records(csv_path)}
    with open(workdir / "windows.json", "w") as fh:
        json.dump(
            [
                {"label": w.label, "snr_db": list(w.snr_db), "fo_frac": list(w.fo_frac)}
                for w in plan.windows
            ],
            fh,
            indent=1,
        )
        fh.write("\n")

    say(f"building master dataset ({len(config.classes)} classes x {config.master_per_class})")
    master = generate_master(
        MasterSpec(
            classes=config.classes,
            per_class=config.master_per_class,
            frame_len=config.frame_len,
            snr_range_db=config.master_snr,
            fo_range_frac=config.master_fo,
            seed=config.seed,
        )
    )
    sets = {}
    for window in plan.windows:
        sets[window.label] = _window_sets(master, window, config)

    specs = cnn_specs(
        len(config.classes),
        conv_channels=config.conv_channels,
        hidden=config.hidden,
        dropout_rate=config.dropout,
    )
    ckpt_dir = workdir / "checkpoints"
    sources = {}
    for i, window in enumerate(plan.windows):
        path = ckpt_dir / f"win{i:02d}.npz"
        if path.exists():
            sources[window.label] = load_checkpoint(path)
            say(f"[{i + 1}/{len(plan.windows)}] reusing checkpoint {path.name}")
            continue
        say(f"[{i + 1}/{len(plan.windows)}] pretraining {window.label}")
        ws = sets[window.label]
        recipe = TrainRecipe(
            TrainMode.PRETRAIN,
            epochs=config.epochs,
            batch=config.batch,
            seed=_job_seed(config.seed, f"PRETRAIN:{window.label}"),
        )
        ckpt = pretrain(specs, ws.pre_train, ws.pre_val, recipe, label=window.label)
        save_checkpoint(ckpt, path)
        sources[window.label] = ckpt

    score_cache = {}

    def scores_for(src_label, tgt_label):
        if (src_label, tgt_label) not in score_cache:
            s_leep, s_logme = score_pair(
                sources[src_label], sets[tgt_label].train,
                source_id=src_label, target_id=tgt_label,
            )
            score_cache[(src_label, tgt_label)] = (s_leep.value, s_logme.value)
        return score_cache[(src_label, tgt_label)]

    def record(row):
        append_record(csv_path, row)

    # diagonal reference rows: each source evaluated on its own window
    for window in plan.windows:
        label = window.label
        key = job_key("SELF", label, label)
        if key in done:
            continue
        say(f"self reference {label}")
        row = {
            "source": label,
            "target": label,
            "method": "SELF",
            "seed": _job_seed(config.seed, key),
            "n_train": config.pretrain_sizes[0] * len(config.classes),
            "n_test": config.test_per_class * len(config.classes),
        }
        try:
            row["accuracy"] = evaluate_top1(sources[label], sets[label].test)
            row["leep"], row["logme"] = scores_for(label, label)
            row.update(status="ok", error="")
        except Exception as exc:  # sweep must outlive job failures
            row.update(accuracy="", leep="", logme="", status="error", error=str(exc))
        record(row)

    for src_label, tgt_label, method in plan.jobs:
        key = job_key(method, src_label, tgt_label)
        if key in done:
            continue
        say(f"transfer {key}")
        seed = _job_seed(config.seed, key)
        ws = sets[tgt_label]
        train, val, test = ws.train, ws.val, ws.test
        row = {
            "source": src_label,
            "target": tgt_label,
            "method": method,
            "seed": seed,
            "n_train": train.n_examples,
            "n_test": test.n_examples,
        }
        try:
            if method == "HEAD":
                recipe = TrainRecipe(
                    TrainMode.HEAD_RETRAIN,
                    epochs=config.transfer_epochs,
                    batch=config.batch,
                    seed=seed,
                )
                moved = head_retrain(sources[src_label], train, val, recipe, label=tgt_label)
            else:
                recipe = TrainRecipe(
                    TrainMode.FINE_TUNE,
                    epochs=config.transfer_epochs,
                    batch=config.batch,
                    seed=seed,
                )
                moved = fine_tune(sources[src_label], train, val, recipe, label=tgt_label)
            row["accuracy"] = evaluate_top1(moved, test)
            row["leep"], row["logme"] = scores_for(src_label, tgt_label)
            row.update(status="ok", error="")
        except Exception as exc:
            row.update(accuracy="", leep="", logme="", status="error", error=str(exc))
        record(row)

    canonicalize_records(csv_path, plan.ordered_keys)
    records = load_records(csv_path)
    return {
        "csv": csv_path,
        "records": records,
        "windows": plan.windows,
        "checkpoints": ckpt_dir,
        "ok": all(r["status"] == "ok" for r in records),
    }
