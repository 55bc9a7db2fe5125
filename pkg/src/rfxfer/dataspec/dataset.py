"""In-memory datasets: master generation, windowed subsets, disjoint splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..sigsynth import (
    apply_awgn,
    apply_fo,
    draw_params,
    make_modclass,
    synth_analog,
    synth_awgn_class,
    synth_fsk,
    synth_linear,
)
from ..sigsynth.frame import IQFrame
from ..sigsynth.registry import Family, class_def
from .spec import DomainWindow, ExampleMeta, MasterSpec


class ShortfallError(ValueError):
    """Raised when a class cannot supply the requested number of examples."""


@dataclass
class Dataset:
    """Frames plus aligned labels and metadata.

    frames: float32 array of shape (n, 2, frame_len); labels index into
    class_names; metas[i] describes frames[i].
    """

    frames: np.ndarray
    labels: np.ndarray
    metas: list
    class_names: tuple
    snr_range_db: tuple
    fo_range_frac: tuple
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        if self.frames.ndim != 3 or self.frames.shape[1] != 2:
            raise ValueError(f"frames must be (n, 2, N), got {self.frames.shape}")
        if len(self.labels) != len(self.frames) or len(self.metas) != len(self.frames):
            raise ValueError("frames, labels, and metas must align")

    @property
    def n_examples(self) -> int:
        return len(self.frames)

    @property
    def frame_len(self) -> int:
        return self.frames.shape[2]

    def class_indices(self, class_idx: int) -> np.ndarray:
        return np.nonzero(self.labels == class_idx)[0]

    def per_class_counts(self) -> dict:
        return {
            name: int(np.sum(self.labels == i)) for i, name in enumerate(self.class_names)
        }

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            frames=self.frames[indices].copy(),
            labels=self.labels[indices].copy(),
            metas=[self.metas[i] for i in indices],
            class_names=self.class_names,
            snr_range_db=self.snr_range_db,
            fo_range_frac=self.fo_range_frac,
            extra=dict(self.extra),
        )


def _example_seed(master_seed: int, class_idx: int, example_idx: int) -> int:
    ss = np.random.SeedSequence([master_seed, class_idx, example_idx])
    return int(ss.generate_state(1, np.uint64)[0])


def _synth_example(name: str, frame_len: int, seed: int, snr_range, fo_range):
    """One impaired example. The draw order (params, sps, snr, fo, phase0,
    then synthesis, then noise) is fixed so stored seeds regenerate frames."""
    rng = np.random.default_rng(seed)
    d = class_def(name)
    params = draw_params(name, rng)
    mod = make_modclass(name, params)

    if d.family in (Family.LINEAR, Family.FSK):
        sps = int(rng.integers(2, 4))
    else:
        sps = 1
    snr_db = float(rng.uniform(*snr_range))
    fo_frac = float(rng.uniform(*fo_range))
    phase0 = float(rng.uniform(0.0, 2.0 * np.pi))

    if d.family is Family.LINEAR:
        n_symbols = math.ceil(frame_len / sps)
        clean = synth_linear(mod, n_symbols, sps, rng)
    elif d.family is Family.FSK:
        n_symbols = math.ceil(frame_len / sps)
        clean = synth_fsk(mod, n_symbols, sps, rng)
    elif d.family is Family.ANALOG:
        clean = synth_analog(mod, frame_len, rng)
    else:
        clean = synth_awgn_class(frame_len, rng)

    if clean.n < frame_len:
        raise ValueError(f"{name}: synthesized {clean.n} samples, frame needs {frame_len}")
    clean = IQFrame(clean.samples[:, :frame_len])
    impaired = apply_awgn(apply_fo(clean, fo_frac, phase0), snr_db, rng)

    meta = ExampleMeta(
        class_name=name,
        snr_db=snr_db,
        fo_frac=fo_frac,
        sps=sps,
        params={**params, "phase0": phase0},
        seed=seed,
    )
    return impaired.samples.astype(np.float32), meta


def generate_master(spec: MasterSpec) -> Dataset:
    """Build the master dataset: per_class examples per class, SNR/FO drawn
    uniformly from the master ranges, reproducible from spec.seed."""
    n_total = len(spec.classes) * spec.per_class
    frames = np.empty((n_total, 2, spec.frame_len), dtype=np.float32)
    labels = np.empty(n_total, dtype=np.int64)
    metas = []
    row = 0
    for ci, name in enumerate(spec.classes):
        for ei in range(spec.per_class):
            seed = _example_seed(spec.seed, ci, ei)
            frame, meta = _synth_example(
                name, spec.frame_len, seed, spec.snr_range_db, spec.fo_range_frac
            )
            frames[row] = frame
            labels[row] = ci
            metas.append(meta)
            row += 1
    return Dataset(
        frames=frames,
        labels=labels,
        metas=metas,
        class_names=spec.classes,
        snr_range_db=spec.snr_range_db,
        fo_range_frac=spec.fo_range_frac,
        extra={"master_seed": spec.seed, "per_class": spec.per_class},
    )


def subset(store: Dataset, window: DomainWindow, per_class: int, rng) -> Dataset:
    """Sample per_class examples per class, without replacement, from the
    examples whose metadata lies inside the window."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if not window.inside(store.snr_range_db, store.fo_range_frac):
        raise ValueError(
            f"window {window.label} is outside the store ranges "
            f"snr{store.snr_range_db} fo{store.fo_range_frac}"
        )
    snr = np.array([m.snr_db for m in store.metas])
    fo = np.array([m.fo_frac for m in store.metas])
    in_window = (
        (snr >= window.snr_db[0])
        & (snr <= window.snr_db[1])
        & (fo >= window.fo_frac[0])
        & (fo <= window.fo_frac[1])
    )
    chosen = []
    for ci, name in enumerate(store.class_names):
        candidates = np.nonzero((store.labels == ci) & in_window)[0]
        if len(candidates) < per_class:
            raise ShortfallError(
                f"class {name}: window {window.label} holds {len(candidates)} "
                f"examples, need {per_class}"
            )
        pick = rng.choice(candidates, size=per_class, replace=False)
        chosen.append(np.sort(pick))
    out = store.take(np.concatenate(chosen))
    out.snr_range_db = window.snr_db
    out.fo_range_frac = window.fo_frac
    out.extra["window"] = window.label
    return out


def split(handle: Dataset, train_per_class: int, val_per_class: int, test_per_class: int, rng):
    """Class-balanced, mutually disjoint train/val/test datasets."""
    need = train_per_class + val_per_class + test_per_class
    parts = ([], [], [])
    for ci, name in enumerate(handle.class_names):
        idx = handle.class_indices(ci)
        if len(idx) < need:
            raise ShortfallError(f"class {name}: have {len(idx)} examples, split needs {need}")
        perm = rng.permutation(idx)
        parts[0].append(perm[:train_per_class])
        parts[1].append(perm[train_per_class : train_per_class + val_per_class])
        parts[2].append(perm[train_per_class + val_per_class : need])
    out = []
    for block, role in zip(parts, ("train", "val", "test")):
        ds = handle.take(np.sort(np.concatenate(block)))
        ds.extra["role"] = role
        out.append(ds)
    return tuple(out)
