"""SigMF-compatible persistence.

A dataset directory holds one recording pair per class:
`<class>.sigmf-meta` (JSON) and `<class>.sigmf-data` (interleaved I/Q,
32-bit little-endian floats). Single foreign recordings with cf32_le data
import as unlabeled-domain datasets.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .spec import ExampleMeta

_DATATYPE = "cf32_le"
_SAMPLE_RATE = 1_000_000.0


def write_sigmf(handle: Dataset, path) -> Path:
    """Write one recording pair per class under the given directory."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    n = handle.frame_len
    for ci, name in enumerate(handle.class_names):
        idx = handle.class_indices(ci)
        frames = handle.frames[idx]
        z = (frames[:, 0, :] + 1j * frames[:, 1, :]).astype(np.complex64).reshape(-1)
        z.tofile(root / f"{name}.sigmf-data")

        annotations = [
            handle.metas[i].to_annotation(sample_start=row * n, sample_count=n)
            for row, i in enumerate(idx)
        ]
        meta = {
            "global": {
                "core:datatype": _DATATYPE,
                "core:version": "1.0.0",
                "core:sample_rate": _SAMPLE_RATE,
                "rfxfer:frame_len": n,
                "rfxfer:class_names": list(handle.class_names),
                "rfxfer:snr_range_db": list(handle.snr_range_db),
                "rfxfer:fo_range_frac": list(handle.fo_range_frac),
            },
            "captures": [{"core:sample_start": 0}],
            "annotations": annotations,
        }
        with open(root / f"{name}.sigmf-meta", "w") as fp:
            json.dump(meta, fp, sort_keys=True, indent=1)
            fp.write("\n")
    return root


def _load_recording(meta_path: Path):
    """Read one recording pair, returning (global dict, frames, metas)."""
    with open(meta_path) as fp:
        try:
            meta = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{meta_path.name}: malformed JSON ({exc})") from exc
    glob = meta.get("global", {})
    datatype = glob.get("core:datatype")
    if datatype != _DATATYPE:
        raise ValueError(f"{meta_path.name}: unsupported datatype {datatype!r}")

    data_path = meta_path.with_suffix(".sigmf-data")
    if not data_path.exists():
        raise FileNotFoundError(f"missing data file for {meta_path.name}")
    raw = np.fromfile(data_path, dtype=np.complex64)

    annotations = meta.get("annotations", [])
    frames, metas = [], []
    if annotations:
        needed = max(a["core:sample_start"] + a["core:sample_count"] for a in annotations)
        if needed > len(raw):
            raise ValueError(
                f"{data_path.name}: annotations need {needed} samples, file holds {len(raw)}"
            )
        for ann in annotations:
            start, count = ann["core:sample_start"], ann["core:sample_count"]
            z = raw[start : start + count]
            frames.append(np.stack([z.real, z.imag]))
            metas.append(ExampleMeta.from_annotation(ann))
    return glob, frames, metas


def read_sigmf(path, frame_len: int | None = None) -> Dataset:
    """Read a dataset directory, or a single recording (foreign import).

    For a single recording without annotations, frame_len chunks the stream
    into unlabeled frames.
    """
    path = Path(path)
    if path.is_dir():
        return _read_directory(path)
    meta_path = path if path.suffix == ".sigmf-meta" else path.with_suffix(".sigmf-meta")
    if not meta_path.exists():
        raise FileNotFoundError(f"no such recording: {path}")
    return _read_single(meta_path, frame_len)


def _read_directory(root: Path) -> Dataset:
    meta_files = sorted(root.glob("*.sigmf-meta"))
    if not meta_files:
        raise FileNotFoundError(f"no .sigmf-meta files under {root}")
    first_glob, _, _ = _load_recording(meta_files[0])
    class_names = first_glob.get("rfxfer:class_names")
    if class_names is None:
        class_names = [p.name[: -len(".sigmf-meta")] for p in meta_files]

    frames, labels, metas = [], [], []
    glob = first_glob
    for ci, name in enumerate(class_names):
        meta_path = root / f"{name}.sigmf-meta"
        if not meta_path.exists():
            raise FileNotFoundError(f"missing recording for class {name}")
        glob, cls_frames, cls_metas = _load_recording(meta_path)
        frames.extend(cls_frames)
        labels.extend([ci] * len(cls_frames))
        metas.extend(cls_metas)
    if not frames:
        raise ValueError(f"dataset under {root} holds no examples")
    return Dataset(
        frames=np.asarray(np.stack(frames), dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        metas=metas,
        class_names=tuple(class_names),
        snr_range_db=tuple(glob.get("rfxfer:snr_range_db", (-np.inf, np.inf))),
        fo_range_frac=tuple(glob.get("rfxfer:fo_range_frac", (-np.inf, np.inf))),
    )


def _read_single(meta_path: Path, frame_len: int | None) -> Dataset:
    glob, frames, metas = _load_recording(meta_path)
    if not frames:
        if frame_len is None:
            raise ValueError(
                f"{meta_path.name} has no annotations; pass frame_len to chunk the stream"
            )
        raw = np.fromfile(meta_path.with_suffix(".sigmf-data"), dtype=np.complex64)
        n_frames = len(raw) // frame_len
        if n_frames == 0:
            raise ValueError(f"{meta_path.name}: stream shorter than one frame")
        chunked = raw[: n_frames * frame_len].reshape(n_frames, frame_len)
        frames = [np.stack([z.real, z.imag]) for z in chunked]
        metas = [
            ExampleMeta(class_name="unknown", snr_db=np.nan, fo_frac=np.nan, sps=0)
            for _ in range(n_frames)
        ]
    class_names = sorted({m.class_name for m in metas})
    name_to_idx = {name: i for i, name in enumerate(class_names)}
    labels = [name_to_idx[m.class_name] for m in metas]
    return Dataset(
        frames=np.asarray(np.stack(frames), dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        metas=metas,
        class_names=tuple(class_names),
        snr_range_db=tuple(glob.get("rfxfer:snr_range_db", (-np.inf, np.inf))),
        fo_range_frac=tuple(glob.get("rfxfer:fo_range_frac", (-np.inf, np.inf))),
    )
