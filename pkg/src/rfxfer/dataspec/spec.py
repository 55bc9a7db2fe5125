"""Declarative descriptions of datasets, domain windows, and example metadata."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sigsynth.registry import class_def

DEFAULT_SNR_RANGE_DB = (-10.0, 20.0)
DEFAULT_FO_RANGE_FRAC = (-0.10, 0.10)
DEFAULT_FRAME_LEN = 128


@dataclass(frozen=True)
class MasterSpec:
    """Everything needed to build a master dataset deterministically."""

    classes: tuple
    per_class: int
    frame_len: int = DEFAULT_FRAME_LEN
    snr_range_db: tuple = DEFAULT_SNR_RANGE_DB
    fo_range_frac: tuple = DEFAULT_FO_RANGE_FRAC
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "snr_range_db", tuple(float(v) for v in self.snr_range_db))
        object.__setattr__(self, "fo_range_frac", tuple(float(v) for v in self.fo_range_frac))
        if not self.classes:
            raise ValueError("classes must be non-empty")
        for name in self.classes:
            class_def(name)  # raises on unknown names
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        if self.frame_len < 1:
            raise ValueError("frame_len must be >= 1")
        for lo, hi in (self.snr_range_db, self.fo_range_frac):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"range must satisfy lo < hi, got [{lo}, {hi}]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "per_class": self.per_class,
            "frame_len": self.frame_len,
            "snr_range_db": list(self.snr_range_db),
            "fo_range_frac": list(self.fo_range_frac),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MasterSpec":
        return cls(
            classes=tuple(d["classes"]),
            per_class=int(d["per_class"]),
            frame_len=int(d.get("frame_len", DEFAULT_FRAME_LEN)),
            snr_range_db=tuple(d.get("snr_range_db", DEFAULT_SNR_RANGE_DB)),
            fo_range_frac=tuple(d.get("fo_range_frac", DEFAULT_FO_RANGE_FRAC)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class DomainWindow:
    """A rectangle in (SNR, FO) space with a human-readable label."""

    snr_db: tuple
    fo_frac: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))
        object.__setattr__(self, "fo_frac", tuple(float(v) for v in self.fo_frac))
        for lo, hi in (self.snr_db, self.fo_frac):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"window bounds must satisfy lo <= hi, got [{lo}, {hi}]")
        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    def default_label(self) -> str:
        s, f = self.snr_db, self.fo_frac
        return f"snr[{s[0]:g},{s[1]:g}]fo[{f[0]:g},{f[1]:g}]"

    def contains(self, snr_db: float, fo_frac: float) -> bool:
        return (
            self.snr_db[0] <= snr_db <= self.snr_db[1]
            and self.fo_frac[0] <= fo_frac <= self.fo_frac[1]
        )

    def inside(self, snr_range: tuple, fo_range: tuple) -> bool:
        return (
            snr_range[0] <= self.snr_db[0]
            and self.snr_db[1] <= snr_range[1]
            and fo_range[0] <= self.fo_frac[0]
            and self.fo_frac[1] <= fo_range[1]
        )

    @classmethod
    def from_config(cls, d: dict) -> "DomainWindow":
        """Build from a config mapping with snr_lo/snr_hi/fo_lo/fo_hi fields."""
        return cls(
            snr_db=(d["snr_lo"], d["snr_hi"]),
            fo_frac=(d["fo_lo"], d["fo_hi"]),
            label=d.get("label", ""),
        )


@dataclass(frozen=True)
class ExampleMeta:
    """Per-example metadata carried through persistence."""

    class_name: str
    snr_db: float
    fo_frac: float
    sps: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_annotation(self, sample_start: int, sample_count: int) -> dict:
        return {
            "core:sample_start": sample_start,
            "core:sample_count": sample_count,
            "rfxfer:class": self.class_name,
            "rfxfer:snr_db": self.snr_db,
            "rfxfer:fo_frac": self.fo_frac,
            "rfxfer:sps": self.sps,
            "rfxfer:params": self.params,
            "rfxfer:seed": self.seed,
        }

    @classmethod
    def from_annotation(cls, ann: dict) -> "ExampleMeta":
        return cls(
            class_name=ann.get("rfxfer:class", "unknown"),
            snr_db=float(ann.get("rfxfer:snr_db", np.nan)),
            fo_frac=float(ann.get("rfxfer:fo_frac", np.nan)),
            sps=int(ann.get("rfxfer:sps", 0)),
            params=dict(ann.get("rfxfer:params", {})),
            seed=int(ann.get("rfxfer:seed", 0)),
        )
