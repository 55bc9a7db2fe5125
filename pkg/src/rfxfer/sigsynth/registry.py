"""The 23-class signal catalog and per-class parameter spaces.

Each class definition carries the parameters implied by its name (fixed) and
the parameters drawn fresh for every example (sampled). Carrier spacings are
expressed as fractions of the master sample rate (1 MHz), so 5 kHz becomes
0.005. MSK and GMSK use modulation index 0.5, which pins their deviation to
a quarter of the symbol rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MASTER_SAMPLE_RATE_HZ = 1_000_000.0


class Family(Enum):
    LINEAR = "LINEAR"
    FSK = "FSK"
    ANALOG = "ANALOG"
    NOISE = "NOISE"


# Sampler specs: ("choice", options), ("uniform", lo, hi), ("int_choice", options)
@dataclass(frozen=True)
class ClassDef:
    name: str
    family: Family
    fixed: dict
    sampled: dict


def _linear(name, order):
    return ClassDef(
        name,
        Family.LINEAR,
        fixed={"order": order},
        sampled={
            "excess_bandwidth": ("choice", (0.35, 0.5)),
            "symbol_overlap": ("int_choice", (3, 4, 5)),
        },
    )


def _fsk_rect(name, spacing_hz=None, mod_index=None):
    fixed = {"phase_shape": "rect", "symbol_overlap": 1}
    if spacing_hz is not None:
        fixed["spacing_frac"] = spacing_hz / MASTER_SAMPLE_RATE_HZ
    if mod_index is not None:
        fixed["mod_index"] = mod_index
    return ClassDef(name, Family.FSK, fixed=fixed, sampled={})


def _fsk_gauss(name, spacing_hz=None, mod_index=None):
    fixed = {"phase_shape": "gaussian"}
    if spacing_hz is not None:
        fixed["spacing_frac"] = spacing_hz / MASTER_SAMPLE_RATE_HZ
    if mod_index is not None:
        fixed["mod_index"] = mod_index
    return ClassDef(
        name,
        Family.FSK,
        fixed=fixed,
        sampled={
            "beta": ("uniform", 0.3, 0.5),
            "symbol_overlap": ("int_choice", (2, 3, 4)),
        },
    )


def _analog(name, kind, index_lo, index_hi):
    return ClassDef(
        name,
        Family.ANALOG,
        fixed={"kind": kind},
        sampled={"mod_index": ("uniform", index_lo, index_hi)},
    )


_DEFS = [
    _linear("BPSK", 2),
    _linear("QPSK", 4),
    _linear("PSK8", 8),
    _linear("PSK16", 16),
    _linear("OQPSK", 4),
    _linear("QAM16", 16),
    _linear("QAM32", 32),
    _linear("QAM64", 64),
    _linear("APSK16", 16),
    _linear("APSK32", 32),
    _fsk_rect("FSK5k", spacing_hz=5e3),
    _fsk_rect("FSK75k", spacing_hz=75e3),
    _fsk_gauss("GFSK5k", spacing_hz=5e3),
    _fsk_gauss("GFSK75k", spacing_hz=75e3),
    _fsk_rect("MSK", mod_index=0.5),
    _fsk_gauss("GMSK", mod_index=0.5),
    _analog("FM-NB", "fm", 0.05, 0.4),
    _analog("FM-WB", "fm", 0.825, 1.88),
    _analog("AM-DSB", "am_dsb", 0.5, 0.9),
    _analog("AM-DSBSC", "am_dsbsc", 0.5, 0.9),
    _analog("AM-LSB", "am_lsb", 0.5, 0.9),
    _analog("AM-USB", "am_usb", 0.5, 0.9),
    ClassDef("AWGN", Family.NOISE, fixed={}, sampled={}),
]

_CATALOG = {d.name: d for d in _DEFS}
CLASS_NAMES = tuple(d.name for d in _DEFS)


def class_def(name: str) -> ClassDef:
    try:
        return _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown signal class {name!r}") from None


@dataclass(frozen=True)
class ModClass:
    """A signal class name plus one concrete parameter draw."""

    family: Family
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        d = class_def(self.name)
        if d.family is not self.family:
            raise ValueError(f"{self.name} belongs to family {d.family.value}, not {self.family.value}")
        _validate_params(d, self.params)


def _validate_params(d: ClassDef, params: dict):
    for key, val in d.fixed.items():
        if key in params and params[key] != val:
            raise ValueError(f"{d.name}: parameter {key} is fixed to {val}, got {params[key]}")
    for key, spec in d.sampled.items():
        if key not in params:
            raise ValueError(f"{d.name}: missing parameter {key}")
        val = params[key]
        if not np.all(np.isfinite(val)):
            raise ValueError(f"{d.name}: parameter {key} is not finite")
        kind = spec[0]
        if kind == "choice" or kind == "int_choice":
            if val not in spec[1]:
                raise ValueError(f"{d.name}: {key}={val} not in {spec[1]}")
        elif kind == "uniform":
            lo, hi = spec[1], spec[2]
            if not lo <= val <= hi:
                raise ValueError(f"{d.name}: {key}={val} outside [{lo}, {hi}]")
    extra = set(params) - set(d.sampled) - set(d.fixed)
    if extra:
        raise ValueError(f"{d.name}: unexpected parameters {sorted(extra)}")


def draw_params(name: str, rng: np.random.Generator) -> dict:
    """Draw one legal parameter set for the class, uniformly over its space."""
    d = class_def(name)
    params = {}
    for key, spec in d.sampled.items():
        kind = spec[0]
        if kind == "choice":
            params[key] = float(spec[1][rng.integers(0, len(spec[1]))])
        elif kind == "int_choice":
            params[key] = int(spec[1][rng.integers(0, len(spec[1]))])
        elif kind == "uniform":
            params[key] = float(rng.uniform(spec[1], spec[2]))
        else:  # pragma: no cover - catalog is static
            raise ValueError(f"unknown sampler kind {kind}")
    return params


def make_modclass(name: str, params: dict | None = None) -> ModClass:
    """Build a validated ModClass; params default to the class's fixed values only.

    Classes with sampled parameters require them to be supplied (use
    draw_params for a random legal draw).
    """
    d = class_def(name)
    return ModClass(family=d.family, name=name, params=dict(params or {}))


def full_params(mod: ModClass) -> dict:
    """Merge the class's fixed parameters with the instance draw."""
    d = class_def(mod.name)
    merged = dict(d.fixed)
    merged.update(mod.params)
    return merged
