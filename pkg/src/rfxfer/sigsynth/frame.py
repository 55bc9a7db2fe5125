"""Containers for complex-baseband observations and their impairments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IQFrame:
    """A complex-baseband frame stored as a 2xN real matrix.

    Row 0 holds the in-phase samples, row 1 the quadrature samples. Values
    are unitless amplitudes; N is the sample count.
    """

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != 2 or arr.shape[1] < 1:
            raise ValueError(f"samples must be 2xN with N >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def to_complex(self) -> np.ndarray:
        """Return the frame as a 1-D complex vector I + jQ."""
        return self.samples[0] + 1j * self.samples[1]

    @classmethod
    def from_complex(cls, z) -> "IQFrame":
        z = np.asarray(z, dtype=np.complex128)
        if z.ndim != 1:
            raise ValueError("expected a 1-D complex vector")
        return cls(np.vstack([z.real, z.imag]))

    def power(self) -> float:
        """Mean squared magnitude over the frame."""
        return float(np.mean(self.samples[0] ** 2 + self.samples[1] ** 2))


@dataclass(frozen=True)
class ImpairmentSpec:
    """Impairments applied after clean synthesis.

    fo_frac is the frequency offset as a fraction of the sample rate and is
    held constant across a frame. phase0 is the initial phase in radians.
    """

    snr_db: float
    fo_frac: float = 0.0
    phase0: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not -0.5 <= self.fo_frac < 0.5:
            raise ValueError(f"fo_frac must lie in [-0.5, 0.5), got {self.fo_frac}")
        if not np.isfinite(self.phase0):
            raise ValueError("phase0 must be finite")
