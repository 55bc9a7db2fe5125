"""Analog classes: narrow/wideband FM and the AM family (DSB, DSBSC, SSB)."""

from __future__ import annotations

import numpy as np
from scipy.signal import firwin, hilbert

from .frame import IQFrame
from .registry import Family, ModClass, full_params

_MESSAGE_CUTOFF = 0.1  # fraction of the sample rate
_MESSAGE_TAPS = 129


def _default_message(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """White Gaussian noise low-pass filtered to 10% of the sample rate,
    rescaled to unit variance over the frame."""
    taps = firwin(_MESSAGE_TAPS, _MESSAGE_CUTOFF, fs=1.0)
    white = rng.standard_normal(n_samples + _MESSAGE_TAPS - 1)
    m = np.convolve(white, taps, mode="valid")
    std = np.std(m)
    if std == 0.0:  # pragma: no cover - measure zero for Gaussian draws
        raise ValueError("degenerate message realization")
    return m / std


def synth_analog(
    mod: ModClass,
    n_samples: int,
    rng: np.random.Generator,
    message: np.ndarray | None = None,
) -> IQFrame:
    """Synthesize a clean analog frame of n_samples samples.

    The default message is unit-variance low-pass Gaussian noise; tests may
    inject an explicit real-valued message of length n_samples. The output
    is normalized to unit mean power.

    Modulation laws (mu = modulation index, m = message):
      FM: e^{j mu cumsum(m)}; AM-DSB: 1 + mu m; AM-DSBSC: mu m;
      AM-LSB/USB: single sideband of mu m via the analytic signal.
    """
    if mod.family is not Family.ANALOG:
        raise ValueError(f"{mod.name} is not an analog class")
    if int(n_samples) != n_samples or n_samples < 2:
        raise ValueError(f"n_samples must be an integer >= 2, got {n_samples}")
    n_samples = int(n_samples)

    params = full_params(mod)
    mu = float(params["mod_index"])
    kind = params["kind"]

    if message is None:
        m = _default_message(n_samples, rng)
    else:
        m = np.asarray(message, dtype=np.float64)
        if m.shape != (n_samples,):
            raise ValueError(f"message must have shape ({n_samples},), got {m.shape}")

    if kind == "fm":
        s = np.exp(1j * mu * np.cumsum(m))
    elif kind == "am_dsb":
        s = (1.0 + mu * m).astype(np.complex128)
    elif kind == "am_dsbsc":
        s = (mu * m).astype(np.complex128)
    elif kind in ("am_usb", "am_lsb"):
        analytic = hilbert(mu * m)  # keeps positive frequencies
        s = analytic if kind == "am_usb" else np.conj(analytic)
    else:
        raise ValueError(f"unknown analog kind {kind!r}")

    power = np.mean(np.abs(s) ** 2)
    if power == 0.0:
        raise ValueError("zero-power analog frame cannot be normalized")
    s = s / np.sqrt(power)
    return IQFrame(np.vstack([s.real, s.imag]))
