"""Continuous-phase frequency-shift keying: FSK, GFSK, MSK, GMSK."""

from __future__ import annotations

import numpy as np

from .frame import IQFrame
from .pulse import gaussian_kernel
from .registry import Family, ModClass, full_params


def _deviation_frac(params: dict, sps: int) -> float:
    # Spacing-parametrized classes place their tones at +-spacing_frac of the
    # sample rate; index-parametrized classes (MSK/GMSK, h = 0.5) at
    # +-h / (2 * sps), giving a phase step of pi * h per symbol.
    if "spacing_frac" in params:
        return float(params["spacing_frac"])
    return float(params["mod_index"]) / (2.0 * sps)


def synth_fsk(mod: ModClass, n_symbols: int, sps: int, rng: np.random.Generator) -> IQFrame:
    """Synthesize a clean binary CPFSK frame of n_symbols * sps samples.

    Random +-1 symbols drive a frequency pulse (rectangular, or Gaussian
    truncated at the symbol overlap), the instantaneous frequency is
    integrated into phase, and the output e^{j phase} has unit envelope by
    construction.
    """
    if mod.family is not Family.FSK:
        raise ValueError(f"{mod.name} is not an FSK class")
    if int(n_symbols) != n_symbols or n_symbols < 1:
        raise ValueError(f"n_symbols must be a positive integer, got {n_symbols}")
    if int(sps) != sps or sps < 2:
        raise ValueError(f"sps must be an integer >= 2, got {sps}")
    n_symbols, sps = int(n_symbols), int(sps)

    params = full_params(mod)
    overlap = int(params["symbol_overlap"])
    if overlap < 1:
        raise ValueError(f"symbol_overlap must be >= 1, got {overlap}")
    deviation = _deviation_frac(params, sps)

    warmup = overlap
    n_total = n_symbols + 2 * warmup
    symbols = 2.0 * rng.integers(0, 2, n_total) - 1.0
    nrz = np.repeat(symbols, sps)

    if params["phase_shape"] == "rect":
        freq = nrz
        start = warmup * sps
    elif params["phase_shape"] == "gaussian":
        kernel = gaussian_kernel(params["beta"], overlap, sps)
        freq = np.convolve(nrz, kernel)
        start = warmup * sps + overlap * sps  # kernel group delay
    else:
        raise ValueError(f"unknown phase shape {params['phase_shape']!r}")

    freq = freq[start : start + n_symbols * sps]
    phase = 2.0 * np.pi * deviation * np.cumsum(freq)
    return IQFrame(np.vstack([np.cos(phase), np.sin(phase)]))
