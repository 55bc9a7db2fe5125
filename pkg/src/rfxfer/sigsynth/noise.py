"""The noise class, the impairment chain, and the SNR estimator."""

from __future__ import annotations

import numpy as np

from .frame import IQFrame


def synth_awgn_class(n_samples: int, rng: np.random.Generator) -> IQFrame:
    """Circular complex Gaussian samples with unit mean power."""
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got {n_samples}")
    iq = rng.standard_normal((2, int(n_samples))) / np.sqrt(2.0)
    return IQFrame(iq)


def apply_fo(frame: IQFrame, fo_frac: float, phase0: float = 0.0) -> IQFrame:
    """Rotate sample t by e^{j(2 pi fo_frac t + phase0)}; preserves magnitude."""
    if not np.isfinite(fo_frac) or abs(fo_frac) >= 0.5:
        raise ValueError(f"fo_frac must satisfy |fo_frac| < 0.5, got {fo_frac}")
    z = frame.to_complex()
    t = np.arange(frame.n)
    rotated = z * np.exp(1j * (2.0 * np.pi * fo_frac * t + phase0))
    return IQFrame(np.vstack([rotated.real, rotated.imag]))


def apply_awgn(frame: IQFrame, snr_db: float, rng: np.random.Generator) -> IQFrame:
    """Add circular complex Gaussian noise at the requested SNR.

    The per-sample noise variance is the measured mean input power divided
    by 10^(snr_db / 10).
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    p_signal = frame.power()
    if p_signal == 0.0:
        raise ValueError("cannot set an SNR on a zero-power frame")
    p_noise = p_signal / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal((2, frame.n)) * np.sqrt(p_noise / 2.0)
    return IQFrame(frame.samples + noise)


def measure_snr(clean: IQFrame, noisy: IQFrame) -> float:
    """SNR in dB of noisy relative to clean: 10 log10(P_clean / P_diff).

    Returns float('inf') when the frames are identical (zero noise).
    """
    if clean.n != noisy.n:
        raise ValueError(f"length mismatch: {clean.n} vs {noisy.n}")
    diff = noisy.samples - clean.samples
    p_noise = np.sum(diff**2)
    if p_noise == 0.0:
        return float("inf")
    p_signal = np.sum(clean.samples**2)
    return float(10.0 * np.log10(p_signal / p_noise))
