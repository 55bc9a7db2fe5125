"""Pulse-shaping filters: root-raised-cosine taps and Gaussian phase kernels."""

from __future__ import annotations

import numpy as np


def rrc_taps(excess_bandwidth: float, symbol_overlap: int, sps: int) -> np.ndarray:
    """Root-raised-cosine taps, peak-normalized to 1 at the center index.

    Args:
        excess_bandwidth: roll-off factor beta in (0, 1].
        symbol_overlap: filter half-length in symbols (>= 1).
        sps: samples per symbol (>= 2).

    Returns:
        2 * symbol_overlap * sps + 1 taps, even-symmetric about the center.
    """
    beta = float(excess_bandwidth)
    if not np.isfinite(beta) or not 0.0 < beta <= 1.0:
        raise ValueError(f"excess_bandwidth must be in (0, 1], got {excess_bandwidth}")
    if int(symbol_overlap) != symbol_overlap or symbol_overlap < 1:
        raise ValueError(f"symbol_overlap must be an integer >= 1, got {symbol_overlap}")
    if int(sps) != sps or sps < 2:
        raise ValueError(f"sps must be an integer >= 2, got {sps}")
    symbol_overlap = int(symbol_overlap)
    sps = int(sps)

    n = 2 * symbol_overlap * sps + 1
    # time in symbol units, symmetric about 0
    t = (np.arange(n) - (n - 1) / 2) / sps
    taps = np.empty(n)

    # analytic limits at the two singular points of the closed form
    center = 1.0 - beta + 4.0 * beta / np.pi
    edge = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
    )

    at_zero = np.isclose(t, 0.0, atol=1e-12)
    at_edge = np.isclose(np.abs(t), 1.0 / (4.0 * beta), atol=1e-9)
    regular = ~(at_zero | at_edge)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    den = np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2)
    taps[regular] = num / den
    taps[at_zero] = center
    taps[at_edge] = edge

    return taps / center


def gaussian_kernel(beta: float, symbol_overlap: int, sps: int) -> np.ndarray:
    """Gaussian phase-shaping kernel truncated at +-symbol_overlap symbols.

    beta is the bandwidth-time product. The kernel sums to 1 so convolving it
    with a rectangular NRZ stream preserves the per-symbol phase increment.
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if int(symbol_overlap) != symbol_overlap or symbol_overlap < 1:
        raise ValueError(f"symbol_overlap must be an integer >= 1, got {symbol_overlap}")
    symbol_overlap = int(symbol_overlap)
    sps = int(sps)

    n = 2 * symbol_overlap * sps + 1
    t = (np.arange(n) - (n - 1) / 2) / sps
    k = np.sqrt(2.0 * np.pi / np.log(2.0)) * beta * np.exp(
        -2.0 * np.pi**2 * beta**2 * t**2 / np.log(2.0)
    )
    return k / np.sum(k)
