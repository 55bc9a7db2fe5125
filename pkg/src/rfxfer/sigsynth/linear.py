"""Linearly modulated classes: PSK, offset QPSK, square/cross QAM, ring APSK."""

from __future__ import annotations

import numpy as np

from .frame import IQFrame
from .pulse import rrc_taps
from .registry import Family, ModClass, full_params


def _psk(order, phase0=0.0):
    k = np.arange(order)
    return np.exp(1j * (phase0 + 2.0 * np.pi * k / order))


def _square_qam(side):
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    pts = (re + 1j * im).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def _cross_qam32():
    levels = np.arange(-5, 6, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    pts = (re + 1j * im).ravel()
    pts = pts[np.abs(pts) ** 2 < 50.0]  # drop the four 6x6 corners
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def _apsk(ring_sizes, ring_ratios, ring_phases):
    radii = np.concatenate([[1.0], ring_ratios])
    pts = []
    for size, radius, phase in zip(ring_sizes, radii, ring_phases):
        k = np.arange(size)
        pts.append(radius * np.exp(1j * (phase + 2.0 * np.pi * k / size)))
    pts = np.concatenate(pts)
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def constellation(name: str) -> np.ndarray:
    """Complex constellation points with unit average symbol energy."""
    if name == "BPSK":
        return _psk(2)
    if name in ("QPSK", "OQPSK"):
        return _psk(4, phase0=np.pi / 4)  # {+-1 +-1j} / sqrt(2)
    if name == "PSK8":
        return _psk(8)
    if name == "PSK16":
        return _psk(16)
    if name == "QAM16":
        return _square_qam(4)
    if name == "QAM32":
        return _cross_qam32()
    if name == "QAM64":
        return _square_qam(8)
    if name == "APSK16":
        # 4+12 two-ring layout, DVB-S2-style radius ratio
        return _apsk((4, 12), (2.7,), (np.pi / 4, np.pi / 12))
    if name == "APSK32":
        # 4+12+16 three-ring layout
        return _apsk((4, 12, 16), (2.64, 4.64), (np.pi / 4, np.pi / 12, 0.0))
    raise ValueError(f"no constellation defined for {name!r}")


def synth_linear(mod: ModClass, n_symbols: int, sps: int, rng: np.random.Generator) -> IQFrame:
    """Synthesize a clean linearly modulated frame of n_symbols * sps samples.

    Symbols are drawn uniformly, upsampled by sps, and RRC-filtered. The
    pulse is scaled so the symbol ensemble has unit mean power, and the
    filter transient is removed by synthesizing warm-up symbols on both
    sides and cropping the steady-state span. OQPSK delays the quadrature
    rail by half a symbol (sps // 2 samples).
    """
    if mod.family is not Family.LINEAR:
        raise ValueError(f"{mod.name} is not a linear class")
    if int(n_symbols) != n_symbols or n_symbols < 1:
        raise ValueError(f"n_symbols must be a positive integer, got {n_symbols}")
    n_symbols = int(n_symbols)

    params = full_params(mod)
    const = constellation(mod.name)
    if len(const) != params["order"]:
        raise ValueError(f"unsupported symbol order {params['order']} for {mod.name}")
    overlap = int(params["symbol_overlap"])

    taps = rrc_taps(params["excess_bandwidth"], overlap, sps)
    taps = taps * np.sqrt(sps / np.sum(taps**2))  # unit mean output power

    n_total = n_symbols + 2 * overlap
    symbols = const[rng.integers(0, len(const), n_total)]
    upsampled = np.zeros(n_total * sps, dtype=np.complex128)
    upsampled[::sps] = symbols
    shaped = np.convolve(upsampled, taps)

    start = 2 * overlap * sps
    n_out = n_symbols * sps
    i_rail = shaped.real[start : start + n_out]
    if mod.name == "OQPSK":
        delay = sps // 2
        q_rail = shaped.imag[start - delay : start - delay + n_out]
    else:
        q_rail = shaped.imag[start : start + n_out]
    return IQFrame(np.vstack([i_rail, q_rail]))
