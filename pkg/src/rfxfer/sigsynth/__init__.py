"""Complex-baseband signal synthesis and the impairment chain.

Covers four signal families (linearly modulated, continuous-phase FSK,
analog, and pure noise), plus frequency-offset and AWGN impairments with a
measurable SNR contract.
"""

from .frame import IQFrame, ImpairmentSpec
from .registry import CLASS_NAMES, Family, ModClass, class_def, draw_params, make_modclass
from .pulse import rrc_taps
from .linear import constellation, synth_linear
from .fsk import synth_fsk
from .analog import synth_analog
from .noise import apply_awgn, apply_fo, measure_snr, synth_awgn_class

__all__ = [
    "IQFrame",
    "ImpairmentSpec",
    "ModClass",
    "Family",
    "CLASS_NAMES",
    "class_def",
    "draw_params",
    "make_modclass",
    "rrc_taps",
    "constellation",
    "synth_linear",
    "synth_fsk",
    "synth_analog",
    "synth_awgn_class",
    "apply_fo",
    "apply_awgn",
    "measure_snr",
]
