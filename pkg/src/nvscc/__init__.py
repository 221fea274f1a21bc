"""Simulation toolkit for electrode-assisted spin-to-charge conversion of NV centres."""

from .rate_model import NvRates, PulseSegment, PulseSequence, build_generator, contrast, evolve, run_sequence
from .protocol import ProtocolSpec, optimize_contrast, sensitivity_improvement

__version__ = "0.1.0"

__all__ = [
    "NvRates",
    "PulseSegment",
    "PulseSequence",
    "ProtocolSpec",
    "build_generator",
    "contrast",
    "evolve",
    "optimize_contrast",
    "run_sequence",
    "sensitivity_improvement",
]
