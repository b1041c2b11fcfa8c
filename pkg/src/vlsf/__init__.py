"""Optimal decoding times for variable-length stop-feedback codes on the BI-AWGN channel."""

from .channel import ChannelModel, build_channel, info_density, normalized_cumulants
from .montecarlo import McEstimate, mc_stopping, mc_tail, mc_tail_curve
from .scheduler import (ProgramSpec, Schedule, exhaustive, feasible, greedy, objective, rate_curve, sdo_gap,
                        sdo_nogap, vlf_bound)
from .tail import TailModel

__all__ = [
    "ChannelModel", "build_channel", "info_density", "normalized_cumulants",
    "McEstimate", "mc_stopping", "mc_tail", "mc_tail_curve",
    "ProgramSpec", "Schedule", "exhaustive", "feasible", "greedy", "objective", "rate_curve",
    "sdo_gap", "sdo_nogap", "vlf_bound", "TailModel",
]

__version__ = "0.1.0"
