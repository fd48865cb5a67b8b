"""Secure transmit beamforming and artificial-noise design for MISO SWIPT."""

from .channel import (
    BeamformerSolution,
    ChannelSet,
    Kind,
    SystemParams,
    UncertaintyModel,
    generate_channels,
    harvested_energy,
    sample_uncertainty_ball,
    secrecy_rate,
)
from .conic import ConicProgram, SolveReport, SolverOptions, Status, embed_hermitian, solve

__version__ = "0.1.0"
