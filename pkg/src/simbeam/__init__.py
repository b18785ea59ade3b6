"""
Multiuser downlink beamforming through a stacked intelligent metasurface.

The stack of programmable transmissive layers performs the precoding in the
wave domain; this package models the diffraction cascade and the correlated
user channels, and jointly optimizes per-user power and discrete meta-atom
phases for sum rate.
"""

from .channel import (ChannelModelError, ChannelSet, Environment, channel_statistics, correlation_matrix,
                      path_losses, sample_channel_set)
from .geometry import LayoutError, SimLayout, SimLayoutConfig, build_transmission_matrices, diffraction_coefficient
from .optimizer import (AoOptions, SolveReport, alternating_optimize, average_power_baseline,
                        quantized_continuous_baseline, zero_forcing, zf_baseline)
from .phaseopt import (GaOptions, codebook_search, exhaustive_search, projected_gradient_ascent,
                       successive_refinement, sum_rate_gradient)
from .powerctl import DegenerateProblemError, IwfOptions, iterative_waterfilling, waterfill
from .wavefield import PhaseConfig, cascade, gain_matrix, rate_norm_bound, sinr_and_rate, sum_rate

__version__ = "0.1.0"
