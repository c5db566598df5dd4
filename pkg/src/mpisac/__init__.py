"""Multipath-exploiting target detection for OFDM ISAC systems.

Delay-Doppler channel synthesis, weighted GLRT detection with Monte Carlo
threshold calibration, and joint transmit-power / detector-weight design via
alternating majorization-minimization.
"""

__version__ = "0.1.0"

from .channel import (PathChannel, ProjectorSet, build_projectors,
                      dense_projector, path_coeffs)
from .detector import (DelayDopplerScanner, DetectionReport, WeightVector,
                       calibrate_threshold, delay_doppler_map, estimate_pd,
                       glrt_statistic, glrt_statistic_mle_oracle)
from .errors import (ConfigError, DegenerateDenominator, DuplicateTap,
                     Infeasible, InsufficientTrials, MpisacError,
                     NonOrthogonalPaths, ZeroChannel, ZeroSignal)
from .optimizer import (JointSolution, QuadraticForm, build_quadratic,
                        joint_design, mm_power_step, objective, update_weights)
from .scene import (Geometry, OfdmGrid, Path, PathSet, SPEED_OF_LIGHT,
                    taps_from_geometry)
from .waveform import (EchoFrame, PowerAllocation, SymbolFrame,
                       comm_lower_bounds, draw_symbols, dump_frame,
                       load_frame, synthesize_echo, uniform_allocation)
